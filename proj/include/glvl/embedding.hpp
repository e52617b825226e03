#pragma once

#include <string>
#include <vector>

#include "glvl/image.hpp"

namespace glvl {

// Channel-major dense feature map, nonnegative values (required by the
// fractional-power pooling).
struct DenseFeatureMap {
    int channels = 0;
    int height = 0;  // cells
    int width = 0;   // cells
    std::vector<float> values;  // [c][y][x]

    float& at(int c, int y, int x) { return values[(size_t(c) * height + y) * width + x]; }
    float at(int c, int y, int x) const { return values[(size_t(c) * height + y) * width + x]; }
};

struct EmbeddingVector {
    std::vector<double> values;

    int dim() const { return int(values.size()); }
    double norm() const;
};

struct TripletExample {
    EmbeddingVector q;
    EmbeddingVector pos;
    EmbeddingVector neg;
};

enum class EmbeddingProvider { builtin, import_file };

struct EmbeddingConfig {
    EmbeddingProvider provider = EmbeddingProvider::builtin;
    double gem_p = 3.0;
    int cell = 16;             // builtin provider cell size, pixels
    int orientation_bins = 8;  // unsigned orientation bins per scale

    std::string fingerprint() const;
};

// Builtin provider: per cell, unsigned gradient-orientation histograms at
// two smoothing scales (sigma 1.0 and 2.0), concatenated. C = 2 * bins.
DenseFeatureMap dense_features(const Image& image, const EmbeddingConfig& config);

// Generalized-mean pooling per channel: ((1/n) sum v^p)^(1/p), p >= 1.
// p = 1 is the mean; p -> inf approaches the channel max.
EmbeddingVector gem_pool(const DenseFeatureMap& fmap, double p);

// Throws DegenerateError on the zero vector.
EmbeddingVector l2_normalize(const EmbeddingVector& v);

double euclidean_distance(const EmbeddingVector& a, const EmbeddingVector& b);

// max{d(q,pos) - d(q,neg) + delta, 0}
double triplet_loss(const TripletExample& t, double delta);

// Rank-1 f32 TBF, normalized on load.
EmbeddingVector import_embedding(const std::string& path);

// Full builtin chain: l2_normalize(gem_pool(dense_features(image))).
// Throws DegenerateError for structureless images (zero feature energy).
EmbeddingVector embed(const Image& image, const EmbeddingConfig& config);

}  // namespace glvl
