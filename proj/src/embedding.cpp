#include "glvl/embedding.hpp"

#include <algorithm>
#include <cmath>

#include "glvl/errors.hpp"
#include "glvl/tbf.hpp"

namespace glvl {

double EmbeddingVector::norm() const {
    double s = 0.0;
    for (double v : values) s += v * v;
    return std::sqrt(s);
}

std::string EmbeddingConfig::fingerprint() const {
    switch (provider) {
        case EmbeddingProvider::builtin: {
            char buf[96];
            std::snprintf(buf, sizeof(buf), "builtin;cell=%d;bins=%d;gem_p=%g", cell,
                          orientation_bins, gem_p);
            return buf;
        }
        case EmbeddingProvider::import_file:
            return "import";
    }
    throw ConfigError("unknown embedding provider");
}

namespace {

// Accumulates unsigned orientation histograms over cells for one
// smoothing scale, writing into channels [c0, c0+bins).
void accumulate_scale(const Image& img, float sigma, int cell, int bins, int c0,
                      DenseFeatureMap& fm) {
    Image smoothed = gaussian_blur(img, sigma);
    Image gx, gy;
    gradients(smoothed, gx, gy);
    for (int y = 0; y < img.height; ++y) {
        int cy = std::min(y / cell, fm.height - 1);
        for (int x = 0; x < img.width; ++x) {
            int cx = std::min(x / cell, fm.width - 1);
            float dx = gx.at(x, y), dy = gy.at(x, y);
            float mag = std::sqrt(dx * dx + dy * dy);
            if (mag <= 0.f) continue;
            // Unsigned orientation in [0, pi).
            float ang = std::atan2(dy, dx);
            if (ang < 0.f) ang += float(M_PI);
            if (ang >= float(M_PI)) ang -= float(M_PI);
            int bin = std::min(int(ang / float(M_PI) * bins), bins - 1);
            fm.at(c0 + bin, cy, cx) += mag;
        }
    }
}

}  // namespace

DenseFeatureMap dense_features(const Image& image, const EmbeddingConfig& config) {
    if (config.provider != EmbeddingProvider::builtin)
        throw ConfigError("dense_features requires the builtin provider");
    if (image.width < config.cell || image.height < config.cell)
        throw ConfigError("image smaller than one feature cell");
    DenseFeatureMap fm;
    fm.width = image.width / config.cell;
    fm.height = image.height / config.cell;
    fm.channels = 2 * config.orientation_bins;
    fm.values.assign(size_t(fm.channels) * fm.height * fm.width, 0.f);
    accumulate_scale(image, 1.0f, config.cell, config.orientation_bins, 0, fm);
    accumulate_scale(image, 2.0f, config.cell, config.orientation_bins, config.orientation_bins, fm);
    return fm;
}

EmbeddingVector gem_pool(const DenseFeatureMap& fmap, double p) {
    if (p < 1.0) throw ConfigError("gem exponent must be >= 1");
    size_t n = size_t(fmap.height) * fmap.width;
    if (n == 0) throw ShapeError("empty feature map");
    EmbeddingVector out;
    out.values.resize(size_t(fmap.channels));
    for (int c = 0; c < fmap.channels; ++c) {
        double acc = 0.0;
        for (int y = 0; y < fmap.height; ++y) {
            for (int x = 0; x < fmap.width; ++x) {
                double v = fmap.at(c, y, x);
                if (v < 0.0) throw DomainError("negative feature value in gem_pool");
                acc += std::pow(v, p);
            }
        }
        out.values[size_t(c)] = std::pow(acc / double(n), 1.0 / p);
    }
    return out;
}

EmbeddingVector l2_normalize(const EmbeddingVector& v) {
    double n = v.norm();
    if (n <= 0.0) throw DegenerateError("cannot normalize the zero embedding");
    EmbeddingVector out;
    out.values.resize(v.values.size());
    for (size_t i = 0; i < v.values.size(); ++i) out.values[i] = v.values[i] / n;
    return out;
}

double euclidean_distance(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dim() != b.dim()) throw ShapeError("embedding dimension mismatch");
    double s = 0.0;
    for (int i = 0; i < a.dim(); ++i) {
        double d = a.values[size_t(i)] - b.values[size_t(i)];
        s += d * d;
    }
    return std::sqrt(s);
}

double triplet_loss(const TripletExample& t, double delta) {
    if (delta < 0.0) throw ConfigError("triplet margin must be >= 0");
    if (t.q.dim() != t.pos.dim() || t.q.dim() != t.neg.dim())
        throw ShapeError("triplet members must share dimension");
    double dp = euclidean_distance(t.q, t.pos);
    double dn = euclidean_distance(t.q, t.neg);
    return std::max(dp - dn + delta, 0.0);
}

EmbeddingVector import_embedding(const std::string& path) {
    Tensor t = load_tbf(path);
    if (t.rank() != 1)
        throw FormatError("embedding file must be rank-1, got rank " + std::to_string(t.rank()) +
                          ": " + path);
    EmbeddingVector v;
    v.values.assign(t.data.begin(), t.data.end());
    return l2_normalize(v);
}

EmbeddingVector embed(const Image& image, const EmbeddingConfig& config) {
    return l2_normalize(gem_pool(dense_features(image, config), config.gem_p));
}

}  // namespace glvl
