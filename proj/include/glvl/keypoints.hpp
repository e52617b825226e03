#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "glvl/homography.hpp"
#include "glvl/image.hpp"

namespace glvl {

// Raw per-cell logits in SuperPoint layout: hc x wc cells, 65 channels
// each (64 pixel positions of the 8x8 block + the dustbin).
struct ScoreTensor {
    int hc = 0;
    int wc = 0;
    std::vector<float> logits;  // [hc][wc][65]

    float& logit(int cy, int cx, int ch) { return logits[(size_t(cy) * wc + cx) * 65 + ch]; }
    float logit(int cy, int cx, int ch) const { return logits[(size_t(cy) * wc + cx) * 65 + ch]; }
};

// Full-resolution keypoint probabilities (dustbin dropped).
using KeypointHeatmap = Image;

struct Keypoint {
    double x = 0;
    double y = 0;
    double score = 0;
};

using KeypointSet = std::vector<Keypoint>;

// Flat row-major descriptor matrix.
struct Descriptors {
    int dim = 0;
    std::vector<float> data;

    int count() const { return dim > 0 ? int(data.size()) / dim : 0; }
    const float* row(int i) const { return data.data() + size_t(i) * dim; }
};

struct CoarseDescriptorGrid {
    int hc = 0;
    int wc = 0;
    int dim = 0;
    std::vector<float> values;  // [hc][wc][dim]

    const float* cell(int cy, int cx) const { return values.data() + (size_t(cy) * wc + cx) * dim; }
    float* cell(int cy, int cx) { return values.data() + (size_t(cy) * wc + cx) * dim; }
};

// Indicator s over (cell of grid A, cell of grid B) pairs, row-major
// flattened cells on both axes.
struct CorrespondenceLabels {
    int cells_a = 0;
    int cells_b = 0;
    std::vector<uint8_t> s;

    uint8_t at(int a, int b) const { return s[size_t(a) * cells_b + b]; }
};

struct DescriptorLossConfig {
    double positive_margin = 1.0;  // m_p
    double negative_margin = 0.2;  // m_n
    double balance = 250.0;        // lambda_d
};

struct ExtractConfig {
    double threshold = 0.015;
    int nms_radius = 4;
    int max_count = 1000;
};

// Per cell: softmax over the 65 logits, drop the dustbin, scatter the 64
// remaining probabilities into the cell's 8x8 block row-major
// (channel k -> pixel (k mod 8, k div 8) within the block).
KeypointHeatmap decode_heatmap(const ScoreTensor& t);

// Threshold + greedy NMS by descending score (Chebyshev radius), capped
// at max_count. Ties broken by (y, x) order.
KeypointSet extract_keypoints(const KeypointHeatmap& h, const ExtractConfig& cfg);

// Bilinear sampling of the coarse grid (node (i,j) anchored at image
// point (8j+3.5, 8i+3.5)) followed by per-descriptor L2 normalization.
// Points whose interpolated vector is zero are dropped; kept holds the
// surviving indices into pts.
struct SampledDescriptors {
    Descriptors desc;
    std::vector<size_t> kept;
};
SampledDescriptors sample_descriptors(const CoarseDescriptorGrid& grid, const KeypointSet& pts);

// Mean over cells of the cross-entropy of the labeled channel,
// normalized by hc*wc. labels: one channel index in [0,64] per cell,
// row-major.
double keypoint_loss(const ScoreTensor& t, const std::vector<int>& labels);

// Mean over cell pairs of the hinge loss
//   l_d = lambda_d * s * max(0, m_p - d.d') + (1-s) * max(0, d.d' - m_n)
// normalized by (hc*wc)^2 (grids must share shape).
double descriptor_loss(const CoarseDescriptorGrid& a, const CoarseDescriptorGrid& b,
                       const CorrespondenceLabels& labels, const DescriptorLossConfig& cfg);

struct DetectorConfig {
    // Threshold is relative to the peak corner response of the image.
    ExtractConfig extract;
    float sigma = 1.5f;
    int patch = 16;  // descriptor support, pixels
};

// Min-eigenvalue corner detector + 128-d oriented-gradient patch
// descriptor, both deterministic. Needs at least a 32x32 image.
struct DetectionResult {
    KeypointSet points;
    Descriptors descriptors;
};
DetectionResult builtin_detect(const Image& image, const DetectorConfig& config);

// Validated TBF pair: scores [hc, wc, 65], descriptors [hc, wc, D].
std::pair<ScoreTensor, CoarseDescriptorGrid> import_tensors(const std::string& score_file,
                                                            const std::string& desc_file);

struct WarpParams {
    double max_rotation_deg = 0;
    double scale_min = 1.0;
    double scale_max = 1.0;
    double max_translation_px = 0;
    double perspective_jitter = 0;  // fraction of corner displacement
};

// Samples a random homography within bounds and warps the image by
// inverse mapping with bilinear resampling (black fill). Returns the
// exact source->warped homography. Deterministic per seed.
struct TrainingPair {
    Image warped;
    Homography h;  // source pixel -> warped pixel
};
TrainingPair make_training_pair(const Image& image, const WarpParams& params, uint64_t seed);

// JSON-lines {"x":F,"y":F,"score":F}.
std::string keypoints_to_jsonl(const KeypointSet& pts);
KeypointSet keypoints_from_jsonl(const std::string& text);

}  // namespace glvl
