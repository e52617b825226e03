#include "glvl/keypoints.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "glvl/errors.hpp"
#include "glvl/rng.hpp"
#include "glvl/tbf.hpp"

namespace glvl {

KeypointHeatmap decode_heatmap(const ScoreTensor& t) {
    if (t.hc <= 0 || t.wc <= 0 || t.logits.size() != size_t(t.hc) * t.wc * 65)
        throw ShapeError("score tensor shape mismatch");
    for (float v : t.logits)
        if (!std::isfinite(v)) throw DomainError("non-finite logit in score tensor");

    KeypointHeatmap out(t.wc * 8, t.hc * 8);
    for (int cy = 0; cy < t.hc; ++cy) {
        for (int cx = 0; cx < t.wc; ++cx) {
            const float* l = &t.logits[(size_t(cy) * t.wc + cx) * 65];
            float mx = *std::max_element(l, l + 65);
            double denom = 0;
            for (int k = 0; k < 65; ++k) denom += std::exp(double(l[k]) - mx);
            for (int k = 0; k < 64; ++k) {
                double p = std::exp(double(l[k]) - mx) / denom;
                out.at(cx * 8 + k % 8, cy * 8 + k / 8) = float(p);
            }
        }
    }
    return out;
}

KeypointSet extract_keypoints(const KeypointHeatmap& h, const ExtractConfig& cfg) {
    if (cfg.nms_radius < 0) throw ConfigError("nms_radius must be >= 0");

    struct Cand {
        int x, y;
        float score;
    };
    std::vector<Cand> cands;
    for (int y = 0; y < h.height; ++y)
        for (int x = 0; x < h.width; ++x)
            if (h.at(x, y) >= cfg.threshold) cands.push_back({x, y, h.at(x, y)});

    std::stable_sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.y != b.y) return a.y < b.y;
        return a.x < b.x;
    });

    std::vector<uint8_t> suppressed(size_t(h.width) * h.height, 0);
    KeypointSet out;
    for (const auto& c : cands) {
        if (int(out.size()) >= cfg.max_count) break;
        if (suppressed[size_t(c.y) * h.width + c.x]) continue;
        out.push_back({double(c.x), double(c.y), double(c.score)});
        int r = cfg.nms_radius;
        for (int dy = -r; dy <= r; ++dy) {
            int yy = c.y + dy;
            if (yy < 0 || yy >= h.height) continue;
            for (int dx = -r; dx <= r; ++dx) {
                int xx = c.x + dx;
                if (xx < 0 || xx >= h.width) continue;
                suppressed[size_t(yy) * h.width + xx] = 1;
            }
        }
    }
    return out;
}

SampledDescriptors sample_descriptors(const CoarseDescriptorGrid& grid, const KeypointSet& pts) {
    if (grid.hc <= 0 || grid.wc <= 0 || grid.dim <= 0) throw ShapeError("empty descriptor grid");

    SampledDescriptors out;
    out.desc.dim = grid.dim;
    std::vector<float> d(size_t(grid.dim));
    for (size_t i = 0; i < pts.size(); ++i) {
        // Node (gy, gx) sits at image point (8*gx + 3.5, 8*gy + 3.5).
        double u = (pts[i].x - 3.5) / 8.0;
        double v = (pts[i].y - 3.5) / 8.0;
        u = std::clamp(u, 0.0, double(grid.wc - 1));
        v = std::clamp(v, 0.0, double(grid.hc - 1));
        int x0 = std::min(int(u), grid.wc > 1 ? grid.wc - 2 : 0);
        int y0 = std::min(int(v), grid.hc > 1 ? grid.hc - 2 : 0);
        int x1 = std::min(x0 + 1, grid.wc - 1);
        int y1 = std::min(y0 + 1, grid.hc - 1);
        double ax = u - x0, ay = v - y0;

        const float* g00 = grid.cell(y0, x0);
        const float* g10 = grid.cell(y0, x1);
        const float* g01 = grid.cell(y1, x0);
        const float* g11 = grid.cell(y1, x1);
        double norm2 = 0;
        for (int k = 0; k < grid.dim; ++k) {
            double val = (1 - ay) * ((1 - ax) * g00[k] + ax * g10[k]) +
                         ay * ((1 - ax) * g01[k] + ax * g11[k]);
            d[size_t(k)] = float(val);
            norm2 += val * val;
        }
        if (norm2 <= 0) continue;  // degenerate descriptor, point dropped
        float inv = float(1.0 / std::sqrt(norm2));
        for (int k = 0; k < grid.dim; ++k) out.desc.data.push_back(d[size_t(k)] * inv);
        out.kept.push_back(i);
    }
    return out;
}

double keypoint_loss(const ScoreTensor& t, const std::vector<int>& labels) {
    size_t cells = size_t(t.hc) * t.wc;
    if (labels.size() != cells) throw ShapeError("one label per cell required");
    double total = 0;
    for (size_t c = 0; c < cells; ++c) {
        int y = labels[c];
        if (y < 0 || y > 64) throw DomainError("keypoint label out of [0,64]");
        const float* l = &t.logits[c * 65];
        float mx = *std::max_element(l, l + 65);
        double denom = 0;
        for (int k = 0; k < 65; ++k) denom += std::exp(double(l[k]) - mx);
        total += std::log(denom) - (double(l[y]) - mx);
    }
    return total / double(cells);
}

double descriptor_loss(const CoarseDescriptorGrid& a, const CoarseDescriptorGrid& b,
                       const CorrespondenceLabels& labels, const DescriptorLossConfig& cfg) {
    if (a.hc != b.hc || a.wc != b.wc || a.dim != b.dim)
        throw ShapeError("descriptor grids must share shape");
    int cells = a.hc * a.wc;
    if (labels.cells_a != cells || labels.cells_b != cells)
        throw ShapeError("correspondence labels shape mismatch");
    if (!(cfg.positive_margin > cfg.negative_margin) || cfg.negative_margin < 0 || cfg.balance <= 0)
        throw ConfigError("require m_p > m_n >= 0 and lambda_d > 0");

    double total = 0;
    for (int i = 0; i < cells; ++i) {
        const float* da = a.values.data() + size_t(i) * a.dim;
        for (int j = 0; j < cells; ++j) {
            const float* db = b.values.data() + size_t(j) * b.dim;
            double dot = 0;
            for (int k = 0; k < a.dim; ++k) dot += double(da[k]) * db[k];
            if (labels.at(i, j))
                total += cfg.balance * std::max(0.0, cfg.positive_margin - dot);
            else
                total += std::max(0.0, dot - cfg.negative_margin);
        }
    }
    return total / (double(cells) * double(cells));
}

namespace {

// Smallest eigenvalue of the 2x2 gradient covariance summed over a 3x3
// window (Shi-Tomasi response).
Image corner_response(const Image& image, float sigma) {
    Image smoothed = gaussian_blur(image, sigma);
    Image gx, gy;
    gradients(smoothed, gx, gy);
    int w = image.width, h = image.height;
    Image resp(w, h);
    for (int y = 1; y < h - 1; ++y) {
        for (int x = 1; x < w - 1; ++x) {
            double a = 0, bcov = 0, c = 0;
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    double ix = gx.at(x + dx, y + dy);
                    double iy = gy.at(x + dx, y + dy);
                    a += ix * ix;
                    bcov += ix * iy;
                    c += iy * iy;
                }
            }
            double tr = a + c;
            double dlt = std::sqrt((a - c) * (a - c) + 4 * bcov * bcov);
            resp.at(x, y) = float(0.5 * (tr - dlt));
        }
    }
    return resp;
}

// SIFT-like 4x4 spatial cells x 8 signed orientation bins over a
// patch x patch support, trilinear soft assignment, Gaussian weighted.
bool describe_patch(const Image& gx, const Image& gy, int px, int py, int patch,
                    std::vector<float>& out128) {
    const int cells = 4;
    const int bins = 8;
    const double cell_px = double(patch) / cells;
    const double sigma = patch / 2.0;
    out128.assign(cells * cells * bins, 0.f);

    int half = patch / 2;
    for (int dy = -half; dy < half; ++dy) {
        for (int dx = -half; dx < half; ++dx) {
            int x = px + dx, y = py + dy;
            double ix = gx.at(x, y), iy = gy.at(x, y);
            double mag = std::sqrt(ix * ix + iy * iy);
            if (mag <= 0) continue;
            double wgt = std::exp(-0.5 * (dx * dx + dy * dy) / (sigma * sigma)) * mag;

            double cxf = (dx + half) / cell_px - 0.5;
            double cyf = (dy + half) / cell_px - 0.5;
            double ang = std::atan2(iy, ix);
            if (ang < 0) ang += 2 * M_PI;
            double binf = ang / (2 * M_PI) * bins;

            int cx0 = int(std::floor(cxf));
            int cy0 = int(std::floor(cyf));
            int b0 = int(std::floor(binf)) % bins;
            double fx = cxf - cx0, fy = cyf - cy0, fb = binf - std::floor(binf);
            for (int i = 0; i < 2; ++i) {
                int cy = cy0 + i;
                if (cy < 0 || cy >= cells) continue;
                double wy = i ? fy : 1 - fy;
                for (int j = 0; j < 2; ++j) {
                    int cx = cx0 + j;
                    if (cx < 0 || cx >= cells) continue;
                    double wx = j ? fx : 1 - fx;
                    for (int k = 0; k < 2; ++k) {
                        int b = (b0 + k) % bins;
                        double wb = k ? fb : 1 - fb;
                        out128[size_t((cy * cells + cx) * bins + b)] += float(wgt * wy * wx * wb);
                    }
                }
            }
        }
    }
    double norm2 = 0;
    for (float v : out128) norm2 += double(v) * v;
    if (norm2 <= 0) return false;
    float inv = float(1.0 / std::sqrt(norm2));
    for (auto& v : out128) v *= inv;
    return true;
}

}  // namespace

DetectionResult builtin_detect(const Image& image, const DetectorConfig& config) {
    if (image.width < 32 || image.height < 32)
        throw ConfigError("builtin_detect needs at least a 32x32 image");

    Image resp = corner_response(image, config.sigma);
    float peak = *std::max_element(resp.data.begin(), resp.data.end());
    DetectionResult result;
    result.descriptors.dim = 128;
    if (peak <= 0) return result;  // structureless image

    // Normalize so scores land in (0, 1] and the relative threshold of
    // ExtractConfig applies uniformly across images.
    Image scores(resp.width, resp.height);
    for (size_t i = 0; i < resp.data.size(); ++i)
        scores.data[i] = std::max(resp.data[i], 0.f) / peak;

    KeypointSet pts = extract_keypoints(scores, config.extract);

    Image smoothed = gaussian_blur(image, config.sigma);
    Image gx, gy;
    gradients(smoothed, gx, gy);

    int margin = config.patch / 2 + 1;
    std::vector<float> d;
    for (const auto& p : pts) {
        int x = int(p.x), y = int(p.y);
        if (x < margin || y < margin || x >= image.width - margin || y >= image.height - margin)
            continue;
        if (!describe_patch(gx, gy, x, y, config.patch, d)) continue;
        result.points.push_back(p);
        result.descriptors.data.insert(result.descriptors.data.end(), d.begin(), d.end());
    }
    return result;
}

std::pair<ScoreTensor, CoarseDescriptorGrid> import_tensors(const std::string& score_file,
                                                            const std::string& desc_file) {
    Tensor st = load_tbf(score_file);
    if (st.rank() != 3)
        throw FormatError("score tensor must be rank-3 [hc, wc, 65]: " + score_file);
    if (st.shape[2] != 65)
        throw FormatError("score tensor channel count must be 65 (64 + dustbin), got " +
                          std::to_string(st.shape[2]) + ": " + score_file);

    Tensor dt = load_tbf(desc_file);
    if (dt.rank() != 3)
        throw FormatError("descriptor tensor must be rank-3 [hc, wc, D]: " + desc_file);
    if (dt.shape[0] != st.shape[0] || dt.shape[1] != st.shape[1])
        throw FormatError("cell grid mismatch between score (" + std::to_string(st.shape[0]) + "x" +
                          std::to_string(st.shape[1]) + ") and descriptor (" +
                          std::to_string(dt.shape[0]) + "x" + std::to_string(dt.shape[1]) + ") files");
    if (dt.shape[2] <= 0) throw FormatError("descriptor dimension must be positive: " + desc_file);

    ScoreTensor t;
    t.hc = int(st.shape[0]);
    t.wc = int(st.shape[1]);
    t.logits = std::move(st.data);

    CoarseDescriptorGrid g;
    g.hc = int(dt.shape[0]);
    g.wc = int(dt.shape[1]);
    g.dim = int(dt.shape[2]);
    g.values = std::move(dt.data);
    return {std::move(t), std::move(g)};
}

TrainingPair make_training_pair(const Image& image, const WarpParams& params, uint64_t seed) {
    if (params.scale_min > params.scale_max || params.scale_min <= 0)
        throw ConfigError("invalid scale range");

    Rng rng(seed);
    double cx = image.width / 2.0, cy = image.height / 2.0;
    double pscale = 2.0 * params.perspective_jitter / std::max(image.width, image.height);

    Homography h;
    bool ok = false;
    for (int attempt = 0; attempt < 8 && !ok; ++attempt) {
        double theta = rng.uniform(-params.max_rotation_deg, params.max_rotation_deg) * M_PI / 180.0;
        double s = params.scale_min == params.scale_max
                       ? params.scale_min
                       : rng.uniform(params.scale_min, params.scale_max);
        double tx = rng.uniform(-params.max_translation_px, params.max_translation_px);
        double ty = rng.uniform(-params.max_translation_px, params.max_translation_px);
        double px = pscale > 0 ? rng.uniform(-pscale, pscale) : 0.0;
        double py = pscale > 0 ? rng.uniform(-pscale, pscale) : 0.0;

        // T(c + t) . R(theta) . S(s) . P(px, py) . T(-c)
        double ct = std::cos(theta), st = std::sin(theta);
        Homography rs;
        rs.h = {{{s * ct, -s * st, 0}, {s * st, s * ct, 0}, {0, 0, 1}}};
        Homography persp;
        persp.h = {{{1, 0, 0}, {0, 1, 0}, {px, py, 1}}};
        Homography tneg;
        tneg.h = {{{1, 0, -cx}, {0, 1, -cy}, {0, 0, 1}}};
        Homography tpos;
        tpos.h = {{{1, 0, cx + tx}, {0, 1, cy + ty}, {0, 0, 1}}};
        h = tpos.composed(rs.composed(persp.composed(tneg)));

        // Reject horizon-crossing samples: the projective denominator
        // must stay positive over all corners.
        ok = std::abs(h.det()) > 1e-9;
        double corners[4][2] = {{0, 0}, {double(image.width), 0},
                                {double(image.width), double(image.height)}, {0, double(image.height)}};
        for (auto& c : corners) {
            double w = h.h[2][0] * c[0] + h.h[2][1] * c[1] + h.h[2][2];
            if (w < 0.1) ok = false;
        }
    }
    if (!ok) throw DegenerateError("could not sample an invertible homography");

    Homography hinv = h.inverse();
    Image warped(image.width, image.height);
    for (int y = 0; y < warped.height; ++y) {
        for (int x = 0; x < warped.width; ++x) {
            // Pixel centers at (i + 0.5, j + 0.5) in the continuous frame.
            PixelPoint src = apply(hinv, {x + 0.5, y + 0.5});
            warped.at(x, y) = image.sample_bilinear_or_zero(float(src.x - 0.5), float(src.y - 0.5));
        }
    }
    return {std::move(warped), h};
}

std::string keypoints_to_jsonl(const KeypointSet& pts) {
    std::ostringstream out;
    for (const auto& p : pts) {
        nlohmann::json j = {{"x", p.x}, {"y", p.y}, {"score", p.score}};
        out << j.dump() << "\n";
    }
    return out.str();
}

KeypointSet keypoints_from_jsonl(const std::string& text) {
    KeypointSet pts;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
            pts.push_back({j.at("x").get<double>(), j.at("y").get<double>(),
                           j.at("score").get<double>()});
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(std::string("bad keypoint json line: ") + e.what());
        }
    }
    return pts;
}

}  // namespace glvl
