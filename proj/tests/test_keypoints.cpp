#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "glvl/errors.hpp"
#include "glvl/keypoints.hpp"
#include "glvl/matching.hpp"
#include "glvl/rng.hpp"
#include "glvl/tbf.hpp"

using namespace glvl;

namespace {

ScoreTensor uniform_tensor(int hc, int wc, float logit = 0.f) {
    ScoreTensor t;
    t.hc = hc;
    t.wc = wc;
    t.logits.assign(size_t(hc) * wc * 65, logit);
    return t;
}

CoarseDescriptorGrid constant_grid(int hc, int wc, int dim, float val) {
    CoarseDescriptorGrid g;
    g.hc = hc;
    g.wc = wc;
    g.dim = dim;
    g.values.assign(size_t(hc) * wc * dim, val);
    return g;
}

Image noise_image(int w, int h, uint64_t seed) {
    Image img(w, h);
    Rng rng(seed);
    for (auto& v : img.data) v = float(rng.uniform());
    return img;
}

}  // namespace

TEST_CASE("decode_heatmap: uniform logits give 1/65 everywhere") {
    KeypointHeatmap h = decode_heatmap(uniform_tensor(1, 1));
    REQUIRE(h.width == 8);
    REQUIRE(h.height == 8);
    for (float v : h.data) CHECK(v == doctest::Approx(1.0 / 65).epsilon(1e-6));
}

TEST_CASE("decode_heatmap: dominant dustbin suppresses the cell") {
    ScoreTensor t = uniform_tensor(1, 1);
    t.logit(0, 0, 64) = 10.f;
    KeypointHeatmap h = decode_heatmap(t);
    double expected = 1.0 / (std::exp(10.0) + 64.0);
    for (float v : h.data) CHECK(v == doctest::Approx(expected).epsilon(1e-4));
    CHECK(std::abs(h.at(0, 0) - 4.537e-5) < 5e-7);
}

TEST_CASE("decode_heatmap: dominant channel 0 puts ~1 at the cell's (0,0) pixel") {
    ScoreTensor t = uniform_tensor(1, 1);
    t.logit(0, 0, 0) = 20.f;
    KeypointHeatmap h = decode_heatmap(t);
    CHECK(h.at(0, 0) == doctest::Approx(1.0).epsilon(1e-6));
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x)
            if (x || y) CHECK(h.at(x, y) < 1e-8);
}

TEST_CASE("decode_heatmap: channel k scatters to (k mod 8, k div 8)") {
    ScoreTensor t = uniform_tensor(2, 3);
    t.logit(1, 2, 13) = 30.f;  // pixel (5, 1) of cell (1, 2)
    KeypointHeatmap h = decode_heatmap(t);
    CHECK(h.at(2 * 8 + 5, 1 * 8 + 1) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("decode_heatmap conserves probability per cell") {
    Rng rng(9);
    ScoreTensor t = uniform_tensor(4, 5);
    for (auto& l : t.logits) l = float(rng.normal() * 3);
    KeypointHeatmap h = decode_heatmap(t);
    for (int cy = 0; cy < t.hc; ++cy) {
        for (int cx = 0; cx < t.wc; ++cx) {
            // Recompute the dustbin probability independently.
            const float* l = &t.logits[(size_t(cy) * t.wc + cx) * 65];
            double mx = *std::max_element(l, l + 65);
            double denom = 0;
            for (int k = 0; k < 65; ++k) denom += std::exp(l[k] - mx);
            double dustbin = std::exp(l[64] - mx) / denom;
            double sum = dustbin;
            for (int y = 0; y < 8; ++y)
                for (int x = 0; x < 8; ++x) sum += h.at(cx * 8 + x, cy * 8 + y);
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
        }
    }
}

TEST_CASE("decode_heatmap shift invariance") {
    Rng rng(10);
    ScoreTensor t = uniform_tensor(2, 2);
    for (auto& l : t.logits) l = float(rng.normal());
    ScoreTensor shifted = t;
    for (int cy = 0; cy < 2; ++cy)
        for (int cx = 0; cx < 2; ++cx)
            for (int k = 0; k < 65; ++k) shifted.logit(cy, cx, k) += 7.25f;
    KeypointHeatmap a = decode_heatmap(t);
    KeypointHeatmap b = decode_heatmap(shifted);
    // f32 logit storage quantizes the shifted inputs, so invariance holds
    // to single precision, not the exact-arithmetic 1e-9.
    for (size_t i = 0; i < a.data.size(); ++i) CHECK(std::abs(a.data[i] - b.data[i]) < 1e-6);
}

TEST_CASE("decode_heatmap rejects non-finite logits") {
    ScoreTensor t = uniform_tensor(1, 1);
    t.logit(0, 0, 3) = std::numeric_limits<float>::infinity();
    CHECK_THROWS_AS(decode_heatmap(t), DomainError);
}

TEST_CASE("extract_keypoints basic paths") {
    ExtractConfig cfg;
    cfg.threshold = 0.5;

    KeypointHeatmap uniform(16, 16, 0.1f);
    CHECK(extract_keypoints(uniform, cfg).empty());

    KeypointHeatmap single(16, 16, 0.01f);
    single.at(5, 9) = 0.8f;
    KeypointSet pts = extract_keypoints(single, cfg);
    REQUIRE(pts.size() == 1);
    CHECK(pts[0].x == 5);
    CHECK(pts[0].y == 9);
    CHECK(pts[0].score == doctest::Approx(0.8));
}

TEST_CASE("extract_keypoints NMS: two peaks 3 px apart, radius 4") {
    ExtractConfig cfg;
    cfg.threshold = 0.1;
    cfg.nms_radius = 4;
    KeypointHeatmap h(20, 20, 0.0f);
    h.at(10, 10) = 0.9f;
    h.at(13, 10) = 0.7f;
    KeypointSet pts = extract_keypoints(h, cfg);
    REQUIRE(pts.size() == 1);
    CHECK(pts[0].x == 10);
    CHECK(pts[0].score == doctest::Approx(0.9));
}

TEST_CASE("extract_keypoints honors max_count and tie order") {
    ExtractConfig cfg;
    cfg.threshold = 0.1;
    cfg.nms_radius = 0;
    cfg.max_count = 2;
    KeypointHeatmap h(8, 8, 0.0f);
    h.at(3, 1) = 0.5f;
    h.at(1, 3) = 0.5f;
    h.at(2, 2) = 0.5f;
    KeypointSet pts = extract_keypoints(h, cfg);
    REQUIRE(pts.size() == 2);
    // Ties resolved by (y, x).
    CHECK(pts[0].y == 1);
    CHECK(pts[1].y == 2);
}

TEST_CASE("sample_descriptors node anchor exactness") {
    CoarseDescriptorGrid g = constant_grid(3, 3, 4, 0.f);
    Rng rng(12);
    for (auto& v : g.values) v = float(rng.normal());

    // At (8*1+3.5, 8*2+3.5) the sample is exactly node (2, 1).
    KeypointSet pts = {{8 * 1 + 3.5, 8 * 2 + 3.5, 1.0}};
    SampledDescriptors sd = sample_descriptors(g, pts);
    REQUIRE(sd.kept.size() == 1);
    const float* node = g.cell(2, 1);
    double n2 = 0;
    for (int k = 0; k < 4; ++k) n2 += double(node[k]) * node[k];
    double inv = 1.0 / std::sqrt(n2);
    for (int k = 0; k < 4; ++k)
        CHECK(sd.desc.row(0)[k] == doctest::Approx(node[k] * inv).epsilon(1e-6));
}

TEST_CASE("sample_descriptors midpoint between horizontal nodes") {
    CoarseDescriptorGrid g = constant_grid(1, 2, 2, 0.f);
    g.cell(0, 0)[0] = 1.f;
    g.cell(0, 0)[1] = 0.f;
    g.cell(0, 1)[0] = 0.f;
    g.cell(0, 1)[1] = 1.f;
    KeypointSet pts = {{3.5 + 4.0, 3.5, 1.0}};  // halfway between the nodes
    SampledDescriptors sd = sample_descriptors(g, pts);
    REQUIRE(sd.kept.size() == 1);
    // Average (0.5, 0.5) normalized -> (1/sqrt2, 1/sqrt2).
    CHECK(sd.desc.row(0)[0] == doctest::Approx(1.0 / std::sqrt(2.0)));
    CHECK(sd.desc.row(0)[1] == doctest::Approx(1.0 / std::sqrt(2.0)));
}

TEST_CASE("sample_descriptors constant grid and degenerate drop") {
    CoarseDescriptorGrid g = constant_grid(4, 4, 3, 0.5f);
    KeypointSet pts = {{1, 1, 1.0}, {17, 21, 1.0}, {30, 30, 1.0}};
    SampledDescriptors sd = sample_descriptors(g, pts);
    REQUIRE(sd.kept.size() == 3);
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k)
            CHECK(sd.desc.row(i)[k] == doctest::Approx(1.0 / std::sqrt(3.0)));

    CoarseDescriptorGrid z = constant_grid(2, 2, 3, 0.f);
    SampledDescriptors dz = sample_descriptors(z, pts);
    CHECK(dz.kept.empty());
}

TEST_CASE("keypoint_loss uniform logits = ln 65") {
    ScoreTensor t = uniform_tensor(2, 2);
    std::vector<int> labels = {0, 17, 64, 5};
    CHECK(std::abs(keypoint_loss(t, labels) - std::log(65.0)) < 1e-12);
    CHECK(std::abs(keypoint_loss(t, labels) - 4.174387) < 1e-5);
}

TEST_CASE("keypoint_loss confident true channel") {
    ScoreTensor t = uniform_tensor(1, 1);
    t.logit(0, 0, 7) = 10.f;
    double loss = keypoint_loss(t, {7});
    CHECK(loss == doctest::Approx(std::log(std::exp(10.0) + 64.0) - 10.0).epsilon(1e-9));
    CHECK(std::abs(loss - 2.905e-3) < 1e-5);
}

TEST_CASE("keypoint_loss decreases as the true logit grows") {
    double prev = std::numeric_limits<double>::infinity();
    for (float logit : {5.f, 10.f, 20.f}) {
        ScoreTensor t = uniform_tensor(1, 1);
        t.logit(0, 0, 3) = logit;
        double loss = keypoint_loss(t, {3});
        CHECK(loss < prev);
        prev = loss;
    }
    CHECK(prev < 1e-6);  // logit 20 -> 64*e^-20 ~ 1.3e-7
}

TEST_CASE("keypoint_loss rejects bad labels") {
    ScoreTensor t = uniform_tensor(1, 1);
    CHECK_THROWS_AS(keypoint_loss(t, {65}), DomainError);
    CHECK_THROWS_AS(keypoint_loss(t, {0, 0}), ShapeError);
}

TEST_CASE("descriptor_loss hand values") {
    DescriptorLossConfig cfg;
    cfg.positive_margin = 1.0;
    cfg.negative_margin = 0.2;
    cfg.balance = 1.0;

    // Single-cell grids, unit descriptors.
    auto grid1 = [](float a, float b) {
        CoarseDescriptorGrid g = constant_grid(1, 1, 2, 0.f);
        g.cell(0, 0)[0] = a;
        g.cell(0, 0)[1] = b;
        return g;
    };
    CorrespondenceLabels pos{1, 1, {1}};
    CorrespondenceLabels neg{1, 1, {0}};

    // s=1, d = d' -> 0 at m_p = 1.
    CHECK(descriptor_loss(grid1(1, 0), grid1(1, 0), pos, cfg) == doctest::Approx(0.0));
    // s=0, dot = 0.5, m_n = 0.2 -> 0.3.
    float c = 0.5f, s = std::sqrt(1 - 0.25f);
    CHECK(descriptor_loss(grid1(1, 0), grid1(c, s), neg, cfg) ==
          doctest::Approx(0.3).epsilon(1e-6));
    // s=1, dot = 0.4, m_p = 1, lambda = 1 -> 0.6.
    c = 0.4f;
    s = std::sqrt(1 - 0.16f);
    CHECK(descriptor_loss(grid1(1, 0), grid1(c, s), pos, cfg) ==
          doctest::Approx(0.6).epsilon(1e-6));
}

TEST_CASE("descriptor_loss zero when margins satisfied") {
    DescriptorLossConfig cfg;  // m_p=1, m_n=0.2, lambda=250
    CoarseDescriptorGrid a = constant_grid(1, 2, 2, 0.f);
    a.cell(0, 0)[0] = 1.f;
    a.cell(0, 1)[1] = 1.f;
    CoarseDescriptorGrid b = a;
    // s=1 on matching cells (dot 1 >= m_p), s=0 across (dot 0 <= m_n).
    CorrespondenceLabels labels{2, 2, {1, 0, 0, 1}};
    CHECK(descriptor_loss(a, b, labels, cfg) == doctest::Approx(0.0));
}

TEST_CASE("descriptor_loss shape errors") {
    DescriptorLossConfig cfg;
    CoarseDescriptorGrid a = constant_grid(1, 2, 2, 0.1f);
    CoarseDescriptorGrid b = constant_grid(2, 2, 2, 0.1f);
    CorrespondenceLabels labels{2, 2, {1, 0, 0, 1}};
    CHECK_THROWS_AS(descriptor_loss(a, b, labels, cfg), ShapeError);
}

TEST_CASE("builtin_detect: constant image yields no keypoints") {
    Image img(64, 64, 0.3f);
    DetectorConfig cfg;
    DetectionResult r = builtin_detect(img, cfg);
    CHECK(r.points.empty());
    CHECK_THROWS_AS(builtin_detect(Image(16, 16, 0.f), cfg), ConfigError);
}

TEST_CASE("builtin_detect: white square corners are the strongest responses") {
    Image img(96, 96, 0.f);
    for (int y = 30; y < 66; ++y)
        for (int x = 30; x < 66; ++x) img.at(x, y) = 1.f;
    DetectorConfig cfg;
    cfg.extract.max_count = 4;
    DetectionResult r = builtin_detect(img, cfg);
    REQUIRE(r.points.size() == 4);
    for (const auto& p : r.points) {
        double dx = std::min(std::abs(p.x - 30), std::abs(p.x - 65));
        double dy = std::min(std::abs(p.y - 30), std::abs(p.y - 65));
        CHECK(dx <= 3);
        CHECK(dy <= 3);
    }
}

TEST_CASE("builtin_detect: translation equivariance for interior points") {
    Image img = noise_image(96, 96, 77);
    const int shift = 8;
    Image shifted(96, 96, 0.f);
    for (int y = 0; y < 96 - shift; ++y)
        for (int x = 0; x < 96 - shift; ++x) shifted.at(x + shift, y + shift) = img.at(x, y);

    DetectorConfig cfg;
    cfg.extract.max_count = 200;
    DetectionResult a = builtin_detect(img, cfg);
    DetectionResult b = builtin_detect(shifted, cfg);
    REQUIRE(!a.points.empty());

    // Most interior detections should reappear at the shifted location.
    int found = 0, interior = 0;
    for (const auto& p : a.points) {
        if (p.x < 16 || p.y < 16 || p.x > 96 - 16 - shift || p.y > 96 - 16 - shift) continue;
        ++interior;
        for (const auto& q : b.points) {
            if (std::abs(q.x - (p.x + shift)) < 0.5 && std::abs(q.y - (p.y + shift)) < 0.5) {
                ++found;
                break;
            }
        }
    }
    REQUIRE(interior > 10);
    CHECK(double(found) / interior > 0.8);
}

TEST_CASE("import_tensors validation") {
    Tensor score;
    score.shape = {4, 4, 65};
    score.data.assign(4 * 4 * 65, 0.f);
    Tensor desc;
    desc.shape = {4, 4, 256};
    desc.data.assign(4 * 4 * 256, 0.1f);
    save_tbf(score, "kp_score.tbf");
    save_tbf(desc, "kp_desc.tbf");
    auto [t, g] = import_tensors("kp_score.tbf", "kp_desc.tbf");
    CHECK(t.hc == 4);
    CHECK(g.dim == 256);

    score.shape = {4, 4, 64};
    score.data.assign(4 * 4 * 64, 0.f);
    save_tbf(score, "kp_score64.tbf");
    CHECK_THROWS_AS(import_tensors("kp_score64.tbf", "kp_desc.tbf"), FormatError);

    Tensor desc5;
    desc5.shape = {5, 4, 256};
    desc5.data.assign(5 * 4 * 256, 0.1f);
    save_tbf(desc5, "kp_desc5.tbf");
    score.shape = {4, 4, 65};
    score.data.assign(4 * 4 * 65, 0.f);
    save_tbf(score, "kp_score.tbf");
    CHECK_THROWS_AS(import_tensors("kp_score.tbf", "kp_desc5.tbf"), FormatError);

    std::remove("kp_score.tbf");
    std::remove("kp_score64.tbf");
    std::remove("kp_desc.tbf");
    std::remove("kp_desc5.tbf");
}

TEST_CASE("make_training_pair: zero bounds give identity and an unchanged image") {
    Image img = noise_image(64, 64, 5);
    WarpParams params;  // all zero magnitudes, scale fixed at 1
    TrainingPair tp = make_training_pair(img, params, 123);
    CHECK(tp.warped.data == img.data);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            CHECK(tp.h.h[size_t(r)][size_t(c)] == doctest::Approx(r == c ? 1.0 : 0.0));
}

TEST_CASE("make_training_pair: pure translation shifts the image") {
    Image img = noise_image(64, 64, 6);
    WarpParams params;
    params.max_translation_px = 5;
    TrainingPair tp = make_training_pair(img, params, 9);
    double tx = tp.h.h[0][2], ty = tp.h.h[1][2];
    // Compare on the overlap using bilinear sampling of the source.
    int checked = 0;
    for (int y = 8; y < 56; ++y) {
        for (int x = 8; x < 56; ++x) {
            float want = img.sample_bilinear_or_zero(float(x - tx), float(y - ty));
            float got = tp.warped.at(x, y);
            if (want > 0) {
                CHECK(std::abs(want - got) < 1e-4);
                ++checked;
            }
        }
    }
    CHECK(checked > 1000);
}

TEST_CASE("make_training_pair determinism") {
    Image img = noise_image(48, 48, 7);
    WarpParams params;
    params.max_rotation_deg = 10;
    params.scale_min = 0.9;
    params.scale_max = 1.1;
    params.max_translation_px = 4;
    params.perspective_jitter = 0.01;
    TrainingPair a = make_training_pair(img, params, 42);
    TrainingPair b = make_training_pair(img, params, 42);
    CHECK(a.warped.data == b.warped.data);
    CHECK(a.h.flat() == b.h.flat());
}

TEST_CASE("detect + match on mild warps yields mostly true inliers") {
    Image img = noise_image(128, 128, 99);
    WarpParams params;
    params.max_rotation_deg = 5;
    params.max_translation_px = 4;
    TrainingPair tp = make_training_pair(img, params, 3);

    DetectorConfig dc;
    DetectionResult fa = builtin_detect(img, dc);
    DetectionResult fb = builtin_detect(tp.warped, dc);
    MatchConfig mc;
    MatchSet matches = match_descriptors(fa.descriptors, fa.points, fb.descriptors, fb.points, mc);
    REQUIRE(matches.size() >= 10);

    int inliers = 0;
    for (const auto& m : matches) {
        PixelPoint mapped = apply(tp.h, {m.a.x, m.a.y});
        if (std::hypot(mapped.x - m.b.x, mapped.y - m.b.y) <= 2.0) ++inliers;
    }
    CHECK(double(inliers) / double(matches.size()) >= 0.5);
}

TEST_CASE("keypoint jsonl round trip") {
    KeypointSet pts = {{1.5, 2.25, 0.5}, {7, 9, 0.125}};
    std::string text = keypoints_to_jsonl(pts);
    KeypointSet back = keypoints_from_jsonl(text);
    REQUIRE(back.size() == 2);
    CHECK(back[0].x == doctest::Approx(1.5));
    CHECK(back[1].score == doctest::Approx(0.125));
}
