#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "glvl/geo.hpp"

namespace glvl {

// 3x3 projective map, normalized so h[2][2] = 1.
struct Homography {
    std::array<std::array<double, 3>, 3> h{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};

    static Homography identity() { return {}; }

    double det() const;
    Homography inverse() const;  // throws DegenerateError if singular
    Homography composed(const Homography& rhs) const;  // this after rhs

    // Row-major 9-value array, h22 = 1 enforced on load.
    std::array<double, 9> flat() const;
    static Homography from_flat(const std::array<double, 9>& v);
};

// Projective application with perspective division. Throws
// DegenerateError when the denominator vanishes.
PixelPoint apply(const Homography& h, const PixelPoint& p);

struct PointPair {
    PixelPoint src;  // query-frame point
    PixelPoint dst;  // patch point
};

// Normalized DLT: Hartley pre-conditioning of both point sets, stacked
// 2Lx9 least-squares solve via the smallest singular direction,
// de-conditioning, h22 normalization. Fit direction is src -> dst.
Homography dlt_fit(const std::vector<PointPair>& pairs);

struct RansacConfig {
    int iterations = 2000;
    double inlier_threshold = 3.0;  // px reprojection
    int min_inliers = 15;
    uint64_t seed = 0;
};

struct RansacResult {
    Homography h;
    std::vector<bool> inlier_mask;
    int inlier_count = 0;
};

// Seeded minimal-sample (4-pair) RANSAC, best hypothesis by inlier count
// (ties by lower mean inlier residual), final re-fit on all inliers.
// Throws DegenerateError when L < 4 or the best count < min_inliers.
RansacResult ransac_fit(const std::vector<PointPair>& matches, const RansacConfig& cfg);

// Projects the frame center (w/2, h/2) through h.
PixelPoint project_center(const Homography& h, int frame_w, int frame_h);

double reprojection_error(const Homography& h, const PointPair& pair);

}  // namespace glvl
