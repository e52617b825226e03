#include "glvl/homography.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Dense>

#include "glvl/errors.hpp"
#include "glvl/rng.hpp"

namespace glvl {

double Homography::det() const {
    return h[0][0] * (h[1][1] * h[2][2] - h[1][2] * h[2][1]) -
           h[0][1] * (h[1][0] * h[2][2] - h[1][2] * h[2][0]) +
           h[0][2] * (h[1][0] * h[2][1] - h[1][1] * h[2][0]);
}

Homography Homography::inverse() const {
    Eigen::Matrix3d m;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) m(r, c) = h[size_t(r)][size_t(c)];
    double d = m.determinant();
    if (std::abs(d) < 1e-12 * std::max(1.0, m.cwiseAbs().maxCoeff()))
        throw DegenerateError("homography not invertible");
    Eigen::Matrix3d inv = m.inverse();
    if (std::abs(inv(2, 2)) < 1e-12) throw DegenerateError("inverse homography h22 vanishes");
    inv /= inv(2, 2);
    Homography out;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) out.h[size_t(r)][size_t(c)] = inv(r, c);
    return out;
}

Homography Homography::composed(const Homography& rhs) const {
    Homography out;
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
            double s = 0.0;
            for (int k = 0; k < 3; ++k) s += h[size_t(r)][size_t(k)] * rhs.h[size_t(k)][size_t(c)];
            out.h[size_t(r)][size_t(c)] = s;
        }
    }
    if (std::abs(out.h[2][2]) < 1e-12) throw DegenerateError("composed homography h22 vanishes");
    double w = out.h[2][2];
    for (auto& row : out.h)
        for (auto& v : row) v /= w;
    return out;
}

std::array<double, 9> Homography::flat() const {
    return {h[0][0], h[0][1], h[0][2], h[1][0], h[1][1], h[1][2], h[2][0], h[2][1], h[2][2]};
}

Homography Homography::from_flat(const std::array<double, 9>& v) {
    if (std::abs(v[8]) < 1e-12) throw FormatError("homography h22 must be nonzero");
    Homography out;
    for (int i = 0; i < 9; ++i) out.h[size_t(i / 3)][size_t(i % 3)] = v[size_t(i)] / v[8];
    return out;
}

PixelPoint apply(const Homography& h, const PixelPoint& p) {
    double w = h.h[2][0] * p.x + h.h[2][1] * p.y + h.h[2][2];
    if (std::abs(w) < 1e-15) throw DegenerateError("homography projects point to infinity");
    return {(h.h[0][0] * p.x + h.h[0][1] * p.y + h.h[0][2]) / w,
            (h.h[1][0] * p.x + h.h[1][1] * p.y + h.h[1][2]) / w};
}

namespace {

struct Conditioning {
    double cx = 0, cy = 0, scale = 1;
};

// Translate to centroid, scale to mean distance sqrt(2).
Conditioning hartley_conditioning(const std::vector<PixelPoint>& pts) {
    Conditioning c;
    for (const auto& p : pts) {
        c.cx += p.x;
        c.cy += p.y;
    }
    c.cx /= double(pts.size());
    c.cy /= double(pts.size());
    double mean_dist = 0;
    for (const auto& p : pts) mean_dist += std::hypot(p.x - c.cx, p.y - c.cy);
    mean_dist /= double(pts.size());
    c.scale = mean_dist > 1e-12 ? std::sqrt(2.0) / mean_dist : 1.0;
    return c;
}

}  // namespace

Homography dlt_fit(const std::vector<PointPair>& pairs) {
    size_t n = pairs.size();
    if (n < 4) throw DegenerateError("dlt_fit needs at least 4 correspondences");

    std::vector<PixelPoint> src(n), dst(n);
    for (size_t i = 0; i < n; ++i) {
        src[i] = pairs[i].src;
        dst[i] = pairs[i].dst;
    }
    Conditioning cs = hartley_conditioning(src);
    Conditioning cd = hartley_conditioning(dst);

    Eigen::MatrixXd A(2 * n, 9);
    for (size_t i = 0; i < n; ++i) {
        double x = (src[i].x - cs.cx) * cs.scale;
        double y = (src[i].y - cs.cy) * cs.scale;
        double u = (dst[i].x - cd.cx) * cd.scale;
        double v = (dst[i].y - cd.cy) * cd.scale;
        A.row(2 * Eigen::Index(i)) << -x, -y, -1, 0, 0, 0, u * x, u * y, u;
        A.row(2 * Eigen::Index(i) + 1) << 0, 0, 0, -x, -y, -1, v * x, v * y, v;
    }

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    // Rank < 8 means a degenerate configuration (e.g. collinear points).
    if (sv(7) < 1e-9 * sv(0)) throw DegenerateError("degenerate correspondence configuration");
    Eigen::VectorXd hvec = svd.matrixV().col(8);

    Eigen::Matrix3d Hn;
    Hn << hvec(0), hvec(1), hvec(2), hvec(3), hvec(4), hvec(5), hvec(6), hvec(7), hvec(8);

    Eigen::Matrix3d Ts, Td;
    Ts << cs.scale, 0, -cs.scale * cs.cx, 0, cs.scale, -cs.scale * cs.cy, 0, 0, 1;
    Td << cd.scale, 0, -cd.scale * cd.cx, 0, cd.scale, -cd.scale * cd.cy, 0, 0, 1;
    Eigen::Matrix3d H = Td.inverse() * Hn * Ts;

    if (std::abs(H(2, 2)) < 1e-12 * H.cwiseAbs().maxCoeff())
        throw DegenerateError("homography normalization failed: h22 ~ 0");
    H /= H(2, 2);

    Homography out;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) out.h[size_t(r)][size_t(c)] = H(r, c);
    return out;
}

double reprojection_error(const Homography& h, const PointPair& pair) {
    double w = h.h[2][0] * pair.src.x + h.h[2][1] * pair.src.y + h.h[2][2];
    if (std::abs(w) < 1e-15) return std::numeric_limits<double>::infinity();
    double px = (h.h[0][0] * pair.src.x + h.h[0][1] * pair.src.y + h.h[0][2]) / w;
    double py = (h.h[1][0] * pair.src.x + h.h[1][1] * pair.src.y + h.h[1][2]) / w;
    return std::hypot(px - pair.dst.x, py - pair.dst.y);
}

RansacResult ransac_fit(const std::vector<PointPair>& matches, const RansacConfig& cfg) {
    size_t n = matches.size();
    if (n < 4) throw DegenerateError("ransac_fit needs at least 4 matches");
    if (cfg.iterations < 1 || cfg.inlier_threshold <= 0 || cfg.min_inliers < 4)
        throw ConfigError("invalid ransac config");

    Rng rng(cfg.seed);
    int best_count = -1;
    double best_residual = std::numeric_limits<double>::infinity();
    std::vector<bool> best_mask;

    std::vector<PointPair> sample(4);
    std::vector<bool> mask(n);
    for (int it = 0; it < cfg.iterations; ++it) {
        // 4 distinct indices.
        size_t idx[4];
        idx[0] = size_t(rng.below(n));
        do idx[1] = size_t(rng.below(n)); while (idx[1] == idx[0]);
        do idx[2] = size_t(rng.below(n)); while (idx[2] == idx[0] || idx[2] == idx[1]);
        do idx[3] = size_t(rng.below(n)); while (idx[3] == idx[0] || idx[3] == idx[1] || idx[3] == idx[2]);
        for (int i = 0; i < 4; ++i) sample[size_t(i)] = matches[idx[i]];

        Homography hyp;
        try {
            hyp = dlt_fit(sample);
        } catch (const DegenerateError&) {
            continue;
        }

        int count = 0;
        double residual_sum = 0;
        for (size_t i = 0; i < n; ++i) {
            double e = reprojection_error(hyp, matches[i]);
            bool in = e <= cfg.inlier_threshold;
            mask[i] = in;
            if (in) {
                ++count;
                residual_sum += e;
            }
        }
        double mean_res = count > 0 ? residual_sum / count : std::numeric_limits<double>::infinity();
        if (count > best_count || (count == best_count && mean_res < best_residual)) {
            best_count = count;
            best_residual = mean_res;
            best_mask = mask;
        }
    }

    if (best_count < cfg.min_inliers)
        throw DegenerateError("ransac: no consensus (best inliers " + std::to_string(best_count) +
                              " < " + std::to_string(cfg.min_inliers) + ")");

    std::vector<PointPair> inliers;
    inliers.reserve(size_t(best_count));
    for (size_t i = 0; i < n; ++i)
        if (best_mask[i]) inliers.push_back(matches[i]);
    RansacResult result;
    result.h = dlt_fit(inliers);
    result.inlier_mask = std::move(best_mask);
    result.inlier_count = best_count;
    return result;
}

PixelPoint project_center(const Homography& h, int frame_w, int frame_h) {
    return apply(h, {frame_w / 2.0, frame_h / 2.0});
}

}  // namespace glvl
