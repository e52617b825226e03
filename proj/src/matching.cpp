#include "glvl/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "glvl/errors.hpp"

namespace glvl {

MatchSet match_descriptors(const Descriptors& desc_a, const KeypointSet& pts_a,
                           const Descriptors& desc_b, const KeypointSet& pts_b,
                           const MatchConfig& cfg) {
    if (cfg.ratio <= 0 || cfg.ratio > 1) throw ConfigError("ratio must be in (0, 1]");
    int na = desc_a.count(), nb = desc_b.count();
    if (int(pts_a.size()) != na || int(pts_b.size()) != nb)
        throw ShapeError("keypoint/descriptor count mismatch");
    if (na == 0 || nb == 0) return {};
    if (desc_a.dim != desc_b.dim) throw ShapeError("descriptor dimension mismatch");

    using MatF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Eigen::Map<const MatF> A(desc_a.data.data(), na, desc_a.dim);
    Eigen::Map<const MatF> B(desc_b.data.data(), nb, desc_b.dim);

    // d^2 = |a|^2 + |b|^2 - 2 a.b, evaluated via one GEMM.
    Eigen::MatrixXf dot = A * B.transpose();
    Eigen::VectorXf na2 = A.rowwise().squaredNorm();
    Eigen::VectorXf nb2 = B.rowwise().squaredNorm();

    auto dist2 = [&](int i, int j) {
        float d2 = na2(i) + nb2(j) - 2.f * dot(i, j);
        return d2 > 0.f ? d2 : 0.f;
    };

    // Nearest b for every a (and second-nearest for the ratio test).
    std::vector<int> best_b(size_t(na), -1);
    std::vector<float> best_d2(size_t(na), 0.f);
    std::vector<float> second_d2(size_t(na), 0.f);
    for (int i = 0; i < na; ++i) {
        float d1 = std::numeric_limits<float>::infinity();
        float d2nd = std::numeric_limits<float>::infinity();
        int arg = -1;
        for (int j = 0; j < nb; ++j) {
            float d = dist2(i, j);
            if (d < d1) {
                d2nd = d1;
                d1 = d;
                arg = j;
            } else if (d < d2nd) {
                d2nd = d;
            }
        }
        best_b[size_t(i)] = arg;
        best_d2[size_t(i)] = d1;
        second_d2[size_t(i)] = d2nd;
    }

    std::vector<int> best_a_of_b(size_t(nb), -1);
    if (cfg.mutual) {
        for (int j = 0; j < nb; ++j) {
            float d1 = std::numeric_limits<float>::infinity();
            int arg = -1;
            for (int i = 0; i < na; ++i) {
                float d = dist2(i, j);
                if (d < d1) {
                    d1 = d;
                    arg = i;
                }
            }
            best_a_of_b[size_t(j)] = arg;
        }
    }

    MatchSet candidates;
    double r2 = cfg.ratio * cfg.ratio;
    for (int i = 0; i < na; ++i) {
        int j = best_b[size_t(i)];
        if (j < 0) continue;
        if (cfg.mutual && best_a_of_b[size_t(j)] != i) continue;
        if (nb >= 2 && double(best_d2[size_t(i)]) > r2 * double(second_d2[size_t(i)])) continue;
        MatchPair m;
        m.index_a = i;
        m.index_b = j;
        m.a = pts_a[size_t(i)];
        m.b = pts_b[size_t(j)];
        m.distance = std::sqrt(double(best_d2[size_t(i)]));
        candidates.push_back(m);
    }

    // One-to-one: smaller distance wins conflicts, ties by index order.
    std::sort(candidates.begin(), candidates.end(), [](const MatchPair& x, const MatchPair& y) {
        if (x.distance != y.distance) return x.distance < y.distance;
        if (x.index_a != y.index_a) return x.index_a < y.index_a;
        return x.index_b < y.index_b;
    });
    std::vector<uint8_t> used_a(size_t(na), 0), used_b(size_t(nb), 0);
    MatchSet out;
    for (const auto& m : candidates) {
        if (used_a[size_t(m.index_a)] || used_b[size_t(m.index_b)]) continue;
        used_a[size_t(m.index_a)] = 1;
        used_b[size_t(m.index_b)] = 1;
        out.push_back(m);
    }
    return out;
}

}  // namespace glvl
