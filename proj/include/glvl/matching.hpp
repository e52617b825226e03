#pragma once

#include <vector>

#include "glvl/homography.hpp"
#include "glvl/keypoints.hpp"

namespace glvl {

struct MatchPair {
    int index_a = 0;  // into the query-frame keypoint set
    int index_b = 0;  // into the patch keypoint set
    Keypoint a;
    Keypoint b;
    double distance = 0;  // descriptor Euclidean distance
};

// Ascending distance, one-to-one.
using MatchSet = std::vector<MatchPair>;

struct MatchConfig {
    double ratio = 0.8;  // Lowe ratio; 1.0 disables the test
    bool mutual = true;
};

// Nearest-neighbor matching with ratio test, optional mutual check, and
// one-to-one enforcement (smaller-distance pair wins conflicts). The
// ratio test is skipped when |B| < 2.
MatchSet match_descriptors(const Descriptors& desc_a, const KeypointSet& pts_a,
                           const Descriptors& desc_b, const KeypointSet& pts_b,
                           const MatchConfig& cfg);

inline std::vector<PointPair> to_point_pairs(const MatchSet& matches) {
    std::vector<PointPair> out;
    out.reserve(matches.size());
    for (const auto& m : matches) out.push_back({{m.a.x, m.a.y}, {m.b.x, m.b.y}});
    return out;
}

}  // namespace glvl
