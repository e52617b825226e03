#pragma once

#include <string>

#include "glvl/matching.hpp"
#include "glvl/pipeline.hpp"

namespace glvl {

// Side-by-side keypoint match view: images as embedded PGM-derived
// rectangles are skipped; points and match segments only.
std::string match_svg(const Image& a, const Image& b, const MatchSet& matches);

// Trajectory polyline (truth and prediction) over the map extent.
std::string trajectory_svg(const FlightLog& log, const GeoSidecar& map);

// Per-frame localization error scatter.
std::string error_scatter_svg(const FlightLog& log);

}  // namespace glvl
