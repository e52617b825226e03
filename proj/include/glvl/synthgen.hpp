#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "glvl/frame.hpp"
#include "glvl/geo.hpp"
#include "glvl/homography.hpp"

namespace glvl {

enum class Texture { rich, sparse };

struct SceneSpec {
    int map_size = 2000;       // square map, pixels
    double resolution = 1.0;   // meters per pixel
    Texture texture = Texture::rich;
    int n_frames = 20;
    int frame_size = 400;
    double max_rotation_deg = 10.0;
    double scale_min = 0.9;
    double scale_max = 1.1;
    double perspective_jitter = 0.0;  // fraction of corner displacement
    double noise_sigma = 0.02;
    double brightness_jitter = 0.0;
    double contrast_jitter = 0.0;
    uint64_t seed = 1;

    void validate() const;
};

struct FrameTruth {
    int origin_x = 0;  // crop origin in the map pixel frame
    int origin_y = 0;
    Homography crop_to_frame;  // exact warp used for this frame
};

struct SyntheticScene {
    GeoRefMap map;
    std::vector<QueryFrame> frames;
    std::vector<FrameTruth> truths;

    // frame pixel -> map pixel, composed from the stored crop warp.
    Homography frame_to_map(int frame_idx) const;
};

// Seeded procedural raster (value-noise octaves for rich texture,
// thresholded low-frequency blobs for sparse) with an equator-anchored
// geo sidecar at the stated resolution.
GeoRefMap generate_map(const SceneSpec& spec);

// Frames are center-anchored crops warped within the spec bounds; the
// warp fixes the crop center, so truth is exactly the geo of the crop
// center pixel.
SyntheticScene generate_frames(GeoRefMap map, const SceneSpec& spec);

inline SyntheticScene generate_scene(const SceneSpec& spec) {
    return generate_frames(generate_map(spec), spec);
}

// Scene directory: map.pgm, geo.json, frames/NNN.pgm, truth.csv,
// homographies.json.
void save_scene(const SyntheticScene& scene, const std::string& dir);

SceneSpec load_scene_spec(const std::string& path);
void save_scene_spec(const SceneSpec& spec, const std::string& path);

}  // namespace glvl
