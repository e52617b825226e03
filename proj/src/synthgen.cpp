#include "glvl/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "glvl/errors.hpp"
#include "glvl/keypoints.hpp"
#include "glvl/rng.hpp"
#include "glvl/tiler.hpp"

namespace fs = std::filesystem;

namespace glvl {

void SceneSpec::validate() const {
    if (map_size <= 0 || n_frames <= 0 || frame_size <= 0) throw ConfigError("sizes must be positive");
    if (frame_size >= map_size) throw ConfigError("frame_size must be smaller than map_size");
    if (resolution <= 0) throw ConfigError("resolution must be positive");
    if (scale_min <= 0.5 || scale_max >= 2.0 || scale_min > scale_max)
        throw ConfigError("scale range must lie within (0.5, 2)");
    if (noise_sigma < 0 || brightness_jitter < 0 || contrast_jitter < 0)
        throw ConfigError("photometric parameters must be >= 0");
}

namespace {

// Lattice value hash -> [0, 1), independent of evaluation order.
double lattice_value(uint64_t seed, int octave, int64_t gx, int64_t gy) {
    uint64_t h = seed ^ (uint64_t(octave) * 0x9e3779b97f4a7c15ULL);
    h = mix_seed(h, uint64_t(gx) * 0x632be59bd9b4e019ULL ^ uint64_t(gy));
    return double(h >> 11) * 0x1.0p-53;
}

double smoothstep(double t) { return t * t * (3 - 2 * t); }

// Single-octave value noise at the given lattice period.
double value_noise(uint64_t seed, int octave, double x, double y, double period) {
    double fx = x / period, fy = y / period;
    int64_t gx = int64_t(std::floor(fx)), gy = int64_t(std::floor(fy));
    double tx = smoothstep(fx - double(gx));
    double ty = smoothstep(fy - double(gy));
    double v00 = lattice_value(seed, octave, gx, gy);
    double v10 = lattice_value(seed, octave, gx + 1, gy);
    double v01 = lattice_value(seed, octave, gx, gy + 1);
    double v11 = lattice_value(seed, octave, gx + 1, gy + 1);
    return (1 - ty) * ((1 - tx) * v00 + tx * v10) + ty * ((1 - tx) * v01 + tx * v11);
}

}  // namespace

GeoRefMap generate_map(const SceneSpec& spec) {
    spec.validate();
    int n = spec.map_size;
    Image raster(n, n);

    if (spec.texture == Texture::rich) {
        // Dense multi-scale texture with two slow region fields: `mod`
        // steers fine-detail energy and `th` a locally dominant stripe
        // orientation. Regions thus differ in both gradient energy and
        // orientation statistics, which is what makes tile retrieval
        // discriminative, while fine octaves supply corner structure.
        for (int y = 0; y < n; ++y) {
            for (int x = 0; x < n; ++x) {
                double mod = value_noise(spec.seed, 99, x, y, 700.0);
                double th = M_PI * value_noise(spec.seed, 98, x, y, 900.0);
                double u = x * std::cos(th) + y * std::sin(th);
                double phase = 6.28318 * value_noise(spec.seed, 97, x, y, 256.0);
                // Wavelength drifts spatially so the striping never forms
                // a repetitive lattice that would alias under matching.
                double lambda = 10.0 + 14.0 * value_noise(spec.seed, 96, x, y, 350.0);
                double stripes = 0.5 + 0.5 * std::sin(2 * M_PI * u / lambda + phase);

                double coarse = 0.30 * value_noise(spec.seed, 0, x, y, 512.0) +
                                0.18 * value_noise(spec.seed, 1, x, y, 128.0) +
                                0.14 * value_noise(spec.seed, 2, x, y, 64.0);
                double fine = 0.34 * value_noise(spec.seed, 3, x, y, 24.0) +
                              0.33 * value_noise(spec.seed, 4, x, y, 12.0) +
                              0.33 * value_noise(spec.seed, 5, x, y, 6.0);
                double v = coarse + (0.45 + 0.55 * mod) * 0.60 * fine +
                           (0.15 + 0.85 * (1.0 - mod)) * 0.30 * stripes;
                // Stretch around the mid-level so local contrast is strong.
                raster.at(x, y) = float(std::clamp(0.5 + 1.6 * (v - 0.62), 0.02, 0.98));
            }
        }
    } else {
        // Thresholded low-frequency blobs with a softened edge.
        for (int y = 0; y < n; ++y) {
            for (int x = 0; x < n; ++x) {
                double v = 0.6 * value_noise(spec.seed, 0, x, y, 300.0) +
                           0.4 * value_noise(spec.seed, 1, x, y, 120.0);
                double t = std::clamp((v - 0.5) / 0.02, -1.0, 1.0);
                raster.at(x, y) = float(0.35 + 0.25 * t);
            }
        }
    }

    GeoRefMap map;
    map.width_px = n;
    map.height_px = n;
    map.raster = std::move(raster);
    // Equator-anchored sidecar: meters -> degrees via the same Earth
    // radius the distance metric uses.
    double deg_per_m = 180.0 / (M_PI * kEarthRadiusM);
    map.ll = {0.0, 0.0};
    map.ur = {n * spec.resolution * deg_per_m, n * spec.resolution * deg_per_m};
    map.validate();
    return map;
}

Homography SyntheticScene::frame_to_map(int frame_idx) const {
    const FrameTruth& t = truths.at(size_t(frame_idx));
    Homography shift;
    shift.h = {{{1, 0, double(t.origin_x)}, {0, 1, double(t.origin_y)}, {0, 0, 1}}};
    return shift.composed(t.crop_to_frame.inverse());
}

SyntheticScene generate_frames(GeoRefMap map, const SceneSpec& spec) {
    spec.validate();
    double diag = spec.frame_size * std::sqrt(2.0);
    int margin = int(std::ceil(diag / 2.0)) + 2;
    if (2 * margin >= map.width_px || 2 * margin >= map.height_px)
        throw ConfigError("map too small for the frame margin");

    SyntheticScene scene;
    scene.map = std::move(map);

    WarpParams warp;
    warp.max_rotation_deg = spec.max_rotation_deg;
    warp.scale_min = spec.scale_min;
    warp.scale_max = spec.scale_max;
    warp.perspective_jitter = spec.perspective_jitter;
    warp.max_translation_px = 0;  // warp fixes the crop center

    for (int i = 0; i < spec.n_frames; ++i) {
        Rng rng(mix_seed(spec.seed, uint64_t(i) + 1));
        int half = spec.frame_size / 2;
        int cx = margin + int(rng.below(uint64_t(scene.map.width_px - 2 * margin + 1)));
        int cy = margin + int(rng.below(uint64_t(scene.map.height_px - 2 * margin + 1)));

        Tile crop_region{0, cx - half, cy - half, spec.frame_size, spec.frame_size, {}};
        Image cropped = crop(scene.map, crop_region);
        TrainingPair tp = make_training_pair(cropped, warp, rng.next_u64());

        // Photometric jitter + clipped Gaussian noise, after warping.
        double contrast = spec.contrast_jitter > 0
                              ? rng.uniform(1 - spec.contrast_jitter, 1 + spec.contrast_jitter)
                              : 1.0;
        double brightness = spec.brightness_jitter > 0
                                ? rng.uniform(-spec.brightness_jitter, spec.brightness_jitter)
                                : 0.0;
        for (auto& v : tp.warped.data) {
            double out = 0.5 + contrast * (double(v) - 0.5) + brightness;
            if (spec.noise_sigma > 0) out += spec.noise_sigma * rng.normal();
            v = float(std::clamp(out, 0.0, 1.0));
        }

        QueryFrame qf;
        qf.id = i;
        qf.image = std::move(tp.warped);
        qf.truth = pixel_to_geo(scene.map, {double(cx), double(cy)});
        scene.frames.push_back(std::move(qf));
        scene.truths.push_back({crop_region.origin_x, crop_region.origin_y, tp.h});
    }
    return scene;
}

void save_scene(const SyntheticScene& scene, const std::string& dir) {
    fs::create_directories(fs::path(dir) / "frames");
    save_pgm(scene.map.raster, (fs::path(dir) / "map.pgm").string());
    save_geo_sidecar(sidecar_of(scene.map), (fs::path(dir) / "geo.json").string());

    std::ofstream truth(fs::path(dir) / "truth.csv");
    truth << "frame_id,lat,lon\n";
    char buf[80];
    nlohmann::json homs = nlohmann::json::array();
    for (size_t i = 0; i < scene.frames.size(); ++i) {
        const auto& f = scene.frames[i];
        std::snprintf(buf, sizeof(buf), "%03zu.pgm", i);
        save_pgm(f.image, (fs::path(dir) / "frames" / buf).string());
        std::snprintf(buf, sizeof(buf), "%d,%.9f,%.9f\n", f.id, f.truth->lat, f.truth->lon);
        truth << buf;

        auto flat = scene.frame_to_map(int(i)).flat();
        homs.push_back({{"frame_id", f.id},
                        {"origin", {scene.truths[i].origin_x, scene.truths[i].origin_y}},
                        {"frame_to_map", std::vector<double>(flat.begin(), flat.end())}});
    }
    std::ofstream hout(fs::path(dir) / "homographies.json");
    hout << homs.dump(2) << "\n";
}

SceneSpec load_scene_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open scene spec: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad scene spec json: ") + e.what());
    }
    SceneSpec s;
    for (const auto& [key, val] : j.items()) {
        if (key == "map_size") s.map_size = val.get<int>();
        else if (key == "resolution") s.resolution = val.get<double>();
        else if (key == "texture") {
            std::string t = val.get<std::string>();
            if (t == "rich") s.texture = Texture::rich;
            else if (t == "sparse") s.texture = Texture::sparse;
            else throw FormatError("unknown texture: " + t);
        }
        else if (key == "n_frames") s.n_frames = val.get<int>();
        else if (key == "frame_size") s.frame_size = val.get<int>();
        else if (key == "max_rotation_deg") s.max_rotation_deg = val.get<double>();
        else if (key == "scale_min") s.scale_min = val.get<double>();
        else if (key == "scale_max") s.scale_max = val.get<double>();
        else if (key == "perspective_jitter") s.perspective_jitter = val.get<double>();
        else if (key == "noise_sigma") s.noise_sigma = val.get<double>();
        else if (key == "brightness_jitter") s.brightness_jitter = val.get<double>();
        else if (key == "contrast_jitter") s.contrast_jitter = val.get<double>();
        else if (key == "seed") s.seed = val.get<uint64_t>();
        else throw FormatError("unknown scene spec key: " + key);
    }
    s.validate();
    return s;
}

void save_scene_spec(const SceneSpec& spec, const std::string& path) {
    nlohmann::json j;
    j["map_size"] = spec.map_size;
    j["resolution"] = spec.resolution;
    j["texture"] = spec.texture == Texture::rich ? "rich" : "sparse";
    j["n_frames"] = spec.n_frames;
    j["frame_size"] = spec.frame_size;
    j["max_rotation_deg"] = spec.max_rotation_deg;
    j["scale_min"] = spec.scale_min;
    j["scale_max"] = spec.scale_max;
    j["perspective_jitter"] = spec.perspective_jitter;
    j["noise_sigma"] = spec.noise_sigma;
    j["brightness_jitter"] = spec.brightness_jitter;
    j["contrast_jitter"] = spec.contrast_jitter;
    j["seed"] = spec.seed;
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write scene spec: " + path);
    out << j.dump(2) << "\n";
}

}  // namespace glvl
