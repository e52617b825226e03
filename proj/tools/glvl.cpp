#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "glvl/embedding.hpp"
#include "glvl/errors.hpp"
#include "glvl/hash.hpp"
#include "glvl/pipeline.hpp"
#include "glvl/retrieval.hpp"
#include "glvl/svg.hpp"
#include "glvl/synthgen.hpp"
#include "glvl/tiler.hpp"

namespace fs = std::filesystem;
using namespace glvl;

namespace {

constexpr const char* kVersion = "1.0.0";

// RunConfig keys accepted in --config documents. Flags win over config.
const std::vector<std::string> kConfigKeys = {
    "tile_size",      "stride",        "k",           "seed",       "gem_p",
    "provider",       "ratio",         "mutual",      "iterations", "inlier_threshold",
    "min_inliers",    "min_final_inliers", "threshold", "nms_radius", "max_count",
    "jobs"};

uint64_t schema_hash() {
    std::string all;
    for (const auto& k : kConfigKeys) all += k + ";";
    return fnv1a(all);
}

nlohmann::json load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open config: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad config json: ") + e.what());
    }
    for (const auto& [key, _] : j.items()) {
        if (std::find(kConfigKeys.begin(), kConfigKeys.end(), key) == kConfigKeys.end())
            throw ConfigError("unknown config key: " + key);
    }
    return j;
}

// Applies a config value to an option the user did not set on the
// command line.
template <typename T>
void merge(const nlohmann::json& cfg, const char* key, const CLI::Option* opt, T& value) {
    if (opt && opt->count() > 0) return;
    if (cfg.contains(key)) value = cfg.at(key).get<T>();
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write: " + path);
    out << text;
}

std::vector<QueryFrame> load_frames(const std::string& dir, const std::string& truth_csv) {
    std::vector<std::pair<int, fs::path>> entries;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.path().extension() != ".pgm" && e.path().extension() != ".ppm") continue;
        try {
            entries.emplace_back(std::stoi(e.path().stem().string()), e.path());
        } catch (const std::logic_error&) {
            throw FormatError("frame filename is not a numeric id: " + e.path().string());
        }
    }
    std::sort(entries.begin(), entries.end());
    if (entries.empty()) throw FormatError("no frames found in " + dir);

    std::map<int, GeoPoint> truth;
    if (!truth_csv.empty()) {
        std::ifstream in(truth_csv);
        if (!in) throw FormatError("cannot open truth csv: " + truth_csv);
        std::string line;
        std::getline(in, line);  // header
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            int id;
            double lat, lon;
            if (std::sscanf(line.c_str(), "%d,%lf,%lf", &id, &lat, &lon) != 3)
                throw FormatError("malformed truth row: " + line);
            truth[id] = {lat, lon};
        }
    }

    std::vector<QueryFrame> frames;
    for (const auto& [id, path] : entries) {
        QueryFrame f;
        f.id = id;
        f.image = load_image(path.string());
        auto it = truth.find(id);
        if (it != truth.end()) f.truth = it->second;
        frames.push_back(std::move(f));
    }
    return frames;
}

EmbeddingConfig make_embedding_config(const std::string& provider, double gem_p) {
    EmbeddingConfig ec;
    if (provider == "builtin") ec.provider = EmbeddingProvider::builtin;
    else if (provider == "import") ec.provider = EmbeddingProvider::import_file;
    else throw ConfigError("unknown provider: " + provider);
    ec.gem_p = gem_p;
    return ec;
}

int run(int argc, char** argv) {
    CLI::App app{"geo-localization of aerial frames against a satellite map"};
    app.require_subcommand(0, 1);
    app.set_version_flag("--version",
                         std::string("glvl ") + kVersion + " schema=" + std::to_string(schema_hash()));

    std::string config_path;
    app.add_option("--config", config_path, "JSON run configuration (flags win)");

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic scene");
    std::string synth_spec, synth_out;
    synth->add_option("--spec", synth_spec, "scene spec json (defaults used when omitted)");
    synth->add_option("--out", synth_out, "output scene directory")->required();

    // tile
    auto* tile = app.add_subcommand("tile", "crop a map into overlapping tiles");
    std::string tile_map, tile_geo, tile_out;
    int tile_size = 500, tile_stride = 250;
    bool tile_crops = false;
    tile->add_option("--map", tile_map, "map raster (PGM/PPM)")->required();
    tile->add_option("--geo", tile_geo, "geo sidecar json")->required();
    auto* o_tsize = tile->add_option("--tile-size", tile_size, "tile edge, px");
    auto* o_tstride = tile->add_option("--stride", tile_stride, "tile stride, px");
    tile->add_flag("--write-crops", tile_crops, "also write per-tile PGM crops");
    tile->add_option("--out", tile_out, "output tile directory")->required();

    // index
    auto* index_cmd = app.add_subcommand("index", "embed tiles into a retrieval index");
    std::string idx_tiles, idx_map, idx_geo, idx_out, idx_provider = "builtin";
    double idx_gem_p = 3.0;
    int idx_jobs = 1;
    index_cmd->add_option("--tiles", idx_tiles, "tile directory")->required();
    index_cmd->add_option("--map", idx_map, "map raster")->required();
    index_cmd->add_option("--geo", idx_geo, "geo sidecar json")->required();
    auto* o_provider = index_cmd->add_option("--provider", idx_provider, "builtin|import");
    auto* o_gem = index_cmd->add_option("--gem-p", idx_gem_p, "GeM exponent");
    auto* o_ijobs = index_cmd->add_option("--jobs", idx_jobs, "worker threads");
    index_cmd->add_option("--out", idx_out, "output index directory")->required();

    // localize
    auto* loc = app.add_subcommand("localize", "localize a frame sequence");
    std::string loc_index, loc_tiles, loc_map, loc_geo, loc_frames, loc_truth, loc_out;
    int loc_k = 5, loc_jobs = 1;
    uint64_t loc_seed = 1;
    double loc_gem_p = 3.0, loc_ratio = 0.8, loc_thresh = 3.0;
    int loc_iters = 2000, loc_min_inl = 15, loc_min_final = 15;
    bool loc_no_mutual = false;
    loc->add_option("--index", loc_index)->required();
    loc->add_option("--tiles", loc_tiles)->required();
    loc->add_option("--map", loc_map)->required();
    loc->add_option("--geo", loc_geo)->required();
    loc->add_option("--frames", loc_frames, "directory of NNN.pgm frames")->required();
    loc->add_option("--truth", loc_truth, "truth csv (frame_id,lat,lon)");
    auto* o_k = loc->add_option("--k", loc_k, "retrieval candidates");
    auto* o_seed = loc->add_option("--seed", loc_seed, "global seed");
    auto* o_lgem = loc->add_option("--gem-p", loc_gem_p, "GeM exponent");
    auto* o_ratio = loc->add_option("--ratio", loc_ratio, "Lowe ratio (1.0 disables)");
    auto* o_nomut = loc->add_flag("--no-mutual", loc_no_mutual, "disable mutual NN check");
    auto* o_iters = loc->add_option("--iterations", loc_iters, "RANSAC iterations");
    auto* o_ithr = loc->add_option("--inlier-threshold", loc_thresh, "RANSAC threshold, px");
    auto* o_mininl = loc->add_option("--min-inliers", loc_min_inl, "RANSAC minimum inliers");
    auto* o_minfin = loc->add_option("--min-final-inliers", loc_min_final, "acceptance inliers");
    auto* o_ljobs = loc->add_option("--jobs", loc_jobs, "worker threads");
    loc->add_option("--out", loc_out, "output log path (.csv; .jsonl mirrored)")->required();

    // eval
    auto* eval = app.add_subcommand("eval", "summarize a flight log");
    std::string eval_log, eval_plot, eval_geo;
    eval->add_option("--log", eval_log, "flight log csv")->required();
    eval->add_option("--plot", eval_plot, "SVG output prefix (writes <p>_traj.svg, <p>_err.svg)");
    eval->add_option("--geo", eval_geo, "map sidecar (needed for the trajectory plot)");

    // match
    auto* match_cmd = app.add_subcommand("match", "match two images");
    std::string m_a, m_b, m_viz;
    double m_ratio = 0.8;
    bool m_no_mutual = false;
    match_cmd->add_option("--a", m_a)->required();
    match_cmd->add_option("--b", m_b)->required();
    match_cmd->add_option("--viz", m_viz, "write side-by-side SVG");
    match_cmd->add_option("--ratio", m_ratio);
    match_cmd->add_flag("--no-mutual", m_no_mutual);

    CLI11_PARSE(app, argc, argv);

    nlohmann::json cfg = nlohmann::json::object();
    if (!config_path.empty()) cfg = load_run_config(config_path);

    if (*synth) {
        SceneSpec spec;
        if (!synth_spec.empty()) spec = load_scene_spec(synth_spec);
        merge(cfg, "seed", nullptr, spec.seed);
        SyntheticScene scene = generate_scene(spec);
        save_scene(scene, synth_out);
        save_scene_spec(spec, (fs::path(synth_out) / "spec.json").string());
        std::cout << "scene: " << scene.frames.size() << " frames, map " << scene.map.width_px
                  << "x" << scene.map.height_px << " -> " << synth_out << "\n";
        return 0;
    }

    if (*tile) {
        merge(cfg, "tile_size", o_tsize, tile_size);
        merge(cfg, "stride", o_tstride, tile_stride);
        GeoRefMap map = load_geo_map(tile_map, tile_geo);
        TileSet ts = make_tiles(map, tile_size, tile_stride, tile_map);
        save_tileset(ts, tile_out, tile_crops ? &map : nullptr);
        std::cout << "tiles: " << ts.tiles.size() << " -> " << tile_out << "\n";
        return 0;
    }

    if (*index_cmd) {
        merge(cfg, "provider", o_provider, idx_provider);
        merge(cfg, "gem_p", o_gem, idx_gem_p);
        merge(cfg, "jobs", o_ijobs, idx_jobs);
        GeoRefMap map = load_geo_map(idx_map, idx_geo);
        TileSet ts = load_tileset(idx_tiles);
        if (ts.map_sidecar.width_px != map.width_px || ts.map_sidecar.height_px != map.height_px)
            throw CompatError("tile manifest does not match the given map dimensions");
        EmbeddingConfig ec = make_embedding_config(idx_provider, idx_gem_p);
        RetrievalIndex index = build_index(ts, map, ec, idx_jobs);
        save_index(index, idx_out);
        std::cout << "index: " << index.entries.size() << " embeddings, dim " << index.dim
                  << " -> " << idx_out << "\n";
        return 0;
    }

    if (*loc) {
        merge(cfg, "k", o_k, loc_k);
        merge(cfg, "seed", o_seed, loc_seed);
        merge(cfg, "gem_p", o_lgem, loc_gem_p);
        merge(cfg, "ratio", o_ratio, loc_ratio);
        merge(cfg, "iterations", o_iters, loc_iters);
        merge(cfg, "inlier_threshold", o_ithr, loc_thresh);
        merge(cfg, "min_inliers", o_mininl, loc_min_inl);
        merge(cfg, "min_final_inliers", o_minfin, loc_min_final);
        merge(cfg, "jobs", o_ljobs, loc_jobs);
        if (cfg.contains("mutual") && o_nomut->count() == 0)
            loc_no_mutual = !cfg.at("mutual").get<bool>();

        GeoRefMap map = load_geo_map(loc_map, loc_geo);
        TileSet ts = load_tileset(loc_tiles);
        RetrievalIndex index = load_index(loc_index);
        if (index.tiles_fingerprint != ts.fingerprint)
            throw CompatError("index was built from a different tile set (fingerprint mismatch)");

        LocalizerConfig lc;
        lc.k = loc_k;
        lc.embedding.gem_p = loc_gem_p;
        if (lc.embedding.fingerprint() != index.provider_fingerprint)
            throw CompatError("embedding provider fingerprint mismatch: index '" +
                              index.provider_fingerprint + "' vs query '" +
                              lc.embedding.fingerprint() + "'");
        lc.match.ratio = loc_ratio;
        lc.match.mutual = !loc_no_mutual;
        lc.ransac.iterations = loc_iters;
        lc.ransac.inlier_threshold = loc_thresh;
        lc.ransac.min_inliers = loc_min_inl;
        lc.min_final_inliers = loc_min_final;

        std::vector<QueryFrame> frames = load_frames(loc_frames, loc_truth);
        FlightLog log = run_flight(frames, index, ts, map, lc, loc_seed, loc_jobs);

        write_text(loc_out, flight_log_csv(log));
        fs::path jsonl = fs::path(loc_out).replace_extension(".jsonl");
        write_text(jsonl.string(), flight_log_jsonl(log));
        int fails = failure_count(log);
        std::cout << "localized " << log.results.size() << " frames, failures " << fails << " -> "
                  << loc_out << "\n";
        return 0;
    }

    if (*eval) {
        std::ifstream in(eval_log);
        if (!in) throw FormatError("cannot open log: " + eval_log);
        std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        FlightLog log = flight_log_from_csv(text);

        int n = int(log.results.size());
        int fails = failure_count(log);
        double ale_m = std::numeric_limits<double>::quiet_NaN();
        try {
            ale_m = ale(log);
        } catch (const MetricError&) {
        }
        TimeStats stats = time_stats(log);
        char line[160];
        std::snprintf(line, sizeof(line), "ALE_m=%.6g failures=%d/%d mean_time_s=%.6g\n", ale_m,
                      fails, n, stats.mean_s);
        std::cout << line;

        if (!eval_plot.empty()) {
            write_text(eval_plot + "_err.svg", error_scatter_svg(log));
            if (!eval_geo.empty()) {
                GeoSidecar sc = load_geo_sidecar(eval_geo);
                write_text(eval_plot + "_traj.svg", trajectory_svg(log, sc));
            }
        }
        return 0;
    }

    if (*match_cmd) {
        Image a = load_image(m_a);
        Image b = load_image(m_b);
        DetectorConfig dc;
        DetectionResult fa = builtin_detect(a, dc);
        DetectionResult fb = builtin_detect(b, dc);
        MatchConfig mc;
        mc.ratio = m_ratio;
        mc.mutual = !m_no_mutual;
        MatchSet matches = match_descriptors(fa.descriptors, fa.points, fb.descriptors, fb.points, mc);
        std::cout << "keypoints " << fa.points.size() << "/" << fb.points.size() << ", matches "
                  << matches.size() << "\n";
        if (!m_viz.empty()) write_text(m_viz, match_svg(a, b, matches));
        return 0;
    }

    std::cerr << app.help();
    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const CompatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const RangeError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 4;
    }
}
