#include "glvl/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "glvl/errors.hpp"
#include "glvl/rng.hpp"

namespace glvl {

const char* to_string(LocStatus s) {
    switch (s) {
        case LocStatus::ok: return "ok";
        case LocStatus::no_consensus: return "no_consensus";
        case LocStatus::no_candidates: return "no_candidates";
    }
    return "?";
}

std::shared_ptr<const DetectionResult> TileFeatureCache::get(
    int tile_id, const std::function<DetectionResult()>& compute) {
    {
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = cache_.find(tile_id);
        if (it != cache_.end()) return it->second;
    }
    auto value = std::make_shared<const DetectionResult>(compute());
    std::lock_guard<std::mutex> lock(mutex_);
    auto [it, _] = cache_.emplace(tile_id, std::move(value));
    return it->second;
}

LocalizationResult localize_frame(const QueryFrame& frame, const RetrievalIndex& index,
                                  const TileSet& tiles, const GeoRefMap& map,
                                  const LocalizerConfig& cfg, TileFeatureCache* cache) {
    auto t0 = std::chrono::steady_clock::now();
    LocalizationResult result;
    result.frame_id = frame.id;
    result.truth = frame.truth;

    auto finish = [&](LocStatus status) {
        result.status = status;
        result.elapsed_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (status == LocStatus::ok && frame.truth && result.predicted)
            result.error_m = geo_distance_m(*result.predicted, *frame.truth);
        return result;
    };

    if (index.entries.empty()) return finish(LocStatus::no_candidates);

    EmbeddingVector query;
    try {
        query = embed(frame.image, cfg.embedding);
    } catch (const DegenerateError&) {
        // Structureless frame: keep going with a zero query so retrieval
        // still yields candidates; matching will fail honestly below.
        query.values.assign(size_t(index.dim), 0.0);
    }
    CandidateList candidates = retrieve(index, query, cfg.k);
    if (candidates.empty()) return finish(LocStatus::no_candidates);

    DetectionResult frame_feats = builtin_detect(frame.image, cfg.detector);

    int best_inliers = -1;
    Homography best_h;
    int best_tile = -1;
    int best_matches = 0;
    for (const auto& cand : candidates) {
        std::shared_ptr<const DetectionResult> tile_feats;
        auto compute = [&] { return builtin_detect(crop(map, tiles.tile(cand.tile_id)), cfg.detector); };
        if (cache) {
            tile_feats = cache->get(cand.tile_id, compute);
        } else {
            tile_feats = std::make_shared<const DetectionResult>(compute());
        }

        MatchSet matches = match_descriptors(frame_feats.descriptors, frame_feats.points,
                                             tile_feats->descriptors, tile_feats->points, cfg.match);
        if (matches.size() < 4) continue;
        RansacResult fit;
        try {
            fit = ransac_fit(to_point_pairs(matches), cfg.ransac);
        } catch (const DegenerateError&) {
            continue;
        }
        // Candidates arrive in retrieval order, so strict improvement
        // implements the tie-break by smaller retrieval distance.
        if (fit.inlier_count > best_inliers) {
            best_inliers = fit.inlier_count;
            best_h = fit.h;
            best_tile = cand.tile_id;
            best_matches = int(matches.size());
        }
    }

    result.match_count = best_matches;
    if (best_inliers < cfg.min_final_inliers) return finish(LocStatus::no_consensus);

    result.inliers = best_inliers;
    result.tile_id = best_tile;
    PixelPoint tile_px = project_center(best_h, frame.image.width, frame.image.height);
    PixelPoint map_px = tile_pixel_to_map_pixel(tiles.tile(best_tile), tile_px);
    // The projection may fall marginally outside the raster; clamp for
    // the geodetic conversion.
    map_px.x = std::clamp(map_px.x, 0.0, double(map.width_px));
    map_px.y = std::clamp(map_px.y, 0.0, double(map.height_px));
    result.predicted = pixel_to_geo(map, map_px);
    return finish(LocStatus::ok);
}

FlightLog run_flight(const std::vector<QueryFrame>& frames, const RetrievalIndex& index,
                     const TileSet& tiles, const GeoRefMap& map, const LocalizerConfig& cfg,
                     uint64_t global_seed, int jobs) {
    if (frames.empty()) throw ConfigError("run_flight needs at least one frame");
    if (jobs < 1) jobs = 1;

    FlightLog log;
    log.global_seed = global_seed;
    log.config_fingerprint = cfg.embedding.fingerprint();
    log.results.resize(frames.size());

    TileFeatureCache cache;
    auto work = [&](size_t begin, size_t step) {
        for (size_t i = begin; i < frames.size(); i += step) {
            LocalizerConfig frame_cfg = cfg;
            frame_cfg.ransac.seed = mix_seed(global_seed, uint64_t(frames[i].id));
            log.results[i] = localize_frame(frames[i], index, tiles, map, frame_cfg, &cache);
        }
    };
    if (jobs == 1) {
        work(0, 1);
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < jobs; ++t) pool.emplace_back(work, size_t(t), size_t(jobs));
        for (auto& th : pool) th.join();
    }
    return log;
}

double ale(const FlightLog& log) {
    double sum = 0;
    int n = 0;
    for (const auto& r : log.results) {
        if (r.status == LocStatus::ok && r.error_m) {
            sum += *r.error_m;
            ++n;
        }
    }
    if (n == 0) throw MetricError("ALE undefined: no localized frames with ground truth");
    return sum / n;
}

int failure_count(const FlightLog& log) {
    int n = 0;
    for (const auto& r : log.results)
        if (r.status != LocStatus::ok) ++n;
    return n;
}

TimeStats time_stats(const FlightLog& log) {
    if (log.results.empty()) throw MetricError("time_stats on empty log");
    std::vector<double> times;
    times.reserve(log.results.size());
    double sum = 0;
    for (const auto& r : log.results) {
        times.push_back(r.elapsed_s);
        sum += r.elapsed_s;
    }
    std::sort(times.begin(), times.end());
    size_t n = times.size();
    double median = n % 2 ? times[n / 2] : 0.5 * (times[n / 2 - 1] + times[n / 2]);
    return {sum / double(n), median, times.back()};
}

namespace {

std::string fmt_deg(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9f", v);
    return buf;
}

std::string fmt_g(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

}  // namespace

std::string flight_log_csv(const FlightLog& log) {
    std::ostringstream out;
    out << "frame_id,status,pred_lat,pred_lon,gt_lat,gt_lon,err_m,tile_id,inliers,matches,elapsed_s\n";
    for (const auto& r : log.results) {
        out << r.frame_id << ',' << to_string(r.status) << ',';
        if (r.predicted) out << fmt_deg(r.predicted->lat) << ',' << fmt_deg(r.predicted->lon) << ',';
        else out << ",,";
        if (r.truth) out << fmt_deg(r.truth->lat) << ',' << fmt_deg(r.truth->lon) << ',';
        else out << ",,";
        if (r.error_m) out << fmt_g(*r.error_m);
        out << ',';
        if (r.tile_id) out << *r.tile_id;
        out << ',' << r.inliers << ',' << r.match_count << ',' << fmt_g(r.elapsed_s) << "\n";
    }
    return out.str();
}

std::string flight_log_jsonl(const FlightLog& log) {
    std::ostringstream out;
    for (const auto& r : log.results) {
        nlohmann::json j;
        j["frame_id"] = r.frame_id;
        j["status"] = to_string(r.status);
        if (r.predicted) {
            j["pred_lat"] = r.predicted->lat;
            j["pred_lon"] = r.predicted->lon;
        }
        if (r.error_m) j["err_m"] = *r.error_m;
        if (r.tile_id) j["tile_id"] = *r.tile_id;
        j["inliers"] = r.inliers;
        j["matches"] = r.match_count;
        j["elapsed_s"] = r.elapsed_s;
        out << j.dump() << "\n";
    }
    return out.str();
}

FlightLog flight_log_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) ||
        line != "frame_id,status,pred_lat,pred_lon,gt_lat,gt_lon,err_m,tile_id,inliers,matches,elapsed_s")
        throw FormatError("unexpected flight log CSV header");

    FlightLog log;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cols;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ',')) cols.push_back(cell);
        cols.resize(11);

        LocalizationResult r;
        try {
            r.frame_id = std::stoi(cols[0]);
            if (cols[1] == "ok") r.status = LocStatus::ok;
            else if (cols[1] == "no_consensus") r.status = LocStatus::no_consensus;
            else if (cols[1] == "no_candidates") r.status = LocStatus::no_candidates;
            else throw FormatError("unknown status in flight log: " + cols[1]);
            if (!cols[2].empty() && !cols[3].empty())
                r.predicted = GeoPoint{std::stod(cols[2]), std::stod(cols[3])};
            if (!cols[4].empty() && !cols[5].empty())
                r.truth = GeoPoint{std::stod(cols[4]), std::stod(cols[5])};
            if (!cols[6].empty()) r.error_m = std::stod(cols[6]);
            if (!cols[7].empty()) r.tile_id = std::stoi(cols[7]);
            if (!cols[8].empty()) r.inliers = std::stoi(cols[8]);
            if (!cols[9].empty()) r.match_count = std::stoi(cols[9]);
            if (!cols[10].empty()) r.elapsed_s = std::stod(cols[10]);
        } catch (const std::logic_error&) {
            throw FormatError("malformed flight log row: " + line);
        }
        log.results.push_back(r);
    }
    return log;
}

}  // namespace glvl
