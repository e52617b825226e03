#pragma once

#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "glvl/embedding.hpp"
#include "glvl/frame.hpp"
#include "glvl/homography.hpp"
#include "glvl/keypoints.hpp"
#include "glvl/matching.hpp"
#include "glvl/retrieval.hpp"
#include "glvl/tiler.hpp"

namespace glvl {

struct LocalizerConfig {
    int k = 5;
    EmbeddingConfig embedding;
    DetectorConfig detector;
    MatchConfig match;
    RansacConfig ransac;
    int min_final_inliers = 15;
};

enum class LocStatus { ok, no_consensus, no_candidates };

const char* to_string(LocStatus s);

struct LocalizationResult {
    int frame_id = 0;
    LocStatus status = LocStatus::no_candidates;
    std::optional<GeoPoint> predicted;
    std::optional<GeoPoint> truth;
    std::optional<int> tile_id;
    int inliers = 0;
    int match_count = 0;
    double elapsed_s = 0;
    std::optional<double> error_m;  // present iff truth and prediction both known
};

struct FlightLog {
    std::vector<LocalizationResult> results;
    std::string config_fingerprint;
    uint64_t global_seed = 0;
};

// Tile detections are identical across frames; cache them per run.
class TileFeatureCache {
public:
    std::shared_ptr<const DetectionResult> get(int tile_id,
                                               const std::function<DetectionResult()>& compute);

private:
    std::mutex mutex_;
    std::unordered_map<int, std::shared_ptr<const DetectionResult>> cache_;
};

// One frame, no temporal prior: retrieve top-k tiles, match each, keep
// the candidate with the most RANSAC inliers (ties by retrieval
// distance), project the frame center into the map and convert to
// geodetic coordinates.
LocalizationResult localize_frame(const QueryFrame& frame, const RetrievalIndex& index,
                                  const TileSet& tiles, const GeoRefMap& map,
                                  const LocalizerConfig& cfg, TileFeatureCache* cache = nullptr);

// Per-frame RANSAC seed = mix(global_seed, frame id), so serial and
// parallel runs agree bit-exactly (timing fields excluded).
FlightLog run_flight(const std::vector<QueryFrame>& frames, const RetrievalIndex& index,
                     const TileSet& tiles, const GeoRefMap& map, const LocalizerConfig& cfg,
                     uint64_t global_seed, int jobs = 1);

// Mean error over ok-with-truth results. Throws MetricError when none.
double ale(const FlightLog& log);

// Frames counted as failures: any status other than ok.
int failure_count(const FlightLog& log);

struct TimeStats {
    double mean_s = 0;
    double median_s = 0;
    double max_s = 0;
};
TimeStats time_stats(const FlightLog& log);

// CSV header:
// frame_id,status,pred_lat,pred_lon,gt_lat,gt_lon,err_m,tile_id,inliers,matches,elapsed_s
std::string flight_log_csv(const FlightLog& log);
std::string flight_log_jsonl(const FlightLog& log);
FlightLog flight_log_from_csv(const std::string& text);

}  // namespace glvl
