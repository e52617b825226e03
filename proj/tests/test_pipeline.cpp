#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "glvl/errors.hpp"
#include "glvl/pipeline.hpp"
#include "glvl/synthgen.hpp"

using namespace glvl;

namespace {

struct World {
    SyntheticScene scene;
    TileSet tiles;
    RetrievalIndex index;
    LocalizerConfig cfg;
};

World make_world(bool warp) {
    SceneSpec spec;
    spec.map_size = 800;
    spec.frame_size = 160;
    spec.n_frames = 5;
    spec.seed = 99;
    spec.noise_sigma = warp ? 0.02 : 0.0;
    if (!warp) {
        spec.max_rotation_deg = 0;
        spec.scale_min = 1;
        spec.scale_max = 1;
    }
    World w;
    w.scene = generate_scene(spec);
    w.tiles = make_tiles(w.scene.map, 200, 100);
    w.index = build_index(w.tiles, w.scene.map, w.cfg.embedding, 2);
    w.cfg.ransac.seed = 5;
    return w;
}

LocalizationResult hand_result(int id, LocStatus status, double err, double elapsed) {
    LocalizationResult r;
    r.frame_id = id;
    r.status = status;
    r.elapsed_s = elapsed;
    if (status == LocStatus::ok) {
        r.predicted = GeoPoint{0.001, 0.002};
        r.truth = GeoPoint{0.0011, 0.0021};
        r.error_m = err;
        r.tile_id = 3;
        r.inliers = 20;
        r.match_count = 30;
    }
    return r;
}

}  // namespace

TEST_CASE("exact crops localize within pixel resolution") {
    World w = make_world(false);
    TileFeatureCache cache;
    double res_m = 1.0;  // spec resolution at 1 m/px
    for (size_t i = 0; i < w.scene.frames.size(); ++i) {
        LocalizationResult r =
            localize_frame(w.scene.frames[i], w.index, w.tiles, w.scene.map, w.cfg, &cache);
        REQUIRE(r.status == LocStatus::ok);
        REQUIRE(r.error_m.has_value());
        CHECK(*r.error_m <= 2.0 * res_m);
        CHECK(r.inliers >= w.cfg.min_final_inliers);
    }
}

TEST_CASE("black frame yields no_consensus") {
    World w = make_world(false);
    QueryFrame black;
    black.id = 0;
    black.image = Image(160, 160, 0.f);
    LocalizationResult r = localize_frame(black, w.index, w.tiles, w.scene.map, w.cfg);
    CHECK(r.status == LocStatus::no_consensus);
    CHECK(!r.predicted.has_value());
}

TEST_CASE("empty index yields no_candidates") {
    World w = make_world(false);
    RetrievalIndex empty;
    empty.dim = w.index.dim;
    LocalizationResult r =
        localize_frame(w.scene.frames[0], empty, w.tiles, w.scene.map, w.cfg);
    CHECK(r.status == LocStatus::no_candidates);
}

TEST_CASE("run_flight: ids preserved, permutation independent, jobs independent") {
    World w = make_world(true);
    FlightLog serial = run_flight(w.scene.frames, w.index, w.tiles, w.scene.map, w.cfg, 7, 1);
    REQUIRE(serial.results.size() == w.scene.frames.size());
    for (size_t i = 0; i < serial.results.size(); ++i)
        CHECK(serial.results[i].frame_id == w.scene.frames[i].id);

    FlightLog parallel = run_flight(w.scene.frames, w.index, w.tiles, w.scene.map, w.cfg, 7, 4);

    std::vector<QueryFrame> reversed(w.scene.frames.rbegin(), w.scene.frames.rend());
    FlightLog rev = run_flight(reversed, w.index, w.tiles, w.scene.map, w.cfg, 7, 1);

    auto strip_time = [](FlightLog log) {
        std::sort(log.results.begin(), log.results.end(),
                  [](const LocalizationResult& a, const LocalizationResult& b) {
                      return a.frame_id < b.frame_id;
                  });
        for (auto& r : log.results) r.elapsed_s = 0;
        return flight_log_csv(log);
    };
    CHECK(strip_time(serial) == strip_time(parallel));
    CHECK(strip_time(serial) == strip_time(rev));
}

TEST_CASE("ale hand values") {
    FlightLog log;
    log.results.push_back(hand_result(0, LocStatus::ok, 2.0, 0.1));
    log.results.push_back(hand_result(1, LocStatus::ok, 4.0, 0.1));
    CHECK(ale(log) == doctest::Approx(3.0));

    log.results.push_back(hand_result(2, LocStatus::no_consensus, 0, 0.1));
    CHECK(ale(log) == doctest::Approx(3.0));  // failures excluded
    CHECK(failure_count(log) == 1);

    FlightLog empty;
    CHECK_THROWS_AS(ale(empty), MetricError);
    FlightLog all_failed;
    all_failed.results.push_back(hand_result(0, LocStatus::no_candidates, 0, 0.1));
    CHECK_THROWS_AS(ale(all_failed), MetricError);
    CHECK(failure_count(all_failed) == 1);
}

TEST_CASE("time_stats hand values") {
    FlightLog one;
    one.results.push_back(hand_result(0, LocStatus::ok, 1.0, 0.5));
    TimeStats s = time_stats(one);
    CHECK(s.mean_s == doctest::Approx(0.5));
    CHECK(s.median_s == doctest::Approx(0.5));
    CHECK(s.max_s == doctest::Approx(0.5));

    FlightLog log;
    log.results.push_back(hand_result(0, LocStatus::ok, 1.0, 0.2));
    log.results.push_back(hand_result(1, LocStatus::no_consensus, 0, 0.4));
    log.results.push_back(hand_result(2, LocStatus::ok, 1.0, 0.9));
    s = time_stats(log);
    CHECK(s.mean_s == doctest::Approx(0.5));
    CHECK(s.median_s == doctest::Approx(0.4));
    CHECK(s.max_s == doctest::Approx(0.9));

    CHECK_THROWS_AS(time_stats(FlightLog{}), MetricError);
}

TEST_CASE("flight log CSV round trip") {
    FlightLog log;
    log.results.push_back(hand_result(0, LocStatus::ok, 2.5, 0.125));
    log.results.push_back(hand_result(1, LocStatus::no_consensus, 0, 0.25));
    log.results.push_back(hand_result(2, LocStatus::no_candidates, 0, 0.0625));

    std::string csv = flight_log_csv(log);
    FlightLog back = flight_log_from_csv(csv);
    REQUIRE(back.results.size() == 3);
    CHECK(flight_log_csv(back) == csv);

    const auto& r0 = back.results[0];
    CHECK(r0.status == LocStatus::ok);
    CHECK(r0.predicted->lat == doctest::Approx(0.001).epsilon(1e-9));
    CHECK(*r0.error_m == doctest::Approx(2.5));
    CHECK(*r0.tile_id == 3);
    CHECK(r0.inliers == 20);
    const auto& r1 = back.results[1];
    CHECK(r1.status == LocStatus::no_consensus);
    CHECK(!r1.predicted.has_value());
    CHECK(!r1.error_m.has_value());

    CHECK_THROWS_AS(flight_log_from_csv("wrong,header\n"), FormatError);
    CHECK_THROWS_AS(
        flight_log_from_csv(
            "frame_id,status,pred_lat,pred_lon,gt_lat,gt_lon,err_m,tile_id,inliers,matches,elapsed_s\n"
            "x,ok,,,,,,,,,\n"),
        FormatError);
}

TEST_CASE("jsonl mirror carries one object per result") {
    FlightLog log;
    log.results.push_back(hand_result(0, LocStatus::ok, 2.5, 0.1));
    log.results.push_back(hand_result(1, LocStatus::no_consensus, 0, 0.2));
    std::string jsonl = flight_log_jsonl(log);
    CHECK(std::count(jsonl.begin(), jsonl.end(), '\n') == 2);
    CHECK(jsonl.find("\"status\":\"ok\"") != std::string::npos);
    CHECK(jsonl.find("no_consensus") != std::string::npos);
}

TEST_CASE("tile feature cache computes once per tile") {
    TileFeatureCache cache;
    int calls = 0;
    auto compute = [&] {
        ++calls;
        return DetectionResult{};
    };
    auto a = cache.get(4, compute);
    auto b = cache.get(4, compute);
    CHECK(calls == 1);
    CHECK(a.get() == b.get());
    cache.get(5, compute);
    CHECK(calls == 2);
}
