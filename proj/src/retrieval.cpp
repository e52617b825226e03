#include "glvl/retrieval.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <limits>
#include <thread>

#include <json.hpp>

#include "glvl/errors.hpp"
#include "glvl/tbf.hpp"

namespace fs = std::filesystem;

namespace glvl {

RetrievalIndex build_index(const TileSet& tiles, const GeoRefMap& map, const EmbeddingConfig& config,
                           int jobs) {
    if (tiles.tiles.empty()) throw ConfigError("cannot index an empty tile set");
    if (jobs < 1) jobs = 1;

    RetrievalIndex index;
    index.provider_fingerprint = config.fingerprint();
    index.tiles_fingerprint = tiles.fingerprint;
    index.entries.resize(tiles.tiles.size());

    auto work = [&](size_t begin, size_t step) {
        for (size_t i = begin; i < tiles.tiles.size(); i += step) {
            IndexEntry e;
            e.tile_id = tiles.tiles[i].id;
            try {
                e.embedding = embed(crop(map, tiles.tiles[i]), config);
            } catch (const DegenerateError&) {
                e.degenerate = true;
                e.embedding.values.assign(size_t(2 * config.orientation_bins), 0.0);
            }
            index.entries[i] = std::move(e);
        }
    };
    if (jobs == 1) {
        work(0, 1);
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < jobs; ++t) pool.emplace_back(work, size_t(t), size_t(jobs));
        for (auto& th : pool) th.join();
    }
    index.dim = index.entries.front().embedding.dim();
    return index;
}

CandidateList retrieve(const RetrievalIndex& index, const EmbeddingVector& query, int k) {
    if (k < 1) throw ConfigError("k must be >= 1");
    if (query.dim() != index.dim) throw ShapeError("query dimension mismatch with index");

    CandidateList all;
    all.reserve(index.entries.size());
    for (const auto& e : index.entries) {
        double d = e.degenerate ? std::numeric_limits<double>::infinity()
                                : euclidean_distance(query, e.embedding);
        all.push_back({e.tile_id, d});
    }
    std::sort(all.begin(), all.end(), [](const Candidate& a, const Candidate& b) {
        if (a.distance != b.distance) return a.distance < b.distance;
        return a.tile_id < b.tile_id;
    });
    if (int(all.size()) > k) all.resize(size_t(k));
    // Flagged entries are never retrieved.
    while (!all.empty() && std::isinf(all.back().distance)) all.pop_back();
    return all;
}

CandidateList retrieve_checked(const RetrievalIndex& index, const EmbeddingVector& query, int k,
                               const std::string& query_fingerprint) {
    if (query_fingerprint != index.provider_fingerprint)
        throw CompatError("embedding provider fingerprint mismatch: index built with '" +
                          index.provider_fingerprint + "', query uses '" + query_fingerprint + "'");
    return retrieve(index, query, k);
}

double recall_at_k(const std::vector<CandidateList>& results,
                   const std::vector<std::vector<int>>& truth, int k) {
    if (k < 1) throw ConfigError("k must be >= 1");
    if (results.size() != truth.size()) throw ShapeError("results/truth length mismatch");
    if (results.empty()) return 0.0;
    size_t hits = 0;
    for (size_t i = 0; i < results.size(); ++i) {
        const auto& cand = results[i];
        size_t n = std::min(size_t(k), cand.size());
        bool hit = false;
        for (size_t j = 0; j < n && !hit; ++j)
            hit = std::find(truth[i].begin(), truth[i].end(), cand[j].tile_id) != truth[i].end();
        if (hit) ++hits;
    }
    return double(hits) / double(results.size());
}

void save_index(const RetrievalIndex& index, const std::string& dir) {
    fs::create_directories(dir);
    nlohmann::json j;
    j["dim"] = index.dim;
    j["provider_fingerprint"] = index.provider_fingerprint;
    j["tiles_fingerprint"] = index.tiles_fingerprint;
    nlohmann::json degen = nlohmann::json::array();
    for (const auto& e : index.entries)
        if (e.degenerate) degen.push_back(e.tile_id);
    j["degenerate_tiles"] = std::move(degen);
    j["count"] = index.entries.size();
    std::ofstream out(fs::path(dir) / "manifest.json");
    if (!out) throw FormatError("cannot write index manifest in " + dir);
    out << j.dump(2) << "\n";

    Tensor t;
    t.shape = {int64_t(index.entries.size()), int64_t(index.dim)};
    t.data.reserve(index.entries.size() * size_t(index.dim));
    for (const auto& e : index.entries)
        for (double v : e.embedding.values) t.data.push_back(float(v));
    save_tbf(t, (fs::path(dir) / "embeddings.tbf").string());
}

RetrievalIndex load_index(const std::string& dir) {
    std::ifstream in(fs::path(dir) / "manifest.json");
    if (!in) throw FormatError("cannot open index manifest in " + dir);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad index manifest json: ") + e.what());
    }
    RetrievalIndex index;
    std::vector<int> degen;
    try {
        index.dim = j.at("dim").get<int>();
        index.provider_fingerprint = j.at("provider_fingerprint").get<std::string>();
        index.tiles_fingerprint = j.at("tiles_fingerprint").get<uint64_t>();
        degen = j.at("degenerate_tiles").get<std::vector<int>>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("index manifest missing field: ") + e.what());
    }

    Tensor t = load_tbf((fs::path(dir) / "embeddings.tbf").string());
    if (t.rank() != 2 || t.shape[1] != index.dim)
        throw FormatError("index embeddings tensor must be rank-2 [m, dim]");
    size_t m = size_t(t.shape[0]);
    index.entries.resize(m);
    for (size_t i = 0; i < m; ++i) {
        index.entries[i].tile_id = int(i);
        index.entries[i].embedding.values.assign(t.data.begin() + int64_t(i) * index.dim,
                                                 t.data.begin() + int64_t(i + 1) * index.dim);
    }
    for (int id : degen)
        if (id >= 0 && size_t(id) < m) index.entries[size_t(id)].degenerate = true;
    return index;
}

}  // namespace glvl
