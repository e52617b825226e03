#pragma once

#include <string>
#include <vector>

#include "glvl/embedding.hpp"
#include "glvl/tiler.hpp"

namespace glvl {

struct IndexEntry {
    int tile_id = 0;
    EmbeddingVector embedding;
    bool degenerate = false;  // flagged tiles sit at infinite distance
};

struct RetrievalIndex {
    std::vector<IndexEntry> entries;
    int dim = 0;
    std::string provider_fingerprint;
    uint64_t tiles_fingerprint = 0;
};

struct Candidate {
    int tile_id = 0;
    double distance = 0.0;
};

// Ordered by nondecreasing distance, ties by lower tile_id.
using CandidateList = std::vector<Candidate>;

// Embeds every tile crop. Degenerate (structureless) tiles are flagged
// rather than failing the build. jobs >= 1 parallelizes per tile with a
// deterministic merge.
RetrievalIndex build_index(const TileSet& tiles, const GeoRefMap& map, const EmbeddingConfig& config,
                           int jobs = 1);

// Exact exhaustive top-k by Euclidean distance.
CandidateList retrieve(const RetrievalIndex& index, const EmbeddingVector& query, int k);

// Same, with the provider fingerprint check the CLI path uses.
CandidateList retrieve_checked(const RetrievalIndex& index, const EmbeddingVector& query, int k,
                               const std::string& query_fingerprint);

// Fraction of queries whose truth set intersects its top-k candidates.
double recall_at_k(const std::vector<CandidateList>& results,
                   const std::vector<std::vector<int>>& truth, int k);

// index/manifest.json + index/embeddings.tbf (rank-2, [m, C]).
void save_index(const RetrievalIndex& index, const std::string& dir);
RetrievalIndex load_index(const std::string& dir);

}  // namespace glvl
