#pragma once

// Judge-scored hard-negative mining:
//   1. retrieve 2 * pool_size neighbours of the query with a frozen baseline
//      encoder, drop the target and anything with similarity >= delta, keep
//      the top pool_size (the candidate pool);
//   2. judge the target and every pool entry;
//   3. drop false negatives, i.e. entries scoring above
//      alpha = target_score - beta;
//   4. take a strided (cyclic) sample of the survivors, padded by repetition
//      to exactly mined_size entries;
//   5. if nothing survives, draw mined_size candidates at random from the
//      unfiltered top pool_size list and give each the fallback score.

#include "softalign/encoder.hpp"
#include "softalign/judge.hpp"
#include "softalign/retrieval.hpp"
#include "softalign/rng.hpp"

#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace softalign {

struct MinerConfig {
  int pool_size = 50;
  /// Similarity ceiling; has no default and must be set explicitly.
  double delta = std::numeric_limits<double>::quiet_NaN();
  double beta = 0.01;
  int cycle_interval = 5;
  int mined_size = 10;
  double fallback_score = 1.0;

  void validate() const;
};

struct PoolEntry {
  std::string candidate_id;
  double similarity = 0.0;   // baseline cosine to the query
  double judge_score = 0.0;  // filled in after judging
};

struct CandidatePool {
  std::string query_id;
  std::vector<PoolEntry> entries;      // similarity < delta, ranked
  RankedList initial;                  // unfiltered top pool_size minus the target
};

struct MinedNegative {
  std::string candidate_id;
  double score = 0.0;

  bool operator==(const MinedNegative&) const = default;
};

struct MinedSet {
  std::string query_id;
  std::string target_id;
  double target_score = 0.0;
  std::vector<MinedNegative> negatives;  // exactly mined_size entries
  bool fallback_used = false;

  bool operator==(const MinedSet&) const = default;
};

CandidatePool build_pool(std::string query_id, const Vector& query_embedding,
                         std::string_view target_id, const Index& index, const MinerConfig& config);

/// Embeds `query` with the frozen baseline encoder, then builds the pool.
CandidatePool build_pool(const Item& query, std::string_view target_id, const Index& index,
                         const EncoderParams& baseline, const MinerConfig& config);

/// Pool entries with judge_score <= target_score - beta, in pool order.
std::vector<PoolEntry> filter_false_negatives(const CandidatePool& pool, double target_score,
                                              double beta);

/// Positions picked by the cyclic rule over n ranked survivors: stride
/// `interval` starting at offset 0, then offset 1, ..., until m distinct picks
/// or the survivors run out; short results repeat earlier picks in order.
/// Empty when n == 0.
std::vector<std::size_t> cyclic_sample(std::size_t n, int interval, int m);

template <typename T>
std::vector<T> cyclic_sample(std::span<const T> survivors, int interval, int m) {
  std::vector<T> out;
  for (const auto i : cyclic_sample(survivors.size(), interval, m)) out.push_back(survivors[i]);
  return out;
}

/// Steps 3-5 for a pool whose judge scores are filled in.
MinedSet select_negatives(const CandidatePool& pool, std::string target_id, double target_score,
                          const MinerConfig& config, Rng& rng);

struct MineContext {
  const Corpus* corpus = nullptr;
  const Index* index = nullptr;            // built from baseline candidate embeddings
  const EmbeddingTable* baseline = nullptr;  // baseline embeddings of the queries
  const Judge* judge = nullptr;
  ScoreCache* cache = nullptr;             // optional
  JudgeBatchOptions judge_options;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

/// Full mining for one query. The RNG stream is derived from (seed, query id).
MinedSet mine_query(const std::string& query_id, const MineContext& ctx, const MinerConfig& config);

/// Mines every listed query; identical to calling mine_query on each.
std::vector<MinedSet> mine_queries(std::span<const std::string> query_ids, const MineContext& ctx,
                                   const MinerConfig& config);

/// One record per line, tab-separated, in this order:
///   query_id target_id target_score (candidate_id score)*M fallback(0|1)
void persist_mined(const std::filesystem::path& path, std::span<const MinedSet> sets,
                   std::string_view fingerprint = "-");
std::vector<MinedSet> load_mined(const std::filesystem::path& path, std::string* fingerprint = nullptr);

}  // namespace softalign
