#pragma once

// End-to-end orchestration. Every stage writes one artifact into the output
// directory and loads it on later runs, refusing files written under a
// different configuration fingerprint:
//
//   gen-data        corpus.tsv, ground_truth.json
//   embed           pool_encoder.ckpt, pool_embeddings.tsv
//   judge           score_cache.tsv
//   mine            mined.tsv
//   train-embed     encoder.ckpt, encoder_trace.jsonl
//   train-baseline  encoder_onehot.ckpt, encoder_onehot_trace.jsonl
//   train-rerank    reranker.ckpt
//   retrieve        retrieved.tsv
//   rerank          reranked.tsv
//   eval            report.txt, report.jsonl
//
// A stage computes whatever upstream artifacts are missing.

#include "softalign/aligner.hpp"
#include "softalign/config.hpp"
#include "softalign/datagen.hpp"
#include "softalign/encoder.hpp"
#include "softalign/errors.hpp"
#include "softalign/judge.hpp"
#include "softalign/metrics.hpp"
#include "softalign/miner.hpp"
#include "softalign/reranker.hpp"
#include "softalign/retrieval.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace softalign {

/// A pipeline stage failed; what() names the stage and the cause.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& cause)
      : Error("stage '" + stage + "' failed: " + cause), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

/// Deterministic train/holdout split of the corpus queries; both lists keep
/// corpus order.
struct QuerySplit {
  std::vector<std::string> train;
  std::vector<QueryTarget> holdout;
};

QuerySplit split_queries(const Corpus& corpus, double holdout_fraction, std::uint64_t seed);

/// One-hot contrastive warm-up against uniformly drawn negatives; produces
/// the frozen encoder that builds the mining pools.
EncoderParams train_pool_encoder(const Corpus& corpus, std::span<const std::string> train_queries,
                                 EncoderParams init, const PoolEncoderConfig& config,
                                 std::uint64_t seed, unsigned threads = 1);

/// The aligner with Q replaced by the target indicator.
AlignTrainResult baseline_infonce_train(const Corpus& corpus, std::span<const MinedSet> mined,
                                        EncoderParams init, AlignConfig config,
                                        const EvalHook& eval = {});

/// Top `depth` candidates of each query under `encoder`.
RankedLists retrieve_all(const EncoderParams& encoder, const Corpus& corpus,
                         std::span<const QueryTarget> queries, std::size_t depth, unsigned threads);

/// Reranks the first `depth` entries of every list; the tail keeps retrieval order.
RankedLists rerank_all(const RerankerParams& reranker, const EncoderParams& encoder,
                       const Corpus& corpus, const RankedLists& retrieved, int depth,
                       unsigned threads);

void write_ranked_lists(const std::filesystem::path& path, const RankedLists& lists,
                        std::span<const QueryTarget> order, std::string_view fingerprint);
RankedLists read_ranked_lists(const std::filesystem::path& path, std::string* fingerprint = nullptr);

class Pipeline {
 public:
  /// `reuse` lists directories whose artifacts may be copied in when their
  /// fingerprint matches (used by sweeps to share upstream stages).
  Pipeline(RunConfig config, std::filesystem::path out_dir,
           std::vector<std::filesystem::path> reuse = {});
  ~Pipeline();

  const RunConfig& config() const { return config_; }
  const StageFingerprints& fingerprints() const { return fp_; }
  const std::filesystem::path& out_dir() const { return out_; }

  const SyntheticData& data();
  const QuerySplit& split();
  const EncoderParams& pool_encoder();
  const EmbeddingTable& pool_embeddings();
  ScoreCache& judge_scores();
  const std::vector<MinedSet>& mined();
  const EncoderParams& encoder();
  const EncoderParams& onehot_encoder();
  const RerankerParams& reranker();
  const RankedLists& retrieved();
  const RankedLists& reranked();
  /// Reports for the random-init encoder ("init"), the trained encoder
  /// ("retrieval") and the reranked lists ("reranked"), on held-out queries.
  std::vector<EvalReport> evaluate();

  /// Runs every stage in order.
  std::vector<EvalReport> run();

  /// Held-out P@1 of an arbitrary encoder (used for training traces and comparisons).
  double holdout_precision_at_1(const EncoderParams& encoder);

 private:
  template <typename F>
  decltype(auto) stage(const char* name, F&& body);
  std::filesystem::path path(std::string_view name) const;
  bool locate(std::string_view name, std::string_view fingerprint);
  const Index& pool_index();
  std::unique_ptr<Judge> make_judge();
  EncoderParams initial_encoder() const;
  AlignTrainResult train_aligned(AlignConfig cfg, std::string_view trace_name, std::string_view fp);

  RunConfig config_;
  std::filesystem::path out_;
  std::vector<std::filesystem::path> reuse_;
  StageFingerprints fp_;

  std::optional<SyntheticData> data_;
  std::optional<QuerySplit> split_;
  std::optional<EncoderParams> pool_encoder_;
  std::optional<EmbeddingTable> pool_embeddings_;
  std::optional<Index> pool_index_;
  std::unique_ptr<ScoreCache> cache_;
  bool cache_complete_ = false;
  std::optional<std::vector<MinedSet>> mined_;
  std::optional<EncoderParams> encoder_;
  std::optional<EncoderParams> onehot_encoder_;
  std::optional<RerankerParams> reranker_;
  std::optional<RankedLists> retrieved_;
  std::optional<RankedLists> reranked_;
};

/// run() over a fresh Pipeline.
std::vector<EvalReport> run_pipeline(const RunConfig& config, const std::filesystem::path& out_dir);

enum class SweepAxis { k_negatives, tau, components, judge_noise };

SweepAxis parse_sweep_axis(std::string_view name);
std::string_view to_string(SweepAxis axis);

/// Standard ablation grids: k {4,6,8,10}, tau {0.01,0.02,0.03},
/// components {onehot,soft}, judge_noise {0,0.1,0.2,0.4}.
std::vector<std::string> default_sweep_values(SweepAxis axis);

/// Applies one axis value to a copy of `base`; throws on an unparsable value.
RunConfig with_axis_value(const RunConfig& base, SweepAxis axis, std::string_view value);

struct SweepRow {
  std::string value;
  std::vector<EvalReport> reports;  // empty when the run failed
  std::string error;
};

struct SweepResult {
  SweepAxis axis;
  std::vector<SweepRow> rows;
};

/// One full pipeline run per value under `out_dir/<axis>-<value>`, sharing the
/// seed. A failing run is recorded in its row and the sweep moves on. Writes
/// sweep-<axis>.txt and sweep-<axis>.jsonl into `out_dir`.
SweepResult ablation_sweep(const RunConfig& base, SweepAxis axis, std::span<const std::string> values,
                           const std::filesystem::path& out_dir);

std::string format_sweep_table(const SweepResult& result);
std::string format_sweep_jsonl(const SweepResult& result);

}  // namespace softalign
