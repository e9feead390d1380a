#pragma once

// Distribution-alignment training of the encoder. For a query q with target
// c_t and k hard negatives:
//   P = softmax(cos(e_q, e_c) / tau)   over c in {c_t, c_1..c_k}
//   Q = softmax(s_{q,c} / tau)         from judge scores
//   loss = mean over queries of 0.5 * (KL(P||Q) + KL(Q||P))
// Q is data; gradients flow through P only. The one-hot variant replaces Q by
// the target indicator and minimises the cross-entropy -log P_target.

#include "softalign/encoder.hpp"
#include "softalign/miner.hpp"
#include "softalign/params.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace softalign {

enum class AlignLoss { soft_scores, one_hot };

std::string_view to_string(AlignLoss loss);
AlignLoss parse_align_loss(std::string_view name);

struct AlignConfig {
  double tau = 0.02;
  std::optional<double> score_tau;  // temperature for Q; defaults to tau
  int k_negatives = 8;
  int batch_size = 32;
  int steps = 500;
  SgdConfig optimizer{0.002, 0.9};
  AlignLoss loss = AlignLoss::soft_scores;
  int eval_every = 0;  // 0 disables the eval hook
  std::uint64_t seed = 0;
  unsigned threads = 1;

  double q_tau() const { return score_tau.value_or(tau); }
  void validate() const;
};

/// Query, target and k negatives with judge scores (target first).
struct TrainingExample {
  const Item* query = nullptr;
  const Item* target = nullptr;
  std::vector<const Item*> negatives;
  Vector scores;
};

/// softmax(cos(e_q, column) / tau) over the columns of `candidates` (target first).
Distribution relation_distribution(const Vector& query, const Matrix& candidates, double tau);

/// softmax(scores / tau).
Distribution score_distribution(const Vector& scores, double tau);

/// Uses the k highest-scoring negatives of the mined set (ties keep mined order).
TrainingExample make_example(const Corpus& corpus, const MinedSet& mined, int k);

struct AlignLossResult {
  double loss = 0.0;
  EncoderParams grads;
};

/// Mean per-query loss over the batch and its gradient w.r.t. the encoder.
AlignLossResult alignment_loss(std::span<const TrainingExample> batch, const EncoderParams& params,
                               const AlignConfig& config);

struct TraceRecord {
  int step = 0;
  double loss = 0.0;
  std::optional<double> eval_precision_at_1;
};

using BatchSource = std::function<std::vector<TrainingExample>(int step)>;
using EvalHook = std::function<double(const EncoderParams&)>;

struct AlignTrainResult {
  EncoderParams params;
  std::vector<TraceRecord> trace;
};

/// Runs config.steps optimizer steps on batches from `batches`.
AlignTrainResult train_on_batches(const BatchSource& batches, EncoderParams init,
                                  const AlignConfig& config, const EvalHook& eval = {});

/// Trains on mined sets: each step takes the next batch_size sets from a
/// seeded reshuffle of all sets (reshuffled every epoch).
AlignTrainResult train_encoder(const Corpus& corpus, std::span<const MinedSet> mined,
                               EncoderParams init, const AlignConfig& config,
                               const EvalHook& eval = {});

/// Metrics trace, one JSON object per line: {"step":..,"loss":..[,"eval_p1":..]}.
void write_trace(const std::filesystem::path& path, std::span<const TraceRecord> trace,
                 std::string_view fingerprint);

}  // namespace softalign
