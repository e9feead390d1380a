#pragma once

// Pair-scoring reranker over frozen embeddings. One logit head serves both
// objectives: sigmoid(logit) is P(YES) for the pairwise loss and a softmax
// over the logits of a candidate list gives the listwise position loss.
//   logit(q, c) = w2 . tanh(w1 * [e_q ; e_c ; e_q * e_c] + b1) + b2

#include "softalign/encoder.hpp"
#include "softalign/miner.hpp"
#include "softalign/params.hpp"
#include "softalign/retrieval.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace softalign {

struct RerankerDims {
  int emb = 32;
  int hidden = 32;

  int input() const { return 3 * emb; }
  bool operator==(const RerankerDims&) const = default;
};

struct RerankerParams {
  RerankerDims dims;
  Matrix w1;  // hidden x 3*emb
  Vector b1;  // hidden
  Vector w2;  // hidden
  Vector b2;  // 1

  static RerankerParams zeros(const RerankerDims& dims);

  template <typename F>
  void visit(F&& f) {
    f("w1", w1);
    f("b1", b1);
    f("w2", w2);
    f("b2", b2);
  }
  template <typename F>
  void visit(F&& f) const {
    f("w1", w1);
    f("b1", b1);
    f("w2", w2);
    f("b2", b2);
  }
};

/// Output weight of the cosine unit at initialisation: 1 / 0.02, the
/// alignment temperature, so initial list softmaxes match the encoder's.
inline constexpr double kCosineReadout = 50.0;

/// Random hidden layer, except that unit 0 computes tanh(cos(e_q, e_c) - 1)
/// and is the only unit with a non-zero output weight: the initial logit is a
/// monotone function of the retrieval cosine.
RerankerParams init_reranker(const RerankerDims& dims, std::uint64_t seed);

Vector pair_features(const Vector& query, const Vector& candidate);
double pair_logit(const RerankerParams& params, const Vector& query, const Vector& candidate);

/// Adds d_logit * d(logit)/d(params) to `grads`.
void pair_logit_backward(const RerankerParams& params, const Vector& query, const Vector& candidate,
                         double d_logit, RerankerParams& grads);

struct RerankerLoss {
  double loss = 0.0;
  RerankerParams grads;
};

/// BCE(YES | q, target) + BCE(NO | q, hardest negative).
RerankerLoss pairwise_loss(const RerankerParams& params, const Vector& query, const Vector& target,
                           const Vector& hardest_negative);

/// Cross-entropy of the softmax over list logits against `target_index`.
/// `candidates` holds one embedding per column.
RerankerLoss listwise_loss(const RerankerParams& params, const Vector& query,
                           const Matrix& candidates, int target_index);

/// A list of x highest-score negatives with the target inserted at target_index.
struct ListwiseSample {
  std::string query_id;
  std::vector<std::string> candidate_ids;
  int target_index = 0;
};

/// The x highest-score negatives of `mined` (ties keep mined order) with the
/// target inserted at a uniformly drawn position.
ListwiseSample make_listwise_sample(const MinedSet& mined, int x, Rng& rng);

struct RerankConfig {
  RerankerDims dims;
  int list_size = 4;  // x negatives per listwise sample
  int batch_size = 32;
  int steps = 500;
  SgdConfig optimizer{0.003, 0.0};
  int depth = 10;  // retrieval depth reranked at inference
  std::uint64_t seed = 0;
  unsigned threads = 1;

  void validate() const;
};

struct RerankTrainResult {
  RerankerParams params;
  std::vector<double> loss_trace;
};

/// Joint pairwise + listwise training on frozen embeddings of every item
/// referenced by `mined`.
RerankTrainResult train_reranker(std::span<const MinedSet> mined, const EmbeddingTable& embeddings,
                                 RerankerParams init, const RerankConfig& config);

/// Reorders `ranked` by descending pair logit; ties keep their retrieval order.
/// Entry scores become P(YES) = sigmoid(logit).
RankedList rerank(const RerankerParams& params, const Vector& query, const RankedList& ranked,
                  const EmbeddingTable& candidates);

/// Embeds the query and the listed candidates with `encoder`, then reranks.
RankedList rerank(const RerankerParams& params, const Item& query, const RankedList& ranked,
                  const Corpus& corpus, const EncoderParams& encoder);

}  // namespace softalign
