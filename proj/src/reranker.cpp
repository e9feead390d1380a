#include "softalign/reranker.hpp"

#include "softalign/parallel.hpp"
#include "softalign/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace softalign {

RerankerParams RerankerParams::zeros(const RerankerDims& dims) {
  if (dims.emb < 1 || dims.hidden < 1) throw std::invalid_argument("reranker dimensions must be positive");
  RerankerParams p;
  p.dims = dims;
  p.w1 = Matrix::Zero(dims.hidden, dims.input());
  p.b1 = Vector::Zero(dims.hidden);
  p.w2 = Vector::Zero(dims.hidden);
  p.b2 = Vector::Zero(1);
  return p;
}

RerankerParams init_reranker(const RerankerDims& dims, std::uint64_t seed) {
  RerankerParams p = RerankerParams::zeros(dims);
  Rng rng(seed);
  const auto fill = [&](auto& t, double fan_in) {
    const double bound = 1.0 / std::sqrt(fan_in);
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = uniform(rng, -bound, bound);
  };
  fill(p.w1, dims.input());
  // Unit 0 starts as tanh(cos(e_q, e_c) - 1), unsaturated over the useful
  // cosine range, and is the only unit read out: an untrained reranker
  // reproduces the retrieval order. The other units enter as their output
  // weights move away from zero.
  p.w1.row(0).setZero();
  p.w1.row(0).tail(dims.emb).setConstant(1.0);
  p.b1[0] = -1.0;
  p.w2[0] = kCosineReadout;
  return p;
}

Vector pair_features(const Vector& query, const Vector& candidate) {
  if (query.size() != candidate.size()) throw std::invalid_argument("pair_features: dimension mismatch");
  Vector f(3 * query.size());
  f << query, candidate, query.cwiseProduct(candidate);
  return f;
}

namespace {

void check_dims(const RerankerParams& params, const Vector& query) {
  if (query.size() != params.dims.emb) {
    throw std::invalid_argument("reranker: embedding dimension " + std::to_string(query.size()) +
                                " does not match " + std::to_string(params.dims.emb));
  }
}

// log(1 + exp(x)) without overflow
double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

double pair_logit(const RerankerParams& params, const Vector& query, const Vector& candidate) {
  check_dims(params, query);
  const Vector f = pair_features(query, candidate);
  const Vector h = (params.w1 * f + params.b1).array().tanh();
  return params.w2.dot(h) + params.b2[0];
}

void pair_logit_backward(const RerankerParams& params, const Vector& query, const Vector& candidate,
                         double d_logit, RerankerParams& grads) {
  check_dims(params, query);
  const Vector f = pair_features(query, candidate);
  const Vector h = (params.w1 * f + params.b1).array().tanh();
  grads.w2 += d_logit * h;
  grads.b2[0] += d_logit;
  const Vector d_pre = (d_logit * params.w2).array() * (1.0 - h.array().square());
  grads.w1.noalias() += d_pre * f.transpose();
  grads.b1 += d_pre;
}

RerankerLoss pairwise_loss(const RerankerParams& params, const Vector& query, const Vector& target,
                           const Vector& hardest_negative) {
  const double pos = pair_logit(params, query, target);
  const double neg = pair_logit(params, query, hardest_negative);
  RerankerLoss out;
  // -log sigmoid(pos) - log(1 - sigmoid(neg))
  out.loss = softplus(-pos) + softplus(neg);
  out.grads = RerankerParams::zeros(params.dims);
  pair_logit_backward(params, query, target, sigmoid(pos) - 1.0, out.grads);
  pair_logit_backward(params, query, hardest_negative, sigmoid(neg), out.grads);
  return out;
}

RerankerLoss listwise_loss(const RerankerParams& params, const Vector& query,
                           const Matrix& candidates, int target_index) {
  if (candidates.cols() < 2) throw std::invalid_argument("listwise_loss: need at least 2 candidates");
  if (target_index < 0 || target_index >= candidates.cols()) {
    throw std::invalid_argument("listwise_loss: target index out of range");
  }
  Vector logits(candidates.cols());
  for (Eigen::Index j = 0; j < candidates.cols(); ++j) logits[j] = pair_logit(params, query, candidates.col(j));
  const double m = logits.maxCoeff();
  const double lse = m + std::log((logits.array() - m).exp().sum());
  const Distribution p = softmax_t(logits, 1.0);

  RerankerLoss out;
  out.loss = lse - logits[target_index];
  out.grads = RerankerParams::zeros(params.dims);
  for (Eigen::Index j = 0; j < candidates.cols(); ++j) {
    const double d = p[j] - (j == target_index ? 1.0 : 0.0);
    pair_logit_backward(params, query, candidates.col(j), d, out.grads);
  }
  return out;
}

namespace {

std::vector<std::size_t> by_score_desc(const MinedSet& mined) {
  std::vector<std::size_t> order(mined.negatives.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return mined.negatives[a].score > mined.negatives[b].score;
  });
  return order;
}

}  // namespace

ListwiseSample make_listwise_sample(const MinedSet& mined, int x, Rng& rng) {
  if (x < 1 || static_cast<std::size_t>(x) > mined.negatives.size()) {
    throw std::invalid_argument("mined set for '" + mined.query_id + "' has fewer than " +
                                std::to_string(x) + " negatives");
  }
  const auto order = by_score_desc(mined);
  ListwiseSample s;
  s.query_id = mined.query_id;
  for (int i = 0; i < x; ++i) s.candidate_ids.push_back(mined.negatives[order[static_cast<std::size_t>(i)]].candidate_id);
  std::uniform_int_distribution<int> pos(0, x);
  s.target_index = pos(rng);
  s.candidate_ids.insert(s.candidate_ids.begin() + s.target_index, mined.target_id);
  return s;
}

void RerankConfig::validate() const {
  if (list_size < 1 || batch_size < 1 || steps < 0 || depth < 1) {
    throw std::invalid_argument("rerank: list_size, batch_size, depth must be >= 1 and steps >= 0");
  }
}

RerankTrainResult train_reranker(std::span<const MinedSet> mined, const EmbeddingTable& embeddings,
                                 RerankerParams init, const RerankConfig& config) {
  config.validate();
  if (mined.empty()) throw std::invalid_argument("train_reranker: no mined sets");
  for (const auto& m : mined) {
    if (m.negatives.size() < static_cast<std::size_t>(config.list_size)) {
      throw std::invalid_argument("mined set for '" + m.query_id + "' is smaller than list size " +
                                  std::to_string(config.list_size));
    }
  }
  RerankTrainResult result{std::move(init), {}};
  Sgd<RerankerParams> sgd(config.optimizer);
  Rng batch_rng = make_rng(config.seed, "rerank/batches");
  std::vector<std::size_t> order;
  std::size_t cursor = 0;
  const auto n = std::min<std::size_t>(static_cast<std::size_t>(config.batch_size), mined.size());

  for (int step = 0; step < config.steps; ++step) {
    std::vector<std::size_t> batch;
    while (batch.size() < n) {
      if (cursor == order.size()) {
        order.resize(mined.size());
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), batch_rng);
        cursor = 0;
      }
      batch.push_back(order[cursor++]);
    }

    std::vector<RerankerLoss> parts(batch.size());
    parallel_for(batch.size(), config.threads, [&](std::size_t i) {
      const MinedSet& m = mined[batch[i]];
      const Vector q = embeddings[m.query_id];
      const auto hardest = by_score_desc(m).front();
      RerankerLoss pair = pairwise_loss(result.params, q, embeddings[m.target_id],
                                        embeddings[m.negatives[hardest].candidate_id]);
      Rng rng = make_rng(config.seed, "rerank/list/" + std::to_string(step), m.query_id);
      const ListwiseSample sample = make_listwise_sample(m, config.list_size, rng);
      Matrix list(q.size(), static_cast<Eigen::Index>(sample.candidate_ids.size()));
      for (std::size_t j = 0; j < sample.candidate_ids.size(); ++j) {
        list.col(static_cast<Eigen::Index>(j)) = embeddings[sample.candidate_ids[j]];
      }
      const RerankerLoss listwise = listwise_loss(result.params, q, list, sample.target_index);
      pair.loss += listwise.loss;
      accumulate(pair.grads, listwise.grads);
      parts[i] = std::move(pair);
    });

    RerankerParams grads = RerankerParams::zeros(result.params.dims);
    double loss = 0.0;
    for (const auto& part : parts) {
      loss += part.loss;
      accumulate(grads, part.grads);
    }
    const double inv_n = 1.0 / static_cast<double>(parts.size());
    scale(grads, inv_n);
    sgd.step(result.params, grads);
    result.loss_trace.push_back(loss * inv_n);
  }
  return result;
}

RankedList rerank(const RerankerParams& params, const Vector& query, const RankedList& ranked,
                  const EmbeddingTable& candidates) {
  if (ranked.empty()) throw std::invalid_argument("rerank: empty list");
  std::vector<std::pair<double, std::size_t>> scored(ranked.size());
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    scored[i] = {pair_logit(params, query, candidates[ranked[i].id]), i};
  }
  std::stable_sort(scored.begin(), scored.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  RankedList out;
  out.reserve(ranked.size());
  for (const auto& [logit, i] : scored) out.push_back({ranked[i].id, sigmoid(logit)});
  return out;
}

RankedList rerank(const RerankerParams& params, const Item& query, const RankedList& ranked,
                  const Corpus& corpus, const EncoderParams& encoder) {
  std::vector<std::string> ids;
  for (const auto& r : ranked) ids.push_back(r.id);
  const auto table = EmbeddingTable::embed(encoder, corpus, ids);
  return rerank(params, encode(encoder, query), ranked, table);
}

}  // namespace softalign
