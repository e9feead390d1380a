#include "softalign/aligner.hpp"

#include "softalign/parallel.hpp"
#include "softalign/rng.hpp"
#include "softalign/text_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace softalign {

std::string_view to_string(AlignLoss loss) {
  return loss == AlignLoss::soft_scores ? "soft" : "onehot";
}

AlignLoss parse_align_loss(std::string_view name) {
  if (name == "soft") return AlignLoss::soft_scores;
  if (name == "onehot") return AlignLoss::one_hot;
  throw std::invalid_argument("unknown loss '" + std::string(name) + "' (expected soft|onehot)");
}

void AlignConfig::validate() const {
  if (!(tau > 0.0) || !(q_tau() > 0.0)) throw std::invalid_argument("align: tau must be positive");
  if (k_negatives < 1) throw std::invalid_argument("align: k_negatives must be >= 1");
  if (batch_size < 1 || steps < 0) throw std::invalid_argument("align: bad batch_size or steps");
}

Distribution relation_distribution(const Vector& query, const Matrix& candidates, double tau) {
  Vector cos(candidates.cols());
  for (Eigen::Index j = 0; j < candidates.cols(); ++j) cos[j] = cosine(query, candidates.col(j));
  return softmax_t(cos, tau);
}

Distribution score_distribution(const Vector& scores, double tau) {
  if ((scores.array() < 0.0).any() || (scores.array() > 1.0).any()) {
    throw std::invalid_argument("score_distribution: scores must lie in [0,1]");
  }
  return softmax_t(scores, tau);
}

TrainingExample make_example(const Corpus& corpus, const MinedSet& mined, int k) {
  if (k < 1 || static_cast<std::size_t>(k) > mined.negatives.size()) {
    throw std::invalid_argument("mined set for '" + mined.query_id + "' has fewer than " +
                                std::to_string(k) + " negatives");
  }
  std::vector<std::size_t> order(mined.negatives.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return mined.negatives[a].score > mined.negatives[b].score;
  });
  TrainingExample ex;
  ex.query = &corpus.item(mined.query_id);
  ex.target = &corpus.item(mined.target_id);
  ex.scores.resize(k + 1);
  ex.scores[0] = mined.target_score;
  for (int i = 0; i < k; ++i) {
    const auto& n = mined.negatives[order[static_cast<std::size_t>(i)]];
    ex.negatives.push_back(&corpus.item(n.candidate_id));
    ex.scores[i + 1] = n.score;
  }
  return ex;
}

namespace {

struct ExampleLoss {
  double loss = 0.0;
  EncoderParams grads;
};

ExampleLoss example_loss(const TrainingExample& ex, const EncoderParams& params,
                         const AlignConfig& config) {
  const auto n = static_cast<Eigen::Index>(ex.negatives.size()) + 1;
  if (ex.scores.size() != n) {
    throw std::invalid_argument("training example for '" + ex.query->id + "' has mismatched scores");
  }
  const EncoderForward fq = encode_forward(params, *ex.query);
  std::vector<EncoderForward> fc;
  fc.reserve(static_cast<std::size_t>(n));
  fc.push_back(encode_forward(params, *ex.target));
  for (const Item* neg : ex.negatives) fc.push_back(encode_forward(params, *neg));

  // embeddings are unit-norm, so the dot product is the cosine
  Vector logits(n);
  for (Eigen::Index j = 0; j < n; ++j) logits[j] = fq.embedding.dot(fc[j].embedding);
  const Distribution p = softmax_t(logits, config.tau);

  ExampleLoss out;
  Vector d_logits;
  if (config.loss == AlignLoss::soft_scores) {
    const Distribution q = score_distribution(ex.scores, config.q_tau());
    out.loss = sym_kl(p, q);
    d_logits = sym_kl_grad_wrt_logits(p, q) / config.tau;
  } else {
    const Distribution q = Distribution::one_hot(n, 0);
    out.loss = kl(q, p);
    d_logits = kl_grad_wrt_second_logits(p, q) / config.tau;
  }
  if (!std::isfinite(out.loss) || !d_logits.allFinite()) {
    throw std::domain_error("alignment loss: non-finite value for query '" + ex.query->id + "'");
  }

  out.grads = EncoderParams::zeros(params.dims);
  Vector d_query = Vector::Zero(params.dims.emb);
  for (Eigen::Index j = 0; j < n; ++j) {
    d_query += d_logits[j] * fc[j].embedding;
    encode_backward(params, fc[j], d_logits[j] * fq.embedding, out.grads);
  }
  encode_backward(params, fq, d_query, out.grads);
  return out;
}

}  // namespace

AlignLossResult alignment_loss(std::span<const TrainingExample> batch, const EncoderParams& params,
                               const AlignConfig& config) {
  if (batch.empty()) throw std::invalid_argument("alignment_loss: empty batch");
  std::vector<ExampleLoss> parts(batch.size());
  parallel_for(batch.size(), config.threads,
               [&](std::size_t i) { parts[i] = example_loss(batch[i], params, config); });

  // fixed reduction order: example 0, 1, 2, ...
  AlignLossResult out;
  out.grads = EncoderParams::zeros(params.dims);
  for (const auto& part : parts) {
    out.loss += part.loss;
    accumulate(out.grads, part.grads);
  }
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  out.loss *= inv_n;
  scale(out.grads, inv_n);
  return out;
}

AlignTrainResult train_on_batches(const BatchSource& batches, EncoderParams init,
                                  const AlignConfig& config, const EvalHook& eval) {
  config.validate();
  AlignTrainResult result{std::move(init), {}};
  Sgd<EncoderParams> sgd(config.optimizer);
  for (int step = 0; step < config.steps; ++step) {
    const auto batch = batches(step);
    const auto lr = alignment_loss(batch, result.params, config);
    sgd.step(result.params, lr.grads);
    TraceRecord rec{step, lr.loss, std::nullopt};
    if (eval && config.eval_every > 0 && ((step + 1) % config.eval_every == 0 || step + 1 == config.steps)) {
      rec.eval_precision_at_1 = eval(result.params);
    }
    result.trace.push_back(rec);
  }
  return result;
}

AlignTrainResult train_encoder(const Corpus& corpus, std::span<const MinedSet> mined,
                               EncoderParams init, const AlignConfig& config, const EvalHook& eval) {
  config.validate();
  if (mined.empty()) throw std::invalid_argument("train_encoder: no mined sets");
  std::vector<TrainingExample> examples;
  examples.reserve(mined.size());
  for (const auto& m : mined) {
    if (!corpus.contains(m.query_id)) {
      throw std::invalid_argument("train_encoder: mined set for unknown query '" + m.query_id + "'");
    }
    examples.push_back(make_example(corpus, m, config.k_negatives));
  }

  Rng rng = make_rng(config.seed, "align/batches");
  std::vector<std::size_t> order;
  std::size_t cursor = 0;
  const BatchSource source = [&](int) {
    std::vector<TrainingExample> batch;
    const auto n = std::min<std::size_t>(static_cast<std::size_t>(config.batch_size), examples.size());
    while (batch.size() < n) {
      if (cursor == order.size()) {
        order.resize(examples.size());
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      batch.push_back(examples[order[cursor++]]);
    }
    return batch;
  };
  return train_on_batches(source, std::move(init), config, eval);
}

void write_trace(const std::filesystem::path& path, std::span<const TraceRecord> trace,
                 std::string_view fingerprint) {
  std::string out = text::header_line("trace", 1, fingerprint) + "\n";
  for (const auto& r : trace) {
    nlohmann::json j = {{"step", r.step}, {"loss", r.loss}};
    if (r.eval_precision_at_1) j["eval_p1"] = *r.eval_precision_at_1;
    out += j.dump() + "\n";
  }
  text::atomic_write(path, out);
}

}  // namespace softalign
