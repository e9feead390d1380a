#pragma once

// Random instances and small helpers shared by the unit tests and the
// acceptance binary.

#include "softalign/aligner.hpp"
#include "softalign/encoder.hpp"
#include "softalign/params.hpp"
#include "softalign/reranker.hpp"
#include "softalign/retrieval.hpp"
#include "softalign/rng.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <filesystem>
#include <string>
#include <vector>

namespace softalign::testing {

/// max_i |a_i - n_i| / max(|a_i|, |n_i|, floor). The floor keeps coordinates
/// whose true gradient is ~0 from dividing rounding noise by rounding noise.
inline double max_rel_error(const Vector& analytic, const Vector& numeric, double floor = 1e-6) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < analytic.size(); ++i) {
    const double scale = std::max({std::abs(analytic[i]), std::abs(numeric[i]), floor});
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / scale);
  }
  return worst;
}

inline Vector gaussian_vector(Rng& rng, Eigen::Index n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = normal(rng);
  return v;
}

inline Vector random_unit(Rng& rng, Eigen::Index n) { return gaussian_vector(rng, n).normalized(); }

inline Item random_item(Rng& rng, std::string id, Modality modality, int raw) {
  return Item{std::move(id), modality, gaussian_vector(rng, raw)};
}

/// Overwrites every parameter with uniform(-scale, scale).
template <typename Params>
void randomize(Params& params, Rng& rng, double scale) {
  Vector flat = flatten(params);
  for (Eigen::Index i = 0; i < flat.size(); ++i) flat[i] = uniform(rng, -scale, scale);
  unflatten(params, flat);
}

/// Batch of training examples over freshly drawn items; items live in a
/// deque so the pointers in `batch` stay valid.
struct AlignInstance {
  std::deque<Item> items;
  std::vector<TrainingExample> batch;
  EncoderParams params;
  AlignConfig config;
};

inline AlignInstance align_instance(std::uint64_t seed, int batch_size, int k, const EncoderDims& dims,
                                    AlignLoss loss = AlignLoss::soft_scores, double tau = 0.02) {
  Rng rng(seed);
  AlignInstance inst;
  inst.params = init_encoder(dims, seed);
  inst.config.tau = tau;
  inst.config.k_negatives = k;
  inst.config.batch_size = batch_size;
  inst.config.loss = loss;
  const auto make = [&](std::string id, Modality m) -> const Item* {
    inst.items.push_back(random_item(rng, std::move(id), m, dims.raw));
    return &inst.items.back();
  };
  for (int b = 0; b < batch_size; ++b) {
    const std::string tag = std::to_string(b);
    TrainingExample ex;
    ex.query = make("q" + tag, Modality::query_text);
    ex.target = make("t" + tag, Modality::candidate_image);
    for (int j = 0; j < k; ++j) {
      ex.negatives.push_back(make("n" + tag + "_" + std::to_string(j),
                                  j % 2 ? Modality::candidate_text : Modality::interleaved));
    }
    ex.scores.resize(k + 1);
    ex.scores[0] = uniform(rng, 0.8, 1.0);
    for (int j = 1; j <= k; ++j) ex.scores[j] = uniform(rng, 0.0, 1.0);
    inst.batch.push_back(std::move(ex));
  }
  return inst;
}

/// Finite-difference gradient of the alignment loss w.r.t. the flattened encoder.
inline Vector align_numeric_grad(const AlignInstance& inst, double h) {
  const auto f = [&](const Vector& x) {
    EncoderParams p = inst.params;
    unflatten(p, x);
    return alignment_loss(inst.batch, p, inst.config).loss;
  };
  return finite_diff_grad(f, flatten(inst.params), h);
}

/// Rewrites every example's scores as (cos + 1) / 2 under the current
/// parameters and halves the score temperature, so that Q equals P.
inline void match_scores_to_embeddings(AlignInstance& inst) {
  inst.config.score_tau = inst.config.tau / 2.0;
  for (auto& ex : inst.batch) {
    const Vector q = encode(inst.params, *ex.query);
    ex.scores[0] = (q.dot(encode(inst.params, *ex.target)) + 1.0) / 2.0;
    for (std::size_t j = 0; j < ex.negatives.size(); ++j) {
      ex.scores[static_cast<Eigen::Index>(j) + 1] = (q.dot(encode(inst.params, *ex.negatives[j])) + 1.0) / 2.0;
    }
  }
}

/// Random reranker with every weight active, plus unit-norm embeddings for
/// one pairwise triple and one listwise sample of `list` candidates.
struct RerankInstance {
  RerankerParams params;
  Vector query, target, negative;
  Matrix list;
  int target_index = 0;
};

inline RerankInstance rerank_instance(std::uint64_t seed, int emb, int hidden, int list) {
  Rng rng(seed);
  RerankInstance inst;
  inst.params = RerankerParams::zeros(RerankerDims{emb, hidden});
  randomize(inst.params, rng, 0.5);
  inst.query = random_unit(rng, emb);
  inst.target = random_unit(rng, emb);
  inst.negative = random_unit(rng, emb);
  inst.list.resize(emb, list);
  for (int j = 0; j < list; ++j) inst.list.col(j) = random_unit(rng, emb);
  inst.target_index = static_cast<int>(rng() % static_cast<std::uint64_t>(list));
  return inst;
}

/// Candidate set for retrieval tests. About a tenth of the columns duplicate
/// an earlier column so that exact score ties occur, and ids are shuffled so
/// that id order and column order disagree.
struct RetrievalCorpus {
  std::vector<std::string> ids;
  Matrix embeddings;  // one unit-norm column per id
};

inline RetrievalCorpus random_retrieval_corpus(Rng& rng, int n, int dim) {
  RetrievalCorpus c;
  c.embeddings.resize(dim, n);
  for (int j = 0; j < n; ++j) {
    if (j > 0 && rng() % 10 == 0) {
      c.embeddings.col(j) = c.embeddings.col(static_cast<Eigen::Index>(rng() % static_cast<unsigned>(j)));
    } else {
      c.embeddings.col(j) = random_unit(rng, dim);
    }
    c.ids.push_back("c" + std::to_string(j));
  }
  std::shuffle(c.ids.begin(), c.ids.end(), rng);
  return c;
}

/// Full scan: score every candidate with cosine(), sort everything, truncate.
inline RankedList brute_force_top_k(const RetrievalCorpus& c, const Vector& query, std::size_t k) {
  RankedList all;
  for (Eigen::Index j = 0; j < c.embeddings.cols(); ++j) {
    all.push_back({c.ids[static_cast<std::size_t>(j)], cosine(query, c.embeddings.col(j))});
  }
  std::sort(all.begin(), all.end(), ranks_before);
  all.resize(std::min(k, all.size()));
  return all;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("softalign-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace softalign::testing
