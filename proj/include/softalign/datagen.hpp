#pragma once

// Seeded synthetic corpus with a known latent ground truth.
//
// Each query owns a latent vector z_q = normalize(u_k + spread * xi) near one
// of `n_concepts` orthonormal concept directions u_k. Its target candidate
// shares z_q exactly. Other candidates are either related (a fresh sample
// around some concept) or distractors (latents drawn from the subspace
// orthogonal to every concept). Raw features are view-specific linear maps of
// the latent plus Gaussian noise:
//   query     x = A_q z + sigma * eps
//   candidate x = A_c z + sigma * eps
// Relevance between two items is ((cos(z_a, z_b) + 1) / 2) ^ exponent.

#include "softalign/types.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>

namespace softalign {

struct LatentCorpusSpec {
  int n_concepts = 16;
  int n_queries = 200;
  int n_candidates = 1000;
  int latent_dim = 32;
  int raw_dim = 64;
  double view_noise_sigma = 0.05;
  double distractor_ratio = 0.0;
  double sibling_spread = 0.15;
  double relevance_exponent = 6.0;
  std::uint64_t seed = 42;

  void validate() const;
};

double relevance_from_cosine(double cosine, double exponent);

/// Latent vectors for every item; answers relevance queries.
class GroundTruth {
 public:
  GroundTruth() = default;
  GroundTruth(double exponent, std::vector<std::string> ids, Matrix latents);

  /// Relevance in [0,1]; throws std::out_of_range on unknown ids.
  double relevance(std::string_view query_id, std::string_view candidate_id) const;

  double exponent() const { return exponent_; }
  const std::vector<std::string>& ids() const { return ids_; }
  const Matrix& latents() const { return latents_; }

 private:
  Eigen::Index column(std::string_view id) const;

  double exponent_ = 6.0;
  std::vector<std::string> ids_;
  Matrix latents_;  // one column per id
  std::unordered_map<std::string, Eigen::Index> pos_;
};

struct SyntheticData {
  Corpus corpus;
  GroundTruth truth;
};

SyntheticData generate(const LatentCorpusSpec& spec);

void write_ground_truth(const std::filesystem::path& path, const Corpus& corpus,
                        const GroundTruth& truth, const std::string& fingerprint);
/// Reads a ground-truth file; returns the stored fingerprint through `fingerprint`.
GroundTruth read_ground_truth(const std::filesystem::path& path, std::string* fingerprint = nullptr);

}  // namespace softalign
