#pragma once

#include "softalign/core_math.hpp"

#include <span>
#include <string>
#include <vector>

namespace softalign {

struct ScoredCandidate {
  std::string id;
  double score = 0.0;

  bool operator==(const ScoredCandidate&) const = default;
};

/// Candidates by non-increasing score; equal scores ordered by ascending id.
using RankedList = std::vector<ScoredCandidate>;

/// Ordering used by every ranked list: higher score first, then smaller id.
inline bool ranks_before(const ScoredCandidate& a, const ScoredCandidate& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.id < b.id;
}

/// Exact cosine index over unit-norm candidate embeddings. Immutable once built.
class Index {
 public:
  static constexpr double kUnitNormTolerance = 1e-9;

  /// `embeddings` holds one candidate per column.
  static Index build(std::vector<std::string> ids, const Matrix& embeddings);

  /// The min(k, size()) highest-cosine candidates.
  RankedList top_k(const Vector& query, std::size_t k) const;

  /// top_k for each column of `queries`; results keep column order.
  std::vector<RankedList> top_k_batch(const Matrix& queries, std::size_t k,
                                      unsigned threads = 1) const;

  std::size_t size() const { return ids_.size(); }
  Eigen::Index dim() const { return rows_.cols(); }
  const std::vector<std::string>& ids() const { return ids_; }

 private:
  using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  std::vector<std::string> ids_;
  RowMatrix rows_;
  Vector squared_norms_;
};

}  // namespace softalign
