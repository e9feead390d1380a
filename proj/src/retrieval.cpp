#include "softalign/retrieval.hpp"

#include "softalign/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

namespace softalign {

namespace {

// Plain left-to-right sum so the score of a row never depends on its position.
double dot(const double* a, const double* b, Eigen::Index n) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

Index Index::build(std::vector<std::string> ids, const Matrix& embeddings) {
  if (ids.empty()) throw std::invalid_argument("index: no candidates");
  if (static_cast<Eigen::Index>(ids.size()) != embeddings.cols()) {
    throw std::invalid_argument("index: id count does not match embedding count");
  }
  std::unordered_set<std::string> seen;
  for (const auto& id : ids) {
    if (!seen.insert(id).second) throw std::invalid_argument("index: duplicate id '" + id + "'");
  }
  Index index;
  index.rows_ = embeddings.transpose();
  index.squared_norms_.resize(index.rows_.rows());
  for (Eigen::Index i = 0; i < index.rows_.rows(); ++i) {
    const double* row = index.rows_.row(i).data();
    const double nn = dot(row, row, index.rows_.cols());
    if (!std::isfinite(nn) || std::abs(std::sqrt(nn) - 1.0) > kUnitNormTolerance) {
      throw std::invalid_argument("index: embedding for '" + ids[i] + "' is not unit-norm");
    }
    index.squared_norms_[i] = nn;
  }
  index.ids_ = std::move(ids);
  return index;
}

RankedList Index::top_k(const Vector& query, std::size_t k) const {
  if (k == 0) throw std::invalid_argument("top_k: k must be positive");
  if (query.size() != dim()) throw std::invalid_argument("top_k: query dimension mismatch");
  const Vector q = query;  // contiguous copy
  const double qq = dot(q.data(), q.data(), q.size());
  if (!(qq > 0.0)) throw std::invalid_argument("top_k: zero query vector");

  const auto n = static_cast<Eigen::Index>(ids_.size());
  std::vector<std::pair<double, std::size_t>> scored(ids_.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const double c = dot(rows_.row(i).data(), q.data(), q.size()) / std::sqrt(qq * squared_norms_[i]);
    scored[i] = {std::clamp(c, -1.0, 1.0), static_cast<std::size_t>(i)};
  }
  const std::size_t keep = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep),
                    scored.end(), [&](const auto& a, const auto& b) {
                      if (a.first != b.first) return a.first > b.first;
                      return ids_[a.second] < ids_[b.second];
                    });
  RankedList out;
  out.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) out.push_back({ids_[scored[i].second], scored[i].first});
  return out;
}

std::vector<RankedList> Index::top_k_batch(const Matrix& queries, std::size_t k,
                                           unsigned threads) const {
  std::vector<RankedList> out(static_cast<std::size_t>(queries.cols()));
  parallel_for(out.size(), threads, [&](std::size_t i) {
    out[i] = top_k(queries.col(static_cast<Eigen::Index>(i)), k);
  });
  return out;
}

}  // namespace softalign
