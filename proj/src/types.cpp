#include "softalign/types.hpp"

#include <stdexcept>

namespace softalign {

std::string_view to_string(Modality m) {
  switch (m) {
    case Modality::query_text: return "query_text";
    case Modality::candidate_text: return "candidate_text";
    case Modality::candidate_image: return "candidate_image";
    case Modality::interleaved: return "interleaved";
  }
  throw std::invalid_argument("unknown modality");
}

Modality parse_modality(std::string_view name) {
  for (int m = 0; m < kModalityCount; ++m) {
    if (to_string(static_cast<Modality>(m)) == name) return static_cast<Modality>(m);
  }
  throw std::invalid_argument("unknown modality '" + std::string(name) + "'");
}

Corpus::Corpus(std::vector<Item> items, std::vector<QueryTarget> queries,
               std::vector<std::string> candidates)
    : items_(std::move(items)), queries_(std::move(queries)), candidates_(std::move(candidates)) {
  for (std::size_t i = 0; i < items_.size(); ++i) {
    const auto& it = items_[i];
    if (!it.features.allFinite()) {
      throw std::invalid_argument("item '" + it.id + "' has non-finite features");
    }
    if (it.features.size() != items_.front().features.size()) {
      throw std::invalid_argument("item '" + it.id + "' has inconsistent feature dimension");
    }
    if (!by_id_.emplace(it.id, i).second) {
      throw std::invalid_argument("duplicate item id '" + it.id + "'");
    }
  }
  for (const auto& id : candidates_) {
    if (!contains(id)) throw std::invalid_argument("unknown candidate id '" + id + "'");
  }
  for (std::size_t i = 0; i < queries_.size(); ++i) {
    const auto& q = queries_[i];
    if (!contains(q.query_id)) throw std::invalid_argument("unknown query id '" + q.query_id + "'");
    if (!contains(q.target_id)) throw std::invalid_argument("unknown target id '" + q.target_id + "'");
    if (!query_pos_.emplace(q.query_id, i).second) {
      throw std::invalid_argument("query '" + q.query_id + "' has more than one target");
    }
  }
}

bool Corpus::contains(std::string_view id) const { return by_id_.contains(std::string(id)); }

std::size_t Corpus::index_of(std::string_view id) const {
  const auto it = by_id_.find(std::string(id));
  if (it == by_id_.end()) throw std::out_of_range("unknown item id '" + std::string(id) + "'");
  return it->second;
}

const Item& Corpus::item(std::string_view id) const { return items_[index_of(id)]; }

const std::string& Corpus::target_of(std::string_view query_id) const {
  const auto it = query_pos_.find(std::string(query_id));
  if (it == query_pos_.end()) {
    throw std::out_of_range("unknown query id '" + std::string(query_id) + "'");
  }
  return queries_[it->second].target_id;
}

}  // namespace softalign
