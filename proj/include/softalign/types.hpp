#pragma once

#include "softalign/core_math.hpp"

#include <array>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace softalign {

enum class Modality { query_text = 0, candidate_text = 1, candidate_image = 2, interleaved = 3 };

inline constexpr int kModalityCount = 4;

std::string_view to_string(Modality m);
Modality parse_modality(std::string_view name);

struct Item {
  std::string id;
  Modality modality = Modality::query_text;
  Vector features;
};

struct QueryTarget {
  std::string query_id;
  std::string target_id;
};

/// All items plus the query -> target assignment. Items are addressed by id.
class Corpus {
 public:
  Corpus() = default;
  Corpus(std::vector<Item> items, std::vector<QueryTarget> queries,
         std::vector<std::string> candidates);

  const Item& item(std::string_view id) const;
  bool contains(std::string_view id) const;
  std::size_t index_of(std::string_view id) const;

  const std::vector<Item>& items() const { return items_; }
  const std::vector<QueryTarget>& queries() const { return queries_; }
  const std::vector<std::string>& candidates() const { return candidates_; }
  const std::string& target_of(std::string_view query_id) const;

  Eigen::Index raw_dim() const { return items_.empty() ? 0 : items_.front().features.size(); }

 private:
  std::vector<Item> items_;
  std::vector<QueryTarget> queries_;
  std::vector<std::string> candidates_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::unordered_map<std::string, std::size_t> query_pos_;
};

}  // namespace softalign
