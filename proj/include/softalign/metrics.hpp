#pragma once

#include "softalign/retrieval.hpp"
#include "softalign/types.hpp"

#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace softalign {

/// Ranked list per query id.
using RankedLists = std::unordered_map<std::string, RankedList>;

/// Fraction of queries whose first-ranked candidate is the target.
/// Throws std::invalid_argument when a query has no list.
double precision_at_1(const RankedLists& lists, std::span<const QueryTarget> targets);

/// Fraction of queries whose target appears within the first k entries.
double recall_at_k(const RankedLists& lists, std::span<const QueryTarget> targets, int k);

struct QueryHit {
  std::string query_id;
  std::string target_id;
  int target_rank = 0;  // 1-based; 0 when the target is absent from the list

  bool operator==(const QueryHit&) const = default;
};

struct EvalReport {
  std::string stage;  // e.g. "init", "retrieval", "reranked"
  double precision_at_1 = 0.0;
  std::map<int, double> recall_at_k;
  std::vector<QueryHit> hits;
  std::string fingerprint;

  bool operator==(const EvalReport&) const = default;
};

EvalReport evaluate(std::string stage, const RankedLists& lists, std::span<const QueryTarget> targets,
                    std::span<const int> ks, std::string fingerprint);

/// Aligned plain-text table, one row per report.
std::string format_report_table(std::span<const EvalReport> reports);

/// One JSON object per report, followed by one per query hit.
std::string format_report_jsonl(std::span<const EvalReport> reports);

}  // namespace softalign
