#include "softalign/metrics.hpp"

#include <json.hpp>

#include <cstdio>
#include <stdexcept>

namespace softalign {

namespace {

int target_rank(const RankedLists& lists, const QueryTarget& qt) {
  const auto it = lists.find(qt.query_id);
  if (it == lists.end()) throw std::invalid_argument("no ranked list for query '" + qt.query_id + "'");
  const auto& list = it->second;
  for (std::size_t i = 0; i < list.size(); ++i) {
    if (list[i].id == qt.target_id) return static_cast<int>(i) + 1;
  }
  return 0;
}

}  // namespace

double recall_at_k(const RankedLists& lists, std::span<const QueryTarget> targets, int k) {
  if (k < 1) throw std::invalid_argument("recall_at_k: k must be >= 1");
  if (targets.empty()) throw std::invalid_argument("recall_at_k: no queries");
  std::size_t hits = 0;
  for (const auto& qt : targets) {
    const int r = target_rank(lists, qt);
    if (r >= 1 && r <= k) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(targets.size());
}

double precision_at_1(const RankedLists& lists, std::span<const QueryTarget> targets) {
  return recall_at_k(lists, targets, 1);
}

EvalReport evaluate(std::string stage, const RankedLists& lists, std::span<const QueryTarget> targets,
                    std::span<const int> ks, std::string fingerprint) {
  EvalReport r;
  r.stage = std::move(stage);
  r.fingerprint = std::move(fingerprint);
  r.precision_at_1 = precision_at_1(lists, targets);
  for (const int k : ks) r.recall_at_k[k] = recall_at_k(lists, targets, k);
  for (const auto& qt : targets) r.hits.push_back({qt.query_id, qt.target_id, target_rank(lists, qt)});
  return r;
}

std::string format_report_table(std::span<const EvalReport> reports) {
  std::string out;
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%-12s %8s", "stage", "P@1");
  out += buf;
  if (!reports.empty()) {
    for (const auto& [k, v] : reports.front().recall_at_k) {
      std::snprintf(buf, sizeof(buf), " %8s", ("R@" + std::to_string(k)).c_str());
      out += buf;
    }
  }
  out += "  fingerprint\n";
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof(buf), "%-12s %8.4f", r.stage.c_str(), r.precision_at_1);
    out += buf;
    for (const auto& [k, v] : r.recall_at_k) {
      std::snprintf(buf, sizeof(buf), " %8.4f", v);
      out += buf;
    }
    out += "  " + r.fingerprint + "\n";
  }
  return out;
}

std::string format_report_jsonl(std::span<const EvalReport> reports) {
  std::string out;
  for (const auto& r : reports) {
    nlohmann::json j = {{"type", "summary"},
                        {"stage", r.stage},
                        {"precision_at_1", r.precision_at_1},
                        {"fingerprint", r.fingerprint}};
    for (const auto& [k, v] : r.recall_at_k) j["recall_at_" + std::to_string(k)] = v;
    out += j.dump() + "\n";
  }
  for (const auto& r : reports) {
    for (const auto& h : r.hits) {
      const nlohmann::json j = {{"type", "hit"},
                                {"stage", r.stage},
                                {"query_id", h.query_id},
                                {"target_id", h.target_id},
                                {"target_rank", h.target_rank}};
      out += j.dump() + "\n";
    }
  }
  return out;
}

}  // namespace softalign
