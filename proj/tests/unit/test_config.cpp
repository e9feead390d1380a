#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "softalign/config.hpp"

#include <set>

using namespace softalign;
using nlohmann::json;

namespace {

json minimal() { return json{{"miner", {{"delta", 0.95}}}}; }

/// Every numeric or string leaf of `j`, as a JSON pointer.
void leaves(const json& j, const std::string& prefix, std::vector<std::string>& out) {
  if (j.is_object()) {
    for (const auto& [k, v] : j.items()) leaves(v, prefix + "/" + k, out);
  } else if (!j.is_array()) {
    out.push_back(prefix);
  }
}

/// A nearby value that still passes validation.
json nudge(const std::string& path, const json& v) {
  if (path == "/align/loss") return "onehot";
  if (path == "/judge/kind") return "remote";
  if (path == "/judge/endpoint") return "http://localhost:1";
  if (v.is_number_integer() || v.is_number_unsigned()) return v.get<long long>() + 1;
  const double d = v.get<double>();
  return d == 0.0 ? 0.1 : d * 0.5;
}

}  // namespace

TEST_CASE("published defaults: tau, beta, k, pool, mined size, interval, depth") {
  const auto c = parse_config(minimal());
  CHECK(c.align.tau == 0.02);
  CHECK(c.align.k_negatives == 8);
  CHECK(c.align.loss == AlignLoss::soft_scores);
  CHECK_FALSE(c.align.score_tau.has_value());
  CHECK(c.miner.beta == 0.01);
  CHECK(c.miner.pool_size == 50);
  CHECK(c.miner.mined_size == 10);
  CHECK(c.miner.cycle_interval == 5);
  CHECK(c.miner.delta == 0.95);
  CHECK(c.rerank.depth == 10);
  CHECK(c.rerank.list_size == 4);
  CHECK(c.rerank.dims.emb == c.encoder.emb);
  CHECK(c.seed == 42);
}

TEST_CASE("delta has no default") {
  CHECK_THROWS_WITH_AS(parse_config(json::object()), doctest::Contains("delta"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_config(json{{"miner", {{"beta", 0.01}}}}), doctest::Contains("delta"),
                       std::invalid_argument);
}

TEST_CASE("unknown keys and wrong types are rejected") {
  auto j = minimal();
  j["miner"]["detla"] = 0.9;
  CHECK_THROWS_WITH_AS(parse_config(j), doctest::Contains("miner.detla"), std::invalid_argument);
  j = minimal();
  j["tau"] = 0.02;
  CHECK_THROWS_WITH_AS(parse_config(j), doctest::Contains("tau"), std::invalid_argument);
  j = minimal();
  j["align"]["k_negatives"] = "eight";
  CHECK_THROWS_WITH_AS(parse_config(j), doctest::Contains("align.k_negatives"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config_text("{not json"), std::invalid_argument);
}

TEST_CASE("cross-module constraints") {
  auto j = minimal();
  j["align"]["k_negatives"] = 11;
  CHECK_THROWS_AS(parse_config(j), std::invalid_argument);
  j = minimal();
  j["rerank"]["list_size"] = 11;
  CHECK_THROWS_AS(parse_config(j), std::invalid_argument);
  j = minimal();
  j["judge"]["kind"] = "human";
  CHECK_THROWS_AS(parse_config(j), std::invalid_argument);
  j = minimal();
  j["recall_ks"] = {0};
  CHECK_THROWS_AS(parse_config(j), std::invalid_argument);
}

TEST_CASE("canonical form round-trips") {
  auto j = minimal();
  j["align"]["score_tau"] = 0.01;
  j["align"]["loss"] = "onehot";
  j["threads"] = 4;
  const auto c = parse_config(j);
  CHECK(c.align.score_tau == 0.01);
  const json canon = to_json(c);
  CHECK_FALSE(canon.contains("threads"));
  CHECK(to_json(parse_config(canon)) == canon);
  CHECK(stage_fingerprints(parse_config(canon)).report == stage_fingerprints(c).report);
}

TEST_CASE("thread count never enters a fingerprint") {
  auto j = minimal();
  const auto one = stage_fingerprints(parse_config(j));
  j["threads"] = 8;
  const auto eight = stage_fingerprints(parse_config(j));
  CHECK(one.report == eight.report);
  CHECK(one.mined == eight.mined);
}

TEST_CASE("every result-affecting setting changes the final fingerprint") {
  const json canon = to_json(parse_config(minimal()));
  const std::string base = stage_fingerprints(parse_config(canon)).report;
  // transport settings and evaluation cadence do not change any artifact
  const std::set<std::string> inert{"/judge/max_retries", "/judge/concurrency", "/judge/timeout_seconds",
                                    "/align/eval_every"};
  std::vector<std::string> paths;
  leaves(canon, "", paths);
  CHECK(paths.size() > 40);
  std::set<std::string> seen;
  for (const auto& path : paths) {
    json j = canon;
    const json::json_pointer ptr(path);
    j[ptr] = nudge(path, j[ptr]);
    if (path == "/judge/kind") j["judge"]["endpoint"] = "http://localhost:1";
    const auto fp = stage_fingerprints(parse_config(j)).report;
    INFO(path);
    if (inert.contains(path)) {
      CHECK(fp == base);
    } else {
      CHECK(fp != base);
    }
    if (!inert.contains(path)) CHECK(seen.insert(fp).second);
  }
  // list-valued settings
  json j = canon;
  j["recall_ks"] = {1, 5};
  CHECK(stage_fingerprints(parse_config(j)).report != base);
}

TEST_CASE("upstream changes reach every downstream stage") {
  const auto base = stage_fingerprints(parse_config(minimal()));
  auto j = minimal();
  j["miner"]["beta"] = 0.02;
  const auto f = stage_fingerprints(parse_config(j));
  CHECK(f.data == base.data);
  CHECK(f.pool == base.pool);
  CHECK(f.mined != base.mined);
  CHECK(f.encoder != base.encoder);
  CHECK(f.onehot_encoder != base.onehot_encoder);
  CHECK(f.reranker != base.reranker);
  CHECK(f.report != base.report);

  j = minimal();
  j["rerank"]["depth"] = 20;
  const auto g = stage_fingerprints(parse_config(j));
  CHECK(g.encoder == base.encoder);
  CHECK(g.reranker == base.reranker);
  CHECK(g.retrieved != base.retrieved);
}

TEST_CASE("command-line overrides") {
  auto c = parse_config(minimal());
  const auto before = stage_fingerprints(c).report;
  ConfigOverrides o;
  o.tau = 0.05;
  o.k_negatives = 4;
  o.delta = 0.9;
  o.beta = 0.05;
  o.rerank_depth = 20;
  o.seed = 7;
  o.threads = 3;
  apply_overrides(c, o);
  CHECK(c.align.tau == 0.05);
  CHECK(c.align.k_negatives == 4);
  CHECK(c.miner.delta == 0.9);
  CHECK(c.miner.beta == 0.05);
  CHECK(c.rerank.depth == 20);
  CHECK(c.seed == 7);
  CHECK(c.align.threads == 3);
  CHECK(stage_fingerprints(c).report != before);

  ConfigOverrides bad;
  bad.k_negatives = 0;
  CHECK_THROWS_AS(apply_overrides(c, bad), std::invalid_argument);
}
