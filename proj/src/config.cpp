#include "softalign/config.hpp"

#include "softalign/rng.hpp"
#include "softalign/text_io.hpp"

#include <cmath>
#include <cstdio>
#include <set>
#include <stdexcept>

namespace softalign {

namespace {

using nlohmann::json;

/// Reads known keys of one JSON object and rejects anything else.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw std::invalid_argument("config: '" + name_ + "' must be an object");
  }
  ~Section() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.contains(key)) {
        throw std::invalid_argument("config: unknown key '" + name_ + "." + key + "'");
      }
    }
  }
  Section(const Section&) = delete;
  Section& operator=(const Section&) = delete;

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->get<T>();
    } catch (const json::exception&) {
      throw std::invalid_argument("config: '" + name_ + "." + key + "' has the wrong type");
    }
  }
  bool has(const char* key) const { return j_.contains(key); }
  const json& sub(const char* key) {
    seen_.insert(key);
    static const json empty = json::object();
    const auto it = j_.find(key);
    return it == j_.end() ? empty : *it;
  }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

void read_optimizer(Section& s, SgdConfig& o) {
  s.get("lr", o.lr);
  s.get("momentum", o.momentum);
}

}  // namespace

void RunConfig::finalize() {
  if (threads < 1) threads = 1;
  data.seed = derive_seed(seed, "data");
  align.seed = derive_seed(seed, "align");
  rerank.seed = derive_seed(seed, "rerank");
  align.threads = threads;
  rerank.threads = threads;
  rerank.dims.emb = encoder.emb;

  data.validate();
  if (encoder.raw != data.raw_dim) {
    throw std::invalid_argument("config: encoder.raw must equal data.raw_dim");
  }
  if (!(holdout_fraction >= 0.0 && holdout_fraction < 1.0)) {
    throw std::invalid_argument("config: holdout_fraction must be in [0,1)");
  }
  miner.validate();
  align.validate();
  if (align.k_negatives > miner.mined_size) {
    throw std::invalid_argument("config: align.k_negatives must not exceed miner.mined_size");
  }
  rerank.validate();
  if (rerank.list_size > miner.mined_size) {
    throw std::invalid_argument("config: rerank.list_size must not exceed miner.mined_size");
  }
  if (pool_encoder.steps < 0 || pool_encoder.k_negatives < 1 || pool_encoder.batch_size < 1 || !(pool_encoder.tau > 0.0)) {
    throw std::invalid_argument("config: invalid pool_encoder settings");
  }
  if (judge.kind != "oracle" && judge.kind != "remote") {
    throw std::invalid_argument("config: judge.kind must be 'oracle' or 'remote'");
  }
  for (const int k : recall_ks) {
    if (k < 1) throw std::invalid_argument("config: recall_ks entries must be >= 1");
  }
}

RunConfig parse_config(const json& j) {
  RunConfig c;
  Section root(j, "config");
  root.get("seed", c.seed);
  root.get("threads", c.threads);
  root.get("holdout_fraction", c.holdout_fraction);
  root.get("recall_ks", c.recall_ks);
  {
    Section s(root.sub("data"), "data");
    s.get("n_concepts", c.data.n_concepts);
    s.get("n_queries", c.data.n_queries);
    s.get("n_candidates", c.data.n_candidates);
    s.get("latent_dim", c.data.latent_dim);
    s.get("raw_dim", c.data.raw_dim);
    s.get("view_noise_sigma", c.data.view_noise_sigma);
    s.get("distractor_ratio", c.data.distractor_ratio);
    s.get("sibling_spread", c.data.sibling_spread);
    s.get("relevance_exponent", c.data.relevance_exponent);
  }
  c.encoder.raw = c.data.raw_dim;
  {
    Section s(root.sub("encoder"), "encoder");
    s.get("hidden", c.encoder.hidden);
    s.get("emb", c.encoder.emb);
  }
  {
    Section s(root.sub("pool_encoder"), "pool_encoder");
    s.get("steps", c.pool_encoder.steps);
    s.get("k_negatives", c.pool_encoder.k_negatives);
    s.get("batch_size", c.pool_encoder.batch_size);
    s.get("tau", c.pool_encoder.tau);
    read_optimizer(s, c.pool_encoder.optimizer);
  }
  {
    Section s(root.sub("judge"), "judge");
    s.get("kind", c.judge.kind);
    s.get("noise", c.judge.noise);
    s.get("endpoint", c.judge.endpoint);
    s.get("max_retries", c.judge.max_retries);
    s.get("concurrency", c.judge.concurrency);
    s.get("timeout_seconds", c.judge.timeout_seconds);
  }
  {
    Section s(root.sub("miner"), "miner");
    if (!s.has("delta")) throw std::invalid_argument("config: miner.delta must be set explicitly");
    s.get("delta", c.miner.delta);
    s.get("pool_size", c.miner.pool_size);
    s.get("beta", c.miner.beta);
    s.get("cycle_interval", c.miner.cycle_interval);
    s.get("mined_size", c.miner.mined_size);
    s.get("fallback_score", c.miner.fallback_score);
  }
  {
    Section s(root.sub("align"), "align");
    s.get("tau", c.align.tau);
    if (s.has("score_tau")) {
      double v = 0.0;
      s.get("score_tau", v);
      c.align.score_tau = v;
    } else {
      s.get("score_tau", c.align.tau);  // marks the key as known
    }
    s.get("k_negatives", c.align.k_negatives);
    s.get("batch_size", c.align.batch_size);
    s.get("steps", c.align.steps);
    s.get("eval_every", c.align.eval_every);
    read_optimizer(s, c.align.optimizer);
    std::string loss(to_string(c.align.loss));
    s.get("loss", loss);
    c.align.loss = parse_align_loss(loss);
  }
  {
    Section s(root.sub("rerank"), "rerank");
    s.get("hidden", c.rerank.dims.hidden);
    s.get("list_size", c.rerank.list_size);
    s.get("batch_size", c.rerank.batch_size);
    s.get("steps", c.rerank.steps);
    s.get("depth", c.rerank.depth);
    read_optimizer(s, c.rerank.optimizer);
  }
  c.finalize();
  return c;
}

RunConfig parse_config_text(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  return parse_config(j);
}

RunConfig load_config(const std::filesystem::path& path) {
  return parse_config_text(text::read_file(path));
}

json to_json(const RunConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["holdout_fraction"] = c.holdout_fraction;
  j["recall_ks"] = c.recall_ks;
  j["data"] = {{"n_concepts", c.data.n_concepts},
               {"n_queries", c.data.n_queries},
               {"n_candidates", c.data.n_candidates},
               {"latent_dim", c.data.latent_dim},
               {"raw_dim", c.data.raw_dim},
               {"view_noise_sigma", c.data.view_noise_sigma},
               {"distractor_ratio", c.data.distractor_ratio},
               {"sibling_spread", c.data.sibling_spread},
               {"relevance_exponent", c.data.relevance_exponent}};
  j["encoder"] = {{"hidden", c.encoder.hidden}, {"emb", c.encoder.emb}};
  j["pool_encoder"] = {{"steps", c.pool_encoder.steps},
                   {"k_negatives", c.pool_encoder.k_negatives},
                   {"batch_size", c.pool_encoder.batch_size},
                   {"tau", c.pool_encoder.tau},
                   {"lr", c.pool_encoder.optimizer.lr},
                   {"momentum", c.pool_encoder.optimizer.momentum}};
  j["judge"] = {{"kind", c.judge.kind},
                {"noise", c.judge.noise},
                {"endpoint", c.judge.endpoint},
                {"max_retries", c.judge.max_retries},
                {"concurrency", c.judge.concurrency},
                {"timeout_seconds", c.judge.timeout_seconds}};
  j["miner"] = {{"pool_size", c.miner.pool_size},
                {"delta", c.miner.delta},
                {"beta", c.miner.beta},
                {"cycle_interval", c.miner.cycle_interval},
                {"mined_size", c.miner.mined_size},
                {"fallback_score", c.miner.fallback_score}};
  j["align"] = {{"tau", c.align.tau},
                {"k_negatives", c.align.k_negatives},
                {"batch_size", c.align.batch_size},
                {"steps", c.align.steps},
                {"eval_every", c.align.eval_every},
                {"lr", c.align.optimizer.lr},
                {"momentum", c.align.optimizer.momentum},
                {"loss", std::string(to_string(c.align.loss))}};
  if (c.align.score_tau) j["align"]["score_tau"] = *c.align.score_tau;
  j["rerank"] = {{"hidden", c.rerank.dims.hidden},
                 {"list_size", c.rerank.list_size},
                 {"batch_size", c.rerank.batch_size},
                 {"steps", c.rerank.steps},
                 {"depth", c.rerank.depth},
                 {"lr", c.rerank.optimizer.lr},
                 {"momentum", c.rerank.optimizer.momentum}};
  return j;
}

void apply_overrides(RunConfig& config, const ConfigOverrides& o) {
  if (o.seed) config.seed = *o.seed;
  if (o.threads) config.threads = *o.threads;
  if (o.tau) config.align.tau = *o.tau;
  if (o.k_negatives) config.align.k_negatives = *o.k_negatives;
  if (o.delta) config.miner.delta = *o.delta;
  if (o.beta) config.miner.beta = *o.beta;
  if (o.rerank_depth) config.rerank.depth = *o.rerank_depth;
  config.finalize();
}

std::string fingerprint_of(const json& j) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(j.dump())));
  return buf;
}

StageFingerprints stage_fingerprints(const RunConfig& config) {
  const json j = to_json(config);
  StageFingerprints f;
  f.data = fingerprint_of({{"stage", "data"}, {"seed", j["seed"]}, {"data", j["data"]},
                           {"holdout_fraction", j["holdout_fraction"]}});
  f.pool = fingerprint_of({{"stage", "pool"}, {"up", f.data}, {"encoder", j["encoder"]},
                           {"pool_encoder", j["pool_encoder"]}});
  json judge = j["judge"];
  judge.erase("max_retries");
  judge.erase("concurrency");
  judge.erase("timeout_seconds");
  f.judge = fingerprint_of({{"stage", "judge"}, {"up", f.data}, {"judge", judge}});
  f.mined = fingerprint_of({{"stage", "mined"}, {"up", f.pool}, {"judge", f.judge},
                            {"miner", j["miner"]}});
  f.encoder_init = fingerprint_of({{"stage", "encoder-init"}, {"up", f.data}, {"encoder", j["encoder"]}});
  json align = j["align"];
  align.erase("eval_every");
  f.encoder = fingerprint_of({{"stage", "encoder"}, {"up", f.mined}, {"init", f.encoder_init},
                              {"align", align}});
  json rerank = j["rerank"];
  rerank.erase("depth");
  align["loss"] = "onehot";
  f.onehot_encoder = fingerprint_of({{"stage", "encoder"}, {"up", f.mined}, {"init", f.encoder_init},
                                     {"align", align}});
  f.reranker = fingerprint_of({{"stage", "reranker"}, {"up", f.encoder}, {"rerank", rerank}});
  f.retrieved = fingerprint_of({{"stage", "retrieved"}, {"up", f.encoder}, {"depth", j["rerank"]["depth"]},
                               {"ks", j["recall_ks"]}});
  f.reranked = fingerprint_of({{"stage", "reranked"}, {"up", f.reranker}, {"retrieved", f.retrieved}});
  f.report = fingerprint_of({{"stage", "report"}, {"up", f.reranked}, {"ks", j["recall_ks"]}});
  return f;
}

}  // namespace softalign
