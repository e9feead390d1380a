#pragma once

// Run configuration: every module's settings plus the root seed, parsed from a
// JSON file with optional command-line overrides. Unknown keys are rejected
// and the miner's delta has no default.

#include "softalign/aligner.hpp"
#include "softalign/datagen.hpp"
#include "softalign/encoder.hpp"
#include "softalign/miner.hpp"
#include "softalign/reranker.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace softalign {

/// Frozen encoder that builds the mining candidate pools: trained briefly with a
/// one-hot contrastive loss against uniformly random negatives.
struct PoolEncoderConfig {
  int steps = 500;
  int k_negatives = 8;
  int batch_size = 32;
  double tau = 0.05;
  SgdConfig optimizer{0.005, 0.9};
};

struct JudgeConfig {
  std::string kind = "oracle";  // "oracle" | "remote"
  double noise = 0.0;           // oracle only
  std::string endpoint;         // remote only; SOFTALIGN_JUDGE_URL wins when set
  int max_retries = 3;
  unsigned concurrency = 4;
  double timeout_seconds = 10.0;
};

struct RunConfig {
  std::uint64_t seed = 42;
  unsigned threads = 1;
  LatentCorpusSpec data;
  double holdout_fraction = 0.2;
  EncoderDims encoder;
  PoolEncoderConfig pool_encoder;
  JudgeConfig judge;
  MinerConfig miner;
  AlignConfig align;
  RerankConfig rerank;
  std::vector<int> recall_ks{1, 5, 10};

  /// Copies the root seed and thread count into the per-module configs and
  /// checks every module's invariants.
  void finalize();
};

RunConfig parse_config(const nlohmann::json& j);
RunConfig parse_config_text(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);

/// Canonical JSON form. Thread count is excluded: results do not depend on it.
nlohmann::json to_json(const RunConfig& config);

struct ConfigOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::optional<double> tau;
  std::optional<int> k_negatives;
  std::optional<double> delta;
  std::optional<double> beta;
  std::optional<int> rerank_depth;
};

void apply_overrides(RunConfig& config, const ConfigOverrides& overrides);

/// 16 hex digits of FNV-1a over the canonical dump of `j`.
std::string fingerprint_of(const nlohmann::json& j);

/// Fingerprints of each pipeline artifact, chained so that a change upstream
/// changes every downstream fingerprint.
struct StageFingerprints {
  std::string data;
  std::string pool;
  std::string judge;
  std::string mined;
  std::string encoder;
  std::string encoder_init;
  std::string onehot_encoder;
  std::string reranker;
  std::string retrieved;
  std::string reranked;
  std::string report;
};

StageFingerprints stage_fingerprints(const RunConfig& config);

}  // namespace softalign
