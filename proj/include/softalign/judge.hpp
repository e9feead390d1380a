#pragma once

#include "softalign/datagen.hpp"
#include "softalign/types.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace softalign {

/// Instruction sent verbatim to a remote judge; the server substitutes the
/// <Query> and <Candidate> placeholders with the rendered payloads.
inline constexpr std::string_view kJudgePromptTemplate =
    "I will provide you with a query and a candidate. Please evaluate whether the candidate "
    "meets the requirements of the query. If it does, respond with 'Yes'; if it doesn't, "
    "respond with 'No'. Query:<Query>, Candidates:<Candidate>.";
inline constexpr std::string_view kJudgePromptTemplateId = "yes-no-judge-v1";

/// Environment variable naming the remote judge base URL, e.g. http://127.0.0.1:8080
inline constexpr const char* kJudgeEndpointEnv = "SOFTALIGN_JUDGE_URL";

/// exp(yes) / (exp(yes) + exp(no)), computed without overflow.
double two_token_score(double yes_logit, double no_logit);

struct JudgeResponse {
  double yes_logit = 0.0;
  double no_logit = 0.0;
  double score = 0.5;
};

/// Scores semantic alignment of a (query, candidate) pair in [0,1].
/// Implementations must be safe to call concurrently.
class Judge {
 public:
  virtual ~Judge() = default;
  virtual double score(const Item& query, const Item& candidate) const = 0;
};

/// judge.score() with the [0,1] contract enforced.
double judge_pair(const Judge& judge, const Item& query, const Item& candidate);

/// Ground-truth judge: relevance from the latent corpus plus optional seeded
/// noise of amplitude `noise`, clamped to [0,1]. A pure function of its inputs.
class OracleJudge final : public Judge {
 public:
  explicit OracleJudge(const GroundTruth& truth, double noise = 0.0, std::uint64_t noise_seed = 0);
  double score(const Item& query, const Item& candidate) const override;

 private:
  const GroundTruth* truth_;
  double noise_;
  std::uint64_t noise_seed_;
};

/// Client for a judge served over HTTP. POST <endpoint><path> with body
///   {"prompt_template_id": ..., "prompt": ..., "query": {...}, "candidate": {...}}
/// where items are {"id", "modality", "features": [...]}; the reply must be
///   {"yes_logit": <number>, "no_logit": <number>}.
class RemoteJudge final : public Judge {
 public:
  struct Options {
    std::string endpoint;
    std::string path = "/judge";
    double timeout_seconds = 10.0;
  };

  explicit RemoteJudge(Options options);

  /// Endpoint from SOFTALIGN_JUDGE_URL, if set and non-empty.
  static std::optional<std::string> endpoint_from_env();

  static std::string build_request(const Item& query, const Item& candidate);
  /// Throws ProtocolError for anything but two finite logits.
  static JudgeResponse parse_response(std::string_view body);

  /// Throws TransportError (retryable) or ProtocolError (permanent).
  JudgeResponse respond(const Item& query, const Item& candidate) const;
  double score(const Item& query, const Item& candidate) const override;

 private:
  Options options_;
};

/// (query_id, candidate_id) -> score, optionally persisted as a line-delimited
/// file "query_id\tcandidate_id\tscore" behind a versioned header. Records are
/// only ever added; flush() rewrites the file through a temp-file rename.
class ScoreCache {
 public:
  ScoreCache() = default;
  /// Loads `path` if it exists. A file written under another fingerprint is refused.
  ScoreCache(std::filesystem::path path, std::string fingerprint);

  std::optional<double> lookup(std::string_view query_id, std::string_view candidate_id) const;
  void insert(std::string_view query_id, std::string_view candidate_id, double score);
  std::size_t size() const;
  void flush() const;

 private:
  using Key = std::pair<std::string, std::string>;

  std::optional<std::filesystem::path> path_;
  std::string fingerprint_;
  mutable std::mutex mutex_;
  std::map<Key, double> scores_;
  std::vector<Key> order_;
};

struct JudgePair {
  const Item* query = nullptr;
  const Item* candidate = nullptr;
};

struct JudgeBatchOptions {
  unsigned concurrency = 1;
  int max_retries = 3;
};

/// Scores every pair, in input order. Cached pairs are not re-judged and a
/// pair repeated within the batch is judged once. Transport failures are
/// retried up to `max_retries` times before an error naming the pair.
std::vector<double> judge_batch(const Judge& judge, std::span<const JudgePair> pairs,
                                ScoreCache* cache, const JudgeBatchOptions& options = {});

}  // namespace softalign
