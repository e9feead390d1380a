#include "softalign/judge.hpp"

#include "softalign/errors.hpp"
#include "softalign/parallel.hpp"
#include "softalign/rng.hpp"
#include "softalign/text_io.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace softalign {

double two_token_score(double yes_logit, double no_logit) {
  const double m = std::max(yes_logit, no_logit);
  const double y = std::exp(yes_logit - m);
  const double n = std::exp(no_logit - m);
  return y / (y + n);
}

double judge_pair(const Judge& judge, const Item& query, const Item& candidate) {
  const double s = judge.score(query, candidate);
  if (!(s >= 0.0 && s <= 1.0)) {
    throw ProtocolError("judge returned score outside [0,1] for (" + query.id + ", " +
                        candidate.id + ")");
  }
  return s;
}

OracleJudge::OracleJudge(const GroundTruth& truth, double noise, std::uint64_t noise_seed)
    : truth_(&truth), noise_(noise), noise_seed_(noise_seed) {
  if (!(noise >= 0.0)) throw std::invalid_argument("oracle judge: noise must be >= 0");
}

double OracleJudge::score(const Item& query, const Item& candidate) const {
  double s = truth_->relevance(query.id, candidate.id);
  if (noise_ > 0.0) {
    Rng rng(derive_seed(noise_seed_, query.id, candidate.id));
    s += noise_ * uniform(rng, -1.0, 1.0);
  }
  return std::clamp(s, 0.0, 1.0);
}

// ScoreCache -----------------------------------------------------------------

namespace {
constexpr std::string_view kCacheKind = "score-cache";
constexpr int kCacheVersion = 1;
}  // namespace

ScoreCache::ScoreCache(std::filesystem::path path, std::string fingerprint)
    : path_(std::move(path)), fingerprint_(std::move(fingerprint)) {
  if (!std::filesystem::exists(*path_)) return;
  std::istringstream in(text::read_file(*path_));
  std::string line;
  if (!std::getline(in, line)) return;
  const auto header = text::parse_header(line, kCacheKind, kCacheVersion);
  if (header.fingerprint != fingerprint_) {
    throw FingerprintMismatch(path_->string() + ": cache written by a different judge (" +
                              header.fingerprint + " != " + fingerprint_ + ")");
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto ctx = path_->filename().string() + " line " + std::to_string(line_no);
    const auto f = text::split(line, '\t');
    if (f.size() != 3) throw CorruptionError(ctx + ": expected 3 fields");
    insert(f[0], f[1], text::parse_double(f[2], ctx));
  }
}

std::optional<double> ScoreCache::lookup(std::string_view query_id,
                                         std::string_view candidate_id) const {
  std::lock_guard lock(mutex_);
  const auto it = scores_.find(Key(query_id, candidate_id));
  if (it == scores_.end()) return std::nullopt;
  return it->second;
}

void ScoreCache::insert(std::string_view query_id, std::string_view candidate_id, double score) {
  std::lock_guard lock(mutex_);
  Key key(query_id, candidate_id);
  if (scores_.emplace(key, score).second) order_.push_back(std::move(key));
}

std::size_t ScoreCache::size() const {
  std::lock_guard lock(mutex_);
  return scores_.size();
}

void ScoreCache::flush() const {
  if (!path_) return;
  std::lock_guard lock(mutex_);
  std::string out = text::header_line(kCacheKind, kCacheVersion, fingerprint_) + "\n";
  for (const auto& key : order_) {
    out += key.first + "\t" + key.second + "\t" + text::format_double(scores_.at(key)) + "\n";
  }
  text::atomic_write(*path_, out);
}

// Batch ----------------------------------------------------------------------

std::vector<double> judge_batch(const Judge& judge, std::span<const JudgePair> pairs,
                                ScoreCache* cache, const JudgeBatchOptions& options) {
  if (pairs.empty()) throw std::invalid_argument("judge_batch: no pairs");

  std::vector<double> out(pairs.size(), 0.0);
  std::map<std::pair<std::string, std::string>, std::size_t> first_seen;
  std::vector<std::size_t> source(pairs.size());  // index whose score each slot copies
  std::vector<std::size_t> misses;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    if (!p.query || !p.candidate) throw std::invalid_argument("judge_batch: null item");
    auto [it, fresh] = first_seen.emplace(std::pair(p.query->id, p.candidate->id), i);
    source[i] = it->second;
    if (!fresh) continue;
    if (cache) {
      if (const auto hit = cache->lookup(p.query->id, p.candidate->id)) {
        out[i] = *hit;
        continue;
      }
    }
    misses.push_back(i);
  }

  parallel_for(misses.size(), options.concurrency, [&](std::size_t m) {
    const auto& p = pairs[misses[m]];
    for (int attempt = 0;; ++attempt) {
      try {
        out[misses[m]] = judge_pair(judge, *p.query, *p.candidate);
        return;
      } catch (const TransportError& e) {
        if (attempt >= options.max_retries) {
          throw TransportError("judging (" + p.query->id + ", " + p.candidate->id + ") failed after " +
                               std::to_string(attempt + 1) + " attempts: " + e.what());
        }
      } catch (const ProtocolError& e) {
        throw ProtocolError("judging (" + p.query->id + ", " + p.candidate->id + "): " + e.what());
      }
    }
  });

  if (cache) {
    for (const auto i : misses) cache->insert(pairs[i].query->id, pairs[i].candidate->id, out[i]);
  }
  for (std::size_t i = 0; i < pairs.size(); ++i) out[i] = out[source[i]];
  return out;
}

}  // namespace softalign
