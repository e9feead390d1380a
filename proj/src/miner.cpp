#include "softalign/miner.hpp"

#include "softalign/errors.hpp"
#include "softalign/parallel.hpp"
#include "softalign/text_io.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace softalign {

void MinerConfig::validate() const {
  if (std::isnan(delta)) throw std::invalid_argument("miner: delta must be set explicitly");
  if (mined_size < 1 || pool_size < mined_size) {
    throw std::invalid_argument("miner: need pool_size >= mined_size >= 1");
  }
  if (!(beta > 0.0 && beta < 1.0)) throw std::invalid_argument("miner: beta must be in (0,1)");
  if (cycle_interval < 1) throw std::invalid_argument("miner: cycle_interval must be >= 1");
}

CandidatePool build_pool(std::string query_id, const Vector& query_embedding,
                         std::string_view target_id, const Index& index, const MinerConfig& config) {
  config.validate();
  const auto pool_size = static_cast<std::size_t>(config.pool_size);
  const RankedList retrieved = index.top_k(query_embedding, 2 * pool_size);

  CandidatePool pool;
  pool.query_id = std::move(query_id);
  for (const auto& hit : retrieved) {
    if (hit.id == target_id) continue;
    if (pool.initial.size() < pool_size) pool.initial.push_back(hit);
    if (hit.score >= config.delta) continue;
    if (pool.entries.size() < pool_size) pool.entries.push_back({hit.id, hit.score, 0.0});
  }
  return pool;
}

CandidatePool build_pool(const Item& query, std::string_view target_id, const Index& index,
                         const EncoderParams& baseline, const MinerConfig& config) {
  return build_pool(query.id, encode(baseline, query), target_id, index, config);
}

std::vector<PoolEntry> filter_false_negatives(const CandidatePool& pool, double target_score,
                                              double beta) {
  const double alpha = target_score - beta;
  std::vector<PoolEntry> kept;
  for (const auto& e : pool.entries) {
    if (!(e.judge_score > alpha)) kept.push_back(e);
  }
  return kept;
}

std::vector<std::size_t> cyclic_sample(std::size_t n, int interval, int m) {
  if (interval < 1 || m < 1) throw std::invalid_argument("cyclic_sample: interval and m must be >= 1");
  std::vector<std::size_t> picks;
  if (n == 0) return picks;
  const auto target = static_cast<std::size_t>(m);
  const auto stride = static_cast<std::size_t>(interval);
  for (std::size_t offset = 0; offset < stride && picks.size() < target; ++offset) {
    for (std::size_t i = offset; i < n && picks.size() < target; i += stride) picks.push_back(i);
  }
  const std::size_t distinct = picks.size();
  while (picks.size() < target) picks.push_back(picks[picks.size() % distinct]);
  return picks;
}

MinedSet select_negatives(const CandidatePool& pool, std::string target_id, double target_score,
                          const MinerConfig& config, Rng& rng) {
  MinedSet set;
  set.query_id = pool.query_id;
  set.target_id = std::move(target_id);
  set.target_score = target_score;

  const auto survivors = filter_false_negatives(pool, target_score, config.beta);
  if (!survivors.empty()) {
    for (const auto i : cyclic_sample(survivors.size(), config.cycle_interval, config.mined_size)) {
      set.negatives.push_back({survivors[i].candidate_id, survivors[i].judge_score});
    }
    return set;
  }

  const auto m = static_cast<std::size_t>(config.mined_size);
  if (pool.initial.size() < m) {
    throw std::invalid_argument("mine: query '" + pool.query_id + "' has fewer than " +
                                std::to_string(m) + " candidates to fall back on");
  }
  // partial Fisher-Yates: the first m positions become a uniform sample
  std::vector<std::size_t> order(pool.initial.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = 0; i < m; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, order.size() - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  for (std::size_t i = 0; i < m; ++i) {
    set.negatives.push_back({pool.initial[order[i]].id, config.fallback_score});
  }
  set.fallback_used = true;
  return set;
}

namespace {

void check_context(const MineContext& ctx) {
  if (!ctx.corpus || !ctx.index || !ctx.baseline || !ctx.judge) {
    throw std::invalid_argument("mine: incomplete context");
  }
}

}  // namespace

std::vector<MinedSet> mine_queries(std::span<const std::string> query_ids, const MineContext& ctx,
                                   const MinerConfig& config) {
  check_context(ctx);
  config.validate();
  if (ctx.index->size() < static_cast<std::size_t>(config.mined_size) + 1) {
    throw std::invalid_argument("mine: corpus has fewer than mined_size non-target candidates");
  }
  const std::size_t n = query_ids.size();
  std::vector<CandidatePool> pools(n);
  std::vector<std::string> targets(n);
  parallel_for(n, ctx.threads, [&](std::size_t i) {
    targets[i] = ctx.corpus->target_of(query_ids[i]);
    pools[i] = build_pool(query_ids[i], (*ctx.baseline)[query_ids[i]], targets[i], *ctx.index, config);
  });

  // One ordered batch: target pair first, then the pool, query by query.
  std::vector<JudgePair> pairs;
  std::vector<std::size_t> first(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Item& q = ctx.corpus->item(query_ids[i]);
    first[i] = pairs.size();
    pairs.push_back({&q, &ctx.corpus->item(targets[i])});
    for (const auto& e : pools[i].entries) pairs.push_back({&q, &ctx.corpus->item(e.candidate_id)});
  }
  const auto scores = judge_batch(*ctx.judge, pairs, ctx.cache, ctx.judge_options);

  std::vector<MinedSet> out(n);
  parallel_for(n, ctx.threads, [&](std::size_t i) {
    auto& pool = pools[i];
    for (std::size_t j = 0; j < pool.entries.size(); ++j) pool.entries[j].judge_score = scores[first[i] + 1 + j];
    Rng rng = make_rng(ctx.seed, "mine", query_ids[i]);
    out[i] = select_negatives(pool, targets[i], scores[first[i]], config, rng);
  });
  return out;
}

MinedSet mine_query(const std::string& query_id, const MineContext& ctx, const MinerConfig& config) {
  return mine_queries(std::span<const std::string>(&query_id, 1), ctx, config).front();
}

// Persistence ----------------------------------------------------------------

namespace {
constexpr std::string_view kMinedKind = "mined-sets";
constexpr int kMinedVersion = 1;
}  // namespace

void persist_mined(const std::filesystem::path& path, std::span<const MinedSet> sets,
                   std::string_view fingerprint) {
  std::string out = text::header_line(kMinedKind, kMinedVersion, fingerprint) + "\n";
  for (const auto& s : sets) {
    out += s.query_id + "\t" + s.target_id + "\t" + text::format_double(s.target_score);
    for (const auto& n : s.negatives) out += "\t" + n.candidate_id + "\t" + text::format_double(n.score);
    out += s.fallback_used ? "\t1\n" : "\t0\n";
  }
  text::atomic_write(path, out);
}

std::vector<MinedSet> load_mined(const std::filesystem::path& path, std::string* fingerprint) {
  std::istringstream in(text::read_file(path));
  std::vector<MinedSet> sets;
  std::string line;
  if (!std::getline(in, line)) return sets;
  const auto header = text::parse_header(line, kMinedKind, kMinedVersion);
  if (fingerprint) *fingerprint = header.fingerprint;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string ctx = path.filename().string() + " line " + std::to_string(line_no);
    const auto f = text::split(line, '\t');
    if (f.size() < 6 || (f.size() - 4) % 2 != 0) {
      throw CorruptionError(ctx + ": malformed mined-set record (" + std::to_string(f.size()) + " fields)");
    }
    MinedSet s;
    s.query_id = std::string(f[0]);
    s.target_id = std::string(f[1]);
    s.target_score = text::parse_double(f[2], ctx);
    for (std::size_t i = 3; i + 1 < f.size(); i += 2) {
      s.negatives.push_back({std::string(f[i]), text::parse_double(f[i + 1], ctx)});
    }
    const auto flag = f.back();
    if (flag != "0" && flag != "1") throw CorruptionError(ctx + ": fallback flag must be 0 or 1");
    s.fallback_used = flag == "1";
    sets.push_back(std::move(s));
  }
  return sets;
}

}  // namespace softalign
