#include "softalign/pipeline.hpp"

#include "softalign/checkpoint.hpp"
#include "softalign/parallel.hpp"
#include "softalign/retrieval.hpp"
#include "softalign/rng.hpp"
#include "softalign/text_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace softalign {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kEmbeddingsKind = "embeddings";
constexpr std::string_view kRankedKind = "ranked";
constexpr int kArtifactVersion = 1;

std::string checkpoint_config(const RunConfig& config, std::string_view fingerprint) {
  return nlohmann::json{{"fingerprint", fingerprint}, {"config", to_json(config)}}.dump();
}

/// Fingerprint recorded in any pipeline artifact.
std::string artifact_fingerprint(const fs::path& path) {
  if (path.extension() == ".ckpt") {
    const Checkpoint c = load_checkpoint(path);
    const auto j = nlohmann::json::parse(c.config, nullptr, false);
    if (j.is_discarded() || !j.contains("fingerprint") || !j["fingerprint"].is_string()) {
      throw CorruptionError(path.string() + ": checkpoint carries no fingerprint");
    }
    return j["fingerprint"].get<std::string>();
  }
  if (path.extension() == ".json") {
    std::string fp;
    read_ground_truth(path, &fp);
    return fp;
  }
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  const auto parts = text::split(line, ' ');
  constexpr std::string_view key = "fingerprint=";
  if (parts.size() != 4 || parts[0] != "#softalign" || !parts[3].starts_with(key)) {
    throw CorruptionError(path.string() + ": missing artifact header");
  }
  return std::string(parts[3].substr(key.size()));
}

void write_embeddings(const fs::path& path, const EmbeddingTable& table, std::string_view fp) {
  std::string out = text::header_line(kEmbeddingsKind, kArtifactVersion, fp) + "\n";
  for (std::size_t i = 0; i < table.ids().size(); ++i) {
    out += table.ids()[i] + "\t" +
           text::format_vector(table.columns().col(static_cast<Eigen::Index>(i))) + "\n";
  }
  text::atomic_write(path, out);
}

EmbeddingTable read_embeddings(const fs::path& path) {
  std::istringstream in(text::read_file(path));
  std::string line;
  if (!std::getline(in, line)) throw CorruptionError(path.string() + ": empty file");
  text::parse_header(line, kEmbeddingsKind, kArtifactVersion);
  std::vector<std::string> ids;
  std::vector<Vector> cols;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string ctx = path.filename().string() + " line " + std::to_string(line_no);
    const auto f = text::split(line, '\t');
    if (f.size() != 2) throw CorruptionError(ctx + ": expected id and vector");
    ids.emplace_back(f[0]);
    cols.push_back(text::parse_vector(f[1], ctx));
    if (cols.back().size() != cols.front().size()) throw CorruptionError(ctx + ": dimension changes");
  }
  if (cols.empty()) throw CorruptionError(path.string() + ": no embeddings");
  Matrix m(cols.front().size(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) m.col(static_cast<Eigen::Index>(i)) = cols[i];
  return EmbeddingTable(std::move(ids), std::move(m));
}

std::vector<std::string> item_ids(const Corpus& corpus) {
  std::vector<std::string> ids;
  ids.reserve(corpus.items().size());
  for (const auto& item : corpus.items()) ids.push_back(item.id);
  return ids;
}

Index candidate_index(const EncoderParams& encoder, const Corpus& corpus, unsigned threads) {
  std::vector<const Item*> items;
  items.reserve(corpus.candidates().size());
  for (const auto& id : corpus.candidates()) items.push_back(&corpus.item(id));
  return Index::build(corpus.candidates(), encode_all(encoder, items, threads));
}

std::size_t retrieval_depth(const RunConfig& config) {
  int depth = config.rerank.depth;
  for (const int k : config.recall_ks) depth = std::max(depth, k);
  return static_cast<std::size_t>(depth);
}

}  // namespace

QuerySplit split_queries(const Corpus& corpus, double holdout_fraction, std::uint64_t seed) {
  const auto& queries = corpus.queries();
  QuerySplit split;
  if (holdout_fraction <= 0.0 || queries.size() < 2) {
    for (const auto& q : queries) split.train.push_back(q.query_id);
    split.holdout = queries;
    return split;
  }
  const std::size_t n = queries.size();
  const auto n_hold = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(holdout_fraction * static_cast<double>(n))), 1, n - 1);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng = make_rng(seed, "split");
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<bool> held(n, false);
  for (std::size_t i = 0; i < n_hold; ++i) held[order[i]] = true;
  for (std::size_t i = 0; i < n; ++i) {
    if (held[i]) {
      split.holdout.push_back(queries[i]);
    } else {
      split.train.push_back(queries[i].query_id);
    }
  }
  return split;
}

EncoderParams train_pool_encoder(const Corpus& corpus, std::span<const std::string> train_queries,
                                 EncoderParams init, const PoolEncoderConfig& config,
                                 std::uint64_t seed, unsigned threads) {
  if (config.steps == 0) return init;
  if (train_queries.empty()) throw std::invalid_argument("train_pool_encoder: no training queries");
  const auto& candidates = corpus.candidates();
  if (candidates.size() < 2) throw std::invalid_argument("train_pool_encoder: need two candidates");

  AlignConfig align;
  align.tau = config.tau;
  align.k_negatives = config.k_negatives;
  align.batch_size = config.batch_size;
  align.steps = config.steps;
  align.optimizer = config.optimizer;
  align.loss = AlignLoss::one_hot;
  align.seed = seed;
  align.threads = threads;

  const int k = config.k_negatives;
  const BatchSource batches = [&](int step) {
    Rng rng = make_rng(seed, "pool/batch", std::to_string(step));
    std::uniform_int_distribution<std::size_t> pick_query(0, train_queries.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_candidate(0, candidates.size() - 1);
    std::vector<TrainingExample> batch(static_cast<std::size_t>(config.batch_size));
    for (auto& ex : batch) {
      const std::string& qid = train_queries[pick_query(rng)];
      const std::string& tid = corpus.target_of(qid);
      ex.query = &corpus.item(qid);
      ex.target = &corpus.item(tid);
      while (ex.negatives.size() < static_cast<std::size_t>(k)) {
        const std::string& cid = candidates[pick_candidate(rng)];
        if (cid != tid) ex.negatives.push_back(&corpus.item(cid));
      }
      ex.scores = Vector::Zero(k + 1);
    }
    return batch;
  };
  return train_on_batches(batches, std::move(init), align).params;
}

AlignTrainResult baseline_infonce_train(const Corpus& corpus, std::span<const MinedSet> mined,
                                        EncoderParams init, AlignConfig config,
                                        const EvalHook& eval) {
  config.loss = AlignLoss::one_hot;
  return train_encoder(corpus, mined, std::move(init), config, eval);
}

RankedLists retrieve_all(const EncoderParams& encoder, const Corpus& corpus,
                         std::span<const QueryTarget> queries, std::size_t depth, unsigned threads) {
  const Index index = candidate_index(encoder, corpus, threads);
  std::vector<const Item*> items;
  items.reserve(queries.size());
  for (const auto& q : queries) items.push_back(&corpus.item(q.query_id));
  const Matrix embedded = encode_all(encoder, items, threads);
  auto results = index.top_k_batch(embedded, depth, threads);
  RankedLists lists;
  for (std::size_t i = 0; i < queries.size(); ++i) lists[queries[i].query_id] = std::move(results[i]);
  return lists;
}

RankedLists rerank_all(const RerankerParams& reranker, const EncoderParams& encoder,
                       const Corpus& corpus, const RankedLists& retrieved, int depth,
                       unsigned threads) {
  std::vector<std::string> keys;
  keys.reserve(retrieved.size());
  for (const auto& [qid, list] : retrieved) keys.push_back(qid);
  std::sort(keys.begin(), keys.end());

  std::vector<RankedList> out(keys.size());
  parallel_for(keys.size(), threads, [&](std::size_t i) {
    const RankedList& list = retrieved.at(keys[i]);
    const auto head = std::min<std::size_t>(static_cast<std::size_t>(depth), list.size());
    RankedList top(list.begin(), list.begin() + static_cast<std::ptrdiff_t>(head));
    RankedList result = rerank(reranker, corpus.item(keys[i]), top, corpus, encoder);
    result.insert(result.end(), list.begin() + static_cast<std::ptrdiff_t>(head), list.end());
    out[i] = std::move(result);
  });
  RankedLists lists;
  for (std::size_t i = 0; i < keys.size(); ++i) lists[keys[i]] = std::move(out[i]);
  return lists;
}

void write_ranked_lists(const fs::path& path, const RankedLists& lists,
                        std::span<const QueryTarget> order, std::string_view fingerprint) {
  std::string out = text::header_line(kRankedKind, kArtifactVersion, fingerprint) + "\n";
  for (const auto& q : order) {
    const auto it = lists.find(q.query_id);
    if (it == lists.end()) continue;
    out += q.query_id;
    for (const auto& c : it->second) out += "\t" + c.id + "\t" + text::format_double(c.score);
    out += "\n";
  }
  text::atomic_write(path, out);
}

RankedLists read_ranked_lists(const fs::path& path, std::string* fingerprint) {
  std::istringstream in(text::read_file(path));
  std::string line;
  if (!std::getline(in, line)) throw CorruptionError(path.string() + ": empty file");
  const auto header = text::parse_header(line, kRankedKind, kArtifactVersion);
  if (fingerprint) *fingerprint = header.fingerprint;
  RankedLists lists;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string ctx = path.filename().string() + " line " + std::to_string(line_no);
    const auto f = text::split(line, '\t');
    if (f.size() % 2 != 1) throw CorruptionError(ctx + ": expected query id then (id, score) pairs");
    RankedList list;
    for (std::size_t i = 1; i < f.size(); i += 2) {
      list.push_back({std::string(f[i]), text::parse_double(f[i + 1], ctx)});
    }
    if (!lists.emplace(std::string(f[0]), std::move(list)).second) {
      throw CorruptionError(ctx + ": duplicate query '" + std::string(f[0]) + "'");
    }
  }
  return lists;
}

Pipeline::Pipeline(RunConfig config, fs::path out_dir, std::vector<fs::path> reuse)
    : config_(std::move(config)), out_(std::move(out_dir)), reuse_(std::move(reuse)) {
  config_.finalize();
  fp_ = stage_fingerprints(config_);
  fs::create_directories(out_);
}

Pipeline::~Pipeline() = default;

template <typename F>
decltype(auto) Pipeline::stage(const char* name, F&& body) {
  try {
    return body();
  } catch (const StageError&) {
    throw;
  } catch (const FingerprintMismatch& e) {
    throw FingerprintMismatch("stage '" + std::string(name) + "': " + e.what());
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

fs::path Pipeline::path(std::string_view name) const { return out_ / name; }

bool Pipeline::locate(std::string_view name, std::string_view fingerprint) {
  const fs::path target = path(name);
  if (fs::exists(target)) {
    const std::string found = artifact_fingerprint(target);
    if (found != fingerprint) {
      throw FingerprintMismatch(target.string() + " was written under fingerprint " + found +
                                ", current configuration is " + std::string(fingerprint) +
                                "; use a fresh output directory");
    }
    return true;
  }
  for (const auto& dir : reuse_) {
    const fs::path source = dir / name;
    if (fs::exists(source) && artifact_fingerprint(source) == fingerprint) {
      fs::copy_file(source, target, fs::copy_options::overwrite_existing);
      return true;
    }
  }
  return false;
}

const SyntheticData& Pipeline::data() {
  if (!data_) {
    stage("gen-data", [&] {
      if (locate("corpus.tsv", fp_.data) && locate("ground_truth.json", fp_.data)) {
        data_ = SyntheticData{text::read_corpus(path("corpus.tsv")),
                              read_ground_truth(path("ground_truth.json"))};
      } else {
        data_ = generate(config_.data);
        text::write_corpus(path("corpus.tsv"), data_->corpus, fp_.data);
        write_ground_truth(path("ground_truth.json"), data_->corpus, data_->truth, fp_.data);
      }
    });
  }
  return *data_;
}

const QuerySplit& Pipeline::split() {
  if (!split_) split_ = split_queries(data().corpus, config_.holdout_fraction, config_.seed);
  return *split_;
}

EncoderParams Pipeline::initial_encoder() const {
  return init_encoder(config_.encoder, derive_seed(config_.seed, "encoder-init"));
}

const EncoderParams& Pipeline::pool_encoder() {
  if (!pool_encoder_) {
    stage("embed", [&] {
      if (locate("pool_encoder.ckpt", fp_.pool)) {
        pool_encoder_ = std::get<EncoderParams>(load_checkpoint(path("pool_encoder.ckpt")).params);
        return;
      }
      const Corpus& corpus = data().corpus;
      const std::uint64_t seed = derive_seed(config_.seed, "pool");
      pool_encoder_ = train_pool_encoder(corpus, split().train,
                                         init_encoder(config_.encoder, derive_seed(seed, "init")),
                                         config_.pool_encoder, seed, config_.threads);
      save_checkpoint(path("pool_encoder.ckpt"),
                      Checkpoint{kCheckpointVersion, *pool_encoder_,
                                 checkpoint_config(config_, fp_.pool), seed});
    });
  }
  return *pool_encoder_;
}

const EmbeddingTable& Pipeline::pool_embeddings() {
  if (!pool_embeddings_) {
    const EncoderParams& encoder = pool_encoder();
    stage("embed", [&] {
      if (locate("pool_embeddings.tsv", fp_.pool)) {
        pool_embeddings_ = read_embeddings(path("pool_embeddings.tsv"));
        return;
      }
      const Corpus& corpus = data().corpus;
      pool_embeddings_ = EmbeddingTable::embed(encoder, corpus, item_ids(corpus), config_.threads);
      write_embeddings(path("pool_embeddings.tsv"), *pool_embeddings_, fp_.pool);
    });
  }
  return *pool_embeddings_;
}

const Index& Pipeline::pool_index() {
  if (!pool_index_) {
    const EmbeddingTable& table = pool_embeddings();
    const Corpus& corpus = data().corpus;
    Matrix cols(table.dim(), static_cast<Eigen::Index>(corpus.candidates().size()));
    for (std::size_t i = 0; i < corpus.candidates().size(); ++i) {
      cols.col(static_cast<Eigen::Index>(i)) = table[corpus.candidates()[i]];
    }
    pool_index_ = Index::build(corpus.candidates(), cols);
  }
  return *pool_index_;
}

std::unique_ptr<Judge> Pipeline::make_judge() {
  if (config_.judge.kind == "oracle") {
    return std::make_unique<OracleJudge>(data().truth, config_.judge.noise,
                                         derive_seed(config_.seed, "judge/noise"));
  }
  std::string endpoint = RemoteJudge::endpoint_from_env().value_or(config_.judge.endpoint);
  if (endpoint.empty()) {
    throw std::invalid_argument(std::string("remote judge needs judge.endpoint or ") +
                                kJudgeEndpointEnv);
  }
  return std::make_unique<RemoteJudge>(
      RemoteJudge::Options{std::move(endpoint), "/judge", config_.judge.timeout_seconds});
}

ScoreCache& Pipeline::judge_scores() {
  if (!cache_complete_) {
    const Index& index = pool_index();
    const EmbeddingTable& pool = pool_embeddings();
    stage("judge", [&] {
      if (!cache_) {
        locate("score_cache.tsv", fp_.judge);
        cache_ = std::make_unique<ScoreCache>(path("score_cache.tsv"), fp_.judge);
      }
      const Corpus& corpus = data().corpus;
      const auto& train = split().train;
      std::vector<CandidatePool> pools(train.size());
      parallel_for(train.size(), config_.threads, [&](std::size_t i) {
        pools[i] = build_pool(train[i], pool[train[i]], corpus.target_of(train[i]), index,
                              config_.miner);
      });
      std::vector<JudgePair> pairs;
      for (std::size_t i = 0; i < train.size(); ++i) {
        const Item* q = &corpus.item(train[i]);
        pairs.push_back({q, &corpus.item(corpus.target_of(train[i]))});
        for (const auto& e : pools[i].entries) pairs.push_back({q, &corpus.item(e.candidate_id)});
      }
      const auto judge = make_judge();
      judge_batch(*judge, pairs, cache_.get(), {config_.judge.concurrency, config_.judge.max_retries});
      cache_->flush();
      cache_complete_ = true;
    });
  }
  return *cache_;
}

const std::vector<MinedSet>& Pipeline::mined() {
  if (!mined_) {
    stage("mine", [&] {
      if (locate("mined.tsv", fp_.mined)) {
        mined_ = load_mined(path("mined.tsv"));
        return;
      }
      ScoreCache& cache = judge_scores();
      const auto judge = make_judge();
      MineContext ctx;
      ctx.corpus = &data().corpus;
      ctx.index = &pool_index();
      ctx.baseline = &pool_embeddings();
      ctx.judge = judge.get();
      ctx.cache = &cache;
      ctx.judge_options = {config_.judge.concurrency, config_.judge.max_retries};
      ctx.seed = derive_seed(config_.seed, "mine");
      ctx.threads = config_.threads;
      mined_ = mine_queries(split().train, ctx, config_.miner);
      persist_mined(path("mined.tsv"), *mined_, fp_.mined);
    });
  }
  return *mined_;
}

AlignTrainResult Pipeline::train_aligned(AlignConfig cfg, std::string_view trace_name,
                                         std::string_view fp) {
  const auto& sets = mined();
  EvalHook hook;
  if (cfg.eval_every > 0) hook = [this](const EncoderParams& p) { return holdout_precision_at_1(p); };
  AlignTrainResult result = cfg.loss == AlignLoss::one_hot
                                ? baseline_infonce_train(data().corpus, sets, initial_encoder(), cfg, hook)
                                : train_encoder(data().corpus, sets, initial_encoder(), cfg, hook);
  write_trace(path(trace_name), result.trace, fp);
  return result;
}

const EncoderParams& Pipeline::encoder() {
  if (!encoder_) {
    stage("train-embed", [&] {
      if (locate("encoder.ckpt", fp_.encoder)) {
        encoder_ = std::get<EncoderParams>(load_checkpoint(path("encoder.ckpt")).params);
        return;
      }
      encoder_ = train_aligned(config_.align, "encoder_trace.jsonl", fp_.encoder).params;
      save_checkpoint(path("encoder.ckpt"),
                      Checkpoint{kCheckpointVersion, *encoder_, checkpoint_config(config_, fp_.encoder),
                                 config_.align.seed});
    });
  }
  return *encoder_;
}

const EncoderParams& Pipeline::onehot_encoder() {
  if (!onehot_encoder_) {
    stage("train-baseline", [&] {
      if (locate("encoder_onehot.ckpt", fp_.onehot_encoder)) {
        onehot_encoder_ = std::get<EncoderParams>(load_checkpoint(path("encoder_onehot.ckpt")).params);
        return;
      }
      AlignConfig cfg = config_.align;
      cfg.loss = AlignLoss::one_hot;
      onehot_encoder_ = train_aligned(cfg, "encoder_onehot_trace.jsonl", fp_.onehot_encoder).params;
      save_checkpoint(path("encoder_onehot.ckpt"),
                      Checkpoint{kCheckpointVersion, *onehot_encoder_,
                                 checkpoint_config(config_, fp_.onehot_encoder), cfg.seed});
    });
  }
  return *onehot_encoder_;
}

const RerankerParams& Pipeline::reranker() {
  if (!reranker_) {
    stage("train-rerank", [&] {
      if (locate("reranker.ckpt", fp_.reranker)) {
        reranker_ = std::get<RerankerParams>(load_checkpoint(path("reranker.ckpt")).params);
        return;
      }
      const auto& sets = mined();
      const EncoderParams& enc = encoder();
      std::vector<std::string> ids;
      for (const auto& m : sets) {
        ids.push_back(m.query_id);
        ids.push_back(m.target_id);
        for (const auto& n : m.negatives) ids.push_back(n.candidate_id);
      }
      std::sort(ids.begin(), ids.end());
      ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
      const EmbeddingTable table = EmbeddingTable::embed(enc, data().corpus, ids, config_.threads);
      const RerankTrainResult result = train_reranker(
          sets, table, init_reranker(config_.rerank.dims, derive_seed(config_.seed, "reranker-init")),
          config_.rerank);
      std::vector<TraceRecord> trace;
      for (std::size_t i = 0; i < result.loss_trace.size(); ++i) {
        trace.push_back({static_cast<int>(i), result.loss_trace[i], std::nullopt});
      }
      write_trace(path("reranker_trace.jsonl"), trace, fp_.reranker);
      reranker_ = result.params;
      save_checkpoint(path("reranker.ckpt"),
                      Checkpoint{kCheckpointVersion, *reranker_, checkpoint_config(config_, fp_.reranker),
                                 config_.rerank.seed});
    });
  }
  return *reranker_;
}

const RankedLists& Pipeline::retrieved() {
  if (!retrieved_) {
    stage("retrieve", [&] {
      if (locate("retrieved.tsv", fp_.retrieved)) {
        retrieved_ = read_ranked_lists(path("retrieved.tsv"));
        return;
      }
      const EncoderParams& enc = encoder();
      retrieved_ = retrieve_all(enc, data().corpus, split().holdout, retrieval_depth(config_),
                                config_.threads);
      write_ranked_lists(path("retrieved.tsv"), *retrieved_, split().holdout, fp_.retrieved);
    });
  }
  return *retrieved_;
}

const RankedLists& Pipeline::reranked() {
  if (!reranked_) {
    stage("rerank", [&] {
      if (locate("reranked.tsv", fp_.reranked)) {
        reranked_ = read_ranked_lists(path("reranked.tsv"));
        return;
      }
      const RankedLists& lists = retrieved();
      const RerankerParams& params = reranker();
      reranked_ = rerank_all(params, encoder(), data().corpus, lists, config_.rerank.depth,
                             config_.threads);
      write_ranked_lists(path("reranked.tsv"), *reranked_, split().holdout, fp_.reranked);
    });
  }
  return *reranked_;
}

double Pipeline::holdout_precision_at_1(const EncoderParams& encoder) {
  const auto& holdout = split().holdout;
  return precision_at_1(retrieve_all(encoder, data().corpus, holdout, 1, config_.threads), holdout);
}

std::vector<EvalReport> Pipeline::evaluate() {
  const RankedLists& retrieval = retrieved();
  const RankedLists& rerank = reranked();
  return stage("eval", [&] {
    const auto& holdout = split().holdout;
    const RankedLists init = retrieve_all(initial_encoder(), data().corpus, holdout,
                                          retrieval_depth(config_), config_.threads);
    std::vector<EvalReport> reports{
        softalign::evaluate("init", init, holdout, config_.recall_ks, fp_.report),
        softalign::evaluate("retrieval", retrieval, holdout, config_.recall_ks, fp_.report),
        softalign::evaluate("reranked", rerank, holdout, config_.recall_ks, fp_.report)};
    text::atomic_write(path("report.txt"), format_report_table(reports));
    text::atomic_write(path("report.jsonl"), format_report_jsonl(reports));
    return reports;
  });
}

std::vector<EvalReport> Pipeline::run() {
  data();
  pool_embeddings();
  judge_scores();
  mined();
  encoder();
  reranker();
  retrieved();
  reranked();
  return evaluate();
}

std::vector<EvalReport> run_pipeline(const RunConfig& config, const fs::path& out_dir) {
  return Pipeline(config, out_dir).run();
}

SweepAxis parse_sweep_axis(std::string_view name) {
  if (name == "k_negatives") return SweepAxis::k_negatives;
  if (name == "tau") return SweepAxis::tau;
  if (name == "components") return SweepAxis::components;
  if (name == "judge_noise") return SweepAxis::judge_noise;
  throw std::invalid_argument("unknown sweep axis '" + std::string(name) +
                              "' (expected k_negatives, tau, components or judge_noise)");
}

std::string_view to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::k_negatives: return "k_negatives";
    case SweepAxis::tau: return "tau";
    case SweepAxis::components: return "components";
    case SweepAxis::judge_noise: return "judge_noise";
  }
  return "?";
}

std::vector<std::string> default_sweep_values(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::k_negatives: return {"4", "6", "8", "10"};
    case SweepAxis::tau: return {"0.01", "0.02", "0.03"};
    case SweepAxis::components: return {"onehot", "soft"};
    case SweepAxis::judge_noise: return {"0", "0.1", "0.2", "0.4"};
  }
  return {};
}

RunConfig with_axis_value(const RunConfig& base, SweepAxis axis, std::string_view value) {
  RunConfig c = base;
  const std::string ctx = std::string(to_string(axis)) + " value";
  switch (axis) {
    case SweepAxis::k_negatives:
      c.align.k_negatives = static_cast<int>(text::parse_int(value, ctx));
      c.miner.mined_size = std::max(c.miner.mined_size, c.align.k_negatives);
      break;
    case SweepAxis::tau:
      c.align.tau = text::parse_double(value, ctx);
      break;
    case SweepAxis::components:
      c.align.loss = parse_align_loss(value);
      break;
    case SweepAxis::judge_noise:
      c.judge.noise = text::parse_double(value, ctx);
      break;
  }
  c.finalize();
  return c;
}

SweepResult ablation_sweep(const RunConfig& base, SweepAxis axis, std::span<const std::string> values,
                           const fs::path& out_dir) {
  SweepResult result{axis, {}};
  std::vector<fs::path> done;
  fs::create_directories(out_dir);
  for (const auto& value : values) {
    SweepRow row;
    row.value = value;
    const fs::path cell = out_dir / (std::string(to_string(axis)) + "-" + value);
    try {
      Pipeline pipeline(with_axis_value(base, axis, value), cell, done);
      row.reports = pipeline.run();
      done.push_back(cell);
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    result.rows.push_back(std::move(row));
  }
  const std::string name = "sweep-" + std::string(to_string(axis));
  text::atomic_write(out_dir / (name + ".txt"), format_sweep_table(result));
  text::atomic_write(out_dir / (name + ".jsonl"), format_sweep_jsonl(result));
  return result;
}

namespace {

const EvalReport* find_stage(const SweepRow& row, std::string_view stage) {
  for (const auto& r : row.reports) {
    if (r.stage == stage) return &r;
  }
  return nullptr;
}

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

}  // namespace

std::string format_sweep_table(const SweepResult& result) {
  std::vector<int> ks;
  for (const auto& row : result.rows) {
    if (const auto* r = find_stage(row, "retrieval")) {
      for (const auto& [k, v] : r->recall_at_k) ks.push_back(k);
      break;
    }
  }
  std::vector<std::string> header{std::string(to_string(result.axis)), "P@1 init", "P@1 retrieval",
                                  "P@1 reranked"};
  for (const int k : ks) header.push_back("R@" + std::to_string(k));
  header.push_back("fingerprint / error");

  std::vector<std::vector<std::string>> rows{header};
  for (const auto& row : result.rows) {
    std::vector<std::string> cells{row.value};
    const auto* init = find_stage(row, "init");
    const auto* ret = find_stage(row, "retrieval");
    const auto* rr = find_stage(row, "reranked");
    if (!row.error.empty() || !ret) {
      for (std::size_t i = 1; i + 1 < header.size(); ++i) cells.push_back("-");
      cells.push_back("FAILED: " + row.error);
    } else {
      cells.push_back(init ? fixed(init->precision_at_1) : "-");
      cells.push_back(fixed(ret->precision_at_1));
      cells.push_back(rr ? fixed(rr->precision_at_1) : "-");
      for (const int k : ks) {
        const auto it = ret->recall_at_k.find(k);
        cells.push_back(it == ret->recall_at_k.end() ? "-" : fixed(it->second));
      }
      cells.push_back(ret->fingerprint);
    }
    rows.push_back(std::move(cells));
  }

  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
  }
  std::string out;
  for (const auto& r : rows) {
    std::string line;
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (i) line += "  ";
      line += r[i];
      if (i + 1 < r.size()) line.append(width[i] - r[i].size(), ' ');
    }
    out += line + "\n";
  }
  return out;
}

std::string format_sweep_jsonl(const SweepResult& result) {
  std::string out;
  for (const auto& row : result.rows) {
    nlohmann::json j{{"axis", to_string(result.axis)}, {"value", row.value}};
    if (!row.error.empty()) {
      j["status"] = "failed";
      j["error"] = row.error;
    } else {
      j["status"] = "ok";
      for (const auto& r : row.reports) {
        nlohmann::json recall = nlohmann::json::object();
        for (const auto& [k, v] : r.recall_at_k) recall[std::to_string(k)] = v;
        j["reports"][r.stage] = {{"precision_at_1", r.precision_at_1}, {"recall_at_k", recall},
                                 {"fingerprint", r.fingerprint}};
      }
    }
    out += j.dump() + "\n";
  }
  return out;
}

}  // namespace softalign
