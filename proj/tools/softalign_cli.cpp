// softalign: command-line front end for the pipeline stages.

#include "softalign/config.hpp"
#include "softalign/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

using namespace softalign;

struct Options {
  std::string config_path;
  std::string out_dir = "run";
  ConfigOverrides overrides;
  std::string axis;
  std::vector<std::string> values;
};

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config_path, "JSON run configuration")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", o.out_dir, "Artifact directory")->capture_default_str();
  cmd->add_option("--seed", o.overrides.seed, "Root seed");
  cmd->add_option("--threads", o.overrides.threads, "Worker threads (results do not depend on it)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--tau", o.overrides.tau, "Alignment temperature");
  cmd->add_option("--k-negatives", o.overrides.k_negatives, "Hard negatives per query in training");
  cmd->add_option("--delta", o.overrides.delta, "Pool similarity ceiling");
  cmd->add_option("--beta", o.overrides.beta, "False-negative margin");
  cmd->add_option("--rerank-depth", o.overrides.rerank_depth, "Candidates reranked per query");
}

RunConfig resolve(const Options& o) {
  RunConfig config = load_config(o.config_path);
  apply_overrides(config, o.overrides);
  return config;
}

void print_reports(const std::vector<EvalReport>& reports) {
  std::cout << format_report_table(reports);
}

int run_stage(const std::string& name, const Options& o) {
  Pipeline p(resolve(o), o.out_dir);
  if (name == "gen-data") {
    const auto& d = p.data();
    std::cout << "corpus: " << d.corpus.queries().size() << " queries, "
              << d.corpus.candidates().size() << " candidates\n";
  } else if (name == "embed") {
    std::cout << "embedded " << p.pool_embeddings().ids().size() << " items\n";
  } else if (name == "judge") {
    std::cout << "score cache: " << p.judge_scores().size() << " pairs\n";
  } else if (name == "mine") {
    std::size_t fallback = 0;
    for (const auto& m : p.mined()) fallback += m.fallback_used ? 1 : 0;
    std::cout << "mined " << p.mined().size() << " queries (" << fallback << " fallback)\n";
  } else if (name == "train-embed") {
    std::cout << "held-out P@1: " << p.holdout_precision_at_1(p.encoder()) << "\n";
  } else if (name == "train-baseline") {
    std::cout << "held-out P@1 (one-hot): " << p.holdout_precision_at_1(p.onehot_encoder()) << "\n";
  } else if (name == "train-rerank") {
    p.reranker();
    std::cout << "reranker written to " << (p.out_dir() / "reranker.ckpt").string() << "\n";
  } else if (name == "retrieve") {
    std::cout << "retrieved lists for " << p.retrieved().size() << " queries\n";
  } else if (name == "rerank") {
    std::cout << "reranked lists for " << p.reranked().size() << " queries\n";
  } else if (name == "eval") {
    print_reports(p.evaluate());
  } else if (name == "pipeline") {
    print_reports(p.run());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"softalign: judge-mined hard negatives, soft-label alignment and reranking"};
  app.require_subcommand(1);

  Options o;
  const std::vector<std::pair<std::string, std::string>> stages{
      {"gen-data", "Generate the synthetic corpus and ground truth"},
      {"embed", "Train the pool encoder and embed every item"},
      {"judge", "Judge every (query, pool candidate) pair into the score cache"},
      {"mine", "Mine judge-scored hard negatives"},
      {"train-embed", "Train the encoder with soft-score distribution alignment"},
      {"train-baseline", "Train the encoder with the one-hot contrastive baseline"},
      {"train-rerank", "Train the reranker (pairwise + listwise)"},
      {"retrieve", "Retrieve top candidates for held-out queries"},
      {"rerank", "Rerank the retrieved lists"},
      {"eval", "Write the evaluation report"},
      {"pipeline", "Run every stage"}};
  for (const auto& [name, help] : stages) add_common(app.add_subcommand(name, help), o);

  auto* sweep = app.add_subcommand("sweep", "Ablation sweep over one axis");
  add_common(sweep, o);
  sweep->add_option("--axis", o.axis, "k_negatives | tau | components | judge_noise")->required();
  sweep->add_option("--values", o.values, "Axis values (defaults to the standard grid)")->delimiter(',');

  CLI11_PARSE(app, argc, argv);

  try {
    CLI::App* cmd = app.get_subcommands().front();
    if (cmd->get_name() == "sweep") {
      const SweepAxis axis = parse_sweep_axis(o.axis);
      const auto values = o.values.empty() ? default_sweep_values(axis) : o.values;
      const SweepResult result = ablation_sweep(resolve(o), axis, values, o.out_dir);
      std::cout << format_sweep_table(result);
      for (const auto& row : result.rows) {
        if (!row.error.empty()) return 1;
      }
      return 0;
    }
    return run_stage(cmd->get_name(), o);
  } catch (const std::exception& e) {
    std::cerr << "softalign: " << e.what() << "\n";
    return 1;
  }
}
