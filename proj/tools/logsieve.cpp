// logsieve: command-line front end.

#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "logsieve/cli.hpp"
#include "logsieve/error.hpp"

namespace fs = std::filesystem;
using namespace logsieve;

int main(int argc, char** argv) {
  CLI::App app{"Relevance-driven CI log reduction"};
  app.set_version_flag("--version", std::string(cli::kToolVersion));
  app.require_subcommand(1);

  // ingest
  cli::IngestOptions ingest;
  std::vector<std::string> github;
  auto* c_ingest = app.add_subcommand("ingest", "Build a corpus JSONL from local logs or the GitHub API");
  c_ingest->add_option("--from-dir", ingest.from_dir, "Directory of owner__repo__runid.log files");
  c_ingest->add_option("--from-github", github, "owner/repo run_id")->expected(2);
  c_ingest->add_option("--api-base", ingest.github_api_base, "GitHub API base URL");
  c_ingest->add_option("--out", ingest.out, "Corpus JSONL to write")->required();

  // train
  cli::TrainOptions train;
  std::string pca_grid;
  bool scale = false, no_scale = false;
  auto* c_train = app.add_subcommand("train", "Train and cross-validate line classifiers");
  c_train->add_option("--corpus", train.corpus)->required();
  c_train->add_option("--labels", train.labels)->required();
  c_train->add_option("--features", train.features, "tfidf | embedding");
  c_train->add_option("--embeddings", train.embeddings, "Line embeddings JSONL");
  c_train->add_option("--model", train.models, "Classifier kind(s)")->delimiter(',');
  c_train->add_option("--grid-pca", pca_grid, "Comma list of PCA sizes, 'none' for no PCA");
  c_train->add_flag("--scale", scale, "Standardize features");
  c_train->add_flag("--no-scale", no_scale, "Do not standardize features");
  c_train->add_option("--folds", train.folds);
  c_train->add_option("--test-fraction", train.test_fraction);
  c_train->add_option("--min-df", train.min_df);
  c_train->add_flag("--balance", train.balance, "Downsample the majority class before the split");
  c_train->add_option("--seed", train.seed);
  c_train->add_option("--set", train.hyper, "Hyperparameter key=value");
  c_train->add_option("--out", train.out_dir)->required();

  // reduce
  cli::ReduceOptions red;
  std::string tok_mode = "heuristic";
  std::optional<fs::path> merges;
  auto* c_reduce = app.add_subcommand("reduce", "Reduce logs and write per-run reduction metrics");
  c_reduce->add_option("--corpus", red.corpus)->required();
  c_reduce->add_option("--strategy", red.strategy, "sieve | random | template");
  c_reduce->add_option("--model", red.model, "Trained model (sieve)");
  c_reduce->add_option("--labels", red.labels, "Ground-truth labels (sieve without a model)");
  c_reduce->add_option("--embeddings", red.embeddings);
  c_reduce->add_option("--ratio", red.ratio, "Removal ratio (random)");
  c_reduce->add_option("--match-manifests", red.match_manifests,
                       "Manifests whose per-document removal counts the random baseline matches");
  c_reduce->add_option("--depth", red.depth, "Template tree depth");
  c_reduce->add_option("--threshold", red.threshold, "Template similarity threshold");
  c_reduce->add_option("--seed", red.seed);
  c_reduce->add_option("--tokenizer", tok_mode, "bpe | heuristic");
  c_reduce->add_option("--merges", merges, "BPE merges file");
  c_reduce->add_option("--separator-tokens", red.tokenizer.separator_tokens_per_line);
  c_reduce->add_option("--out", red.out_dir)->required();

  // eval
  cli::EvalOptions ev;
  auto* c_eval = app.add_subcommand("eval", "Score LLM responses on full vs reduced logs");
  c_eval->add_option("--corpus", ev.corpus)->required();
  c_eval->add_option("--reduced", ev.reduced_dir, "Output directory of reduce")->required();
  c_eval->add_option("--archive", ev.archive, "Response archive JSONL");
  c_eval->add_option("--mode", ev.mode, "replay | record | live");
  c_eval->add_option("--endpoint", ev.endpoint, "Endpoint config JSON");
  c_eval->add_option("--llm-model", ev.model);
  c_eval->add_flag("--judge", ev.judge, "Add judge scores");
  c_eval->add_option("--bert-scores", ev.bert_scores, "CSV repo,run_id,strategy,bert_f1");
  c_eval->add_option("--out", ev.out_dir)->required();

  // report
  cli::ReportOptions rep;
  auto* c_report = app.add_subcommand("report", "Resource summary and per-repository report");
  c_report->add_option("--table", rep.table, "reduction.csv from reduce")->required();
  c_report->add_option("--prices", rep.prices, "Price and carbon parameter file");
  c_report->add_flag("--markdown", rep.markdown);
  c_report->add_option("--out", rep.out_dir)->required();

  // kappa
  cli::KappaOptions kap;
  auto* c_kappa = app.add_subcommand("kappa", "Inter-annotator agreement");
  c_kappa->add_option("--corpus", kap.corpus)->required();
  c_kappa->add_option("--labels", kap.labels, "Label CSV(s)")->required();
  c_kappa->add_option("--resolutions", kap.resolutions, "Adjudicated labels for disagreements");
  c_kappa->add_option("--out", kap.out_dir)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (c_ingest->parsed()) {
      if (!github.empty()) {
        ingest.github_repo = github[0];
        ingest.github_run_id = github[1];
      }
      const auto n = cli::cmd_ingest(ingest);
      std::cout << fmt::format("wrote {} document(s) to {}\n", n, ingest.out.string());
    } else if (c_train->parsed()) {
      if (!pca_grid.empty()) train.pca_grid = cli::parse_pca_grid(pca_grid);
      if (scale && no_scale) throw ValidationError("--scale and --no-scale are exclusive");
      if (scale) train.scale = true;
      if (no_scale) train.scale = false;
      cli::cmd_train(train);
      std::cout << "wrote " << (train.out_dir / "cv_report.csv").string() << "\n";
    } else if (c_reduce->parsed()) {
      red.tokenizer.mode = tokenio::parse_mode(tok_mode);
      red.tokenizer.merges_path = merges;
      const auto rows = cli::cmd_reduce(red);
      std::cout << fmt::format("reduced {} document(s); table at {}\n", rows.size(),
                               (red.out_dir / "reduction.csv").string());
    } else if (c_eval->parsed()) {
      if (ev.archive.empty() && ev.mode != "live") throw InputError("--archive is required unless --mode live");
      const auto table = cli::cmd_eval(ev);
      for (const auto& w : table.warnings) std::cerr << "warning: " << w << "\n";
      std::cout << "wrote " << (ev.out_dir / "eval.csv").string() << "\n";
    } else if (c_report->parsed()) {
      cli::cmd_report(rep);
      std::cout << "wrote " << (rep.out_dir / "resource_summary.csv").string() << "\n";
    } else if (c_kappa->parsed()) {
      const auto r = cli::cmd_kappa(kap);
      std::cout << fmt::format("kappa({}, {}) = {:.4f} over {} lines, {} disagreement(s)\n", r.first,
                               r.second, r.kappa, r.lines, r.disagreements);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
