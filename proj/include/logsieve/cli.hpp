#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "logsieve/costmodel.hpp"
#include "logsieve/reduce.hpp"
#include "logsieve/tokenio.hpp"

namespace logsieve::cli {

inline constexpr std::string_view kToolVersion = "0.1.0";
inline constexpr std::string_view kRunConfigName = "run_config.json";
inline constexpr std::string_view kLockName = ".logsieve.lock";

/// Comment block (`# ...` lines) that opens every report file.
struct HeaderInfo {
  std::string command;
  std::string config_hash;
  std::string tokenizer;
  std::vector<std::string> divergences;
};
std::string header_block(const HeaderInfo& info);

/// Creates the directory and holds an exclusive lock on it for the lifetime
/// of the object. A second holder fails with ValidationError.
class OutputDir {
 public:
  explicit OutputDir(std::filesystem::path dir);
  ~OutputDir();
  OutputDir(const OutputDir&) = delete;
  OutputDir& operator=(const OutputDir&) = delete;

  const std::filesystem::path& path() const { return dir_; }
  /// Writes run_config.json and returns the SHA-256 of its bytes.
  std::string write_config(const nlohmann::json& config) const;

 private:
  std::filesystem::path dir_;
  int fd_ = -1;
};

/// Writes bytes atomically enough for our purposes (temp file + rename).
void write_file(const std::filesystem::path& path, std::string_view bytes);
std::string read_file(const std::filesystem::path& path);

std::string tokenizer_label(const tokenio::Tokenizer& tok);

// ---------------------------------------------------------------- ingest

struct IngestOptions {
  std::optional<std::filesystem::path> from_dir;
  std::optional<std::string> github_repo;
  std::optional<std::string> github_run_id;
  std::string github_api_base = "https://api.github.com";
  std::filesystem::path out;
};

/// Returns the number of documents written.
std::size_t cmd_ingest(const IngestOptions& opt);

/// `owner__repo__runid.log` -> {"owner/repo", "runid"}.
std::pair<std::string, std::string> parse_log_filename(const std::string& filename);

// ---------------------------------------------------------------- train

struct TrainOptions {
  std::filesystem::path corpus;
  std::filesystem::path labels;
  std::string features = "tfidf";
  std::optional<std::filesystem::path> embeddings;
  std::vector<std::string> models{"logreg_l2"};
  std::vector<std::optional<std::size_t>> pca_grid{std::nullopt};
  std::optional<bool> scale;  // default: off for tfidf, on for embeddings
  std::size_t folds = 10;
  double test_fraction = 0.2;
  std::size_t min_df = 2;
  bool balance = false;  // downsample the majority class before splitting
  std::uint64_t seed = 0;
  std::vector<std::string> hyper;  // key=value
  std::filesystem::path out_dir;
};

void cmd_train(const TrainOptions& opt);

/// "32,64,none" -> {32, 64, nullopt}.
std::vector<std::optional<std::size_t>> parse_pca_grid(std::string_view text);

// ---------------------------------------------------------------- reduce

struct ReduceOptions {
  std::filesystem::path corpus;
  std::string strategy = "sieve";
  std::optional<std::filesystem::path> model;
  std::optional<std::filesystem::path> labels;  // sieve with ground-truth labels
  std::optional<std::filesystem::path> embeddings;
  double ratio = 0.42;
  std::optional<std::filesystem::path> match_manifests;  // random: per-document counts
  std::size_t depth = 4;
  double threshold = 0.4;
  std::uint64_t seed = 0;
  tokenio::TokenizerConfig tokenizer;
  std::filesystem::path out_dir;
};

/// Writes reduced/<stem>.log, manifests/<stem>.json and reduction.csv.
std::vector<reduce::ReductionRow> cmd_reduce(const ReduceOptions& opt);

// ---------------------------------------------------------------- eval

struct EvalOptions {
  std::filesystem::path corpus;
  std::filesystem::path reduced_dir;  // output directory of `reduce`
  std::filesystem::path archive;
  std::string mode = "replay";  // replay | record | live
  std::optional<std::filesystem::path> endpoint;
  std::string model;  // defaults to the endpoint model, else gpt-4o
  bool judge = false;
  std::optional<std::filesystem::path> bert_scores;
  std::filesystem::path out_dir;
};

struct EvalRow {
  std::string repository;
  std::string run_id;
  double cosine = 0.0;
  std::optional<double> bert_f1;
  double rouge1 = 0.0;
  double rougel = 0.0;
  double bleu = 0.0;
  std::optional<double> judge;
  int exact_match = 0;
};

struct EvalTable {
  std::string strategy;
  std::vector<EvalRow> rows;
  std::vector<std::string> warnings;
};

inline constexpr std::string_view kEvalHeader =
    "Repository,CosSim,BERT-F1,R1-F1,RL-F1,BLEU,GPTScore,Exact Match";

struct Summary {
  double min = 0, mean = 0, median = 0, max = 0;
};
/// Nullopt when `values` is empty.
std::optional<Summary> summarize(std::vector<double> values);

/// "16 / 20 (80%)".
std::string exact_match_total(std::size_t matches, std::size_t total);

/// Evaluation CSV body (no header block).
std::string eval_csv(const EvalTable& table);

EvalTable cmd_eval(const EvalOptions& opt);

// ---------------------------------------------------------------- report

enum class ReportFormat { kCsv, kMarkdown };

struct ResourceSummary {
  long long full_tokens = 0, reduced_tokens = 0, token_delta = 0;  // delta in percent
  long long full_lines = 0, reduced_lines = 0, line_delta = 0;
};

ResourceSummary resource_summary(std::span<const reduce::ReductionRow> rows);

/// Resource summary table; cost columns only when `params` is given.
std::string render_resource_summary(const ResourceSummary& s,
                                    const std::optional<costmodel::CostParams>& params,
                                    ReportFormat format);

/// Per-repository table with optional cost columns appended.
std::string render_corpus_report(std::span<const reduce::ReductionRow> rows,
                                 const std::optional<costmodel::CostParams>& params,
                                 ReportFormat format);

struct ReportOptions {
  std::filesystem::path table;  // reduction CSV from `reduce`
  std::optional<std::filesystem::path> prices;
  bool markdown = false;
  std::filesystem::path out_dir;
};

void cmd_report(const ReportOptions& opt);

// ---------------------------------------------------------------- kappa

struct KappaOptions {
  std::filesystem::path corpus;
  std::vector<std::filesystem::path> labels;  // one multi-annotator file, or one file per rater
  std::optional<std::filesystem::path> resolutions;
  std::filesystem::path out_dir;
};

struct KappaReport {
  std::string first, second;
  std::size_t lines = 0;
  double observed = 0, expected = 0, kappa = 0;
  bool degenerate = false;
  std::size_t disagreements = 0;
};

KappaReport cmd_kappa(const KappaOptions& opt);

}  // namespace logsieve::cli
