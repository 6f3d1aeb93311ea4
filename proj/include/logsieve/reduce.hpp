#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "logsieve/annotation.hpp"
#include "logsieve/classify.hpp"
#include "logsieve/corpus.hpp"
#include "logsieve/tokenio.hpp"

namespace logsieve::reduce {

enum class Strategy { kSieve, kRandom, kTemplate };

std::string_view to_string(Strategy s);
Strategy parse_strategy(std::string_view text);

/// Placeholder sent to the LLM in place of an empty reduced log.
inline constexpr std::string_view kEmptySentinel = "(no lines retained)";

struct ReducedLog {
  const corpus::LogDocument* source = nullptr;
  std::vector<std::size_t> kept_indices;  // ascending
  Strategy strategy = Strategy::kSieve;
  nlohmann::json strategy_config;
  std::vector<std::string> warnings;

  bool empty() const { return kept_indices.empty(); }
  /// Kept line contents joined by '\n', or the sentinel when nothing is kept.
  std::string text() const;
};

struct ReductionResult {
  std::size_t total_lines = 0;
  std::size_t removed_lines = 0;
  std::size_t lines_kept = 0;
  double line_red = 0.0;  // percent, full precision
  std::size_t full_tokens = 0;
  std::size_t tokens_kept = 0;
  double token_red = 0.0;
};

/// removed * 100 / total, 0 when total is 0.
double reduction_percent(std::size_t removed, std::size_t total);

/// Integer-percent rendering used in reduction tables ("85%").
std::string percent_label(double percent);

ReductionResult reduction_metrics(const corpus::LogDocument& doc, const ReducedLog& reduced,
                                  const tokenio::Tokenizer& tokenizer);
ReductionResult reduction_metrics(std::size_t total_lines, std::size_t removed_lines,
                                  std::size_t full_tokens, std::size_t tokens_kept);

/// Keeps the lines the classifier predicts RELEVANT.
ReducedLog sieve(const corpus::LogDocument& doc, const classify::TrainedClassifier& clf,
                 const features::EmbeddingTable* embeddings = nullptr);

/// Keeps the lines whose ground-truth label is RELEVANT (perfect classifier).
/// Unlabeled lines are treated as irrelevant.
ReducedLog sieve_with_labels(const corpus::LogDocument& doc,
                             const std::map<annotation::LineKey, annotation::Label>& labels);

/// Removes round(total * target_ratio) uniformly chosen lines.
ReducedLog random_baseline(const corpus::LogDocument& doc, double target_ratio, std::uint64_t seed);

/// Removes exactly `remove_count` uniformly chosen lines (per-document matching).
ReducedLog random_baseline_count(const corpus::LogDocument& doc, std::size_t remove_count,
                                 std::uint64_t seed);

// ---------------------------------------------------------------- templates

inline constexpr std::string_view kWildcard = "<*>";

struct TemplateCluster {
  std::vector<std::string> tokens;  // kWildcard marks a variable slot
  std::size_t first_line = 0;
  std::size_t size = 0;
};

/// Fixed-depth prefix tree: first level keyed by token count, then by up to
/// depth - 2 leading tokens (digit-bearing tokens routed as wildcards).
class TemplateTree {
 public:
  TemplateTree(std::size_t depth, double similarity_threshold);

  std::size_t depth() const { return depth_; }
  double threshold() const { return threshold_; }

  /// Routes and clusters one line; returns the cluster id.
  std::size_t add(std::string_view content, std::size_t line_index);

  const std::vector<TemplateCluster>& clusters() const { return clusters_; }

  /// Fraction of positions where the template has a wildcard or the same token.
  static double match_ratio(std::span<const std::string> tmpl, std::span<const std::string> tokens);

 private:
  std::size_t depth_;
  double threshold_;
  std::map<std::vector<std::string>, std::vector<std::size_t>> leaves_;  // route -> cluster ids
  std::vector<TemplateCluster> clusters_;
};

std::vector<std::string> whitespace_tokens(std::string_view text);

struct TemplateReduction {
  ReducedLog reduced;
  TemplateTree tree;
};

/// Keeps the first line of every template cluster.
TemplateReduction template_baseline(const corpus::LogDocument& doc, std::size_t depth = 4,
                                    double threshold = 0.4);

// ---------------------------------------------------------------- export

/// Sidecar manifest `{strategy, config, kept_indices, result, ...}`.
nlohmann::json manifest_json(const ReducedLog& reduced, const ReductionResult& result,
                             const tokenio::Tokenizer& tokenizer);

struct Manifest {
  std::string repo;
  std::string run_id;
  Strategy strategy = Strategy::kSieve;
  nlohmann::json config;
  std::vector<std::size_t> kept_indices;
  ReductionResult result;
};

Manifest manifest_from_json(const nlohmann::json& j);
Manifest load_manifest(const std::filesystem::path& path);

/// Builds a ReducedLog view over `doc` from a manifest, validating indices.
ReducedLog reduced_from_manifest(const corpus::LogDocument& doc, const Manifest& m);

struct ReductionRow {
  std::string repository;
  ReductionResult result;
};

inline constexpr std::string_view kReductionHeader =
    "Repository,Total Lines,Removed Lines,Lines Kept,Line Red.,Full Tokens,Tokens Kept,Token Red.";

/// Per-document rows plus an Average row (means of counts; percentages are
/// the mean of per-document percentages).
std::string reduction_csv(std::span<const ReductionRow> rows);
/// Reads the per-document rows back (comment lines and the Average row skipped).
std::vector<ReductionRow> parse_reduction_csv(std::string_view text);

struct ReductionAverage {
  double total_lines = 0, removed_lines = 0, lines_kept = 0;
  double full_tokens = 0, tokens_kept = 0;
  double line_red = 0, token_red = 0;  // macro means of per-row percentages
};

ReductionAverage reduction_average(std::span<const ReductionRow> rows);

/// File-system safe stem for a document ("owner_repo__run").
std::string document_stem(const corpus::LogDocument& doc);
std::string document_stem(std::string_view repo, std::string_view run_id);

}  // namespace logsieve::reduce
