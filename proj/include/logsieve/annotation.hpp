#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "logsieve/corpus.hpp"

namespace logsieve::annotation {

enum class Label : std::uint8_t { kIrrelevant = 0, kRelevant = 1 };

Label label_from_int(int v);
inline int to_int(Label l) { return static_cast<int>(l); }

struct LineKey {
  std::string repo;
  std::string run_id;
  std::size_t line_index = 0;

  friend auto operator<=>(const LineKey&, const LineKey&) = default;
  friend bool operator==(const LineKey&, const LineKey&) = default;
};

struct Entry {
  std::map<std::string, Label> by_annotator;
  std::optional<Label> consensus;
};

struct AnnotatedCorpus {
  std::vector<std::string> annotator_ids;  // order of first appearance
  std::map<LineKey, Entry> entries;

  bool empty() const { return entries.empty(); }
  bool has_consensus() const;
};

/// Reads `repo,run_id,line_index,annotator,label[,consensus]` rows and joins
/// them against the corpus. Rejects schema mismatches, dangling references
/// and duplicate (line, annotator) rows, naming the offending CSV lines.
AnnotatedCorpus import_labels(const std::filesystem::path& path,
                              std::span<const corpus::LogDocument> docs);
AnnotatedCorpus import_labels_text(std::string_view csv_text,
                                   std::span<const corpus::LogDocument> docs);

struct KappaStats {
  double kappa = 0.0;
  double observed = 0.0;  // p_o
  double expected = 0.0;  // p_e
  bool degenerate = false;  // both raters constant; chance agreement ill-posed
};

KappaStats kappa_stats(std::span<const Label> a, std::span<const Label> b);

/// Cohen's kappa, (p_o - p_e) / (1 - p_e). Both raters constant and equal
/// gives 1; constant and unequal gives 0 (see KappaStats::degenerate).
double cohen_kappa(std::span<const Label> a, std::span<const Label> b);

struct PairedLabels {
  std::vector<LineKey> keys;
  std::vector<Label> a;
  std::vector<Label> b;
};

/// Labels of two annotators over the lines both labeled. Throws
/// ValidationError when either annotator misses a line the other labeled.
PairedLabels paired_labels(const AnnotatedCorpus& corpus, const std::string& first,
                           const std::string& second);

/// Lines where the two annotators disagree.
std::vector<LineKey> disagreements(const AnnotatedCorpus& corpus);

/// Sets consensus = agreed label, or the resolution where annotators differ.
/// Resolutions must cover exactly the disagreement set.
AnnotatedCorpus merge_consensus(const AnnotatedCorpus& corpus,
                                const std::map<LineKey, Label>& resolutions);

/// Resolutions CSV: `repo,run_id,line_index,label`.
std::map<LineKey, Label> read_resolutions(const std::filesystem::path& path);

/// Ground-truth labels: consensus when present, else the sole annotator.
std::map<LineKey, Label> ground_truth(const AnnotatedCorpus& corpus);

/// Writes the label CSV with an added `consensus` column.
void write_consensus_csv(std::ostream& out, const AnnotatedCorpus& corpus);

}  // namespace logsieve::annotation
