#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace logsieve::evaluate {

enum class PromptKind { kExplain, kCategorize };

std::string_view to_string(PromptKind kind);
PromptKind parse_prompt_kind(std::string_view text);

/// Template text; the log body goes where "[log.txt]" appears.
std::string_view prompt_template(PromptKind kind);

/// Throws ValidationError for an empty log body.
std::string build_prompt(PromptKind kind, std::string_view log_text);

/// Lowercased alphanumeric runs (non-ASCII bytes count as alphanumeric).
std::vector<std::string> metric_tokens(std::string_view text);

/// u.v / (|u||v|); 0 when either vector is zero. Throws on length mismatch.
double cosine_similarity(std::span<const double> u, std::span<const double> v);

/// Unigram F1 with clipped counts; 0 when either side has no tokens.
double rouge1_f1(std::string_view candidate, std::string_view reference);
/// LCS-based F1; 0 when either side has no tokens.
double rougel_f1(std::string_view candidate, std::string_view reference);

/// Sentence BLEU-4 against a single reference. Orders n >= 2 with no clipped
/// match use (0 + 1) / (total + 1); brevity penalty min(1, exp(1 - r/c)).
double bleu(std::string_view candidate, std::string_view reference);

/// Trim, collapse whitespace, ASCII casefold, drop trailing periods.
std::string normalize_answer(std::string_view text);
int exact_match(std::string_view a, std::string_view b);

/// TF-IDF cosine with the vocabulary fitted on the two texts (min_df 1).
double tfidf_pair_cosine(std::string_view a, std::string_view b);

struct SimilarityReport {
  double cosine = 0.0;
  std::string cosine_source = "tfidf-pair";
  double rouge1_f1 = 0.0;
  double rougel_f1 = 0.0;
  double bleu = 0.0;
  int exact_match = 0;
  std::optional<double> judge_score;
  std::optional<double> bert_judge_f1;
};

struct ResponseEmbeddings {
  std::vector<double> full;
  std::vector<double> reduced;
  std::string source;
};

/// Scores `reduced` (candidate) against `full` (reference).
SimilarityReport compare_responses(std::string_view full, std::string_view reduced,
                                   const ResponseEmbeddings* embeddings = nullptr);

}  // namespace logsieve::evaluate
