#include "logsieve/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "logsieve/error.hpp"
#include "logsieve/features.hpp"

namespace logsieve::evaluate {
namespace {

constexpr std::string_view kLogSlot = "[log.txt]";

constexpr std::string_view kExplainTemplate =
    "Here is the log output from a GitHub Action workflow run: [log.txt]. In at most 500 words, "
    "please explain why this workflow failed.";

constexpr std::string_view kCategorizeTemplate =
    "Here is the log output from a GitHub Action workflow run: [log.txt]. Please provide a "
    "category for the run failure. Only provide the answer. Do not include any additional reasons "
    "or details.";

using Gram = std::vector<std::string>;

std::map<Gram, std::size_t> ngram_counts(const std::vector<std::string>& tokens, std::size_t n) {
  std::map<Gram, std::size_t> out;
  if (tokens.size() < n) return out;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    ++out[Gram(tokens.begin() + static_cast<std::ptrdiff_t>(i),
               tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return out;
}

std::size_t clipped_overlap(const std::map<Gram, std::size_t>& cand,
                            const std::map<Gram, std::size_t>& ref) {
  std::size_t overlap = 0;
  for (const auto& [gram, count] : cand) {
    if (const auto it = ref.find(gram); it != ref.end()) overlap += std::min(count, it->second);
  }
  return overlap;
}

double f1(double overlap, std::size_t cand_len, std::size_t ref_len) {
  if (cand_len == 0 || ref_len == 0 || overlap == 0) return 0.0;
  const double p = overlap / static_cast<double>(cand_len);
  const double r = overlap / static_cast<double>(ref_len);
  return 2.0 * p * r / (p + r);
}

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; }

}  // namespace

std::string_view to_string(PromptKind kind) {
  return kind == PromptKind::kExplain ? "explain" : "categorize";
}

PromptKind parse_prompt_kind(std::string_view text) {
  if (text == "explain") return PromptKind::kExplain;
  if (text == "categorize") return PromptKind::kCategorize;
  throw ValidationError("unknown prompt kind '" + std::string(text) + "'");
}

std::string_view prompt_template(PromptKind kind) {
  return kind == PromptKind::kExplain ? kExplainTemplate : kCategorizeTemplate;
}

std::string build_prompt(PromptKind kind, std::string_view log_text) {
  if (log_text.empty()) throw ValidationError("cannot build a prompt around an empty log");
  const std::string_view tmpl = prompt_template(kind);
  const auto slot = tmpl.find(kLogSlot);
  std::string out;
  out.reserve(tmpl.size() + log_text.size());
  out.append(tmpl.substr(0, slot));
  out.append(log_text);
  out.append(tmpl.substr(slot + kLogSlot.size()));
  return out;
}

std::vector<std::string> metric_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (const char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    const bool alnum = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c >= 0x80;
    if (alnum) {
      cur.push_back(ch);
    } else if (c >= 'A' && c <= 'Z') {
      cur.push_back(static_cast<char>(c - 'A' + 'a'));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw ValidationError("cosine: dimension mismatch (" + std::to_string(u.size()) + " vs " +
                          std::to_string(v.size()) + ")");
  }
  double dot = 0.0, uu = 0.0, vv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    uu += u[i] * u[i];
    vv += v[i] * v[i];
  }
  if (uu == 0.0 || vv == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(uu) * std::sqrt(vv)), -1.0, 1.0);
}

double rouge1_f1(std::string_view candidate, std::string_view reference) {
  const auto c = metric_tokens(candidate);
  const auto r = metric_tokens(reference);
  const auto overlap = clipped_overlap(ngram_counts(c, 1), ngram_counts(r, 1));
  return f1(static_cast<double>(overlap), c.size(), r.size());
}

double rougel_f1(std::string_view candidate, std::string_view reference) {
  const auto c = metric_tokens(candidate);
  const auto r = metric_tokens(reference);
  return f1(static_cast<double>(lcs_length(c, r)), c.size(), r.size());
}

double bleu(std::string_view candidate, std::string_view reference) {
  const auto c = metric_tokens(candidate);
  const auto r = metric_tokens(reference);
  if (c.empty() || r.empty()) return 0.0;
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= 4; ++n) {
    const auto cand = ngram_counts(c, n);
    const std::size_t total = c.size() >= n ? c.size() - n + 1 : 0;
    const std::size_t matched = clipped_overlap(cand, ngram_counts(r, n));
    double p;
    if (matched > 0) {
      p = static_cast<double>(matched) / static_cast<double>(total);
    } else if (n == 1) {
      return 0.0;
    } else {
      p = 1.0 / static_cast<double>(total + 1);
    }
    log_sum += std::log(p);
  }
  const double bp = c.size() >= r.size()
                        ? 1.0
                        : std::exp(1.0 - static_cast<double>(r.size()) / static_cast<double>(c.size()));
  return bp * std::exp(log_sum / 4.0);
}

std::string normalize_answer(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (const char ch : text) {
    if (is_space(ch)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(ch >= 'A' && ch <= 'Z' ? static_cast<char>(ch - 'A' + 'a') : ch);
  }
  while (!out.empty() && (out.back() == '.' || out.back() == ' ')) out.pop_back();
  return out;
}

int exact_match(std::string_view a, std::string_view b) {
  return normalize_answer(a) == normalize_answer(b) ? 1 : 0;
}

double tfidf_pair_cosine(std::string_view a, std::string_view b) {
  const std::vector<std::string> docs{std::string(a), std::string(b)};
  bool any = false;
  for (const auto& d : docs) any = any || !features::tokenize_terms(d).empty();
  if (!any) return 0.0;
  const auto model = features::fit_tfidf(docs, 1);
  const auto va = features::transform_tfidf(model, a);
  const auto vb = features::transform_tfidf(model, b);
  std::vector<double> da(model.size(), 0.0), db(model.size(), 0.0);
  for (const auto& [i, v] : va) da[i] = v;
  for (const auto& [i, v] : vb) db[i] = v;
  return cosine_similarity(da, db);
}

SimilarityReport compare_responses(std::string_view full, std::string_view reduced,
                                   const ResponseEmbeddings* embeddings) {
  SimilarityReport r;
  if (embeddings) {
    r.cosine = cosine_similarity(embeddings->full, embeddings->reduced);
    r.cosine_source = embeddings->source;
  } else {
    r.cosine = tfidf_pair_cosine(full, reduced);
  }
  r.rouge1_f1 = rouge1_f1(reduced, full);
  r.rougel_f1 = rougel_f1(reduced, full);
  r.bleu = bleu(reduced, full);
  r.exact_match = exact_match(full, reduced);
  return r;
}

}  // namespace logsieve::evaluate
