#include "logsieve/reduce.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <fmt/format.h>

#include "logsieve/csv.hpp"
#include "logsieve/error.hpp"
#include "logsieve/rng.hpp"

namespace logsieve::reduce {
namespace {

using nlohmann::json;

bool has_digit(std::string_view token) {
  return std::any_of(token.begin(), token.end(), [](char c) { return c >= '0' && c <= '9'; });
}

std::size_t parse_count(const std::string& field, std::string_view what) {
  try {
    std::size_t pos = 0;
    const auto v = std::stoull(field, &pos);
    if (pos != field.size()) throw std::invalid_argument(field);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw ValidationError("table: bad " + std::string(what) + " value '" + field + "'");
  }
}

}  // namespace

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::kSieve: return "sieve";
    case Strategy::kRandom: return "random";
    case Strategy::kTemplate: return "template";
  }
  return "sieve";
}

Strategy parse_strategy(std::string_view text) {
  if (text == "sieve") return Strategy::kSieve;
  if (text == "random") return Strategy::kRandom;
  if (text == "template") return Strategy::kTemplate;
  throw ValidationError("unknown reduction strategy '" + std::string(text) + "'");
}

std::string ReducedLog::text() const {
  if (kept_indices.empty()) return std::string(kEmptySentinel);
  std::string out;
  for (std::size_t k = 0; k < kept_indices.size(); ++k) {
    if (k) out.push_back('\n');
    out += source->lines[kept_indices[k]].content;
  }
  return out;
}

double reduction_percent(std::size_t removed, std::size_t total) {
  if (total == 0) return 0.0;
  return static_cast<double>(removed) * 100.0 / static_cast<double>(total);
}

std::string percent_label(double percent) { return fmt::format("{}%", std::llround(percent)); }

ReductionResult reduction_metrics(std::size_t total_lines, std::size_t removed_lines,
                                  std::size_t full_tokens, std::size_t tokens_kept) {
  if (removed_lines > total_lines || tokens_kept > full_tokens) {
    throw ValidationError("reduction: kept/removed counts exceed the totals");
  }
  ReductionResult r;
  r.total_lines = total_lines;
  r.removed_lines = removed_lines;
  r.lines_kept = total_lines - removed_lines;
  r.line_red = reduction_percent(removed_lines, total_lines);
  r.full_tokens = full_tokens;
  r.tokens_kept = tokens_kept;
  r.token_red = reduction_percent(full_tokens - tokens_kept, full_tokens);
  return r;
}

ReductionResult reduction_metrics(const corpus::LogDocument& doc, const ReducedLog& reduced,
                                  const tokenio::Tokenizer& tokenizer) {
  const auto counts = tokenio::count_document_tokens(doc, tokenizer);
  const auto kept = tokenio::count_kept_tokens(counts, reduced.kept_indices);
  return reduction_metrics(doc.lines.size(), doc.lines.size() - reduced.kept_indices.size(),
                           counts.total, kept);
}

namespace {

ReducedLog keep_where(const corpus::LogDocument& doc, const std::vector<bool>& keep,
                      Strategy strategy, json config) {
  ReducedLog r;
  r.source = &doc;
  r.strategy = strategy;
  r.strategy_config = std::move(config);
  for (std::size_t i = 0; i < keep.size(); ++i) {
    if (keep[i]) r.kept_indices.push_back(i);
  }
  if (r.kept_indices.empty()) {
    r.warnings.push_back("no lines retained for " + doc.key() + "; downstream prompts use \"" +
                         std::string(kEmptySentinel) + "\"");
  }
  return r;
}

}  // namespace

ReducedLog sieve(const corpus::LogDocument& doc, const classify::TrainedClassifier& clf,
                 const features::EmbeddingTable* embeddings) {
  const auto x = clf.pipeline.transform(doc, embeddings);
  const auto labels = classify::predict(clf, x);
  std::vector<bool> keep(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) keep[i] = labels[i] == annotation::Label::kRelevant;
  return keep_where(doc, keep, Strategy::kSieve,
                    json{{"classifier", std::string(classify::to_string(clf.kind))},
                         {"features", std::string(features::to_string(clf.pipeline.source))},
                         {"seed", clf.seed}});
}

ReducedLog sieve_with_labels(const corpus::LogDocument& doc,
                             const std::map<annotation::LineKey, annotation::Label>& labels) {
  std::vector<bool> keep(doc.lines.size());
  for (const auto& line : doc.lines) {
    const auto it = labels.find({doc.repo, doc.run_id, line.index});
    keep[line.index] = it != labels.end() && it->second == annotation::Label::kRelevant;
  }
  return keep_where(doc, keep, Strategy::kSieve, json{{"classifier", "ground_truth_labels"}});
}

ReducedLog random_baseline_count(const corpus::LogDocument& doc, std::size_t remove_count,
                                 std::uint64_t seed) {
  const std::size_t n = doc.lines.size();
  if (remove_count > n) throw ValidationError("random baseline: cannot remove more lines than exist");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  // Partial Fisher-Yates: the first remove_count slots are the removed lines.
  for (std::size_t i = 0; i < remove_count; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(order[i], order[j]);
  }
  std::vector<bool> keep(n, true);
  for (std::size_t i = 0; i < remove_count; ++i) keep[order[i]] = false;
  return keep_where(doc, keep, Strategy::kRandom,
                    json{{"seed", seed}, {"remove_count", remove_count}});
}

ReducedLog random_baseline(const corpus::LogDocument& doc, double target_ratio, std::uint64_t seed) {
  if (!(target_ratio >= 0.0 && target_ratio <= 1.0)) {
    throw ValidationError("random baseline: ratio must lie in [0, 1]");
  }
  // Half-up rounding of the decimal product; the guard absorbs binary
  // representation error in ratios such as 0.42 (25 * 0.42 must give 11).
  const auto remove = static_cast<std::size_t>(
      std::floor(static_cast<double>(doc.lines.size()) * target_ratio + 0.5 + 1e-9));
  auto r = random_baseline_count(doc, remove, seed);
  r.strategy_config["ratio"] = target_ratio;
  return r;
}

// ---------------------------------------------------------------- templates

std::vector<std::string> whitespace_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  auto is_ws = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; };
  while (i < text.size()) {
    while (i < text.size() && is_ws(text[i])) ++i;
    const std::size_t start = i;
    while (i < text.size() && !is_ws(text[i])) ++i;
    if (i > start) out.emplace_back(text.substr(start, i - start));
  }
  return out;
}

TemplateTree::TemplateTree(std::size_t depth, double similarity_threshold)
    : depth_(depth), threshold_(similarity_threshold) {
  if (depth < 1) throw ValidationError("template tree depth must be >= 1");
  if (!(similarity_threshold > 0.0 && similarity_threshold <= 1.0)) {
    throw ValidationError("template similarity threshold must lie in (0, 1]");
  }
}

double TemplateTree::match_ratio(std::span<const std::string> tmpl,
                                 std::span<const std::string> tokens) {
  if (tmpl.size() != tokens.size()) return 0.0;
  if (tokens.empty()) return 1.0;
  std::size_t same = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    same += tmpl[i] == kWildcard || tmpl[i] == tokens[i];
  }
  return static_cast<double>(same) / static_cast<double>(tokens.size());
}

std::size_t TemplateTree::add(std::string_view content, std::size_t line_index) {
  const auto tokens = whitespace_tokens(content);
  std::vector<std::string> route{std::to_string(tokens.size())};
  const std::size_t prefix = std::min(depth_ > 2 ? depth_ - 2 : 0, tokens.size());
  for (std::size_t i = 0; i < prefix; ++i) {
    route.push_back(has_digit(tokens[i]) ? std::string(kWildcard) : tokens[i]);
  }
  auto& leaf = leaves_[route];
  for (const auto id : leaf) {
    auto& cluster = clusters_[id];
    if (match_ratio(cluster.tokens, tokens) >= threshold_) {
      for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (cluster.tokens[i] != tokens[i]) cluster.tokens[i] = std::string(kWildcard);
      }
      ++cluster.size;
      return id;
    }
  }
  clusters_.push_back(TemplateCluster{tokens, line_index, 1});
  leaf.push_back(clusters_.size() - 1);
  return clusters_.size() - 1;
}

TemplateReduction template_baseline(const corpus::LogDocument& doc, std::size_t depth,
                                    double threshold) {
  TemplateTree tree(depth, threshold);
  std::vector<bool> keep(doc.lines.size(), false);
  for (const auto& line : doc.lines) {
    const auto before = tree.clusters().size();
    tree.add(line.content, line.index);
    if (tree.clusters().size() > before) keep[line.index] = true;
  }
  auto reduced = keep_where(doc, keep, Strategy::kTemplate,
                            json{{"depth", depth},
                                 {"threshold", threshold},
                                 {"note", "template-clustering stand-in for LogZip; keeps the "
                                          "first line of each template cluster"}});
  return {std::move(reduced), std::move(tree)};
}

// ---------------------------------------------------------------- export

json manifest_json(const ReducedLog& reduced, const ReductionResult& result,
                   const tokenio::Tokenizer& tokenizer) {
  return json{{"repo", reduced.source->repo},
              {"run_id", reduced.source->run_id},
              {"strategy", std::string(to_string(reduced.strategy))},
              {"config", reduced.strategy_config},
              {"kept_indices", reduced.kept_indices},
              {"tokenizer",
               {{"mode", std::string(tokenio::to_string(tokenizer.mode()))},
                {"separator_tokens_per_line", tokenizer.separator_tokens_per_line()}}},
              {"result",
               {{"total_lines", result.total_lines},
                {"removed_lines", result.removed_lines},
                {"lines_kept", result.lines_kept},
                {"line_red", result.line_red},
                {"full_tokens", result.full_tokens},
                {"tokens_kept", result.tokens_kept},
                {"token_red", result.token_red}}},
              {"warnings", reduced.warnings}};
}

Manifest manifest_from_json(const json& j) {
  try {
    Manifest m;
    m.repo = j.at("repo").get<std::string>();
    m.run_id = j.at("run_id").get<std::string>();
    m.strategy = parse_strategy(j.at("strategy").get<std::string>());
    m.config = j.at("config");
    m.kept_indices = j.at("kept_indices").get<std::vector<std::size_t>>();
    const auto& r = j.at("result");
    m.result.total_lines = r.at("total_lines").get<std::size_t>();
    m.result.removed_lines = r.at("removed_lines").get<std::size_t>();
    m.result.lines_kept = r.at("lines_kept").get<std::size_t>();
    m.result.line_red = r.at("line_red").get<double>();
    m.result.full_tokens = r.at("full_tokens").get<std::size_t>();
    m.result.tokens_kept = r.at("tokens_kept").get<std::size_t>();
    m.result.token_red = r.at("token_red").get<double>();
    return m;
  } catch (const json::exception& e) {
    throw InputError(std::string("manifest: ") + e.what());
  }
}

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read manifest: " + path.string());
  try {
    return manifest_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw InputError("manifest " + path.string() + ": " + e.what());
  }
}

ReducedLog reduced_from_manifest(const corpus::LogDocument& doc, const Manifest& m) {
  if (m.repo != doc.repo || m.run_id != doc.run_id) {
    throw ValidationError("manifest for " + m.repo + "#" + m.run_id + " applied to " + doc.key());
  }
  ReducedLog r;
  r.source = &doc;
  r.strategy = m.strategy;
  r.strategy_config = m.config;
  r.kept_indices = m.kept_indices;
  for (std::size_t k = 0; k < r.kept_indices.size(); ++k) {
    if (r.kept_indices[k] >= doc.lines.size() || (k && r.kept_indices[k] <= r.kept_indices[k - 1])) {
      throw ValidationError("manifest for " + doc.key() + ": kept indices not ascending within range");
    }
  }
  return r;
}

ReductionAverage reduction_average(std::span<const ReductionRow> rows) {
  ReductionAverage a;
  if (rows.empty()) return a;
  for (const auto& row : rows) {
    const auto& r = row.result;
    a.total_lines += static_cast<double>(r.total_lines);
    a.removed_lines += static_cast<double>(r.removed_lines);
    a.lines_kept += static_cast<double>(r.lines_kept);
    a.full_tokens += static_cast<double>(r.full_tokens);
    a.tokens_kept += static_cast<double>(r.tokens_kept);
    a.line_red += r.line_red;
    a.token_red += r.token_red;
  }
  const double n = static_cast<double>(rows.size());
  a.total_lines /= n;
  a.removed_lines /= n;
  a.lines_kept /= n;
  a.full_tokens /= n;
  a.tokens_kept /= n;
  a.line_red /= n;
  a.token_red /= n;
  return a;
}

std::string reduction_csv(std::span<const ReductionRow> rows) {
  std::string out(kReductionHeader);
  out.push_back('\n');
  for (const auto& row : rows) {
    const auto& r = row.result;
    out += csv::join({row.repository, std::to_string(r.total_lines),
                      std::to_string(r.removed_lines), std::to_string(r.lines_kept),
                      percent_label(r.line_red), std::to_string(r.full_tokens),
                      std::to_string(r.tokens_kept), percent_label(r.token_red)});
    out.push_back('\n');
  }
  if (!rows.empty()) {
    const auto a = reduction_average(rows);
    auto rounded = [](double v) { return std::to_string(std::llround(v)); };
    out += csv::join({"Average", rounded(a.total_lines), rounded(a.removed_lines),
                      rounded(a.lines_kept), percent_label(a.line_red), rounded(a.full_tokens),
                      rounded(a.tokens_kept), percent_label(a.token_red)});
    out.push_back('\n');
  }
  return out;
}

std::vector<ReductionRow> parse_reduction_csv(std::string_view text) {
  const auto rows = csv::parse(text);
  if (rows.empty()) throw ValidationError("reduction table is empty");
  const auto& header = rows.front();
  const int c_repo = csv::column(header, "Repository");
  const int c_total = csv::column(header, "Total Lines");
  const int c_removed = csv::column(header, "Removed Lines");
  const int c_full = csv::column(header, "Full Tokens");
  const int c_kept_tok = csv::column(header, "Tokens Kept");
  if (c_repo < 0 || c_total < 0 || c_removed < 0 || c_full < 0 || c_kept_tok < 0) {
    throw ValidationError("reduction table: expected the columns of " + std::string(kReductionHeader));
  }
  std::vector<ReductionRow> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.size() != header.size()) throw ValidationError("reduction table: ragged row");
    if (row[c_repo] == "Average") continue;
    ReductionRow t;
    t.repository = row[c_repo];
    // Lines kept is derived rather than read: removed + kept == total by construction.
    t.result = reduction_metrics(parse_count(row[c_total], "Total Lines"),
                                 parse_count(row[c_removed], "Removed Lines"),
                                 parse_count(row[c_full], "Full Tokens"),
                                 parse_count(row[c_kept_tok], "Tokens Kept"));
    out.push_back(std::move(t));
  }
  return out;
}

std::string document_stem(std::string_view repo, std::string_view run_id) {
  std::string out;
  auto append = [&](std::string_view s) {
    for (const char c : s) {
      const bool safe = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                        c == '-' || c == '.';
      out.push_back(safe ? c : '_');
    }
  };
  append(repo);
  out += "__";
  append(run_id);
  return out;
}

std::string document_stem(const corpus::LogDocument& doc) {
  return document_stem(doc.repo, doc.run_id);
}

}  // namespace logsieve::reduce
