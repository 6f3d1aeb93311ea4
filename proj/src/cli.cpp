#include "logsieve/cli.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "logsieve/annotation.hpp"
#include "logsieve/classify.hpp"
#include "logsieve/corpus.hpp"
#include "logsieve/csv.hpp"
#include "logsieve/error.hpp"
#include "logsieve/evaluate.hpp"
#include "logsieve/features.hpp"
#include "logsieve/github.hpp"
#include "logsieve/hash.hpp"
#include "logsieve/llm.hpp"
#include "logsieve/rng.hpp"

namespace logsieve::cli {
namespace fs = std::filesystem;
using nlohmann::ordered_json;
using nlohmann::json;

namespace {

json optional_path(const std::optional<fs::path>& p) {
  return p ? json(p->string()) : json(nullptr);
}

std::string thousands(long long v) {
  std::string digits = std::to_string(v < 0 ? -v : v);
  std::string out;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i && (digits.size() - i) % 3 == 0) out.push_back(',');
    out.push_back(digits[i]);
  }
  return v < 0 ? "-" + out : out;
}

std::string signed_percent(long long v) { return fmt::format("{}%", v); }

std::string number(double v) { return fmt::format("{:.10f}", v); }

std::string money(double v) { return fmt::format("{:.6f}", v); }

std::string markdown_row(const std::vector<std::string>& cells) {
  std::string out = "|";
  for (const auto& c : cells) out += " " + c + " |";
  return out + "\n";
}

std::string markdown_table(const std::vector<std::string>& header,
                           const std::vector<std::vector<std::string>>& rows) {
  std::string out = markdown_row(header);
  out += "|";
  for (std::size_t i = 0; i < header.size(); ++i) out += i == 0 ? " --- |" : " ---: |";
  out += "\n";
  for (const auto& r : rows) out += markdown_row(r);
  return out;
}

std::string csv_table(const std::vector<std::string>& header,
                      const std::vector<std::vector<std::string>>& rows) {
  std::string out = csv::join(header) + "\n";
  for (const auto& r : rows) out += csv::join(r) + "\n";
  return out;
}

std::map<annotation::LineKey, annotation::Label> labels_for(const fs::path& path,
                                                            const std::vector<corpus::LogDocument>& docs) {
  return annotation::ground_truth(annotation::import_labels(path, docs));
}

std::vector<std::string> tokenizer_divergences(const tokenio::Tokenizer& tok) {
  if (tok.mode() == tokenio::TokenizerMode::kHeuristic) {
    return {"token counts use the heuristic tokenizer, not the judge model's tokenizer"};
  }
  return {};
}

std::string read_header_value(std::string_view text, std::string_view key) {
  std::istringstream in{std::string(text)};
  std::string line;
  const std::string prefix = "# " + std::string(key) + ": ";
  while (std::getline(in, line)) {
    if (line.empty() || line[0] != '#') break;
    if (line.rfind(prefix, 0) == 0) return line.substr(prefix.size());
  }
  return {};
}

}  // namespace

// ---------------------------------------------------------------- plumbing

std::string header_block(const HeaderInfo& info) {
  std::string out = fmt::format("# logsieve {}\n", kToolVersion);
  out += "# command: " + info.command + "\n";
  out += "# config-sha256: " + info.config_hash + "\n";
  out += "# tokenizer: " + (info.tokenizer.empty() ? std::string("n/a") : info.tokenizer) + "\n";
  if (info.divergences.empty()) {
    out += "# divergences: none\n";
  } else {
    for (const auto& d : info.divergences) out += "# divergence: " + d + "\n";
  }
  return out;
}

OutputDir::OutputDir(fs::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw InputError("cannot create output directory " + dir_.string() + ": " + ec.message());
  const auto lock = (dir_ / kLockName).string();
  fd_ = ::open(lock.c_str(), O_CREAT | O_RDWR | O_CLOEXEC, 0644);
  if (fd_ < 0) throw InputError("cannot open lockfile " + lock);
  if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
    ::close(fd_);
    fd_ = -1;
    throw ValidationError("output directory " + dir_.string() + " is in use by another process");
  }
}

OutputDir::~OutputDir() {
  if (fd_ >= 0) {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
}

std::string OutputDir::write_config(const json& config) const {
  const std::string bytes = config.dump(2) + "\n";
  write_file(dir_ / kRunConfigName, bytes);
  return sha256_hex(bytes);
}

void write_file(const fs::path& path, std::string_view bytes) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw InputError("write failed: " + path.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw InputError("cannot move " + tmp.string() + " into place: " + ec.message());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string tokenizer_label(const tokenio::Tokenizer& tok) {
  return fmt::format("{} (separator {} per line)", tokenio::to_string(tok.mode()),
                     tok.separator_tokens_per_line());
}

// ---------------------------------------------------------------- ingest

std::pair<std::string, std::string> parse_log_filename(const std::string& filename) {
  std::string stem = filename;
  if (stem.size() > 4 && stem.substr(stem.size() - 4) == ".log") stem.resize(stem.size() - 4);
  const auto first = stem.find("__");
  const auto last = stem.rfind("__");
  if (first == std::string::npos || first == last || first == 0 || last + 2 >= stem.size()) {
    throw InputError("log file name '" + filename + "' does not follow owner__repo__runid.log");
  }
  return {stem.substr(0, first) + "/" + stem.substr(first + 2, last - first - 2), stem.substr(last + 2)};
}

std::size_t cmd_ingest(const IngestOptions& opt) {
  if (opt.from_dir.has_value() == opt.github_repo.has_value()) {
    throw ValidationError("ingest: give exactly one of --from-dir or --from-github");
  }
  std::vector<corpus::LogDocument> docs;
  ordered_json config{{"command", "ingest"}, {"tool_version", kToolVersion}};
  if (opt.from_dir) {
    const auto& dir = *opt.from_dir;
    if (!fs::is_directory(dir)) throw InputError("log directory not found: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.is_regular_file() && e.path().extension() == ".log") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw ValidationError("no *.log files in " + dir.string());
    for (const auto& f : files) {
      auto [repo, run] = parse_log_filename(f.filename().string());
      docs.push_back(corpus::load_local(f, std::move(repo), std::move(run)));
    }
    config["from_dir"] = dir.string();
  } else {
    if (!opt.github_run_id) throw ValidationError("ingest: --from-github needs owner/repo and a run id");
    const char* token = std::getenv(std::string(corpus::kGithubTokenEnv).c_str());
    if (!token || !*token) {
      throw InputError("set " + std::string(corpus::kGithubTokenEnv) + " to a token with actions:read");
    }
    corpus::GithubOptions gh;
    gh.api_base = opt.github_api_base;
    docs.push_back(corpus::fetch_run_logs(*opt.github_repo, *opt.github_run_id, token, gh));
    config["from_github"] = {{"repo", *opt.github_repo}, {"run_id", *opt.github_run_id}};
  }
  config["out"] = opt.out.string();
  corpus::save_corpus(opt.out, docs);
  write_file(opt.out.string() + ".run_config.json", config.dump(2) + "\n");
  return docs.size();
}

// ---------------------------------------------------------------- train

std::vector<std::optional<std::size_t>> parse_pca_grid(std::string_view text) {
  std::vector<std::optional<std::size_t>> out;
  for (const auto& field : csv::parse(text).empty() ? csv::Row{} : csv::parse(text).front()) {
    if (field == "none" || field == "off") {
      out.emplace_back(std::nullopt);
      continue;
    }
    try {
      std::size_t pos = 0;
      const auto k = std::stoull(field, &pos);
      if (pos != field.size() || k == 0) throw std::invalid_argument(field);
      out.emplace_back(static_cast<std::size_t>(k));
    } catch (const std::exception&) {
      throw ValidationError("bad PCA grid value '" + field + "'");
    }
  }
  if (out.empty()) throw ValidationError("empty PCA grid");
  return out;
}

void cmd_train(const TrainOptions& opt) {
  const auto docs = corpus::load_corpus(opt.corpus);
  const auto truth = labels_for(opt.labels, docs);
  const auto source = features::parse_feature_source(opt.features);

  std::vector<annotation::LineKey> keys;
  std::vector<std::string> texts;
  std::vector<annotation::Label> y;
  for (const auto& doc : docs) {
    for (const auto& line : doc.lines) {
      annotation::LineKey key{doc.repo, doc.run_id, line.index};
      const auto it = truth.find(key);
      if (it == truth.end()) continue;
      keys.push_back(std::move(key));
      texts.push_back(line.content);
      y.push_back(it->second);
    }
  }
  if (y.empty()) throw ValidationError("no labeled lines in the corpus");
  if (opt.balance) {
    const auto keep = classify::balanced_subsample(y, opt.seed);
    std::vector<annotation::LineKey> k2;
    std::vector<std::string> t2;
    std::vector<annotation::Label> y2;
    for (const auto i : keep) {
      k2.push_back(keys[i]);
      t2.push_back(texts[i]);
      y2.push_back(y[i]);
    }
    keys = std::move(k2);
    texts = std::move(t2);
    y = std::move(y2);
  }
  const auto ones = static_cast<std::size_t>(std::count(y.begin(), y.end(), annotation::Label::kRelevant));
  if (ones == 0 || ones == y.size()) {
    throw ValidationError(fmt::format("labels contain a single class ({} lines, all {}); training needs both",
                                      y.size(), ones ? "relevant" : "irrelevant"));
  }

  classify::GridSpec spec;
  for (const auto& m : opt.models) spec.kinds.push_back(classify::parse_kind(m));
  spec.pca_grid = opt.pca_grid;
  spec.scale = opt.scale.value_or(source == features::FeatureSource::kEmbedding);
  spec.folds = opt.folds;
  spec.test_fraction = opt.test_fraction;
  spec.seed = opt.seed;
  spec.feature_label = std::string(features::to_string(source));
  for (const auto& kv : opt.hyper) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ValidationError("hyperparameter '" + kv + "' is not key=value");
    spec.hyper.set(kv.substr(0, eq), kv.substr(eq + 1));
  }

  const auto split = classify::stratified_split(y, spec.test_fraction, spec.seed);
  features::FeatureMatrix x;
  std::optional<features::TfIdfModel> tfidf;
  std::string provenance;
  if (source == features::FeatureSource::kTfIdf) {
    std::vector<std::string> train_text;
    train_text.reserve(split.train.size());
    for (const auto i : split.train) train_text.push_back(texts[i]);
    tfidf = features::fit_tfidf(train_text, opt.min_df);
    x = features::transform_tfidf(*tfidf, texts);
  } else {
    if (!opt.embeddings) throw ValidationError("--features embedding needs --embeddings");
    const auto table = features::load_embeddings(*opt.embeddings);
    x = features::embedding_matrix(table, keys);
    provenance = table.provenance();
  }

  OutputDir out(opt.out_dir);
  ordered_json config{{"command", "train"},
                      {"tool_version", kToolVersion},
                      {"corpus", opt.corpus.string()},
                      {"labels", opt.labels.string()},
                      {"features", spec.feature_label},
                      {"embeddings", optional_path(opt.embeddings)},
                      {"models", opt.models},
                      {"pca_grid", json::array()},
                      {"scale", spec.scale},
                      {"folds", spec.folds},
                      {"test_fraction", spec.test_fraction},
                      {"min_df", opt.min_df},
                      {"balance", opt.balance},
                      {"seed", spec.seed},
                      {"hyper", classify::to_json(spec.hyper)}};
  for (const auto& k : spec.pca_grid) config["pca_grid"].push_back(k ? ordered_json(*k) : ordered_json("none"));
  const auto hash = out.write_config(config);

  auto results = classify::grid_search(spec, x, y, split);

  std::vector<std::vector<std::string>> report_rows;
  std::vector<std::vector<std::string>> grid_rows;
  std::size_t best = 0;
  for (std::size_t r = 0; r < results.size(); ++r) {
    auto& res = results[r];
    res.model.pipeline.source = source;
    res.model.pipeline.tfidf = tfidf;
    res.model.pipeline.embedding_provenance = provenance;
    const std::string kind(classify::to_string(res.kind));
    const std::string pca = res.pca_k ? std::to_string(*res.pca_k) : "none";
    auto metric_row = [&](std::string row, const classify::EvalMetrics& m) {
      report_rows.push_back({kind, pca, std::move(row), fmt::format("{:.6f}", m.accuracy),
                             fmt::format("{:.6f}", m.weighted_f1),
                             fmt::format("{:.6f}", m.weighted_precision),
                             fmt::format("{:.6f}", m.weighted_recall)});
    };
    for (std::size_t f = 0; f < res.report.per_fold.size(); ++f) {
      metric_row(fmt::format("fold{}", f + 1), res.report.per_fold[f]);
    }
    metric_row("test", res.report.test);
    for (const auto& cell : res.cells) {
      grid_rows.push_back({kind, cell.pca_k ? std::to_string(*cell.pca_k) : "none",
                           fmt::format("{:.6f}", cell.mean_fold_f1),
                           cell.pca_k == res.pca_k ? "yes" : "no"});
    }
    classify::save_model(out.path() / fmt::format("model_{}.json", kind), res.model);
    write_file(out.path() / fmt::format("cv_config_{}.json", kind), res.report.config.dump(2) + "\n");
    if (res.report.mean_fold_f1() > results[best].report.mean_fold_f1()) best = r;
  }
  classify::save_model(out.path() / "model.json", results[best].model);

  const HeaderInfo header{"train", hash, "", {}};
  write_file(out.path() / "cv_report.csv",
             header_block(header) +
                 csv_table({"Model", "PCA", "Split", "Accuracy", "F1 (w)", "Precision (w)", "Recall (w)"},
                           report_rows));
  write_file(out.path() / "grid.csv",
             header_block(header) + csv_table({"Model", "PCA", "Mean Fold F1", "Selected"}, grid_rows));
}

// ---------------------------------------------------------------- reduce

std::vector<reduce::ReductionRow> cmd_reduce(const ReduceOptions& opt) {
  const auto docs = corpus::load_corpus(opt.corpus);
  const auto strategy = reduce::parse_strategy(opt.strategy);
  const auto tokenizer = tokenio::Tokenizer::from_config(opt.tokenizer);

  ordered_json config{{"command", "reduce"},
                      {"tool_version", kToolVersion},
                      {"corpus", opt.corpus.string()},
                      {"strategy", opt.strategy},
                      {"seed", opt.seed},
                      {"tokenizer",
                       {{"mode", tokenio::to_string(opt.tokenizer.mode)},
                        {"merges", optional_path(opt.tokenizer.merges_path)},
                        {"separator_tokens_per_line", opt.tokenizer.separator_tokens_per_line}}}};
  std::vector<std::string> divergences = tokenizer_divergences(tokenizer);

  std::optional<classify::TrainedClassifier> model;
  std::optional<std::map<annotation::LineKey, annotation::Label>> truth;
  std::optional<features::EmbeddingTable> embeddings;
  std::map<std::string, std::size_t> matched_counts;
  switch (strategy) {
    case reduce::Strategy::kSieve:
      if (opt.model.has_value() == opt.labels.has_value()) {
        throw ValidationError("sieve: give exactly one of --model or --labels");
      }
      if (opt.model) {
        model = classify::load_model(*opt.model);
        if (model->pipeline.source == features::FeatureSource::kEmbedding) {
          if (!opt.embeddings) throw ValidationError("model uses embeddings; pass --embeddings");
          embeddings = features::load_embeddings(*opt.embeddings);
        }
        config["model"] = opt.model->string();
        config["embeddings"] = optional_path(opt.embeddings);
      } else {
        truth = labels_for(*opt.labels, docs);
        config["labels"] = opt.labels->string();
      }
      break;
    case reduce::Strategy::kRandom:
      if (opt.match_manifests) {
        for (const auto& e : fs::directory_iterator(*opt.match_manifests)) {
          if (e.path().extension() != ".json") continue;
          const auto m = reduce::load_manifest(e.path());
          matched_counts[reduce::document_stem(m.repo, m.run_id)] = m.result.removed_lines;
        }
        config["match_manifests"] = opt.match_manifests->string();
      } else {
        config["ratio"] = opt.ratio;
      }
      break;
    case reduce::Strategy::kTemplate:
      config["depth"] = opt.depth;
      config["threshold"] = opt.threshold;
      divergences.push_back(fmt::format(
          "template baseline parameters (depth {}, similarity {}) are this tool's defaults", opt.depth,
          opt.threshold));
      break;
  }

  OutputDir out(opt.out_dir);
  const auto hash = out.write_config(config);

  Rng seeds(opt.seed);
  std::vector<reduce::ReductionRow> rows;
  std::vector<std::string> warnings;
  for (const auto& doc : docs) {
    const auto doc_seed = seeds.next();
    const auto stem = reduce::document_stem(doc);
    reduce::ReducedLog reduced;
    switch (strategy) {
      case reduce::Strategy::kSieve:
        reduced = model ? reduce::sieve(doc, *model, embeddings ? &*embeddings : nullptr)
                        : reduce::sieve_with_labels(doc, *truth);
        break;
      case reduce::Strategy::kRandom:
        if (opt.match_manifests) {
          const auto it = matched_counts.find(stem);
          if (it == matched_counts.end()) {
            throw ValidationError("no manifest to match for " + doc.key());
          }
          reduced = reduce::random_baseline_count(doc, it->second, doc_seed);
        } else {
          reduced = reduce::random_baseline(doc, opt.ratio, doc_seed);
        }
        break;
      case reduce::Strategy::kTemplate:
        reduced = reduce::template_baseline(doc, opt.depth, opt.threshold).reduced;
        break;
    }
    const auto result = reduce::reduction_metrics(doc, reduced, tokenizer);
    std::string body;
    for (const auto i : reduced.kept_indices) body += doc.lines[i].content + "\n";
    write_file(out.path() / "reduced" / (stem + ".log"), body);
    write_file(out.path() / "manifests" / (stem + ".json"),
               reduce::manifest_json(reduced, result, tokenizer).dump(2) + "\n");
    warnings.insert(warnings.end(), reduced.warnings.begin(), reduced.warnings.end());
    rows.push_back({doc.repo, result});
  }
  for (auto& w : warnings) divergences.push_back("warning: " + w);
  const HeaderInfo header{"reduce", hash, tokenizer_label(tokenizer), divergences};
  write_file(out.path() / "reduction.csv", header_block(header) + reduce::reduction_csv(rows));
  return rows;
}

// ---------------------------------------------------------------- eval

std::optional<Summary> summarize(std::vector<double> values) {
  if (values.empty()) return std::nullopt;
  std::sort(values.begin(), values.end());
  Summary s;
  s.min = values.front();
  s.max = values.back();
  double sum = 0.0;
  for (const double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  const auto n = values.size();
  s.median = n % 2 ? values[n / 2] : (values[n / 2 - 1] + values[n / 2]) / 2.0;
  return s;
}

std::string exact_match_total(std::size_t matches, std::size_t total) {
  const auto pct = total == 0 ? 0LL
                              : std::llround(100.0 * static_cast<double>(matches) /
                                             static_cast<double>(total));
  return fmt::format("{} / {} ({}%)", matches, total, pct);
}

std::string eval_csv(const EvalTable& table) {
  std::string out(kEvalHeader);
  out.push_back('\n');
  auto opt_cell = [](const std::optional<double>& v) { return v ? number(*v) : std::string(); };
  std::size_t matches = 0;
  for (const auto& r : table.rows) {
    out += csv::join({r.repository, number(r.cosine), opt_cell(r.bert_f1), number(r.rouge1),
                      number(r.rougel), number(r.bleu), opt_cell(r.judge),
                      std::to_string(r.exact_match)});
    out.push_back('\n');
    matches += static_cast<std::size_t>(r.exact_match);
  }
  using Getter = std::optional<double> (*)(const EvalRow&);
  const Getter columns[] = {
      [](const EvalRow& r) -> std::optional<double> { return r.cosine; },
      [](const EvalRow& r) -> std::optional<double> { return r.bert_f1; },
      [](const EvalRow& r) -> std::optional<double> { return r.rouge1; },
      [](const EvalRow& r) -> std::optional<double> { return r.rougel; },
      [](const EvalRow& r) -> std::optional<double> { return r.bleu; },
      [](const EvalRow& r) -> std::optional<double> { return r.judge; },
  };
  std::vector<std::optional<Summary>> summaries;
  for (const auto get : columns) {
    std::vector<double> values;
    for (const auto& r : table.rows) {
      if (const auto v = get(r)) values.push_back(*v);
    }
    summaries.push_back(summarize(std::move(values)));
  }
  const std::pair<const char*, double Summary::*> stats[] = {
      {"Min", &Summary::min}, {"Mean", &Summary::mean}, {"Median", &Summary::median}, {"Max", &Summary::max}};
  for (const auto& [name, member] : stats) {
    csv::Row row{name};
    for (const auto& s : summaries) row.push_back(s ? number((*s).*member) : std::string());
    row.emplace_back();
    out += csv::join(row) + "\n";
  }
  out += csv::join({"Total", "", "", "", "", "", "", exact_match_total(matches, table.rows.size())}) + "\n";
  return out;
}

EvalTable cmd_eval(const EvalOptions& opt) {
  const auto docs = corpus::load_corpus(opt.corpus);
  const fs::path manifest_dir = opt.reduced_dir / "manifests";
  if (!fs::is_directory(manifest_dir)) throw InputError("manifest directory not found: " + manifest_dir.string());

  llm::ClientMode mode;
  if (opt.mode == "replay") mode = llm::ClientMode::kReplay;
  else if (opt.mode == "record") mode = llm::ClientMode::kRecord;
  else if (opt.mode == "live") mode = llm::ClientMode::kLive;
  else throw ValidationError("unknown eval mode '" + opt.mode + "' (replay, record, live)");

  std::optional<llm::JudgeEndpoint> endpoint;
  if (opt.endpoint) endpoint = llm::load_endpoint(*opt.endpoint);
  std::string model = opt.model;
  if (model.empty()) model = endpoint ? endpoint->model : std::string("gpt-4o");
  std::optional<llm::ResponseArchive> archive;
  if (mode != llm::ClientMode::kLive) {
    if (mode == llm::ClientMode::kReplay && !fs::exists(opt.archive)) {
      throw InputError("response archive not found: " + opt.archive.string());
    }
    archive.emplace(opt.archive);
  }
  llm::LlmClient client(mode, endpoint, archive ? &*archive : nullptr, model);

  std::map<std::pair<std::string, std::string>, double> bert;
  EvalTable table;
  std::vector<std::pair<const corpus::LogDocument*, reduce::Manifest>> work;
  for (const auto& doc : docs) {
    const auto path = manifest_dir / (reduce::document_stem(doc) + ".json");
    if (!fs::exists(path)) throw ValidationError("no manifest for " + doc.key() + " in " + manifest_dir.string());
    auto m = reduce::load_manifest(path);
    const std::string strategy(reduce::to_string(m.strategy));
    if (table.strategy.empty()) table.strategy = strategy;
    if (table.strategy != strategy) throw ValidationError("manifests mix strategies " + table.strategy + " and " + strategy);
    work.emplace_back(&doc, std::move(m));
  }
  if (opt.bert_scores) {
    const auto rows = csv::read_file(*opt.bert_scores);
    if (rows.empty()) throw ValidationError("empty BERT score file");
    const int c_repo = csv::column(rows[0], "repo"), c_run = csv::column(rows[0], "run_id");
    const int c_strat = csv::column(rows[0], "strategy"), c_f1 = csv::column(rows[0], "bert_f1");
    if (c_repo < 0 || c_run < 0 || c_strat < 0 || c_f1 < 0) {
      throw ValidationError("BERT score file needs columns repo,run_id,strategy,bert_f1");
    }
    for (std::size_t i = 1; i < rows.size(); ++i) {
      const auto& r = rows[i];
      if (r.size() != rows[0].size()) throw ValidationError(fmt::format("BERT score file row {} is ragged", i + 1));
      if (r[c_strat] != table.strategy) continue;
      double v = 0;
      try {
        v = std::stod(r[c_f1]);
      } catch (const std::exception&) {
        throw ValidationError("BERT score '" + r[c_f1] + "' is not a number");
      }
      if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("BERT score outside [0, 1]: " + r[c_f1]);
      bert[{r[c_repo], r[c_run]}] = v;
    }
  }

  ordered_json config{{"command", "eval"},
                      {"tool_version", kToolVersion},
                      {"corpus", opt.corpus.string()},
                      {"reduced_dir", opt.reduced_dir.string()},
                      {"archive", opt.archive.string()},
                      {"mode", opt.mode},
                      {"model", model},
                      {"endpoint", endpoint ? json(llm::to_json(*endpoint)) : json(nullptr)},
                      {"judge", opt.judge},
                      {"judge_rubric", opt.judge ? json(llm::kRubricVersion) : json(nullptr)},
                      {"bert_scores", optional_path(opt.bert_scores)},
                      {"cosine_source", "tfidf-pair"}};
  OutputDir out(opt.out_dir);
  const auto hash = out.write_config(config);

  for (const auto& [doc, manifest] : work) {
    const auto reduced = reduce::reduced_from_manifest(*doc, manifest);
    const auto full_text = corpus::document_text(*doc);
    const auto reduced_text = reduced.text();
    using evaluate::PromptKind;
    const auto full_explain = client.complete(evaluate::build_prompt(PromptKind::kExplain, full_text));
    const auto red_explain = client.complete(evaluate::build_prompt(PromptKind::kExplain, reduced_text));
    const auto full_cat = client.complete(evaluate::build_prompt(PromptKind::kCategorize, full_text));
    const auto red_cat = client.complete(evaluate::build_prompt(PromptKind::kCategorize, reduced_text));
    const auto report = evaluate::compare_responses(full_explain, red_explain);

    EvalRow row;
    row.repository = doc->repo;
    row.run_id = doc->run_id;
    row.cosine = report.cosine;
    row.rouge1 = report.rouge1_f1;
    row.rougel = report.rougel_f1;
    row.bleu = report.bleu;
    row.exact_match = evaluate::exact_match(full_cat, red_cat);
    if (const auto it = bert.find({doc->repo, doc->run_id}); it != bert.end()) row.bert_f1 = it->second;
    if (opt.judge) {
      try {
        row.judge = llm::judge_score(client, full_explain, red_explain);
      } catch (const llm::LlmError& e) {
        if (e.reason() != llm::FailureReason::kBadResponse) throw;
        table.warnings.push_back("judge score absent for " + doc->key() + ": " + e.what());
      } catch (const ValidationError& e) {
        table.warnings.push_back("judge score absent for " + doc->key() + ": " + e.what());
      }
    }
    table.rows.push_back(std::move(row));
  }

  std::vector<std::string> divergences{"cosine over TF-IDF vectors fitted on each response pair",
                                       "BERT-F1 only from an external scorer file"};
  if (opt.judge) divergences.push_back("judge rubric " + std::string(llm::kRubricVersion) + " is this tool's own");
  for (const auto& w : table.warnings) divergences.push_back("warning: " + w);
  const std::string tok = read_header_value(read_file(opt.reduced_dir / "reduction.csv"), "tokenizer");
  const HeaderInfo header{"eval (" + table.strategy + ")", hash, tok, divergences};
  write_file(out.path() / "eval.csv", header_block(header) + eval_csv(table));
  return table;
}

// ---------------------------------------------------------------- report

ResourceSummary resource_summary(std::span<const reduce::ReductionRow> rows) {
  if (rows.empty()) throw ValidationError("report: the reduction table has no rows");
  const auto a = reduce::reduction_average(rows);
  ResourceSummary s;
  s.full_tokens = std::llround(a.full_tokens);
  s.reduced_tokens = std::llround(a.tokens_kept);
  s.token_delta = -std::llround(a.token_red);
  s.full_lines = std::llround(a.total_lines);
  s.reduced_lines = std::llround(a.lines_kept);
  s.line_delta = -std::llround(a.line_red);
  return s;
}

std::string render_resource_summary(const ResourceSummary& s,
                                    const std::optional<costmodel::CostParams>& params,
                                    ReportFormat format) {
  const bool md = format == ReportFormat::kMarkdown;
  auto count = [&](long long v) { return md ? thousands(v) : std::to_string(v); };
  std::vector<std::string> header{"", "Full", "LogSieve", "Delta"};
  std::vector<std::vector<std::string>> rows{
      {"Mean input tokens / run", count(s.full_tokens), count(s.reduced_tokens), signed_percent(s.token_delta)},
      {"Mean lines / run", count(s.full_lines), count(s.reduced_lines), signed_percent(s.line_delta)}};
  if (params) {
    const auto& p = *params;
    header.insert(header.end(), {"Input Cost Full (" + p.currency_label + ")",
                                 "Input Cost LogSieve (" + p.currency_label + ")",
                                 "Cost Saved (" + p.currency_label + ")",
                                 "CO2 Saved (per " + p.energy_label + " intensity)"});
    const auto ledger = costmodel::TokenLedger::from_counts(static_cast<std::uint64_t>(s.full_tokens),
                                                            static_cast<std::uint64_t>(s.reduced_tokens));
    rows[0].insert(rows[0].end(),
                   {money(costmodel::inference_cost(ledger.t_in_full, 0, p.prices)),
                    money(costmodel::inference_cost(ledger.t_in_reduced, 0, p.prices)),
                    money(costmodel::cost_delta(ledger, p.prices)),
                    money(costmodel::carbon_delta(ledger.t_removed, p.carbon))});
    rows[1].insert(rows[1].end(), 4, std::string());
  }
  if (!md) header[0] = "Metric";
  return md ? markdown_table(header, rows) : csv_table(header, rows);
}

std::string render_corpus_report(std::span<const reduce::ReductionRow> rows,
                                 const std::optional<costmodel::CostParams>& params,
                                 ReportFormat format) {
  std::vector<std::string> header{"Repository", "Total Lines", "Removed Lines", "Lines Kept", "Line Red.",
                                  "Full Tokens", "Tokens Kept", "Token Red."};
  if (params) {
    header.insert(header.end(), {"Input Cost Full (" + params->currency_label + ")",
                                 "Input Cost Kept (" + params->currency_label + ")",
                                 "Cost Saved (" + params->currency_label + ")", "CO2 Saved"});
  }
  const bool md = format == ReportFormat::kMarkdown;
  auto count = [&](long long v) { return md ? thousands(v) : std::to_string(v); };
  std::vector<std::vector<std::string>> body;
  for (const auto& row : rows) {
    const auto& r = row.result;
    std::vector<std::string> cells{row.repository,
                                   count(static_cast<long long>(r.total_lines)),
                                   count(static_cast<long long>(r.removed_lines)),
                                   count(static_cast<long long>(r.lines_kept)),
                                   reduce::percent_label(r.line_red),
                                   count(static_cast<long long>(r.full_tokens)),
                                   count(static_cast<long long>(r.tokens_kept)),
                                   reduce::percent_label(r.token_red)};
    if (params) {
      const auto ledger = costmodel::TokenLedger::from_counts(r.full_tokens, r.tokens_kept);
      cells.insert(cells.end(), {money(costmodel::inference_cost(ledger.t_in_full, 0, params->prices)),
                                 money(costmodel::inference_cost(ledger.t_in_reduced, 0, params->prices)),
                                 money(costmodel::cost_delta(ledger, params->prices)),
                                 money(costmodel::carbon_delta(ledger.t_removed, params->carbon))});
    }
    body.push_back(std::move(cells));
  }
  if (!rows.empty()) {
    const auto a = reduce::reduction_average(rows);
    std::vector<std::string> cells{"Average",
                                   count(std::llround(a.total_lines)),
                                   count(std::llround(a.removed_lines)),
                                   count(std::llround(a.lines_kept)),
                                   reduce::percent_label(a.line_red),
                                   count(std::llround(a.full_tokens)),
                                   count(std::llround(a.tokens_kept)),
                                   reduce::percent_label(a.token_red)};
    if (params) cells.insert(cells.end(), 4, std::string());
    body.push_back(std::move(cells));
  }
  return md ? markdown_table(header, body) : csv_table(header, body);
}

void cmd_report(const ReportOptions& opt) {
  const auto text = read_file(opt.table);
  const auto rows = reduce::parse_reduction_csv(text);
  std::optional<costmodel::CostParams> params;
  if (opt.prices) params = costmodel::load_params(*opt.prices);

  ordered_json config{{"command", "report"},
                      {"tool_version", kToolVersion},
                      {"table", opt.table.string()},
                      {"prices", optional_path(opt.prices)},
                      {"markdown", opt.markdown}};
  OutputDir out(opt.out_dir);
  const auto hash = out.write_config(config);

  std::vector<std::string> divergences{"Delta is the mean of per-run percentages"};
  if (!params) divergences.push_back("no price file given; cost columns omitted");
  const HeaderInfo header{"report", hash, read_header_value(text, "tokenizer"), divergences};
  const auto summary = resource_summary(rows);
  write_file(out.path() / "resource_summary.csv",
             header_block(header) + render_resource_summary(summary, params, ReportFormat::kCsv));
  write_file(out.path() / "corpus_report.csv",
             header_block(header) + render_corpus_report(rows, params, ReportFormat::kCsv));
  if (opt.markdown) {
    std::string md = "<!--\n" + header_block(header) + "-->\n\n## Resource summary\n\n";
    md += render_resource_summary(summary, params, ReportFormat::kMarkdown);
    md += "\n## Per-repository reduction\n\n";
    md += render_corpus_report(rows, params, ReportFormat::kMarkdown);
    write_file(out.path() / "report.md", md);
  }
}

// ---------------------------------------------------------------- kappa

KappaReport cmd_kappa(const KappaOptions& opt) {
  const auto docs = corpus::load_corpus(opt.corpus);
  if (opt.labels.empty()) throw ValidationError("kappa: no label files given");
  annotation::AnnotatedCorpus annotated;
  if (opt.labels.size() == 1) {
    annotated = annotation::import_labels(opt.labels[0], docs);
  } else {
    // One file per rater: rename each file's single annotator to r1, r2, ...
    std::string merged;
    for (std::size_t f = 0; f < opt.labels.size(); ++f) {
      const auto rows = csv::read_file(opt.labels[f]);
      if (rows.empty()) throw ValidationError("empty label file " + opt.labels[f].string());
      const int c_ann = csv::column(rows[0], "annotator");
      if (c_ann < 0) throw ValidationError(opt.labels[f].string() + ": missing annotator column");
      if (f == 0) merged += csv::join(rows[0]) + "\n";
      else if (rows[0] != csv::parse(merged).front()) {
        throw ValidationError(opt.labels[f].string() + ": header differs from " + opt.labels[0].string());
      }
      std::string seen;
      for (std::size_t i = 1; i < rows.size(); ++i) {
        auto r = rows[i];
        if (static_cast<std::size_t>(c_ann) >= r.size()) {
          throw ValidationError(fmt::format("{}: row {} is ragged", opt.labels[f].string(), i + 1));
        }
        if (!seen.empty() && r[c_ann] != seen) {
          throw ValidationError(opt.labels[f].string() + ": more than one annotator in a per-rater file");
        }
        seen = r[c_ann];
        r[c_ann] = fmt::format("r{}", f + 1);
        merged += csv::join(r) + "\n";
      }
    }
    annotated = annotation::import_labels_text(merged, docs);
  }
  if (annotated.annotator_ids.size() != 2) {
    throw ValidationError(fmt::format("kappa needs exactly two annotators, found {}",
                                      annotated.annotator_ids.size()));
  }
  const auto paired = annotation::paired_labels(annotated, annotated.annotator_ids[0], annotated.annotator_ids[1]);
  const auto stats = annotation::kappa_stats(paired.a, paired.b);
  const auto diff = annotation::disagreements(annotated);

  KappaReport rep{annotated.annotator_ids[0], annotated.annotator_ids[1], paired.keys.size(),
                  stats.observed, stats.expected, stats.kappa, stats.degenerate, diff.size()};

  ordered_json config{{"command", "kappa"},
                      {"tool_version", kToolVersion},
                      {"corpus", opt.corpus.string()},
                      {"labels", json::array()},
                      {"resolutions", optional_path(opt.resolutions)}};
  for (const auto& p : opt.labels) config["labels"].push_back(p.string());
  OutputDir out(opt.out_dir);
  const auto hash = out.write_config(config);
  std::vector<std::string> divergences;
  if (stats.degenerate) divergences.push_back("both annotators constant; kappa set by convention");
  const HeaderInfo header{"kappa", hash, "", divergences};
  write_file(out.path() / "kappa.csv",
             header_block(header) +
                 csv_table({"Annotator A", "Annotator B", "Lines", "Observed", "Expected", "Kappa", "Disagreements"},
                           {{rep.first, rep.second, std::to_string(rep.lines), number(rep.observed),
                             number(rep.expected), number(rep.kappa), std::to_string(rep.disagreements)}}));
  std::vector<std::vector<std::string>> diff_rows;
  for (const auto& k : diff) {
    const auto& e = annotated.entries.at(k);
    diff_rows.push_back({k.repo, k.run_id, std::to_string(k.line_index),
                         std::to_string(annotation::to_int(e.by_annotator.at(rep.first))),
                         std::to_string(annotation::to_int(e.by_annotator.at(rep.second)))});
  }
  write_file(out.path() / "disagreements.csv",
             header_block(header) + csv_table({"repo", "run_id", "line_index", rep.first, rep.second}, diff_rows));
  if (opt.resolutions) {
    const auto merged = annotation::merge_consensus(annotated, annotation::read_resolutions(*opt.resolutions));
    std::ostringstream ss;
    annotation::write_consensus_csv(ss, merged);
    write_file(out.path() / "consensus.csv", ss.str());
  }
  return rep;
}

}  // namespace logsieve::cli
