#include "logsieve/annotation.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include "logsieve/csv.hpp"
#include "logsieve/error.hpp"

namespace logsieve::annotation {
namespace {

std::size_t parse_index(const std::string& text, std::size_t row) {
  std::size_t value = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw ValidationError("labels row " + std::to_string(row) + ": bad line_index '" + text + "'");
  }
  return value;
}

Label parse_label(const std::string& text, std::size_t row) {
  if (text == "0") return Label::kIrrelevant;
  if (text == "1") return Label::kRelevant;
  throw ValidationError("labels row " + std::to_string(row) + ": label must be 0 or 1, got '" +
                        text + "'");
}

}  // namespace

Label label_from_int(int v) {
  if (v == 0) return Label::kIrrelevant;
  if (v == 1) return Label::kRelevant;
  throw ValidationError("label must be 0 or 1, got " + std::to_string(v));
}

bool AnnotatedCorpus::has_consensus() const {
  return !entries.empty() && entries.begin()->second.consensus.has_value();
}

AnnotatedCorpus import_labels_text(std::string_view csv_text,
                                   std::span<const corpus::LogDocument> docs) {
  const auto rows = csv::parse(csv_text);
  AnnotatedCorpus out;
  if (rows.empty()) throw ValidationError("labels CSV has no header row");
  const auto& header = rows.front();
  const int c_repo = csv::column(header, "repo");
  const int c_run = csv::column(header, "run_id");
  const int c_line = csv::column(header, "line_index");
  const int c_ann = csv::column(header, "annotator");
  const int c_label = csv::column(header, "label");
  const int c_cons = csv::column(header, "consensus");
  if (c_repo < 0 || c_run < 0 || c_line < 0 || c_ann < 0 || c_label < 0) {
    throw ValidationError(
        "labels CSV schema mismatch: expected columns repo,run_id,line_index,annotator,label");
  }

  std::map<std::pair<std::string, std::string>, std::size_t> sizes;
  for (const auto& d : docs) sizes[{d.repo, d.run_id}] = d.lines.size();

  std::size_t with_consensus = 0;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const std::size_t file_row = r + 1;  // 1-based, header is row 1
    if (row.size() != header.size()) {
      throw ValidationError("labels row " + std::to_string(file_row) + ": expected " +
                            std::to_string(header.size()) + " fields, got " +
                            std::to_string(row.size()));
    }
    LineKey key{row[c_repo], row[c_run], parse_index(row[c_line], file_row)};
    const auto doc = sizes.find({key.repo, key.run_id});
    if (doc == sizes.end() || key.line_index >= doc->second) {
      throw ValidationError("labels row " + std::to_string(file_row) +
                            ": dangling reference to " + key.repo + "#" + key.run_id +
                            " line " + std::to_string(key.line_index) +
                            (doc == sizes.end()
                                 ? " (document not in corpus)"
                                 : " (document has " + std::to_string(doc->second) + " lines)"));
    }
    const std::string& annotator = row[c_ann];
    if (annotator.empty()) {
      throw ValidationError("labels row " + std::to_string(file_row) + ": empty annotator id");
    }
    auto& entry = out.entries[key];
    if (!entry.by_annotator.emplace(annotator, parse_label(row[c_label], file_row)).second) {
      throw ValidationError("labels row " + std::to_string(file_row) + ": duplicate label for " +
                            key.repo + "#" + key.run_id + " line " +
                            std::to_string(key.line_index) + " by annotator " + annotator);
    }
    if (std::find(out.annotator_ids.begin(), out.annotator_ids.end(), annotator) ==
        out.annotator_ids.end()) {
      out.annotator_ids.push_back(annotator);
    }
    if (c_cons >= 0 && !row[c_cons].empty()) {
      const Label c = parse_label(row[c_cons], file_row);
      if (entry.consensus && *entry.consensus != c) {
        throw ValidationError("labels row " + std::to_string(file_row) +
                              ": conflicting consensus values for the same line");
      }
      if (!entry.consensus) ++with_consensus;
      entry.consensus = c;
    }
  }
  if (with_consensus != 0 && with_consensus != out.entries.size()) {
    throw ValidationError("consensus column must be filled for every line or for none (" +
                          std::to_string(with_consensus) + " of " +
                          std::to_string(out.entries.size()) + " filled)");
  }
  return out;
}

AnnotatedCorpus import_labels(const std::filesystem::path& path,
                              std::span<const corpus::LogDocument> docs) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read labels file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return import_labels_text(buf.str(), docs);
}

KappaStats kappa_stats(std::span<const Label> a, std::span<const Label> b) {
  if (a.size() != b.size()) {
    throw ValidationError("kappa: label sequences differ in length (" + std::to_string(a.size()) +
                          " vs " + std::to_string(b.size()) + ")");
  }
  if (a.empty()) throw ValidationError("kappa: empty label sequences");
  std::size_t agree = 0, a1 = 0, b1 = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    agree += a[i] == b[i];
    a1 += a[i] == Label::kRelevant;
    b1 += b[i] == Label::kRelevant;
  }
  const auto n = static_cast<double>(a.size());
  const std::size_t a0 = a.size() - a1, b0 = b.size() - b1;
  KappaStats s;
  s.observed = static_cast<double>(agree) / n;
  s.expected = (static_cast<double>(a1) * static_cast<double>(b1) +
                static_cast<double>(a0) * static_cast<double>(b0)) /
               (n * n);
  s.degenerate = (a1 == 0 || a0 == 0) && (b1 == 0 || b0 == 0);
  if (a1 * b1 + a0 * b0 == a.size() * a.size()) {
    s.kappa = 1.0;  // both constant, same class
  } else {
    s.kappa = (s.observed - s.expected) / (1.0 - s.expected);
  }
  return s;
}

double cohen_kappa(std::span<const Label> a, std::span<const Label> b) {
  return kappa_stats(a, b).kappa;
}

PairedLabels paired_labels(const AnnotatedCorpus& corpus, const std::string& first,
                           const std::string& second) {
  PairedLabels out;
  std::size_t missing = 0;
  const LineKey* example = nullptr;
  for (const auto& [key, entry] : corpus.entries) {
    const auto ia = entry.by_annotator.find(first);
    const auto ib = entry.by_annotator.find(second);
    if (ia == entry.by_annotator.end() || ib == entry.by_annotator.end()) {
      ++missing;
      if (!example) example = &key;
      continue;
    }
    out.keys.push_back(key);
    out.a.push_back(ia->second);
    out.b.push_back(ib->second);
  }
  if (missing > 0) {
    throw ValidationError("annotators " + first + " and " + second + " cover different lines: " +
                          std::to_string(missing) + " line(s) labeled by only one, e.g. " +
                          example->repo + "#" + example->run_id + " line " +
                          std::to_string(example->line_index));
  }
  return out;
}

std::vector<LineKey> disagreements(const AnnotatedCorpus& corpus) {
  if (corpus.annotator_ids.size() != 2) {
    throw ValidationError("consensus merge needs exactly two annotators, found " +
                          std::to_string(corpus.annotator_ids.size()));
  }
  const auto pairs = paired_labels(corpus, corpus.annotator_ids[0], corpus.annotator_ids[1]);
  std::vector<LineKey> out;
  for (std::size_t i = 0; i < pairs.keys.size(); ++i) {
    if (pairs.a[i] != pairs.b[i]) out.push_back(pairs.keys[i]);
  }
  return out;
}

AnnotatedCorpus merge_consensus(const AnnotatedCorpus& corpus,
                                const std::map<LineKey, Label>& resolutions) {
  const auto disputed = disagreements(corpus);
  const std::set<LineKey> disputed_set(disputed.begin(), disputed.end());
  for (const auto& key : disputed) {
    if (!resolutions.contains(key)) {
      throw ValidationError("no resolution for disagreement at " + key.repo + "#" + key.run_id +
                            " line " + std::to_string(key.line_index));
    }
  }
  for (const auto& [key, label] : resolutions) {
    if (!disputed_set.contains(key)) {
      throw ValidationError("resolution supplied for a line the annotators agree on (or that is "
                            "not labeled): " +
                            key.repo + "#" + key.run_id + " line " +
                            std::to_string(key.line_index));
    }
  }
  AnnotatedCorpus out = corpus;
  const auto& first = corpus.annotator_ids[0];
  for (auto& [key, entry] : out.entries) {
    const auto r = resolutions.find(key);
    entry.consensus = r != resolutions.end() ? r->second : entry.by_annotator.at(first);
  }
  return out;
}

std::map<LineKey, Label> read_resolutions(const std::filesystem::path& path) {
  const auto rows = csv::read_file(path);
  if (rows.empty()) throw ValidationError("resolutions CSV has no header row");
  const auto& header = rows.front();
  const int c_repo = csv::column(header, "repo");
  const int c_run = csv::column(header, "run_id");
  const int c_line = csv::column(header, "line_index");
  const int c_label = csv::column(header, "label");
  if (c_repo < 0 || c_run < 0 || c_line < 0 || c_label < 0) {
    throw ValidationError("resolutions CSV schema mismatch: expected repo,run_id,line_index,label");
  }
  std::map<LineKey, Label> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != header.size()) {
      throw ValidationError("resolutions row " + std::to_string(r + 1) + ": wrong field count");
    }
    LineKey key{row[c_repo], row[c_run], parse_index(row[c_line], r + 1)};
    if (!out.emplace(key, parse_label(row[c_label], r + 1)).second) {
      throw ValidationError("resolutions row " + std::to_string(r + 1) + ": duplicate line");
    }
  }
  return out;
}

std::map<LineKey, Label> ground_truth(const AnnotatedCorpus& corpus) {
  std::map<LineKey, Label> out;
  if (corpus.has_consensus()) {
    for (const auto& [key, entry] : corpus.entries) out.emplace(key, *entry.consensus);
    return out;
  }
  if (corpus.annotator_ids.size() == 1) {
    for (const auto& [key, entry] : corpus.entries) out.emplace(key, entry.by_annotator.begin()->second);
    return out;
  }
  if (corpus.empty()) return out;
  throw ValidationError("labels from " + std::to_string(corpus.annotator_ids.size()) +
                        " annotators without a consensus column; run `kappa` with "
                        "--resolutions to export consensus labels first");
}

void write_consensus_csv(std::ostream& out, const AnnotatedCorpus& corpus) {
  out << "repo,run_id,line_index,annotator,label,consensus\n";
  for (const auto& [key, entry] : corpus.entries) {
    for (const auto& [annotator, label] : entry.by_annotator) {
      out << csv::join({key.repo, key.run_id, std::to_string(key.line_index), annotator,
                        std::to_string(to_int(label)),
                        entry.consensus ? std::to_string(to_int(*entry.consensus)) : ""})
          << '\n';
    }
  }
}

}  // namespace logsieve::annotation
