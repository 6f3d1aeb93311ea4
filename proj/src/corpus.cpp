#include "logsieve/corpus.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "logsieve/error.hpp"

namespace logsieve::corpus {
namespace {

using ordered_json = nlohmann::ordered_json;

bool is_digit(char c) { return c >= '0' && c <= '9'; }

// Reads exactly `n` digits starting at `pos`.
std::optional<int> digits(std::string_view s, std::size_t pos, std::size_t n) {
  if (pos + n > s.size()) return std::nullopt;
  int value = 0;
  for (std::size_t i = pos; i < pos + n; ++i) {
    if (!is_digit(s[i])) return std::nullopt;
    value = value * 10 + (s[i] - '0');
  }
  return value;
}

// Length of the timestamp prefix at the start of `s` (without the trailing
// space), or 0 when there is none.
std::size_t timestamp_prefix_length(std::string_view s) {
  // YYYY-MM-DDTHH:MM:SS is 19 characters.
  if (s.size() < 20) return 0;
  if (s[4] != '-' || s[7] != '-' || s[10] != 'T' || s[13] != ':' || s[16] != ':') {
    return 0;
  }
  for (std::size_t i : {0, 1, 2, 3, 5, 6, 8, 9, 11, 12, 14, 15, 17, 18}) {
    if (!is_digit(s[i])) return 0;
  }
  std::size_t pos = 19;
  if (s[pos] == '.') {
    ++pos;
    std::size_t frac = 0;
    while (pos < s.size() && is_digit(s[pos]) && frac < 8) {
      ++pos;
      ++frac;
    }
    if (frac == 0 || frac > 7) return 0;
  }
  if (pos >= s.size() || s[pos] != 'Z') return 0;
  ++pos;
  if (!parse_timestamp(s.substr(0, pos))) return 0;
  return pos;
}

// Removes complete CSI sequences: ESC '[' params* intermediates* final.
std::string strip_escapes(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    if (s[i] == '\x1b' && i + 1 < s.size() && s[i + 1] == '[') {
      std::size_t j = i + 2;
      while (j < s.size() && static_cast<unsigned char>(s[j]) >= 0x30 &&
             static_cast<unsigned char>(s[j]) <= 0x3F) {
        ++j;
      }
      while (j < s.size() && static_cast<unsigned char>(s[j]) >= 0x20 &&
             static_cast<unsigned char>(s[j]) <= 0x2F) {
        ++j;
      }
      if (j < s.size() && static_cast<unsigned char>(s[j]) >= 0x40 &&
          static_cast<unsigned char>(s[j]) <= 0x7E) {
        i = j + 1;
        continue;
      }
    }
    out.push_back(s[i]);
    ++i;
  }
  return out;
}

struct Pass {
  std::optional<Timestamp> timestamp;
  std::string content;
};

Pass normalize_once(std::string_view input) {
  Pass p;
  std::string text = strip_escapes(input);
  while (!text.empty() && text.back() == '\r') text.pop_back();
  const std::size_t n = timestamp_prefix_length(text);
  if (n > 0 && (n == text.size() || text[n] == ' ')) {
    p.timestamp = parse_timestamp(std::string_view(text).substr(0, n));
    text.erase(0, n == text.size() ? n : n + 1);
  }
  p.content = std::move(text);
  return p;
}

}  // namespace

std::string_view to_string(Conclusion c) {
  switch (c) {
    case Conclusion::kFailure: return "failure";
    case Conclusion::kSuccess: return "success";
    case Conclusion::kCancelled: return "cancelled";
    case Conclusion::kSkipped: return "skipped";
  }
  return "failure";
}

Conclusion parse_conclusion(std::string_view text) {
  if (text == "failure") return Conclusion::kFailure;
  if (text == "success") return Conclusion::kSuccess;
  if (text == "cancelled") return Conclusion::kCancelled;
  if (text == "skipped") return Conclusion::kSkipped;
  throw ValidationError("unknown run conclusion '" + std::string(text) +
                        "' (expected failure, success, cancelled or skipped)");
}

std::string LogDocument::key() const { return repo + "#" + run_id; }

std::optional<Timestamp> parse_timestamp(std::string_view s) {
  if (s.size() < 20 || s.back() != 'Z') return std::nullopt;
  const auto y = digits(s, 0, 4), mo = digits(s, 5, 2), d = digits(s, 8, 2);
  const auto h = digits(s, 11, 2), mi = digits(s, 14, 2), sec = digits(s, 17, 2);
  if (!y || !mo || !d || !h || !mi || !sec) return std::nullopt;
  if (s[4] != '-' || s[7] != '-' || s[10] != 'T' || s[13] != ':' || s[16] != ':') {
    return std::nullopt;
  }
  std::int64_t nanos = 0;
  const std::string_view tail = s.substr(19, s.size() - 20);
  if (!tail.empty()) {
    if (tail[0] != '.' || tail.size() < 2 || tail.size() > 8) return std::nullopt;
    std::int64_t scale = 100'000'000;
    for (char c : tail.substr(1)) {
      if (!is_digit(c)) return std::nullopt;
      nanos += (c - '0') * scale;
      scale /= 10;
    }
  }
  using namespace std::chrono;
  const year_month_day ymd{year{*y}, month{static_cast<unsigned>(*mo)},
                           day{static_cast<unsigned>(*d)}};
  if (!ymd.ok() || *h > 23 || *mi > 59 || *sec > 60) return std::nullopt;
  Timestamp ts;
  ts.text = std::string(s);
  ts.instant = sys_days{ymd} + hours{*h} + minutes{*mi} + seconds{*sec} +
               nanoseconds{nanos};
  return ts;
}

NormalizedLine normalize_line(std::string_view raw) {
  // Iterate to a fixed point so that normalization is idempotent even for
  // pathological inputs (nested escapes, repeated timestamp prefixes).
  Pass first = normalize_once(raw);
  NormalizedLine result{first.timestamp, std::move(first.content)};
  for (;;) {
    Pass next = normalize_once(result.content);
    if (next.content == result.content) break;
    if (!result.timestamp) result.timestamp = next.timestamp;
    result.content = std::move(next.content);
  }
  return result;
}

std::string sanitize_utf8(std::string_view s) {
  static constexpr std::string_view kReplacement = "\xEF\xBF\xBD";
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = 0;
    std::uint32_t cp = 0;
    if (c < 0x80) {
      out.push_back(static_cast<char>(c));
      ++i;
      continue;
    } else if (c >= 0xC2 && c <= 0xDF) {
      len = 2;
      cp = c & 0x1F;
    } else if (c >= 0xE0 && c <= 0xEF) {
      len = 3;
      cp = c & 0x0F;
    } else if (c >= 0xF0 && c <= 0xF4) {
      len = 4;
      cp = c & 0x07;
    }
    bool ok = len > 0 && i + len <= s.size();
    for (std::size_t k = 1; ok && k < len; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xC0) != 0x80) {
        ok = false;
      } else {
        cp = (cp << 6) | (cc & 0x3F);
      }
    }
    if (ok) {
      // Reject overlongs, surrogates and values past U+10FFFF.
      if ((len == 3 && (cp < 0x800 || (cp >= 0xD800 && cp <= 0xDFFF))) ||
          (len == 4 && (cp < 0x10000 || cp > 0x10FFFF))) {
        ok = false;
      }
    }
    if (ok) {
      out.append(s.substr(i, len));
      i += len;
    } else {
      out.append(kReplacement);
      ++i;
    }
  }
  return out;
}

std::vector<std::string> split_physical_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    const std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) {
      lines.emplace_back(text.substr(start));
      break;
    }
    lines.emplace_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;
}

LogDocument document_from_text(std::string_view text, std::string repo,
                               std::string run_id, Conclusion conclusion) {
  LogDocument doc;
  doc.repo = std::move(repo);
  doc.run_id = std::move(run_id);
  doc.conclusion = conclusion;
  const std::string clean = sanitize_utf8(text);
  auto physical = split_physical_lines(clean);
  if (physical.empty()) {
    throw ValidationError("document " + doc.key() + " is empty; documents must be non-empty");
  }
  doc.lines.reserve(physical.size());
  for (std::size_t i = 0; i < physical.size(); ++i) {
    auto norm = normalize_line(physical[i]);
    doc.lines.push_back(LogLine{i, std::move(norm.timestamp), std::move(norm.content),
                                std::move(physical[i])});
  }
  return doc;
}

LogDocument load_local(const std::filesystem::path& path, std::string repo,
                       std::string run_id, Conclusion conclusion) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read log file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string bytes = buf.str();
  if (bytes.empty()) {
    throw ValidationError("log file is empty: " + path.string() +
                          " (document must be non-empty)");
  }
  return document_from_text(bytes, std::move(repo), std::move(run_id), conclusion);
}

void write_jsonl(std::ostream& out, const std::vector<LogDocument>& docs) {
  for (const auto& doc : docs) {
    for (const auto& line : doc.lines) {
      ordered_json j;
      j["repo"] = doc.repo;
      j["run_id"] = doc.run_id;
      j["line_index"] = line.index;
      j["timestamp"] = line.timestamp ? ordered_json(line.timestamp->text) : ordered_json(nullptr);
      j["content"] = line.content;
      j["raw"] = line.raw;
      j["conclusion"] = std::string(to_string(doc.conclusion));
      out << j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << '\n';
    }
  }
}

std::vector<LogDocument> read_jsonl(std::istream& in) {
  std::vector<LogDocument> docs;
  std::string row;
  std::size_t lineno = 0;
  while (std::getline(in, row)) {
    ++lineno;
    if (row.empty()) continue;
    ordered_json j;
    try {
      j = ordered_json::parse(row);
    } catch (const nlohmann::json::parse_error& e) {
      throw InputError("corpus line " + std::to_string(lineno) + ": " + e.what());
    }
    try {
      const auto repo = j.at("repo").get<std::string>();
      const auto run_id = j.at("run_id").get<std::string>();
      const auto index = j.at("line_index").get<std::size_t>();
      if (docs.empty() || docs.back().repo != repo || docs.back().run_id != run_id) {
        LogDocument doc;
        doc.repo = repo;
        doc.run_id = run_id;
        if (j.contains("conclusion")) {
          doc.conclusion = parse_conclusion(j["conclusion"].get<std::string>());
        }
        docs.push_back(std::move(doc));
      }
      auto& doc = docs.back();
      if (index != doc.lines.size()) {
        throw ValidationError("corpus line " + std::to_string(lineno) + ": line_index " +
                              std::to_string(index) + " out of order for " + doc.key());
      }
      LogLine line;
      line.index = index;
      if (!j.at("timestamp").is_null()) {
        line.timestamp = parse_timestamp(j["timestamp"].get<std::string>());
        if (!line.timestamp) {
          throw ValidationError("corpus line " + std::to_string(lineno) + ": bad timestamp");
        }
      }
      line.content = j.at("content").get<std::string>();
      line.raw = j.at("raw").get<std::string>();
      doc.lines.push_back(std::move(line));
    } catch (const nlohmann::json::exception& e) {
      throw InputError("corpus line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return docs;
}

void save_corpus(const std::filesystem::path& path, const std::vector<LogDocument>& docs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write corpus: " + path.string());
  write_jsonl(out, docs);
}

std::vector<LogDocument> load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read corpus: " + path.string());
  return read_jsonl(in);
}

std::string document_text(const LogDocument& doc) {
  std::string text;
  for (std::size_t i = 0; i < doc.lines.size(); ++i) {
    if (i) text.push_back('\n');
    text += doc.lines[i].content;
  }
  return text;
}

}  // namespace logsieve::corpus
