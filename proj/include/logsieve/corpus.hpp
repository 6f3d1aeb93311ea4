#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace logsieve::corpus {

/// GitHub Actions line prefix, e.g. `2025-05-01T04:19:28.9669135Z`.
/// The original spelling is kept so serialization is lossless.
struct Timestamp {
  std::string text;
  std::chrono::sys_time<std::chrono::nanoseconds> instant;

  friend bool operator==(const Timestamp& a, const Timestamp& b) {
    return a.text == b.text;
  }
};

struct LogLine {
  std::size_t index = 0;
  std::optional<Timestamp> timestamp;
  std::string content;
  std::string raw;

  friend bool operator==(const LogLine&, const LogLine&) = default;
};

enum class Conclusion { kFailure, kSuccess, kCancelled, kSkipped };

std::string_view to_string(Conclusion c);
Conclusion parse_conclusion(std::string_view text);

struct LogDocument {
  std::string repo;
  std::string run_id;
  Conclusion conclusion = Conclusion::kFailure;
  std::vector<LogLine> lines;

  /// Stable identifier "repo#run_id".
  std::string key() const;

  friend bool operator==(const LogDocument&, const LogDocument&) = default;
};

struct NormalizedLine {
  std::optional<Timestamp> timestamp;
  std::string content;
};

/// Strips a column-0 ISO-8601 UTC prefix (plus one space), terminal escape
/// sequences and a trailing carriage return. Total; never throws.
NormalizedLine normalize_line(std::string_view raw);

/// Parses `YYYY-MM-DDTHH:MM:SS[.f{1,7}]Z`. Returns nullopt on any deviation.
std::optional<Timestamp> parse_timestamp(std::string_view text);

/// Replaces invalid UTF-8 sequences with U+FFFD.
std::string sanitize_utf8(std::string_view bytes);

/// Splits text into physical lines: '\n' terminates a line; a final
/// unterminated fragment is a line too. Blank lines are kept.
std::vector<std::string> split_physical_lines(std::string_view text);

/// Builds a document from in-memory text using load_local semantics.
LogDocument document_from_text(std::string_view text, std::string repo,
                               std::string run_id,
                               Conclusion conclusion = Conclusion::kFailure);

/// Reads a local log file. Throws InputError for missing files and
/// ValidationError for empty ones.
LogDocument load_local(const std::filesystem::path& path, std::string repo,
                       std::string run_id,
                       Conclusion conclusion = Conclusion::kFailure);

// Canonical corpus format: JSON Lines, one object per LogLine.

void write_jsonl(std::ostream& out, const std::vector<LogDocument>& docs);
std::vector<LogDocument> read_jsonl(std::istream& in);

void save_corpus(const std::filesystem::path& path,
                 const std::vector<LogDocument>& docs);
std::vector<LogDocument> load_corpus(const std::filesystem::path& path);

/// Text of a document (contents joined by '\n').
std::string document_text(const LogDocument& doc);

}  // namespace logsieve::corpus
