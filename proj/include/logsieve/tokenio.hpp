#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "logsieve/corpus.hpp"

namespace logsieve::tokenio {

enum class TokenizerMode { kBpe, kHeuristic };

std::string_view to_string(TokenizerMode mode);
TokenizerMode parse_mode(std::string_view text);

struct TokenizerConfig {
  TokenizerMode mode = TokenizerMode::kHeuristic;
  std::optional<std::filesystem::path> merges_path;  // required for kBpe
  std::size_t separator_tokens_per_line = 1;
};

/// Byte-level BPE merge table (GPT-2 style `merges.txt`, rank = line order).
class BpeMerges {
 public:
  static BpeMerges load(const std::filesystem::path& path);
  static BpeMerges parse(std::string_view text);

  /// Rank of merging `left` followed by `right`; nullopt if not a merge.
  std::optional<std::size_t> rank(std::string_view left, std::string_view right) const;
  std::size_t size() const { return ranks_.size(); }

 private:
  std::unordered_map<std::string, std::size_t> ranks_;
};

/// Splits text the way GPT-2's byte-level pre-tokenizer does. Any non-ASCII
/// code point is treated as a letter.
std::vector<std::string_view> pretokenize(std::string_view text);

/// Maps each byte to its printable stand-in (the GPT-2 bytes-to-unicode table).
std::string byte_symbol(unsigned char byte);

/// Pure counting function over a fixed configuration. Immutable after
/// construction, so one instance can be shared across threads.
class Tokenizer {
 public:
  static Tokenizer heuristic(std::size_t separator_tokens_per_line = 1);
  static Tokenizer bpe(BpeMerges merges, std::size_t separator_tokens_per_line = 1);
  /// Throws InputError when bpe mode cannot load its merges file.
  static Tokenizer from_config(const TokenizerConfig& cfg);

  TokenizerMode mode() const { return mode_; }
  std::size_t separator_tokens_per_line() const { return separator_; }

  std::size_t count(std::string_view text) const;

  /// Subword pieces for one pre-token (bpe mode only); exposed for tests.
  std::vector<std::string> encode_word(std::string_view word) const;

 private:
  Tokenizer(TokenizerMode mode, std::shared_ptr<const BpeMerges> merges, std::size_t sep)
      : mode_(mode), merges_(std::move(merges)), separator_(sep) {}

  TokenizerMode mode_;
  std::shared_ptr<const BpeMerges> merges_;
  std::size_t separator_;
};

std::size_t count_heuristic(std::string_view text);

inline std::size_t count_tokens(std::string_view text, const Tokenizer& tok) {
  return tok.count(text);
}

struct DocumentTokens {
  std::vector<std::size_t> per_line;
  std::size_t total = 0;
};

/// per_line[i] = count(lines[i].content) + separator charge.
DocumentTokens count_document_tokens(const corpus::LogDocument& doc, const Tokenizer& tok);

/// Sum of per-line counts over a subset of line indices.
std::size_t count_kept_tokens(const DocumentTokens& counts, std::span<const std::size_t> kept);

}  // namespace logsieve::tokenio
