#include "logsieve/tokenio.hpp"

#include <fstream>
#include <limits>
#include <sstream>

#include "logsieve/error.hpp"

namespace logsieve::tokenio {
namespace {

enum class CharClass { kLetter, kDigit, kSpace, kOther };

bool is_space_byte(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

CharClass classify(unsigned char c) {
  if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80) return CharClass::kLetter;
  if (c >= '0' && c <= '9') return CharClass::kDigit;
  if (is_space_byte(c)) return CharClass::kSpace;
  return CharClass::kOther;
}

// Length in bytes of the UTF-8 sequence starting with `lead`.
std::size_t utf8_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead & 0xE0) == 0xC0) return 2;
  if ((lead & 0xF0) == 0xE0) return 3;
  if ((lead & 0xF8) == 0xF0) return 4;
  return 1;
}

// End of a run of characters of class `cls` starting at `i`.
std::size_t run_end(std::string_view s, std::size_t i, CharClass cls) {
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    if (classify(c) != cls) break;
    i += utf8_length(c);
  }
  return std::min(i, s.size());
}

std::size_t contraction_length(std::string_view rest) {
  for (std::string_view suffix : {"'re", "'ve", "'ll", "'s", "'t", "'m", "'d"}) {
    if (rest.substr(0, suffix.size()) == suffix) return suffix.size();
  }
  return 0;
}

std::string merge_key(std::string_view a, std::string_view b) {
  std::string key;
  key.reserve(a.size() + b.size() + 1);
  key.append(a);
  key.push_back(' ');
  key.append(b);
  return key;
}

}  // namespace

std::string_view to_string(TokenizerMode mode) {
  return mode == TokenizerMode::kBpe ? "bpe" : "heuristic";
}

TokenizerMode parse_mode(std::string_view text) {
  if (text == "bpe") return TokenizerMode::kBpe;
  if (text == "heuristic") return TokenizerMode::kHeuristic;
  throw ValidationError("unknown tokenizer mode '" + std::string(text) + "'");
}

std::string byte_symbol(unsigned char b) {
  // Printable bytes map to themselves; the rest are shifted to U+0100 onwards
  // in byte order, matching the GPT-2 table.
  std::uint32_t cp = b;
  const bool printable = (b >= 33 && b <= 126) || (b >= 161 && b <= 172) || b >= 174;
  if (!printable) {
    std::uint32_t n = 0;
    for (std::uint32_t x = 0; x < b; ++x) {
      const bool p = (x >= 33 && x <= 126) || (x >= 161 && x <= 172) || x >= 174;
      if (!p) ++n;
    }
    cp = 256 + n;
  }
  std::string out;
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
  return out;
}

BpeMerges BpeMerges::parse(std::string_view text) {
  BpeMerges m;
  std::size_t lineno = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(start, nl - start);
    start = nl + 1;
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.rfind("#version", 0) == 0) {
      if (nl == text.size()) break;
      continue;
    }
    const auto sp = line.find(' ');
    if (sp == std::string_view::npos || sp == 0 || sp + 1 == line.size() ||
        line.find(' ', sp + 1) != std::string_view::npos) {
      throw InputError("merges file line " + std::to_string(lineno) +
                       ": expected two space-separated symbols");
    }
    m.ranks_.try_emplace(merge_key(line.substr(0, sp), line.substr(sp + 1)), m.ranks_.size());
    if (nl == text.size()) break;
  }
  return m;
}

BpeMerges BpeMerges::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read BPE merges file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

std::optional<std::size_t> BpeMerges::rank(std::string_view left, std::string_view right) const {
  const auto it = ranks_.find(merge_key(left, right));
  if (it == ranks_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string_view> pretokenize(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    if (c == '\'') {
      if (auto n = contraction_length(s.substr(i)); n > 0) {
        out.push_back(s.substr(i, n));
        i += n;
        continue;
      }
    }
    std::size_t start = i;
    std::size_t body = i;
    if (c == ' ' && i + 1 < s.size() &&
        classify(static_cast<unsigned char>(s[i + 1])) != CharClass::kSpace) {
      body = i + 1;  // optional leading space joins the next token
    }
    const auto cls = classify(static_cast<unsigned char>(s[body]));
    if (cls != CharClass::kSpace) {
      const std::size_t end = run_end(s, body, cls);
      out.push_back(s.substr(start, end - start));
      i = end;
      continue;
    }
    const std::size_t end = run_end(s, i, CharClass::kSpace);
    if (end == s.size() || end - i == 1) {
      out.push_back(s.substr(i, end - i));
      i = end;
    } else {
      // Leave the last whitespace character for the following token.
      out.push_back(s.substr(i, end - 1 - i));
      i = end - 1;
    }
  }
  return out;
}

std::size_t count_heuristic(std::string_view text) {
  std::size_t count = 0;
  bool in_word = false;
  for (const char ch : text) {
    const auto cls = classify(static_cast<unsigned char>(ch));
    if (cls == CharClass::kLetter || cls == CharClass::kDigit) {
      if (!in_word) ++count;
      in_word = true;
    } else {
      in_word = false;
      if (cls == CharClass::kOther) ++count;
    }
  }
  return count;
}

Tokenizer Tokenizer::heuristic(std::size_t separator_tokens_per_line) {
  return Tokenizer(TokenizerMode::kHeuristic, nullptr, separator_tokens_per_line);
}

Tokenizer Tokenizer::bpe(BpeMerges merges, std::size_t separator_tokens_per_line) {
  return Tokenizer(TokenizerMode::kBpe, std::make_shared<const BpeMerges>(std::move(merges)),
                   separator_tokens_per_line);
}

Tokenizer Tokenizer::from_config(const TokenizerConfig& cfg) {
  if (cfg.mode == TokenizerMode::kHeuristic) return heuristic(cfg.separator_tokens_per_line);
  if (!cfg.merges_path) throw ValidationError("bpe tokenizer mode requires a merges file");
  return bpe(BpeMerges::load(*cfg.merges_path), cfg.separator_tokens_per_line);
}

std::vector<std::string> Tokenizer::encode_word(std::string_view word) const {
  std::vector<std::string> symbols;
  symbols.reserve(word.size());
  for (const char ch : word) symbols.push_back(byte_symbol(static_cast<unsigned char>(ch)));
  if (!merges_) return symbols;
  for (;;) {
    std::size_t best_rank = std::numeric_limits<std::size_t>::max();
    std::size_t best_at = symbols.size();
    for (std::size_t k = 0; k + 1 < symbols.size(); ++k) {
      if (auto r = merges_->rank(symbols[k], symbols[k + 1]); r && *r < best_rank) {
        best_rank = *r;
        best_at = k;
      }
    }
    if (best_at == symbols.size()) break;
    // Merge every occurrence of the winning pair, left to right.
    const std::string left = symbols[best_at];
    const std::string right = symbols[best_at + 1];
    std::vector<std::string> next;
    next.reserve(symbols.size());
    for (std::size_t k = 0; k < symbols.size();) {
      if (k + 1 < symbols.size() && symbols[k] == left && symbols[k + 1] == right) {
        next.push_back(left + right);
        k += 2;
      } else {
        next.push_back(std::move(symbols[k]));
        ++k;
      }
    }
    symbols = std::move(next);
  }
  return symbols;
}

std::size_t Tokenizer::count(std::string_view text) const {
  if (mode_ == TokenizerMode::kHeuristic) return count_heuristic(text);
  std::size_t total = 0;
  for (const auto word : pretokenize(text)) total += encode_word(word).size();
  return total;
}

DocumentTokens count_document_tokens(const corpus::LogDocument& doc, const Tokenizer& tok) {
  DocumentTokens out;
  out.per_line.reserve(doc.lines.size());
  for (const auto& line : doc.lines) {
    const std::size_t n = tok.count(line.content) + tok.separator_tokens_per_line();
    out.per_line.push_back(n);
    out.total += n;
  }
  return out;
}

std::size_t count_kept_tokens(const DocumentTokens& counts, std::span<const std::size_t> kept) {
  std::size_t total = 0;
  for (const auto i : kept) {
    if (i >= counts.per_line.size()) throw ValidationError("kept index out of range");
    total += counts.per_line[i];
  }
  return total;
}

}  // namespace logsieve::tokenio
