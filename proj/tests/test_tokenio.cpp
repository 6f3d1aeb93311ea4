#include <doctest.h>

#include <fstream>

#include <json.hpp>

#include "logsieve/error.hpp"
#include "logsieve/tokenio.hpp"
#include "support/tmpdir.hpp"

using namespace logsieve;
using namespace logsieve::tokenio;

namespace {

std::filesystem::path bpe_dir() { return std::filesystem::path(LOGSIEVE_TEST_DATA) / "bpe"; }

}  // namespace

TEST_CASE("heuristic counts") {
  CHECK(count_heuristic("") == 0);
  CHECK(count_heuristic("a b c") == 3);
  CHECK(count_heuristic("foo.bar(1)") == 6);
  CHECK(count_heuristic("   ") == 0);
  CHECK(count_heuristic("café") == 1);
}

TEST_CASE("heuristic monotonicity under concatenation") {
  const char* parts[] = {"", "a", "ab", "a.", ".b", " x ", "x1-y2", "!!", "e: f"};
  for (const auto* a : parts) {
    for (const auto* b : parts) {
      const auto ab = count_heuristic(std::string(a) + b);
      CHECK(ab >= std::max(count_heuristic(a), count_heuristic(b)));
    }
  }
}

TEST_CASE("BPE counts match the reference encoder on the frozen sample set") {
  const auto tok = Tokenizer::bpe(BpeMerges::load(bpe_dir() / "merges.txt"));
  std::ifstream in(bpe_dir() / "counts.json");
  const auto samples = nlohmann::json::parse(in);
  REQUIRE(samples.size() > 200);
  std::size_t mismatches = 0;
  for (const auto& s : samples) {
    const auto text = s.at("text").get<std::string>();
    const auto expected = s.at("count").get<std::size_t>();
    if (tok.count(text) != expected) {
      ++mismatches;
      MESSAGE("mismatch on [" << text << "]: got " << tok.count(text) << " expected " << expected);
    }
  }
  CHECK(mismatches == 0);
}

TEST_CASE("GPT-2 style pre-tokenization") {
  const auto pieces = pretokenize("it's  a test\t!!");
  const std::vector<std::string> got(pieces.begin(), pieces.end());
  const std::vector<std::string> want{"it", "'s", " ", " a", " test", "\t", "!!"};
  CHECK(got == want);
}

TEST_CASE("byte symbols follow the GPT-2 table") {
  CHECK(byte_symbol(' ') == "\xC4\xA0");  // U+0120
  CHECK(byte_symbol('a') == "a");
  CHECK(byte_symbol('\n') == "\xC4\x8A");  // U+010A
}

TEST_CASE("bpe mode needs a readable merges file") {
  TokenizerConfig cfg;
  cfg.mode = TokenizerMode::kBpe;
  CHECK_THROWS_AS(Tokenizer::from_config(cfg), ValidationError);
  cfg.merges_path = "/nonexistent/merges.txt";
  CHECK_THROWS_AS(Tokenizer::from_config(cfg), InputError);
  CHECK_THROWS_AS(BpeMerges::parse("a b c\n"), InputError);
}

TEST_CASE("document counts charge the separator per line") {
  const auto doc = corpus::document_from_text("ab\ncd\n", "o/r", "1");
  const auto with_sep = count_document_tokens(doc, Tokenizer::heuristic(1));
  CHECK(with_sep.per_line == std::vector<std::size_t>{2, 2});
  CHECK(with_sep.total == 4);
  const auto no_sep = count_document_tokens(doc, Tokenizer::heuristic(0));
  CHECK(no_sep.per_line == std::vector<std::size_t>{1, 1});
  CHECK(no_sep.total == 2);

  const auto blank = corpus::document_from_text("\n", "o/r", "2");
  CHECK(count_document_tokens(blank, Tokenizer::heuristic(1)).per_line == std::vector<std::size_t>{1});
}

TEST_CASE("kept-token count is the sum over kept lines") {
  const auto doc = corpus::document_from_text("a b\nc\nd e f\n", "o/r", "1");
  const auto counts = count_document_tokens(doc, Tokenizer::heuristic(1));
  const std::vector<std::size_t> kept{0, 2};
  CHECK(count_kept_tokens(counts, kept) == counts.per_line[0] + counts.per_line[2]);
  const std::vector<std::size_t> bad{5};
  CHECK_THROWS_AS(count_kept_tokens(counts, bad), ValidationError);
}
