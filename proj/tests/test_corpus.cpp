#include <doctest.h>

#include <cstdlib>
#include <sstream>

#include "logsieve/corpus.hpp"
#include "logsieve/error.hpp"
#include "logsieve/github.hpp"
#include "logsieve/zip.hpp"
#include "support/stub_server.hpp"
#include "support/tmpdir.hpp"

using namespace logsieve;
using namespace logsieve::corpus;

namespace {

// Line counter written against the POSIX definition (newline-terminated
// lines, plus an unterminated tail).
std::size_t physical_line_count(std::string_view text) {
  std::size_t n = 0;
  for (const char c : text) n += c == '\n';
  if (!text.empty() && text.back() != '\n') ++n;
  return n;
}

}  // namespace

TEST_CASE("normalize_line strips the column-0 timestamp") {
  const auto n = normalize_line("2025-05-01T04:19:29.6442057Z Loading package information...");
  REQUIRE(n.timestamp);
  CHECK(n.timestamp->text == "2025-05-01T04:19:29.6442057Z");
  CHECK(n.content == "Loading package information...");

  const auto cmd = normalize_line("2025-05-01T04:19:28.9669135Z [command]/usr/local/lib/android/sdk/tools");
  CHECK(cmd.content == "[command]/usr/local/lib/android/sdk/tools");
}

TEST_CASE("normalize_line leaves plain text and mid-line timestamps alone") {
  CHECK_FALSE(normalize_line("plain text no timestamp").timestamp);
  CHECK(normalize_line("plain text no timestamp").content == "plain text no timestamp");
  const std::string mid = "at 2025-05-01T04:19:29Z the build stopped";
  CHECK(normalize_line(mid).content == mid);
}

TEST_CASE("normalize_line removes escapes and a trailing CR") {
  CHECK(normalize_line("\x1b[31mFAILED\x1b[0m tests").content == "FAILED tests");
  CHECK(normalize_line("line\r").content == "line");
  CHECK(normalize_line("\x1b[1;32mok\x1b[K").content == "ok");
}

TEST_CASE("normalize_line is idempotent") {
  const char* samples[] = {
      "2025-05-01T04:19:29Z 2025-05-01T04:19:30Z nested",
      "\x1b[3\x1b[1mm odd escape",
      "2025-05-01T04:19:29.1234567Z \x1b[31m2025-05-01T04:19:29Z x\r\r",
      "",
      "2025-05-01T04:19:29Z",
  };
  for (const auto* s : samples) {
    const auto once = normalize_line(s).content;
    CHECK(normalize_line(once).content == once);
  }
}

TEST_CASE("parse_timestamp accepts up to seven fraction digits") {
  CHECK(parse_timestamp("2025-05-01T04:19:29Z"));
  CHECK(parse_timestamp("2025-05-01T04:19:29.1234567Z"));
  CHECK_FALSE(parse_timestamp("2025-05-01T04:19:29.12345678Z"));
  CHECK_FALSE(parse_timestamp("2025-13-01T04:19:29Z"));
  CHECK_FALSE(parse_timestamp("2025-05-01 04:19:29Z"));
  const auto a = parse_timestamp("2025-05-01T00:00:01.5Z");
  const auto b = parse_timestamp("2025-05-01T00:00:00Z");
  REQUIRE(a);
  REQUIRE(b);
  CHECK((a->instant - b->instant).count() == 1'500'000'000);
}

TEST_CASE("invalid UTF-8 is replaced, never fatal") {
  const std::string bad = std::string("ok ") + '\xff' + " end";
  const auto doc = document_from_text(bad + "\n", "o/r", "1");
  CHECK(doc.lines[0].content == "ok \xEF\xBF\xBD end");
}

TEST_CASE("load_local keeps blank lines and indexes in file order") {
  testsupport::TempDir dir;
  const std::string text = "first\n\n  \nlast";
  testsupport::write_text(dir / "a.log", text);
  const auto doc = load_local(dir / "a.log", "o/r", "7");
  REQUIRE(doc.lines.size() == physical_line_count(text));
  for (std::size_t i = 0; i < doc.lines.size(); ++i) CHECK(doc.lines[i].index == i);
  CHECK(doc.lines[1].content.empty());
  CHECK(doc.lines[2].content == "  ");

  testsupport::write_text(dir / "blank.log", "\n");
  const auto blank = load_local(dir / "blank.log", "o/r", "8");
  REQUIRE(blank.lines.size() == 1);
  CHECK(blank.lines[0].content.empty());
}

TEST_CASE("load_local errors") {
  testsupport::TempDir dir;
  CHECK_THROWS_AS(load_local(dir / "missing.log", "o/r", "1"), InputError);
  testsupport::write_text(dir / "empty.log", "");
  CHECK_THROWS_AS(load_local(dir / "empty.log", "o/r", "1"), ValidationError);
}

TEST_CASE("corpus JSONL round-trips every field") {
  auto a = document_from_text("2025-05-01T04:19:29.6442057Z hello\r\n\x1b[31mred\x1b[0m\n\n", "o/r", "11",
                              Conclusion::kFailure);
  auto b = document_from_text("x", "p/q", "12", Conclusion::kCancelled);
  std::stringstream ss;
  write_jsonl(ss, {a, b});
  const auto back = read_jsonl(ss);
  REQUIRE(back.size() == 2);
  CHECK(back[0] == a);
  CHECK(back[1] == b);
  CHECK(back[0].lines[0].raw == "2025-05-01T04:19:29.6442057Z hello\r");
}

TEST_CASE("read_jsonl rejects gaps in line indices") {
  std::stringstream ss;
  ss << R"({"repo":"o/r","run_id":"1","line_index":0,"timestamp":null,"content":"a","raw":"a"})" << "\n"
     << R"({"repo":"o/r","run_id":"1","line_index":2,"timestamp":null,"content":"b","raw":"b"})" << "\n";
  CHECK_THROWS_AS(read_jsonl(ss), ValidationError);
}

TEST_CASE("zip archive: step files concatenated in entry-name order") {
  const auto bytes = testsupport::read_text(std::filesystem::path(LOGSIEVE_TEST_DATA) / "run_logs_deflate.zip");
  const auto entries = zip::read_archive(bytes);
  const auto doc = document_from_archive(entries, "o/r", "99");
  REQUIRE(doc.lines.size() == 10);
  CHECK(doc.lines[0].content == "step1 line 0");
  CHECK(doc.lines[4].content == "step1 line 4");
  CHECK(doc.lines[5].content == "step2 line 0");
  CHECK(doc.lines[9].content == "step2 line 4");
}

TEST_CASE("zip archive: stored round trip and CRC check") {
  const std::vector<zip::Entry> in{{"a.txt", "alpha\n"}, {"b.txt", "beta\n"}};
  auto bytes = zip::write_stored_archive(in);
  const auto out = zip::read_archive(bytes);
  REQUIRE(out.size() == 2);
  CHECK(out[1].data == "beta\n");
  bytes[bytes.find("alpha")] = 'A';
  CHECK_THROWS_AS(zip::read_archive(bytes), InputError);
  CHECK_THROWS_AS(zip::read_archive("not a zip"), InputError);
}

TEST_CASE("empty archive is rejected") {
  CHECK_THROWS_AS(document_from_archive({}, "o/r", "1"), ValidationError);
}

TEST_CASE("fetch_run_logs follows the redirect and maps HTTP failures") {
  testsupport::StubServer stub;
  const std::string archive = zip::write_stored_archive(
      {{"job/1_a.txt", "one\ntwo\n"}, {"job/2_b.txt", "three\n"}, {"job.txt", "rollup\n"}});
  std::string seen_auth;
  stub.server().Get("/repos/o/r/actions/runs/1/logs", [&](const httplib::Request& req, httplib::Response& res) {
    seen_auth = req.get_header_value("Authorization");
    res.set_redirect("/blob/1.zip", 302);
  });
  stub.server().Get("/blob/1.zip", [&](const httplib::Request& req, httplib::Response& res) {
    CHECK(req.get_header_value("Authorization").empty());
    res.set_content(archive, "application/zip");
  });
  for (const int status : {401, 404, 410}) {
    stub.server().Get("/repos/o/r/actions/runs/" + std::to_string(status) + "/logs",
                      [status](const httplib::Request&, httplib::Response& res) { res.status = status; });
  }
  stub.start();
  GithubOptions opt;
  opt.api_base = stub.base();

  const auto doc = fetch_run_logs("o/r", "1", "tok", opt);
  CHECK(seen_auth == "Bearer tok");
  REQUIRE(doc.lines.size() == 3);
  CHECK(doc.lines[2].content == "three");

  try {
    fetch_run_logs("o/r", "404", "tok", opt);
    FAIL("expected an error");
  } catch (const ExternalError& e) {
    CHECK(std::string(e.what()).find("90-day retention") != std::string::npos);
    CHECK(e.exit_code() == 4);
  }
  CHECK_THROWS_WITH_AS(fetch_run_logs("o/r", "401", "tok", opt), doctest::Contains("401"), ExternalError);
  CHECK_THROWS_WITH_AS(fetch_run_logs("o/r", "410", "tok", opt), doctest::Contains("deleted"), ExternalError);
}
