#include <doctest.h>

#include <cstdlib>
#include <thread>

#include "logsieve/error.hpp"
#include "logsieve/llm.hpp"
#include "support/stub_server.hpp"
#include "support/tmpdir.hpp"

using namespace logsieve;
using namespace logsieve::llm;

namespace {

JudgeEndpoint endpoint_for(const std::string& base_url) {
  JudgeEndpoint e;
  e.base_url = base_url;
  e.model = "stub-model";
  e.api_key_env = "LOGSIEVE_TEST_LLM_KEY";
  e.timeout_seconds = 5;
  e.max_retries = 3;
  e.initial_backoff = std::chrono::milliseconds(100);
  return e;
}

struct SleepLog {
  std::vector<long> waits;
  LlmClient::Sleeper sleeper() {
    return [this](std::chrono::milliseconds d) { waits.push_back(static_cast<long>(d.count())); };
  }
};

FailureReason failure(const std::function<void()>& f) {
  try {
    f();
  } catch (const LlmError& e) {
    return e.reason();
  }
  FAIL("expected an LlmError");
  return FailureReason::kTransport;
}

}  // namespace

TEST_CASE("live client retries transient statuses with exponential backoff") {
  testsupport::ChatStub stub([](const std::string& p) { return "echo:" + p; });
  stub.script({503, 429});
  ::setenv("LOGSIEVE_TEST_LLM_KEY", "sk-test", 1);
  LlmClient client(ClientMode::kLive, endpoint_for(stub.base_url()), nullptr, "stub-model");
  SleepLog log;
  client.set_sleeper(log.sleeper());
  CHECK(client.complete("hi") == "echo:hi");
  CHECK(stub.requests() == 3);
  CHECK(log.waits == std::vector<long>{100, 200});
  CHECK(stub.last_auth() == "Bearer sk-test");
  ::unsetenv("LOGSIEVE_TEST_LLM_KEY");
}

TEST_CASE("retries give up after max_retries") {
  testsupport::ChatStub stub([](const std::string&) { return "never"; });
  stub.script({500, 500, 500, 500, 500});
  LlmClient client(ClientMode::kLive, endpoint_for(stub.base_url()), nullptr, "stub-model");
  SleepLog log;
  client.set_sleeper(log.sleeper());
  CHECK(failure([&] { client.complete("x"); }) == FailureReason::kTransport);
  CHECK(stub.requests() == 4);
  CHECK(log.waits.size() == 3);

  stub.script({429, 429, 429, 429});
  CHECK(failure([&] { client.complete("x"); }) == FailureReason::kRateLimit);
}

TEST_CASE("auth and other HTTP failures are not retried") {
  testsupport::ChatStub stub([](const std::string&) { return "x"; });
  LlmClient client(ClientMode::kLive, endpoint_for(stub.base_url()), nullptr, "stub-model");
  client.set_sleeper([](std::chrono::milliseconds) {});
  stub.script({401});
  CHECK(failure([&] { client.complete("x"); }) == FailureReason::kAuth);
  stub.script({400});
  CHECK(failure([&] { client.complete("x"); }) == FailureReason::kHttp);
  CHECK(stub.requests() == 2);
}

TEST_CASE("unreachable endpoint is a transport error after the retries") {
  int port = 0;
  {
    testsupport::StubServer s;
    s.start();
    port = s.port();
  }
  LlmClient client(ClientMode::kLive, endpoint_for("http://127.0.0.1:" + std::to_string(port) + "/v1"),
                   nullptr, "stub-model");
  SleepLog log;
  client.set_sleeper(log.sleeper());
  CHECK(failure([&] { client.complete("x"); }) == FailureReason::kTransport);
  CHECK(client.network_calls() == 4);
}

TEST_CASE("slow endpoint is a timeout") {
  testsupport::ChatStub stub([](const std::string&) {
    std::this_thread::sleep_for(std::chrono::milliseconds(1500));
    return "late";
  });
  auto ep = endpoint_for(stub.base_url());
  ep.timeout_seconds = 1;
  ep.max_retries = 0;
  LlmClient client(ClientMode::kLive, ep, nullptr, "stub-model");
  CHECK(failure([&] { client.complete("x"); }) == FailureReason::kTimeout);
}

TEST_CASE("record then replay") {
  testsupport::TempDir dir;
  testsupport::ChatStub stub([](const std::string& p) { return "answer to " + p; });
  {
    ResponseArchive archive(dir / "archive.jsonl");
    LlmClient rec(ClientMode::kRecord, endpoint_for(stub.base_url()), &archive, "stub-model");
    CHECK(rec.complete("q1") == "answer to q1");
    CHECK(rec.complete("q1") == "answer to q1");
    CHECK(stub.requests() == 1);
    CHECK(archive.size() == 1);
  }
  ResponseArchive archive(dir / "archive.jsonl");
  CHECK(archive.size() == 1);
  LlmClient replay(ClientMode::kReplay, std::nullopt, &archive, "stub-model");
  CHECK(replay.complete("q1") == "answer to q1");
  CHECK(failure([&] { replay.complete("q2"); }) == FailureReason::kReplayMiss);
  LlmClient other_model(ClientMode::kReplay, std::nullopt, &archive, "other");
  CHECK(failure([&] { other_model.complete("q1"); }) == FailureReason::kReplayMiss);
  CHECK(replay.network_calls() == 0);
}

TEST_CASE("request hash is stable and model-sensitive") {
  CHECK(request_hash("m", "p") == request_hash("m", "p"));
  CHECK(request_hash("m", "p") != request_hash("n", "p"));
  CHECK(request_hash("m", "p").size() == 64);
  CHECK(chat_request("m", "p").at("temperature") == 0);
}

TEST_CASE("endpoint config never serializes key material") {
  const auto j = to_json(endpoint_for("http://x/v1"));
  CHECK(j.dump().find("sk-") == std::string::npos);
  CHECK(endpoint_from_json(j).base_url == "http://x/v1");
}

TEST_CASE("judge rating parser") {
  CHECK(parse_judge_rating("7") == 7.0);
  CHECK(parse_judge_rating(" 7.5 ") == 7.5);
  CHECK(parse_judge_rating("7/10") == 7.0);
  CHECK(parse_judge_rating("10") == 10.0);
  CHECK_FALSE(parse_judge_rating("eleven"));
  CHECK_FALSE(parse_judge_rating("11"));
  CHECK_FALSE(parse_judge_rating("-1"));
  CHECK_FALSE(parse_judge_rating(""));
}

TEST_CASE("judge scoring") {
  testsupport::ChatStub stub([](const std::string& p) {
    return std::string(p.find("identical-marker") != std::string::npos ? "10" : "eleven");
  });
  LlmClient client(ClientMode::kLive, endpoint_for(stub.base_url()), nullptr, "stub-model");
  client.set_sleeper([](std::chrono::milliseconds) {});
  CHECK(judge_score(client, "identical-marker", "identical-marker") == 1.0);
  const int before = stub.requests();
  CHECK(failure([&] { judge_score(client, "one", "two"); }) == FailureReason::kBadResponse);
  CHECK(stub.requests() - before == 2);
  CHECK_THROWS_AS(judge_score(client, "", "x"), ValidationError);
  CHECK(judge_prompt("a", "b").find(kRubricVersion) != std::string::npos);
}
