#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "logsieve/error.hpp"

namespace logsieve::llm {

/// OpenAI-compatible chat-completions endpoint. The API key is read from the
/// environment variable named here and never written anywhere.
struct JudgeEndpoint {
  std::string base_url;  // e.g. https://api.openai.com/v1
  std::string model = "gpt-4o";
  std::string api_key_env = "OPENAI_API_KEY";
  int timeout_seconds = 120;
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{1000};
};

JudgeEndpoint endpoint_from_json(const nlohmann::json& j);
JudgeEndpoint load_endpoint(const std::filesystem::path& path);
nlohmann::json to_json(const JudgeEndpoint& e);  // no key material

enum class FailureReason { kAuth, kTimeout, kRateLimit, kTransport, kHttp, kReplayMiss, kBadResponse };

std::string_view to_string(FailureReason r);

class LlmError : public ExternalError {
 public:
  LlmError(FailureReason reason, const std::string& what) : ExternalError(what), reason_(reason) {}
  FailureReason reason() const noexcept { return reason_; }

 private:
  FailureReason reason_;
};

struct ArchiveRecord {
  std::string request_hash;
  std::string prompt;
  std::string response;
  std::string model;
  std::string timestamp;
};

/// Append-only JSON Lines archive of prompt/response exchanges, keyed by
/// request hash. Writes are serialized by an internal mutex.
class ResponseArchive {
 public:
  /// Loads existing records if the file exists.
  explicit ResponseArchive(std::filesystem::path path);

  const ArchiveRecord* find(const std::string& request_hash) const;
  void append(ArchiveRecord record);
  std::size_t size() const;

 private:
  std::filesystem::path path_;
  mutable std::mutex mutex_;
  std::map<std::string, ArchiveRecord> records_;
};

/// Hash of the canonical request (model, temperature 0, single user message).
std::string request_hash(std::string_view model, std::string_view prompt);

/// Canonical request body sent to the endpoint.
nlohmann::json chat_request(std::string_view model, std::string_view prompt);

enum class ClientMode {
  kLive,    // endpoint only
  kReplay,  // archive only; a miss is an error
  kRecord,  // archive first, endpoint on a miss, response appended
};

class LlmClient {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  LlmClient(ClientMode mode, std::optional<JudgeEndpoint> endpoint, ResponseArchive* archive,
            std::string model);

  /// Replaces the backoff sleep (tests).
  void set_sleeper(Sleeper s) { sleeper_ = std::move(s); }

  /// Completion text for `prompt`; retries transient failures with
  /// exponential backoff, up to endpoint.max_retries extra attempts.
  std::string complete(std::string_view prompt);

  const std::string& model() const { return model_; }
  std::size_t network_calls() const { return network_calls_; }

 private:
  std::string call_endpoint(std::string_view prompt);

  ClientMode mode_;
  std::optional<JudgeEndpoint> endpoint_;
  ResponseArchive* archive_;
  std::string model_;
  Sleeper sleeper_;
  std::size_t network_calls_ = 0;
  std::mutex in_flight_;  // one request at a time per endpoint
};

inline constexpr std::string_view kRubricVersion = "semantic-equivalence-v1";

/// Judge prompt asking for a 0-10 semantic-equivalence rating.
std::string judge_prompt(std::string_view full_response, std::string_view reduced_response,
                         bool reprompt = false);

/// Parses "7", " 7.5 ", "7/10"; nullopt for anything else or values outside [0, 10].
std::optional<double> parse_judge_rating(std::string_view reply);

/// Rating / 10. One reprompt on an unparseable reply, then LlmError(kBadResponse).
double judge_score(LlmClient& client, std::string_view full_response,
                   std::string_view reduced_response);

}  // namespace logsieve::llm
