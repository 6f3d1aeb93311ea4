#include "logsieve/llm.hpp"

#include <cstdlib>
#include <ctime>
#include <fstream>
#include <thread>

#include <fmt/format.h>
#include <httplib.h>

#include "logsieve/hash.hpp"

namespace logsieve::llm {
namespace {

using nlohmann::json;

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  return fmt::format("{:04}-{:02}-{:02}T{:02}:{:02}:{:02}Z", tm.tm_year + 1900, tm.tm_mon + 1,
                     tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec);
}

struct Target {
  std::string origin;
  std::string path;
};

Target chat_target(const std::string& base_url) {
  const auto scheme = base_url.find("://");
  if (scheme == std::string::npos) {
    throw LlmError(FailureReason::kTransport, "malformed endpoint URL: " + base_url);
  }
  const auto slash = base_url.find('/', scheme + 3);
  Target t;
  t.origin = slash == std::string::npos ? base_url : base_url.substr(0, slash);
  std::string prefix = slash == std::string::npos ? "" : base_url.substr(slash);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  t.path = prefix + "/chat/completions";
  return t;
}

}  // namespace

std::string_view to_string(FailureReason r) {
  switch (r) {
    case FailureReason::kAuth: return "auth";
    case FailureReason::kTimeout: return "timeout";
    case FailureReason::kRateLimit: return "rate-limit";
    case FailureReason::kTransport: return "transport";
    case FailureReason::kHttp: return "http";
    case FailureReason::kReplayMiss: return "replay-miss";
    case FailureReason::kBadResponse: return "bad-response";
  }
  return "transport";
}

JudgeEndpoint endpoint_from_json(const json& j) {
  JudgeEndpoint e;
  try {
    e.base_url = j.at("base_url").get<std::string>();
    e.model = j.value("model", e.model);
    e.api_key_env = j.value("api_key_env", e.api_key_env);
    e.timeout_seconds = j.value("timeout_seconds", e.timeout_seconds);
    e.max_retries = j.value("max_retries", e.max_retries);
    e.initial_backoff = std::chrono::milliseconds(
        j.value("initial_backoff_ms", static_cast<long>(e.initial_backoff.count())));
  } catch (const json::exception& ex) {
    throw InputError(std::string("endpoint config: ") + ex.what());
  }
  if (e.max_retries < 0 || e.timeout_seconds <= 0) {
    throw ValidationError("endpoint config: timeout must be positive and max_retries >= 0");
  }
  return e;
}

JudgeEndpoint load_endpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read endpoint config: " + path.string());
  try {
    return endpoint_from_json(json::parse(in));
  } catch (const json::parse_error& ex) {
    throw InputError("endpoint config " + path.string() + ": " + ex.what());
  }
}

json to_json(const JudgeEndpoint& e) {
  return json{{"base_url", e.base_url},
              {"model", e.model},
              {"api_key_env", e.api_key_env},
              {"timeout_seconds", e.timeout_seconds},
              {"max_retries", e.max_retries},
              {"initial_backoff_ms", e.initial_backoff.count()},
              {"temperature", 0}};
}

// ---------------------------------------------------------------- archive

ResponseArchive::ResponseArchive(std::filesystem::path path) : path_(std::move(path)) {
  std::ifstream in(path_, std::ios::binary);
  if (!in) return;
  std::string row;
  std::size_t lineno = 0;
  while (std::getline(in, row)) {
    ++lineno;
    if (row.empty()) continue;
    try {
      const auto j = json::parse(row);
      ArchiveRecord r{j.at("request_hash").get<std::string>(), j.at("prompt").get<std::string>(),
                      j.at("response").get<std::string>(), j.at("model").get<std::string>(),
                      j.value("timestamp", "")};
      // First record wins so that replays stay stable if a hash repeats.
      records_.emplace(r.request_hash, std::move(r));
    } catch (const json::exception& e) {
      throw InputError("response archive line " + std::to_string(lineno) + ": " + e.what());
    }
  }
}

const ArchiveRecord* ResponseArchive::find(const std::string& request_hash) const {
  std::lock_guard lock(mutex_);
  const auto it = records_.find(request_hash);
  return it == records_.end() ? nullptr : &it->second;
}

void ResponseArchive::append(ArchiveRecord record) {
  std::lock_guard lock(mutex_);
  std::ofstream out(path_, std::ios::binary | std::ios::app);
  if (!out) throw InputError("cannot append to response archive: " + path_.string());
  const json j{{"request_hash", record.request_hash},
               {"prompt", record.prompt},
               {"response", record.response},
               {"model", record.model},
               {"timestamp", record.timestamp}};
  out << j.dump(-1, ' ', false, json::error_handler_t::replace) << '\n';
  records_.emplace(record.request_hash, std::move(record));
}

std::size_t ResponseArchive::size() const {
  std::lock_guard lock(mutex_);
  return records_.size();
}

json chat_request(std::string_view model, std::string_view prompt) {
  return json{{"model", model},
              {"temperature", 0},
              {"messages", json::array({json{{"role", "user"}, {"content", prompt}}})}};
}

std::string request_hash(std::string_view model, std::string_view prompt) {
  return sha256_hex(chat_request(model, prompt).dump(-1, ' ', false, json::error_handler_t::replace));
}

// ---------------------------------------------------------------- client

LlmClient::LlmClient(ClientMode mode, std::optional<JudgeEndpoint> endpoint,
                     ResponseArchive* archive, std::string model)
    : mode_(mode),
      endpoint_(std::move(endpoint)),
      archive_(archive),
      model_(std::move(model)),
      sleeper_([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }) {
  if (mode_ != ClientMode::kLive && !archive_) {
    throw ValidationError("replay/record mode needs a response archive");
  }
  if (mode_ != ClientMode::kReplay && !endpoint_) {
    throw ValidationError("live/record mode needs an endpoint configuration");
  }
  if (endpoint_ && model_.empty()) model_ = endpoint_->model;
}

std::string LlmClient::call_endpoint(std::string_view prompt) {
  std::lock_guard lock(in_flight_);
  const auto& ep = *endpoint_;
  const auto target = chat_target(ep.base_url);
  std::string key;
  if (const char* v = std::getenv(ep.api_key_env.c_str())) key = v;

  const std::string body =
      chat_request(model_, prompt).dump(-1, ' ', false, json::error_handler_t::replace);
  httplib::Headers headers{{"Content-Type", "application/json"}};
  if (!key.empty()) headers.emplace("Authorization", "Bearer " + key);

  FailureReason last_reason = FailureReason::kTransport;
  std::string last_message;
  auto backoff = ep.initial_backoff;
  for (int attempt = 0; attempt <= ep.max_retries; ++attempt) {
    if (attempt > 0) {
      sleeper_(backoff);
      backoff *= 2;
    }
    ++network_calls_;
    httplib::Client client(target.origin);
    client.set_connection_timeout(ep.timeout_seconds, 0);
    client.set_read_timeout(ep.timeout_seconds, 0);
    client.set_write_timeout(ep.timeout_seconds, 0);
    auto res = client.Post(target.path, headers, body, "application/json");
    if (!res) {
      const auto err = res.error();
      last_reason = (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read)
                        ? FailureReason::kTimeout
                        : FailureReason::kTransport;
      last_message = httplib::to_string(err);
      continue;
    }
    const int status = res->status;
    if (status == 401 || status == 403) {
      throw LlmError(FailureReason::kAuth,
                     fmt::format("endpoint rejected credentials (HTTP {}); check ${}", status,
                                 ep.api_key_env));
    }
    if (status == 429) {
      last_reason = FailureReason::kRateLimit;
      last_message = "HTTP 429 rate limited";
      continue;
    }
    if (status >= 500) {
      last_reason = FailureReason::kTransport;
      last_message = fmt::format("HTTP {}", status);
      continue;
    }
    if (status != 200) {
      throw LlmError(FailureReason::kHttp, fmt::format("endpoint returned HTTP {}", status));
    }
    try {
      const auto j = json::parse(res->body);
      return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
      throw LlmError(FailureReason::kBadResponse,
                     std::string("endpoint reply is not a chat completion: ") + e.what());
    }
  }
  throw LlmError(last_reason, fmt::format("{} error after {} retries: {}", to_string(last_reason),
                                          ep.max_retries, last_message));
}

std::string LlmClient::complete(std::string_view prompt) {
  const std::string hash = request_hash(model_, prompt);
  if (archive_) {
    if (const auto* hit = archive_->find(hash)) return hit->response;
    if (mode_ == ClientMode::kReplay) {
      throw LlmError(FailureReason::kReplayMiss,
                     "replay archive has no response for request " + hash.substr(0, 12) +
                         " (model " + model_ + ")");
    }
  }
  std::string response = call_endpoint(prompt);
  if (archive_) archive_->append({hash, std::string(prompt), response, model_, utc_now()});
  return response;
}

// ---------------------------------------------------------------- judge

std::string judge_prompt(std::string_view full_response, std::string_view reduced_response,
                         bool reprompt) {
  std::string p =
      "You are comparing two answers to the same question about why a CI workflow failed.\n"
      "Rate how semantically equivalent Response B is to Response A on an integer scale from 0 "
      "(unrelated or contradictory) to 10 (identical meaning). Responses with identical meaning "
      "must receive 10.\n"
      "Reply with the number only.\n"
      "Rubric version: ";
  p += kRubricVersion;
  p += "\n\nResponse A:\n<<<\n";
  p += full_response;
  p += "\n>>>\n\nResponse B:\n<<<\n";
  p += reduced_response;
  p += "\n>>>\n";
  if (reprompt) p += "\nYour previous reply could not be read. Answer with a single number from 0 to 10.\n";
  return p;
}

std::optional<double> parse_judge_rating(std::string_view reply) {
  auto trim = [](std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\n' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\n' || s.back() == '\t' || s.back() == '\r' || s.back() == '.')) s.remove_suffix(1);
    return s;
  };
  std::string_view s = trim(reply);
  if (s.size() > 3 && s.substr(s.size() - 3) == "/10") s = trim(s.substr(0, s.size() - 3));
  if (s.empty()) return std::nullopt;
  double value = 0.0;
  double scale = 0.0;
  bool digits = false;
  for (const char c : s) {
    if (c >= '0' && c <= '9') {
      digits = true;
      if (scale == 0.0) {
        value = value * 10 + (c - '0');
      } else {
        value += (c - '0') * scale;
        scale /= 10;
      }
    } else if (c == '.' && scale == 0.0) {
      scale = 0.1;
    } else {
      return std::nullopt;
    }
  }
  if (!digits || value < 0.0 || value > 10.0) return std::nullopt;
  return value;
}

double judge_score(LlmClient& client, std::string_view full_response,
                   std::string_view reduced_response) {
  if (full_response.empty() || reduced_response.empty()) {
    throw ValidationError("judge: both responses must be non-empty");
  }
  for (const bool reprompt : {false, true}) {
    const auto reply = client.complete(judge_prompt(full_response, reduced_response, reprompt));
    if (const auto rating = parse_judge_rating(reply)) return *rating / 10.0;
  }
  throw LlmError(FailureReason::kBadResponse, "judge reply is not a 0-10 rating after one reprompt");
}

}  // namespace logsieve::llm
