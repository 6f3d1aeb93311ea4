#include "logsieve/github.hpp"

#include <algorithm>

#include <httplib.h>

#include "logsieve/error.hpp"

namespace logsieve::corpus {
namespace {

struct UrlParts {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

UrlParts split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ExternalError("malformed URL: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

std::string describe_logs_http_error(int status) {
  switch (status) {
    case 401:
    case 403:
      return "HTTP " + std::to_string(status) +
             ": authentication failed; set " + std::string(kGithubTokenEnv) +
             " to a token with actions:read scope for this repository";
    case 404:
      return "HTTP 404: run logs not found; GitHub keeps workflow logs for 90 days "
             "(90-day retention policy), so the run has likely expired or the "
             "repository/run id is wrong";
    case 410:
      return "HTTP 410: logs for this run were deleted; they cannot be recovered";
    default:
      return "HTTP " + std::to_string(status) + ": unexpected response from the logs endpoint";
  }
}

LogDocument document_from_archive(const std::vector<zip::Entry>& entries,
                                  std::string repo, std::string run_id) {
  std::vector<const zip::Entry*> files;
  const bool nested = std::any_of(entries.begin(), entries.end(), [](const zip::Entry& e) {
    return e.name.find('/') != std::string::npos;
  });
  for (const auto& e : entries) {
    if (nested && e.name.find('/') == std::string::npos) continue;
    files.push_back(&e);
  }
  std::sort(files.begin(), files.end(),
            [](const zip::Entry* a, const zip::Entry* b) { return a->name < b->name; });

  std::string text;
  for (const auto* f : files) {
    if (f->data.empty()) continue;
    text += f->data;
    if (text.back() != '\n') text.push_back('\n');
  }
  if (text.empty()) {
    throw ValidationError("run-log archive for " + repo + "#" + run_id +
                          " contains no log lines; document must be non-empty");
  }
  return document_from_text(text, std::move(repo), std::move(run_id));
}

LogDocument fetch_run_logs(const std::string& repo, const std::string& run_id,
                           const std::string& auth_token, const GithubOptions& options) {
  const auto slash = repo.find('/');
  if (slash == std::string::npos || slash == 0 || slash + 1 == repo.size()) {
    throw ValidationError("repository must be given as owner/name, got '" + repo + "'");
  }
  const auto api = split_url(options.api_base);
  std::string path = api.path == "/" ? "" : api.path;
  path += "/repos/" + repo + "/actions/runs/" + run_id + "/logs";

  httplib::Client client(api.origin);
  client.set_connection_timeout(options.timeout_seconds, 0);
  client.set_read_timeout(options.timeout_seconds, 0);
  client.set_follow_location(false);
  httplib::Headers headers{{"Accept", "application/vnd.github+json"},
                           {"User-Agent", "logsieve"},
                           {"X-GitHub-Api-Version", "2022-11-28"}};
  if (!auth_token.empty()) headers.emplace("Authorization", "Bearer " + auth_token);

  auto res = client.Get(path, headers);
  if (!res) {
    throw ExternalError("cannot reach " + options.api_base + ": " + httplib::to_string(res.error()));
  }
  // The API answers with a redirect to short-lived blob storage; the signed
  // URL must be fetched without the API token.
  for (int hops = 0; hops < 5 && res->status >= 300 && res->status < 400; ++hops) {
    const auto location = res->get_header_value("Location");
    if (location.empty()) throw ExternalError("redirect without Location header");
    const auto target = location.rfind("http", 0) == 0 ? split_url(location)
                                                       : UrlParts{api.origin, location};
    httplib::Client blob(target.origin);
    blob.set_connection_timeout(options.timeout_seconds, 0);
    blob.set_read_timeout(options.timeout_seconds, 0);
    res = blob.Get(target.path, httplib::Headers{{"User-Agent", "logsieve"}});
    if (!res) {
      throw ExternalError("cannot download log archive: " + httplib::to_string(res.error()));
    }
  }
  if (res->status != 200) throw ExternalError(describe_logs_http_error(res->status));

  return document_from_archive(zip::read_archive(res->body), repo, run_id);
}

}  // namespace logsieve::corpus
