#pragma once

#include <string>
#include <string_view>

#include "logsieve/corpus.hpp"
#include "logsieve/zip.hpp"

namespace logsieve::corpus {

inline constexpr std::string_view kGithubTokenEnv = "LOGSIEVE_GITHUB_TOKEN";

struct GithubOptions {
  std::string api_base = "https://api.github.com";
  int timeout_seconds = 60;
};

/// Downloads `GET /repos/{owner}/{repo}/actions/runs/{run_id}/logs`, unpacks
/// the archive and returns the concatenated document. HTTP failures raise
/// ExternalError carrying the status code and a remediation hint.
LogDocument fetch_run_logs(const std::string& repo, const std::string& run_id,
                           const std::string& auth_token,
                           const GithubOptions& options = {});

/// Concatenates the step files of a run-log archive in lexicographic entry
/// order. When the archive holds per-step files inside job directories, the
/// per-job roll-up files at the archive root are skipped (they duplicate the
/// step files).
LogDocument document_from_archive(const std::vector<zip::Entry>& entries,
                                  std::string repo, std::string run_id);

/// Message for a non-200 status from the logs endpoint.
std::string describe_logs_http_error(int status);

}  // namespace logsieve::corpus
