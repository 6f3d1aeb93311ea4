#pragma once

// Seeded synthetic CI-log generator. Relevant lines carry failure vocabulary,
// irrelevant lines come from build boilerplate templates.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "logsieve/annotation.hpp"
#include "logsieve/corpus.hpp"

namespace synth {

struct LabeledLines {
  std::vector<std::string> lines;
  std::vector<logsieve::annotation::Label> labels;
};

class Generator {
 public:
  explicit Generator(std::uint64_t seed) : rng_(seed) {}

  std::size_t pick(std::size_t n) { return static_cast<std::size_t>(rng_() % n); }
  template <typename T>
  const T& any(const std::vector<T>& v) { return v[pick(v.size())]; }

  std::string ident() {
    static const std::vector<std::string> parts{"user", "repo", "main", "view", "model", "cache",
                                                "sync", "player", "store", "note", "item", "list"};
    return any(parts) + any(parts) + (pick(2) ? "Impl" : "");
  }
  std::string task() {
    static const std::vector<std::string> tasks{"compileDebugKotlin", "mergeDebugResources", "lintDebug",
                                                "testDebugUnitTest", "assembleRelease", "kaptDebugKotlin",
                                                "processDebugManifest", "dexBuilderDebug"};
    return any(tasks);
  }
  std::string path() {
    return fmt::format("/home/runner/work/app/app/src/main/java/com/example/{}/{}.kt", ident(), ident());
  }
  std::string version() { return fmt::format("{}.{}.{}", pick(9), pick(20), pick(10)); }

  std::string relevant() {
    switch (pick(8)) {
      case 0: return fmt::format("e: {}: ({}, {}): Unresolved reference: {}", path(), pick(300) + 1, pick(80) + 1, ident());
      case 1: return fmt::format("> Task :app:{} FAILED", task());
      case 2: return fmt::format("Exception in thread \"main\" java.lang.{}Exception: {} failed", any(std::vector<std::string>{"NullPointer", "IllegalState", "IllegalArgument", "Runtime"}), ident());
      case 3: return fmt::format("FAILURE: Build failed with an exception while executing {}", task());
      case 4: return fmt::format("##[error]Process completed with exit code {}.", pick(3) + 1);
      case 5: return fmt::format("error: cannot find symbol {} in class {}", ident(), ident());
      case 6: return fmt::format("Caused by: org.gradle.api.GradleException: Compilation error. See log for details ({})", ident());
      default: return fmt::format("    at com.example.{}.{}({}.kt:{}) error trace", ident(), ident(), ident(), pick(500));
    }
  }

  std::string irrelevant() {
    switch (pick(8)) {
      case 0: return fmt::format("Downloading https://repo.maven.apache.org/maven2/androidx/{}/{}/{}.pom", ident(), version(), ident());
      case 1: return fmt::format("> Task :app:{} UP-TO-DATE", task());
      case 2: return fmt::format("Resolving dependencies for configuration {} ({} of {})", ident(), pick(50), pick(50) + 50);
      case 3: return fmt::format("Downloaded https://dl.google.com/dl/android/maven2/com/{}/{}-{}.jar ({} kB at {} kB/s)", ident(), ident(), version(), pick(900), pick(9000));
      case 4: return fmt::format("[command]/usr/bin/git config --local --unset-all http.https://github.com/.extraheader {}", pick(100));
      case 5: return fmt::format("Unpacking {} into cache directory /home/runner/.gradle/caches/{}", ident(), version());
      case 6: return fmt::format("Starting Gradle Daemon with JVM args -Xmx{}m for {}", 1024 * (pick(4) + 1), ident());
      default: return fmt::format("Setting up {} version {} from tool cache", ident(), version());
    }
  }

  /// `n` lines, exactly half relevant, in shuffled order.
  LabeledLines lines(std::size_t n) {
    LabeledLines out;
    std::vector<int> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i < n / 2 ? 1 : 0;
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[pick(i)]);
    for (const int rel : order) {
      out.lines.push_back(rel ? relevant() : irrelevant());
      out.labels.push_back(rel ? logsieve::annotation::Label::kRelevant
                               : logsieve::annotation::Label::kIrrelevant);
    }
    return out;
  }

  /// A document with roughly `relevant_share` relevant lines, and its labels CSV rows.
  logsieve::corpus::LogDocument document(const std::string& repo, const std::string& run,
                                         std::size_t n, double relevant_share,
                                         std::vector<std::pair<std::size_t, int>>* labels = nullptr) {
    std::string text;
    for (std::size_t i = 0; i < n; ++i) {
      const bool rel = static_cast<double>(pick(1000)) < relevant_share * 1000.0;
      text += fmt::format("2025-05-01T04:19:{:02}.{:07}Z {}\n", i % 60, pick(10000000), rel ? relevant() : irrelevant());
      if (labels) labels->emplace_back(i, rel ? 1 : 0);
    }
    return logsieve::corpus::document_from_text(text, repo, run);
  }

 private:
  std::mt19937_64 rng_;
};

}  // namespace synth
