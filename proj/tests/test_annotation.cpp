#include <doctest.h>

#include <random>
#include <sstream>

#include "logsieve/annotation.hpp"
#include "logsieve/error.hpp"
#include "support/oracles.hpp"

using namespace logsieve;
using namespace logsieve::annotation;

namespace {

std::vector<corpus::LogDocument> medito_like() {
  std::string text;
  for (int i = 0; i < 41; ++i) text += "line " + std::to_string(i) + "\n";
  return {corpus::document_from_text(text, "meditohq/medito", "5")};
}

std::vector<Label> labels(std::initializer_list<int> v) {
  std::vector<Label> out;
  for (const int x : v) out.push_back(label_from_int(x));
  return out;
}

}  // namespace

TEST_CASE("kappa hand-worked values") {
  CHECK(cohen_kappa(labels({1, 1, 0, 0}), labels({1, 0, 0, 0})) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(cohen_kappa(labels({1, 0}), labels({0, 1})) == -1.0);
  CHECK(cohen_kappa(labels({1, 0, 1, 1}), labels({1, 0, 1, 1})) == 1.0);
  const auto s = kappa_stats(labels({1, 1, 0, 0}), labels({1, 0, 0, 0}));
  CHECK(s.observed == 0.75);
  CHECK(s.expected == 0.5);
}

TEST_CASE("kappa degenerate cases") {
  const auto same = kappa_stats(labels({1, 1, 1}), labels({1, 1, 1}));
  CHECK(same.kappa == 1.0);
  CHECK(same.degenerate);
  const auto opposite = kappa_stats(labels({1, 1}), labels({0, 0}));
  CHECK(opposite.kappa == 0.0);
  CHECK(opposite.degenerate);
  CHECK_THROWS_AS(cohen_kappa(labels({1}), labels({1, 0})), ValidationError);
  CHECK_THROWS_AS(cohen_kappa(labels({}), labels({})), ValidationError);
}

TEST_CASE("kappa properties against the contingency-table oracle") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + rng() % 30;
    std::vector<int> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = static_cast<int>(rng() % 2);
      b[i] = static_cast<int>(rng() % 2);
    }
    std::vector<Label> la, lb, fa, fb;
    for (std::size_t i = 0; i < n; ++i) {
      la.push_back(label_from_int(a[i]));
      lb.push_back(label_from_int(b[i]));
      fa.push_back(label_from_int(1 - a[i]));
      fb.push_back(label_from_int(1 - b[i]));
    }
    const auto s = kappa_stats(la, lb);
    if (!s.degenerate) CHECK(s.kappa == doctest::Approx(oracle::kappa(a, b)).epsilon(1e-12));
    CHECK(cohen_kappa(la, lb) == doctest::Approx(cohen_kappa(lb, la)).epsilon(1e-15));
    CHECK(cohen_kappa(la, lb) == doctest::Approx(cohen_kappa(fa, fb)).epsilon(1e-12));
    CHECK(s.kappa >= -1.0);
    CHECK(s.kappa <= 1.0);
  }
}

TEST_CASE("import_labels joins rows against the corpus") {
  const auto docs = medito_like();
  const auto c = import_labels_text(
      "repo,run_id,line_index,annotator,label\n"
      "meditohq/medito,5,0,alice,1\n"
      "meditohq/medito,5,0,bob,1\n"
      "meditohq/medito,5,1,alice,0\n"
      "meditohq/medito,5,1,bob,1\n",
      docs);
  CHECK(c.annotator_ids == std::vector<std::string>{"alice", "bob"});
  CHECK(c.entries.size() == 2);
  CHECK_FALSE(c.has_consensus());
  CHECK(disagreements(c).size() == 1);
}

TEST_CASE("import_labels rejects dangling, duplicate and malformed rows") {
  const auto docs = medito_like();
  try {
    import_labels_text("repo,run_id,line_index,annotator,label\nmeditohq/medito,5,999,alice,1\n", docs);
    FAIL("expected an error");
  } catch (const ValidationError& e) {
    const std::string what = e.what();
    CHECK(what.find("row 2") != std::string::npos);
    CHECK(what.find("41") != std::string::npos);
  }
  CHECK_THROWS_AS(import_labels_text("repo,run_id,line_index,annotator,label\n"
                                     "meditohq/medito,5,1,alice,1\nmeditohq/medito,5,1,alice,0\n",
                                     docs),
                  ValidationError);
  CHECK_THROWS_AS(import_labels_text("repo,run,line_index,annotator,label\n", docs), ValidationError);
  CHECK_THROWS_AS(import_labels_text("repo,run_id,line_index,annotator,label\nmeditohq/medito,5,1,alice,2\n", docs),
                  ValidationError);
  CHECK_THROWS_AS(import_labels_text("repo,run_id,line_index,annotator,label,consensus\n"
                                     "meditohq/medito,5,1,alice,1,1\nmeditohq/medito,5,2,alice,1,\n",
                                     docs),
                  ValidationError);
}

TEST_CASE("empty label body gives an empty corpus") {
  const auto c = import_labels_text("repo,run_id,line_index,annotator,label\n", medito_like());
  CHECK(c.empty());
}

TEST_CASE("merge_consensus") {
  const auto docs = medito_like();
  const auto c = import_labels_text(
      "repo,run_id,line_index,annotator,label\n"
      "meditohq/medito,5,0,a,1\nmeditohq/medito,5,0,b,1\n"
      "meditohq/medito,5,1,a,0\nmeditohq/medito,5,1,b,1\n"
      "meditohq/medito,5,2,a,0\nmeditohq/medito,5,2,b,0\n",
      docs);
  const LineKey disputed{"meditohq/medito", "5", 1};
  const LineKey agreed{"meditohq/medito", "5", 0};

  CHECK_THROWS_AS(merge_consensus(c, {}), ValidationError);
  CHECK_THROWS_AS(merge_consensus(c, {{disputed, Label::kIrrelevant}, {agreed, Label::kRelevant}}), ValidationError);

  const auto merged = merge_consensus(c, {{disputed, Label::kIrrelevant}});
  CHECK(merged.has_consensus());
  const auto truth = ground_truth(merged);
  CHECK(truth.at(agreed) == Label::kRelevant);
  CHECK(truth.at(disputed) == Label::kIrrelevant);

  std::ostringstream out;
  write_consensus_csv(out, merged);
  const auto again = import_labels_text(out.str(), docs);
  CHECK(again.has_consensus());
  CHECK(ground_truth(again) == truth);
}

TEST_CASE("merge_consensus without disagreements copies the agreed labels") {
  const auto docs = medito_like();
  const auto c = import_labels_text(
      "repo,run_id,line_index,annotator,label\n"
      "meditohq/medito,5,0,a,1\nmeditohq/medito,5,0,b,1\n"
      "meditohq/medito,5,3,a,0\nmeditohq/medito,5,3,b,0\n",
      docs);
  const auto merged = merge_consensus(c, {});
  for (const auto& [key, entry] : merged.entries) CHECK(*entry.consensus == entry.by_annotator.at("a"));
}

TEST_CASE("paired_labels requires equal coverage") {
  const auto docs = medito_like();
  const auto c = import_labels_text(
      "repo,run_id,line_index,annotator,label\n"
      "meditohq/medito,5,0,a,1\nmeditohq/medito,5,0,b,1\nmeditohq/medito,5,1,a,0\n",
      docs);
  CHECK_THROWS_AS(paired_labels(c, "a", "b"), ValidationError);
}
