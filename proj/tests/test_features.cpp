#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "logsieve/error.hpp"
#include "logsieve/features.hpp"

using namespace logsieve;
using namespace logsieve::features;

TEST_CASE("term tokenization") {
  CHECK(tokenize_terms("Error: FAILED task_1") == std::vector<std::string>{"error", "failed", "task", "1"});
  CHECK(tokenize_terms("id 1234567890 kept 12345678") == std::vector<std::string>{"id", "kept", "12345678"});
  CHECK(tokenize_terms("  ").empty());
}

TEST_CASE("idf values") {
  const std::vector<std::string> lines{"error build", "error test"};
  const auto m = fit_tfidf(lines, 1);
  CHECK(m.doc_count == 2);
  CHECK(m.idf[m.vocabulary.at("error")] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(m.idf[m.vocabulary.at("build")] == doctest::Approx(std::log(1.5) + 1.0).epsilon(1e-15));
  CHECK(m.idf[m.vocabulary.at("build")] == doctest::Approx(1.4055).epsilon(1e-4));

  const auto m2 = fit_tfidf(lines, 2);
  CHECK(m2.vocabulary.size() == 1);
  CHECK(m2.vocabulary.count("error") == 1);
}

TEST_CASE("columns follow term order") {
  const std::vector<std::string> lines{"zeta alpha", "mid alpha zeta mid"};
  const auto m = fit_tfidf(lines, 1);
  CHECK(m.vocabulary.at("alpha") == 0);
  CHECK(m.vocabulary.at("mid") == 1);
  CHECK(m.vocabulary.at("zeta") == 2);
}

TEST_CASE("transform is L2-normalized") {
  const std::vector<std::string> lines{"error build failed", "error test passed", "build test"};
  const auto m = fit_tfidf(lines, 1);
  CHECK(transform_tfidf(m, std::string_view("unseen words only")).empty());

  const auto one = transform_tfidf(m, std::string_view("error error"));
  REQUIRE(one.size() == 1);
  CHECK(one[0].second == doctest::Approx(1.0).epsilon(1e-15));

  std::mt19937_64 rng(1);
  const char* words[] = {"error", "build", "failed", "test", "passed", "other"};
  for (int i = 0; i < 200; ++i) {
    std::string line;
    for (int w = 0; w < 1 + static_cast<int>(rng() % 6); ++w) line += std::string(words[rng() % 6]) + " ";
    const auto v = transform_tfidf(m, std::string_view(line));
    if (v.empty()) continue;
    double sq = 0;
    for (const auto& [idx, val] : v) sq += val * val;
    CHECK(std::sqrt(sq) == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("tfidf JSON round trip") {
  const std::vector<std::string> lines{"a b", "b c", "c a d"};
  const auto m = fit_tfidf(lines, 1);
  const auto back = tfidf_from_json(to_json(m));
  CHECK(back.vocabulary == m.vocabulary);
  CHECK(back.idf == m.idf);
}

TEST_CASE("embedding tables") {
  std::stringstream ragged;
  ragged << R"({"repo":"o/r","run_id":"1","line_index":0,"vector":[1,2,3]})" << "\n"
         << R"({"repo":"o/r","run_id":"1","line_index":1,"vector":[1,2]})" << "\n";
  CHECK_THROWS_AS(parse_embeddings(ragged), ValidationError);

  std::stringstream empty;
  const auto t = parse_embeddings(empty);
  CHECK(t.empty());
  CHECK_THROWS_AS(t.dimension(), ValidationError);

  std::stringstream ok;
  ok << R"({"repo":"o/r","run_id":"1","line_index":0,"vector":[1,0],"provenance":"enc"})" << "\n";
  const auto t2 = parse_embeddings(ok);
  CHECK(t2.dimension() == 2);
  CHECK(t2.provenance() == "enc");
  const auto doc = corpus::document_from_text("a\nb\n", "o/r", "1");
  const auto cov = coverage(t2, std::span(&doc, 1));
  CHECK(cov.covered == 1);
  REQUIRE(cov.missing.size() == 1);
  CHECK(cov.missing[0].line_index == 1);
}

TEST_CASE("scaler") {
  DenseMatrix x(2, 1);
  x << 0, 2;
  const auto p = fit_scaler(x);
  CHECK(p.mean(0) == 1.0);
  CHECK(p.scale(0) == 1.0);
  const auto z = apply_scaler(p, x);
  CHECK(z(0, 0) == -1.0);
  CHECK(z(1, 0) == 1.0);

  DenseMatrix c(3, 2);
  c << 5, 1, 5, 2, 5, 3;
  const auto pc = fit_scaler(c);
  CHECK(pc.scale(0) == 1.0);
  const auto zc = apply_scaler(pc, c);
  CHECK(zc.col(0).isZero(0));
  CHECK(inverse_scaler(pc, zc).isApprox(c, 1e-12));
}

TEST_CASE("pca on collinear points") {
  DenseMatrix x(20, 2);
  for (int i = 0; i < 20; ++i) x.row(i) << i * 0.5, 3.0 - i * 1.5;
  const auto b = fit_pca(x, 2);
  CHECK(std::abs(b.explained_variance(1)) < 1e-9);
  CHECK(b.explained_variance(0) > 0.0);
}

TEST_CASE("pca basis properties") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g;  // values only feed property checks
  DenseMatrix x(60, 8);
  for (int i = 0; i < x.rows(); ++i)
    for (int j = 0; j < x.cols(); ++j) x(i, j) = g(rng) * (j + 1);

  const auto full = fit_pca(x, 8);
  CHECK((full.components.transpose() * full.components).isIdentity(1e-10));
  for (int i = 1; i < 8; ++i) CHECK(full.explained_variance(i) <= full.explained_variance(i - 1));
  // Full-rank projection preserves pairwise distances.
  const auto pf = project(full, x);
  for (int i = 0; i < 10; ++i) {
    const double d0 = (x.row(i) - x.row(i + 1)).norm();
    CHECK((pf.row(i) - pf.row(i + 1)).norm() == doctest::Approx(d0).epsilon(1e-9));
  }

  const auto part = fit_pca(x, 3);
  const auto pp = project(part, x);
  CHECK(pp.cols() == 3);
  for (int i = 0; i < 10; ++i) CHECK((pp.row(i) - pp.row(i + 1)).norm() <= (x.row(i) - x.row(i + 1)).norm() + 1e-12);
  for (int c = 0; c < 3; ++c) {
    Eigen::Index arg = 0;
    part.components.col(c).cwiseAbs().maxCoeff(&arg);
    CHECK(part.components(arg, c) > 0.0);
  }

  CHECK_THROWS_AS(fit_pca(x, 0), ValidationError);
  CHECK_THROWS_AS(fit_pca(x, 9), ValidationError);

  const auto back = pca_from_json(to_json(part));
  CHECK(back.components.isApprox(part.components, 0));
}

TEST_CASE("pca accepts sparse tfidf input") {
  std::vector<std::string> lines;
  for (int i = 0; i < 12; ++i) lines.push_back("w" + std::to_string(i % 5) + " w" + std::to_string(i % 3) + " common");
  const auto m = fit_tfidf(lines, 1);
  const FeatureMatrix x = transform_tfidf(m, lines);
  const auto b = fit_pca(x, 2);
  const auto dense = fit_pca(FeatureMatrix(to_dense(x)), 2);
  CHECK(b.components.isApprox(dense.components, 1e-10));
}

TEST_CASE("pipeline round trip") {
  const std::vector<std::string> lines{"error build failed", "error test passed", "build test ok", "ok fine"};
  FeaturePipeline p;
  p.tfidf = fit_tfidf(lines, 1);
  const auto doc = corpus::document_from_text("error build\nok fine\n", "o/r", "1");
  const auto raw = p.raw_features(doc);
  CHECK(rows(raw) == 2);
  CHECK(cols(raw) == p.tfidf->size());
  const auto back = pipeline_from_json(to_json(p));
  CHECK(to_dense(back.transform(doc)).isApprox(to_dense(p.transform(doc)), 0));
  CHECK(p.output_dimension() == p.tfidf->size());
}
