#include <doctest.h>

#include <random>
#include <set>

#include "logsieve/classify.hpp"
#include "logsieve/error.hpp"
#include "support/oracles.hpp"

using namespace logsieve;
using namespace logsieve::classify;
using features::DenseMatrix;

namespace {

std::vector<Label> to_labels(const std::vector<int>& v) {
  std::vector<Label> out;
  for (const int x : v) out.push_back(annotation::label_from_int(x));
  return out;
}

std::vector<int> to_ints(std::span<const Label> v) {
  std::vector<int> out;
  for (const auto l : v) out.push_back(annotation::to_int(l));
  return out;
}

std::size_t count_label(std::span<const Label> y, std::span<const std::size_t> idx, Label l) {
  std::size_t n = 0;
  for (const auto i : idx) n += y[i] == l;
  return n;
}

// Points with class = sign of x1 and |x1| >= 1.
std::pair<DenseMatrix, std::vector<Label>> separable(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  DenseMatrix x(static_cast<Eigen::Index>(n), 2);
  std::vector<Label> y;
  for (std::size_t i = 0; i < n; ++i) {
    const bool pos = i % 2 == 0;
    const double mag = 1.0 + static_cast<double>(rng() % 1000) / 250.0;
    x(static_cast<Eigen::Index>(i), 0) = pos ? mag : -mag;
    x(static_cast<Eigen::Index>(i), 1) = static_cast<double>(rng() % 2000) / 100.0 - 10.0;
    y.push_back(pos ? Label::kRelevant : Label::kIrrelevant);
  }
  return {x, y};
}

}  // namespace

TEST_CASE("logreg separates a separable toy set") {
  const auto [x, y] = separable(200, 4);
  // The set is separable by construction: x1 = 0 is a separator.
  const auto clf = train(ClassifierKind::kLogRegL2, x, y, Hyperparameters{}, 0);
  CHECK(evaluate_classifier(predict(clf, x), y).accuracy == 1.0);
  const auto svm = train(ClassifierKind::kLinearSvm, x, y, Hyperparameters{}, 0);
  CHECK(evaluate_classifier(predict(svm, x), y).accuracy >= 0.99);
  const auto sgd = train(ClassifierKind::kSgdLogistic, x, y, Hyperparameters{}, 0);
  CHECK(evaluate_classifier(predict(sgd, x), y).accuracy >= 0.99);
}

TEST_CASE("nearest centroid follows the closer cluster centre") {
  std::mt19937_64 rng(9);
  DenseMatrix x(100, 2);
  std::vector<Label> y;
  for (int i = 0; i < 100; ++i) {
    const double cx = i % 2 ? 10.0 : -10.0;
    const double a = static_cast<double>(rng() % 6283) / 1000.0;
    const double r = static_cast<double>(rng() % 1000) / 1000.0;
    x.row(i) << cx + r * std::cos(a), r * std::sin(a);
    y.push_back(i % 2 ? Label::kRelevant : Label::kIrrelevant);
  }
  const auto clf = train(ClassifierKind::kNearestCentroid, x, y, Hyperparameters{}, 0);
  DenseMatrix probe(4, 2);
  probe << 9, 0.5, -9, -0.5, 0.1, 30, -0.1, -30;
  const auto p = predict(clf, probe);
  CHECK(p == std::vector<Label>{Label::kRelevant, Label::kIrrelevant, Label::kRelevant, Label::kIrrelevant});
}

TEST_CASE("nearest centroid ties go to class 0") {
  TrainedClassifier clf;
  clf.kind = ClassifierKind::kNearestCentroid;
  clf.dimension = 1;
  clf.centroids[0] = Eigen::VectorXd::Constant(1, -1.0);
  clf.centroids[1] = Eigen::VectorXd::Constant(1, 1.0);
  DenseMatrix x(1, 1);
  x << 0.0;
  CHECK(predict(clf, x)[0] == Label::kIrrelevant);
}

TEST_CASE("dummy_stratified draws at the class prior") {
  std::vector<int> yi(200);
  for (int i = 0; i < 200; ++i) yi[i] = i % 2;
  const auto y = to_labels(yi);
  const DenseMatrix x = DenseMatrix::Zero(200, 3);
  const auto clf = train(ClassifierKind::kDummyStratified, x, y, Hyperparameters{}, 5);
  CHECK(clf.class_prior == 0.5);
  const DenseMatrix probe = DenseMatrix::Zero(10000, 3);
  const auto p = predict(clf, probe);
  double ones = 0;
  for (const auto l : p) ones += l == Label::kRelevant;
  CHECK(std::abs(ones / 10000.0 - 0.5) <= 0.05);
  CHECK(predict(clf, probe) == p);
}

TEST_CASE("boundary and probability conventions") {
  TrainedClassifier clf;
  clf.kind = ClassifierKind::kLogRegL2;
  clf.dimension = 2;
  clf.weights = Eigen::Vector2d(1.0, -1.0);
  clf.bias = 0.0;
  DenseMatrix x(2, 2);
  x << 3, 3, 0, 1;
  const auto p = predict(clf, x);
  CHECK(p[0] == Label::kRelevant);
  CHECK(p[1] == Label::kIrrelevant);
  CHECK(probability(clf, x)(0) == 0.5);

  clf.kind = ClassifierKind::kLinearSvm;
  CHECK_THROWS_AS(probability(clf, x), ValidationError);
}

TEST_CASE("training rejects bad inputs") {
  DenseMatrix x(3, 1);
  x << 1, 2, 3;
  const auto one_class = to_labels({1, 1, 1});
  CHECK_THROWS_AS(train(ClassifierKind::kLogRegL2, x, one_class, Hyperparameters{}, 0), ValidationError);
  const auto short_y = to_labels({1, 0});
  CHECK_THROWS_AS(train(ClassifierKind::kLogRegL2, x, short_y, Hyperparameters{}, 0), ValidationError);
  x(1, 0) = std::nan("");
  CHECK_THROWS_AS(train(ClassifierKind::kLogRegL2, x, to_labels({1, 0, 1}), Hyperparameters{}, 0), ValidationError);
}

TEST_CASE("scaling a separable set keeps its predictions") {
  const auto [x, y] = separable(120, 8);
  const auto a = train(ClassifierKind::kNearestCentroid, x, y, Hyperparameters{}, 0);
  const auto b = train(ClassifierKind::kNearestCentroid, DenseMatrix(x * 7.5), y, Hyperparameters{}, 0);
  CHECK(predict(a, x) == predict(b, DenseMatrix(x * 7.5)));
}

TEST_CASE("weighted metrics") {
  const auto truth = to_labels({1, 1, 0, 0});
  const auto pred = to_labels({1, 0, 0, 0});
  const auto m = evaluate_classifier(pred, truth);
  CHECK(m.accuracy == 0.75);
  CHECK(m.weighted_f1 == doctest::Approx(0.5 * (2.0 / 3.0) + 0.5 * 0.8).epsilon(1e-15));
  CHECK(m.weighted_f1 == doctest::Approx(0.7333).epsilon(1e-4));
  CHECK(m.confusion[1][0] == 1);

  const auto perfect = evaluate_classifier(truth, truth);
  CHECK(perfect.accuracy == 1.0);
  CHECK(perfect.weighted_f1 == 1.0);
  CHECK(perfect.weighted_precision == 1.0);
  CHECK(perfect.weighted_recall == 1.0);

  std::mt19937_64 rng(21);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + rng() % 25;
    std::vector<int> p(n), q(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = static_cast<int>(rng() % 2);
      q[i] = static_cast<int>(rng() % 2);
    }
    CHECK(evaluate_classifier(to_labels(p), to_labels(q)).weighted_f1 ==
          doctest::Approx(oracle::weighted_f1(p, q)).epsilon(1e-12));
  }
}

TEST_CASE("stratified split examples") {
  std::vector<int> yi(100);
  for (int i = 0; i < 100; ++i) yi[i] = i < 50;
  const auto y = to_labels(yi);
  const auto s = stratified_split(y, 0.2, 3);
  CHECK(count_label(y, s.test, Label::kRelevant) == 10);
  CHECK(count_label(y, s.test, Label::kIrrelevant) == 10);
  CHECK(s.train.size() == 80);
  const auto again = stratified_split(y, 0.2, 3);
  CHECK(again.train == s.train);
  CHECK(again.test == s.test);

  std::vector<int> seven(30, 0);
  for (int i = 0; i < 7; ++i) seven[i * 4] = 1;
  const auto y7 = to_labels(seven);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto pos = count_label(y7, stratified_split(y7, 0.2, seed).test, Label::kRelevant);
    CHECK((pos == 1 || pos == 2));
  }
}

TEST_CASE("stratified k-fold examples") {
  std::vector<int> yi(20);
  for (int i = 0; i < 20; ++i) yi[i] = i % 2;
  const auto y = to_labels(yi);
  const auto folds = stratified_kfold(y, 10, 1);
  REQUIRE(folds.size() == 10);
  std::set<std::size_t> seen;
  for (const auto& f : folds) {
    CHECK(count_label(y, f.test, Label::kRelevant) == 1);
    CHECK(count_label(y, f.test, Label::kIrrelevant) == 1);
    seen.insert(f.test.begin(), f.test.end());
    CHECK(f.train.size() + f.test.size() == 20);
  }
  CHECK(seen.size() == 20);

  std::vector<int> imb(20, 0);
  for (int i = 0; i < 13; ++i) imb[i] = 1;
  const auto yb = to_labels(imb);
  for (const auto& f : stratified_kfold(yb, 5, 2)) {
    const auto pos = count_label(yb, f.test, Label::kRelevant);
    const auto neg = count_label(yb, f.test, Label::kIrrelevant);
    CHECK((pos == 2 || pos == 3));
    CHECK((neg == 1 || neg == 2));
  }
}

TEST_CASE("balanced subsample") {
  std::vector<int> yi(30, 0);
  for (int i = 0; i < 8; ++i) yi[i * 3] = 1;
  const auto y = to_labels(yi);
  const auto idx = balanced_subsample(y, 4);
  CHECK(idx.size() == 16);
  CHECK(count_label(y, idx, Label::kRelevant) == 8);
  CHECK(std::is_sorted(idx.begin(), idx.end()));
}

TEST_CASE("training is deterministic in the seed") {
  const auto [x, y] = separable(150, 12);
  for (const auto kind : kAllKinds) {
    const auto a = train(kind, x, y, Hyperparameters{}, 17);
    const auto b = train(kind, x, y, Hyperparameters{}, 17);
    CHECK(to_json(a).dump() == to_json(b).dump());
  }
}

TEST_CASE("model JSON round trip") {
  const auto [x, y] = separable(60, 2);
  const auto a = train(ClassifierKind::kLogRegL2, x, y, Hyperparameters{}, 1);
  const auto b = classifier_from_json(to_json(a));
  CHECK(decision_value(a, x).isApprox(decision_value(b, x), 0));
}

TEST_CASE("svm training lowers the hinge objective") {
  const auto [x, y] = separable(100, 6);
  Hyperparameters h;
  const auto clf = train(ClassifierKind::kLinearSvm, x, y, h, 3);
  const double lambda = h.effective_lambda(100);
  const double start = hinge_objective(x, y, Eigen::VectorXd::Zero(2), 0.0, lambda);
  CHECK(start == 1.0);
  CHECK(hinge_objective(x, y, clf.weights, clf.bias, lambda) < start);
}

TEST_CASE("hyperparameter keys") {
  Hyperparameters h;
  h.set("C", "4");
  CHECK(h.effective_lambda(10) == doctest::Approx(1.0 / 40.0));
  h.set("lambda", "0.5");
  CHECK(h.effective_lambda(10) == 0.5);
  CHECK_THROWS_AS(h.set("gamma", "1"), ValidationError);
}

namespace {

// 400 samples, 100 features. Dimensions 0-39 carry large class-free noise;
// the class signal lives only in dimensions 40-63, whose variance ranks
// them below the first 32 principal directions.
std::pair<DenseMatrix, std::vector<Label>> hidden_signal(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto unit = [&] { return static_cast<double>(rng() % 2001) / 1000.0 - 1.0; };
  DenseMatrix x(400, 100);
  std::vector<Label> y;
  for (int i = 0; i < 400; ++i) {
    const bool pos = i % 2 == 0;
    for (int j = 0; j < 40; ++j) x(i, j) = unit() * (60.0 - j);
    for (int j = 40; j < 64; ++j) x(i, j) = (pos ? 1.0 : -1.0) + 0.5 * unit();
    for (int j = 64; j < 100; ++j) x(i, j) = 0.01 * unit();
    y.push_back(pos ? Label::kRelevant : Label::kIrrelevant);
  }
  return {x, y};
}

}  // namespace

TEST_CASE("grid search picks the dominating PCA size") {
  const auto [x, y] = hidden_signal(5);
  GridSpec spec;
  spec.kinds = {ClassifierKind::kLogRegL2};
  spec.pca_grid = {32, 64};
  spec.folds = 5;
  spec.seed = 1;
  const auto results = grid_search(spec, x, y);
  REQUIRE(results.size() == 1);
  CHECK(results[0].pca_k == std::optional<std::size_t>(64));
  REQUIRE(results[0].cells.size() == 2);
  CHECK(results[0].cells[1].mean_fold_f1 > results[0].cells[0].mean_fold_f1);
  CHECK(results[0].report.per_fold.size() == 5);
}

TEST_CASE("grid search ties go to the smaller k") {
  const auto [x, y] = hidden_signal(6);
  DenseMatrix easy = x;
  easy.col(0) = easy.col(40) * 1000.0;  // signal along the top direction
  GridSpec spec;
  spec.kinds = {ClassifierKind::kNearestCentroid};
  spec.pca_grid = {64, 32};
  spec.folds = 4;
  spec.seed = 2;
  const auto results = grid_search(spec, easy, y);
  REQUIRE(results.size() == 1);
  REQUIRE(results[0].cells.size() == 2);
  CHECK(results[0].cells[0].mean_fold_f1 == results[0].cells[1].mean_fold_f1);
  CHECK(results[0].pca_k == std::optional<std::size_t>(32));
}

TEST_CASE("grid search is deterministic") {
  const auto [x, y] = separable(120, 3);
  GridSpec spec;
  spec.kinds = {ClassifierKind::kLogRegL2, ClassifierKind::kDummyStratified};
  spec.folds = 4;
  spec.seed = 9;
  const auto a = grid_search(spec, x, y);
  const auto b = grid_search(spec, x, y);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(to_json(a[i].model).dump() == to_json(b[i].model).dump());
    CHECK(a[i].report.config.dump() == b[i].report.config.dump());
    CHECK(a[i].report.mean_fold_f1() == b[i].report.mean_fold_f1());
  }
  CHECK(to_ints(predict(a[0].model, x)) == to_ints(predict(b[0].model, x)));
}
