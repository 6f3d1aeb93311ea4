#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "logsieve/annotation.hpp"
#include "logsieve/features.hpp"

namespace logsieve::classify {

using annotation::Label;
using features::FeatureMatrix;

enum class ClassifierKind {
  kLogRegL2,
  kLinearSvm,
  kSgdLogistic,
  kNearestCentroid,
  kDummyStratified,
};

inline constexpr ClassifierKind kAllKinds[] = {
    ClassifierKind::kLogRegL2, ClassifierKind::kLinearSvm, ClassifierKind::kSgdLogistic,
    ClassifierKind::kNearestCentroid, ClassifierKind::kDummyStratified};

std::string_view to_string(ClassifierKind kind);
ClassifierKind parse_kind(std::string_view text);
bool is_linear(ClassifierKind kind);

/// Training knobs. `lambda`, when unset, is derived as 1 / (C * n) so that
/// C keeps its usual meaning for the mean-loss objectives below.
struct Hyperparameters {
  double C = 1.0;
  std::optional<double> lambda;
  std::size_t max_iter = 1000;  // logreg_l2 full-batch iterations
  double tol = 1e-6;            // logreg_l2 gradient inf-norm
  std::size_t svm_epochs = 50;
  double sgd_eta0 = 0.1;
  double sgd_alpha = 1e-4;  // L2 strength for sgd_logistic
  std::size_t sgd_epochs = 50;

  double effective_lambda(std::size_t n) const;
  /// Applies `key=value`; throws ValidationError for unknown keys.
  void set(std::string_view key, std::string_view value);
};

nlohmann::json to_json(const Hyperparameters& h);
Hyperparameters hyper_from_json(const nlohmann::json& j);

struct TrainedClassifier {
  static constexpr int kFormatVersion = 1;

  ClassifierKind kind = ClassifierKind::kLogRegL2;
  std::size_t dimension = 0;
  Eigen::VectorXd weights;                   // linear kinds
  double bias = 0.0;                         // linear kinds
  std::array<Eigen::VectorXd, 2> centroids;  // nearest_centroid, indexed by label
  double class_prior = 0.0;                  // dummy: P(label = 1)
  std::uint64_t seed = 0;
  Hyperparameters hyper;
  features::FeaturePipeline pipeline;
};

nlohmann::json to_json(const TrainedClassifier& clf);
TrainedClassifier classifier_from_json(const nlohmann::json& j);
void save_model(const std::filesystem::path& path, const TrainedClassifier& clf);
TrainedClassifier load_model(const std::filesystem::path& path);

/// Fits one classifier. Throws ValidationError on non-finite features, a
/// row/label count mismatch, or single-class labels for non-dummy kinds.
TrainedClassifier train(ClassifierKind kind, const FeatureMatrix& x, std::span<const Label> y,
                        const Hyperparameters& hyper, std::uint64_t seed);

/// Margin w.x + b (linear kinds), d0^2 - d1^2 (nearest_centroid), or
/// prior - u for the seeded draw u (dummy).
Eigen::VectorXd decision_value(const TrainedClassifier& clf, const FeatureMatrix& x);
/// Linear kinds: 1 iff margin >= 0. Nearest centroid: ties go to class 0.
std::vector<Label> predict(const TrainedClassifier& clf, const FeatureMatrix& x);
/// sigma(margin); logreg_l2 and sgd_logistic only.
Eigen::VectorXd probability(const TrainedClassifier& clf, const FeatureMatrix& x);

// Objectives, exposed for gradient and descent checks. Labels are {0, 1}.

/// mean log(1 + exp(-s z)) + lambda/2 |w|^2 with s = +-1 and z = w.x + b.
double logistic_objective(const FeatureMatrix& x, std::span<const Label> y,
                          const Eigen::VectorXd& w, double b, double lambda);
/// Gradient of logistic_objective; the last entry is d/db.
Eigen::VectorXd logistic_gradient(const FeatureMatrix& x, std::span<const Label> y,
                                  const Eigen::VectorXd& w, double b, double lambda);
/// mean max(0, 1 - s z) + lambda/2 (|w|^2 + b^2).
double hinge_objective(const FeatureMatrix& x, std::span<const Label> y,
                       const Eigen::VectorXd& w, double b, double lambda);

// ---------------------------------------------------------------- metrics

struct EvalMetrics {
  double accuracy = 0.0;
  double weighted_precision = 0.0;
  double weighted_recall = 0.0;
  double weighted_f1 = 0.0;
  std::array<std::array<std::size_t, 2>, 2> confusion{};  // [truth][prediction]
};

EvalMetrics evaluate_classifier(std::span<const Label> pred, std::span<const Label> truth);

// ---------------------------------------------------------------- splits

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;  // validation indices for k-fold splits
};

/// Per class, round(count * test_fraction) samples go to the test side.
Split stratified_split(std::span<const Label> labels, double test_fraction, std::uint64_t seed);

/// k folds whose per-class validation sizes differ by at most one.
std::vector<Split> stratified_kfold(std::span<const Label> labels, std::size_t k,
                                    std::uint64_t seed);

/// Indices of a class-balanced subsample (majority class downsampled),
/// returned in ascending order.
std::vector<std::size_t> balanced_subsample(std::span<const Label> labels, std::uint64_t seed);

// ---------------------------------------------------------------- protocol

struct CvReport {
  std::vector<EvalMetrics> per_fold;
  EvalMetrics test;
  nlohmann::json config;

  double mean_fold_f1() const;
};

struct GridSpec {
  std::vector<ClassifierKind> kinds;
  /// PCA settings to try; nullopt means "no PCA".
  std::vector<std::optional<std::size_t>> pca_grid{std::nullopt};
  bool scale = false;
  std::size_t folds = 10;
  double test_fraction = 0.2;
  Hyperparameters hyper;
  std::uint64_t seed = 0;
  std::string feature_label = "tfidf";
};

struct GridCell {
  ClassifierKind kind;
  std::optional<std::size_t> pca_k;
  double mean_fold_f1 = 0.0;
};

struct GridResult {
  ClassifierKind kind;
  std::optional<std::size_t> pca_k;
  CvReport report;
  TrainedClassifier model;  // refit on the whole training split
  std::vector<GridCell> cells;
};

/// Cross-validates every (kind, pca) cell on the training side of `split`,
/// picks the best cell per kind by mean fold weighted-F1 (ties: smaller k,
/// then grid order), refits it on the full training side, and scores it once
/// on the test side. Scaling and PCA are fitted inside each fold.
std::vector<GridResult> grid_search(const GridSpec& spec, const FeatureMatrix& x,
                                    std::span<const Label> y, const Split& split);

/// Same, drawing the stratified split from spec.seed and spec.test_fraction.
std::vector<GridResult> grid_search(const GridSpec& spec, const FeatureMatrix& x,
                                    std::span<const Label> y);

}  // namespace logsieve::classify
