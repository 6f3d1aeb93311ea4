#include "logsieve/classify.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "logsieve/error.hpp"
#include "logsieve/rng.hpp"

namespace logsieve::classify {
namespace {

using features::DenseMatrix;
using features::SparseMatrix;
using nlohmann::json;

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sign_of(Label l) { return l == Label::kRelevant ? 1.0 : -1.0; }
double as_double(Label l) { return l == Label::kRelevant ? 1.0 : 0.0; }

Eigen::VectorXd margins(const FeatureMatrix& x, const Eigen::VectorXd& w, double b) {
  return std::visit([&](const auto& m) -> Eigen::VectorXd { return (m * w).array() + b; }, x);
}

Eigen::VectorXd transpose_times(const FeatureMatrix& x, const Eigen::VectorXd& r) {
  return std::visit([&](const auto& m) -> Eigen::VectorXd { return m.transpose() * r; }, x);
}

double row_dot(const DenseMatrix& m, Eigen::Index i, const Eigen::VectorXd& v) {
  return m.row(i).dot(v);
}
double row_dot(const SparseMatrix& m, Eigen::Index i, const Eigen::VectorXd& v) {
  double s = 0.0;
  for (SparseMatrix::InnerIterator it(m, i); it; ++it) s += it.value() * v(it.col());
  return s;
}
void add_row(const DenseMatrix& m, Eigen::Index i, double a, Eigen::VectorXd& v) {
  v.noalias() += a * m.row(i).transpose();
}
void add_row(const SparseMatrix& m, Eigen::Index i, double a, Eigen::VectorXd& v) {
  for (SparseMatrix::InnerIterator it(m, i); it; ++it) v(it.col()) += a * it.value();
}
double row_norm2(const DenseMatrix& m, Eigen::Index i) { return m.row(i).squaredNorm(); }
double row_norm2(const SparseMatrix& m, Eigen::Index i) {
  double s = 0.0;
  for (SparseMatrix::InnerIterator it(m, i); it; ++it) s += it.value() * it.value();
  return s;
}

void check_training_input(ClassifierKind kind, const FeatureMatrix& x, std::span<const Label> y) {
  if (features::rows(x) != y.size()) {
    throw ValidationError("training: " + std::to_string(features::rows(x)) + " feature rows but " +
                          std::to_string(y.size()) + " labels");
  }
  if (y.empty()) throw ValidationError("training: no samples");
  if (!features::all_finite(x)) throw ValidationError("training: non-finite feature values");
  if (kind != ClassifierKind::kDummyStratified) {
    const bool has0 = std::find(y.begin(), y.end(), Label::kIrrelevant) != y.end();
    const bool has1 = std::find(y.begin(), y.end(), Label::kRelevant) != y.end();
    if (!has0 || !has1) {
      throw ValidationError("training " + std::string(to_string(kind)) +
                            ": labels contain a single class; both classes are required");
    }
  }
}

// Weight vector stored as scale * v so that the L2 shrink is O(1) per step.
struct ScaledVector {
  Eigen::VectorXd v;
  double scale = 1.0;
  double norm2 = 0.0;  // |v|^2

  explicit ScaledVector(std::size_t d) : v(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d))) {}

  void shrink(double factor) {
    if (factor <= 0.0) {
      v.setZero();
      scale = 1.0;
      norm2 = 0.0;
      return;
    }
    scale *= factor;
    if (scale < 1e-9) {
      v *= scale;
      norm2 *= scale * scale;
      scale = 1.0;
    }
  }

  double squared_norm() const { return scale * scale * norm2; }
  Eigen::VectorXd value() const { return scale * v; }
};

template <typename M>
void pegasos(const M& x, std::span<const Label> y, double lambda, std::size_t epochs, Rng& rng,
             Eigen::VectorXd& w_out, double& b_out) {
  const auto n = static_cast<std::size_t>(x.rows());
  ScaledVector w(static_cast<std::size_t>(x.cols()));
  double b = 0.0;  // regularized like the weights (constant feature)
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const double radius2 = 1.0 / lambda;
  std::size_t t = 0;
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    for (const auto i : order) {
      ++t;
      const auto row = static_cast<Eigen::Index>(i);
      const double eta = 1.0 / (lambda * static_cast<double>(t));
      const double s = sign_of(y[i]);
      const double margin = s * (w.scale * row_dot(x, row, w.v) + b);
      const double shrink = 1.0 - eta * lambda;
      w.shrink(shrink);
      b *= std::max(shrink, 0.0);
      if (margin < 1.0) {
        const double a = eta * s / w.scale;
        const double vx = row_dot(x, row, w.v);
        w.norm2 += 2.0 * a * vx + a * a * row_norm2(x, row);
        add_row(x, row, a, w.v);
        b += eta * s;
      }
      // Project onto the ball of radius 1/sqrt(lambda).
      const double total2 = w.squared_norm() + b * b;
      if (total2 > radius2) {
        const double f = std::sqrt(radius2 / total2);
        w.shrink(f);
        b *= f;
      }
    }
  }
  w_out = w.value();
  b_out = b;
}

template <typename M>
void sgd_logistic(const M& x, std::span<const Label> y, double eta0, double lambda,
                  std::size_t epochs, Rng& rng, Eigen::VectorXd& w_out, double& b_out) {
  const auto n = static_cast<std::size_t>(x.rows());
  ScaledVector w(static_cast<std::size_t>(x.cols()));
  double b = 0.0;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::size_t t = 0;
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    for (const auto i : order) {
      const auto row = static_cast<Eigen::Index>(i);
      const double eta = eta0 / (1.0 + eta0 * lambda * static_cast<double>(t));
      ++t;
      const double z = w.scale * row_dot(x, row, w.v) + b;
      const double g = sigmoid(z) - as_double(y[i]);
      w.shrink(1.0 - eta * lambda);
      if (g != 0.0) {
        const double a = -eta * g / w.scale;
        const double vx = row_dot(x, row, w.v);
        w.norm2 += 2.0 * a * vx + a * a * row_norm2(x, row);
        add_row(x, row, a, w.v);
      }
      b -= eta * g;
    }
  }
  w_out = w.value();
  b_out = b;
}

void logreg_full_batch(const FeatureMatrix& x, std::span<const Label> y, double lambda,
                       const Hyperparameters& h, Eigen::VectorXd& w, double& b) {
  const auto d = static_cast<Eigen::Index>(features::cols(x));
  w = Eigen::VectorXd::Zero(d);
  b = 0.0;
  double f = logistic_objective(x, y, w, b, lambda);
  double step = 1.0;
  constexpr double kArmijo = 1e-4;
  for (std::size_t iter = 0; iter < h.max_iter; ++iter) {
    const Eigen::VectorXd g = logistic_gradient(x, y, w, b, lambda);
    if (g.lpNorm<Eigen::Infinity>() < h.tol) break;
    const double g2 = g.squaredNorm();
    step = std::min(step * 2.0, 1e6);
    bool accepted = false;
    for (int halvings = 0; halvings < 80; ++halvings) {
      const Eigen::VectorXd w_new = w - step * g.head(d);
      const double b_new = b - step * g(d);
      const double f_new = logistic_objective(x, y, w_new, b_new, lambda);
      if (f_new <= f - kArmijo * step * g2) {
        w = w_new;
        b = b_new;
        f = f_new;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // no representable decrease left
  }
}

json metrics_json(const EvalMetrics& m) {
  return json{{"accuracy", m.accuracy},
              {"weighted_precision", m.weighted_precision},
              {"weighted_recall", m.weighted_recall},
              {"weighted_f1", m.weighted_f1}};
}

std::vector<Label> gather(std::span<const Label> y, std::span<const std::size_t> idx) {
  std::vector<Label> out;
  out.reserve(idx.size());
  for (const auto i : idx) out.push_back(y[i]);
  return out;
}

}  // namespace

// ---------------------------------------------------------------- kinds

std::string_view to_string(ClassifierKind kind) {
  switch (kind) {
    case ClassifierKind::kLogRegL2: return "logreg_l2";
    case ClassifierKind::kLinearSvm: return "linear_svm";
    case ClassifierKind::kSgdLogistic: return "sgd_logistic";
    case ClassifierKind::kNearestCentroid: return "nearest_centroid";
    case ClassifierKind::kDummyStratified: return "dummy_stratified";
  }
  return "logreg_l2";
}

ClassifierKind parse_kind(std::string_view text) {
  for (const auto k : kAllKinds) {
    if (to_string(k) == text) return k;
  }
  throw ValidationError("unknown classifier kind '" + std::string(text) + "'");
}

bool is_linear(ClassifierKind kind) {
  return kind == ClassifierKind::kLogRegL2 || kind == ClassifierKind::kLinearSvm ||
         kind == ClassifierKind::kSgdLogistic;
}

double Hyperparameters::effective_lambda(std::size_t n) const {
  if (lambda) return *lambda;
  return 1.0 / (C * static_cast<double>(std::max<std::size_t>(n, 1)));
}

void Hyperparameters::set(std::string_view key, std::string_view value) {
  auto as_double = [&]() {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc() || ptr != value.data() + value.size() || !std::isfinite(v) || v <= 0) {
      throw ValidationError("hyperparameter " + std::string(key) + ": expected a positive number");
    }
    return v;
  };
  auto as_count = [&]() {
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc() || ptr != value.data() + value.size() || v == 0) {
      throw ValidationError("hyperparameter " + std::string(key) + ": expected a positive integer");
    }
    return v;
  };
  if (key == "C") C = as_double();
  else if (key == "lambda") lambda = as_double();
  else if (key == "max_iter") max_iter = as_count();
  else if (key == "tol") tol = as_double();
  else if (key == "svm_epochs") svm_epochs = as_count();
  else if (key == "sgd_eta0") sgd_eta0 = as_double();
  else if (key == "sgd_alpha") sgd_alpha = as_double();
  else if (key == "sgd_epochs") sgd_epochs = as_count();
  else throw ValidationError("unknown hyperparameter '" + std::string(key) + "'");
}

json to_json(const Hyperparameters& h) {
  return json{{"C", h.C},
              {"lambda", h.lambda ? json(*h.lambda) : json(nullptr)},
              {"max_iter", h.max_iter},
              {"tol", h.tol},
              {"svm_epochs", h.svm_epochs},
              {"sgd_eta0", h.sgd_eta0},
              {"sgd_alpha", h.sgd_alpha},
              {"sgd_epochs", h.sgd_epochs}};
}

Hyperparameters hyper_from_json(const json& j) {
  Hyperparameters h;
  h.C = j.at("C").get<double>();
  if (!j.at("lambda").is_null()) h.lambda = j["lambda"].get<double>();
  h.max_iter = j.at("max_iter").get<std::size_t>();
  h.tol = j.at("tol").get<double>();
  h.svm_epochs = j.at("svm_epochs").get<std::size_t>();
  h.sgd_eta0 = j.at("sgd_eta0").get<double>();
  h.sgd_alpha = j.at("sgd_alpha").get<double>();
  h.sgd_epochs = j.at("sgd_epochs").get<std::size_t>();
  return h;
}

// ---------------------------------------------------------------- objectives

double logistic_objective(const FeatureMatrix& x, std::span<const Label> y,
                          const Eigen::VectorXd& w, double b, double lambda) {
  const Eigen::VectorXd z = margins(x, w, b);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) loss += softplus(-sign_of(y[i]) * z(i));
  return loss / static_cast<double>(z.size()) + 0.5 * lambda * w.squaredNorm();
}

Eigen::VectorXd logistic_gradient(const FeatureMatrix& x, std::span<const Label> y,
                                  const Eigen::VectorXd& w, double b, double lambda) {
  const Eigen::VectorXd z = margins(x, w, b);
  Eigen::VectorXd r(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) r(i) = sigmoid(z(i)) - as_double(y[i]);
  const double n = static_cast<double>(z.size());
  Eigen::VectorXd g(w.size() + 1);
  g.head(w.size()) = transpose_times(x, r) / n + lambda * w;
  g(w.size()) = r.sum() / n;
  return g;
}

double hinge_objective(const FeatureMatrix& x, std::span<const Label> y,
                       const Eigen::VectorXd& w, double b, double lambda) {
  const Eigen::VectorXd z = margins(x, w, b);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) loss += std::max(0.0, 1.0 - sign_of(y[i]) * z(i));
  return loss / static_cast<double>(z.size()) + 0.5 * lambda * (w.squaredNorm() + b * b);
}

// ---------------------------------------------------------------- training

TrainedClassifier train(ClassifierKind kind, const FeatureMatrix& x, std::span<const Label> y,
                        const Hyperparameters& hyper, std::uint64_t seed) {
  check_training_input(kind, x, y);
  TrainedClassifier clf;
  clf.kind = kind;
  clf.dimension = features::cols(x);
  clf.seed = seed;
  clf.hyper = hyper;
  Rng rng(seed);
  const std::size_t n = y.size();

  switch (kind) {
    case ClassifierKind::kLogRegL2:
      logreg_full_batch(x, y, hyper.effective_lambda(n), hyper, clf.weights, clf.bias);
      break;
    case ClassifierKind::kLinearSvm: {
      const double lambda = hyper.effective_lambda(n);
      std::visit([&](const auto& m) { pegasos(m, y, lambda, hyper.svm_epochs, rng, clf.weights, clf.bias); },
                 x);
      break;
    }
    case ClassifierKind::kSgdLogistic:
      std::visit(
          [&](const auto& m) {
            sgd_logistic(m, y, hyper.sgd_eta0, hyper.sgd_alpha, hyper.sgd_epochs, rng, clf.weights,
                         clf.bias);
          },
          x);
      break;
    case ClassifierKind::kNearestCentroid: {
      std::array<std::size_t, 2> counts{};
      for (auto& c : clf.centroids) c = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(clf.dimension));
      std::visit(
          [&](const auto& m) {
            for (std::size_t i = 0; i < n; ++i) {
              const int label = static_cast<int>(y[i]);
              add_row(m, static_cast<Eigen::Index>(i), 1.0, clf.centroids[label]);
              ++counts[label];
            }
          },
          x);
      for (int c = 0; c < 2; ++c) clf.centroids[c] /= static_cast<double>(counts[c]);
      break;
    }
    case ClassifierKind::kDummyStratified: {
      const auto ones = std::count(y.begin(), y.end(), Label::kRelevant);
      clf.class_prior = static_cast<double>(ones) / static_cast<double>(n);
      break;
    }
  }
  return clf;
}

Eigen::VectorXd decision_value(const TrainedClassifier& clf, const FeatureMatrix& x) {
  const auto n = static_cast<Eigen::Index>(features::rows(x));
  if (features::cols(x) != clf.dimension) {
    throw ValidationError("classifier expects " + std::to_string(clf.dimension) +
                          " features, got " + std::to_string(features::cols(x)));
  }
  if (is_linear(clf.kind)) return margins(x, clf.weights, clf.bias);
  Eigen::VectorXd out(n);
  if (clf.kind == ClassifierKind::kNearestCentroid) {
    const double c0 = clf.centroids[0].squaredNorm();
    const double c1 = clf.centroids[1].squaredNorm();
    std::visit(
        [&](const auto& m) {
          for (Eigen::Index i = 0; i < n; ++i) {
            // |x - c0|^2 - |x - c1|^2; the |x|^2 terms cancel.
            out(i) = (c0 - 2.0 * row_dot(m, i, clf.centroids[0])) -
                     (c1 - 2.0 * row_dot(m, i, clf.centroids[1]));
          }
        },
        x);
    return out;
  }
  Rng rng(clf.seed);
  for (Eigen::Index i = 0; i < n; ++i) out(i) = clf.class_prior - rng.uniform();
  return out;
}

std::vector<Label> predict(const TrainedClassifier& clf, const FeatureMatrix& x) {
  const Eigen::VectorXd v = decision_value(clf, x);
  std::vector<Label> out(static_cast<std::size_t>(v.size()));
  const bool strict = !is_linear(clf.kind);
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const bool positive = strict ? v(i) > 0.0 : v(i) >= 0.0;
    out[static_cast<std::size_t>(i)] = positive ? Label::kRelevant : Label::kIrrelevant;
  }
  return out;
}

Eigen::VectorXd probability(const TrainedClassifier& clf, const FeatureMatrix& x) {
  if (clf.kind != ClassifierKind::kLogRegL2 && clf.kind != ClassifierKind::kSgdLogistic) {
    throw ValidationError("probabilities are only defined for logistic models");
  }
  Eigen::VectorXd z = decision_value(clf, x);
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = sigmoid(z(i));
  return z;
}

// ---------------------------------------------------------------- persistence

namespace {

json vec_json(const Eigen::VectorXd& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

Eigen::VectorXd vec_from(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace

json to_json(const TrainedClassifier& clf) {
  json j{{"format_version", TrainedClassifier::kFormatVersion},
         {"kind", std::string(to_string(clf.kind))},
         {"dimension", clf.dimension},
         {"seed", clf.seed},
         {"hyper", to_json(clf.hyper)},
         {"pipeline", features::to_json(clf.pipeline)}};
  if (is_linear(clf.kind)) {
    j["weights"] = vec_json(clf.weights);
    j["bias"] = clf.bias;
  } else if (clf.kind == ClassifierKind::kNearestCentroid) {
    j["centroids"] = json::array({vec_json(clf.centroids[0]), vec_json(clf.centroids[1])});
  } else {
    j["class_prior"] = clf.class_prior;
  }
  return j;
}

TrainedClassifier classifier_from_json(const json& j) {
  if (j.value("format_version", 0) != TrainedClassifier::kFormatVersion) {
    throw InputError("model file: unsupported format_version");
  }
  TrainedClassifier clf;
  try {
    clf.kind = parse_kind(j.at("kind").get<std::string>());
    clf.dimension = j.at("dimension").get<std::size_t>();
    clf.seed = j.at("seed").get<std::uint64_t>();
    clf.hyper = hyper_from_json(j.at("hyper"));
    clf.pipeline = features::pipeline_from_json(j.at("pipeline"));
    if (is_linear(clf.kind)) {
      clf.weights = vec_from(j.at("weights"));
      clf.bias = j.at("bias").get<double>();
      if (static_cast<std::size_t>(clf.weights.size()) != clf.dimension) {
        throw InputError("model file: weight length does not match dimension");
      }
    } else if (clf.kind == ClassifierKind::kNearestCentroid) {
      clf.centroids[0] = vec_from(j.at("centroids").at(0));
      clf.centroids[1] = vec_from(j.at("centroids").at(1));
    } else {
      clf.class_prior = j.at("class_prior").get<double>();
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("model file: ") + e.what());
  }
  return clf;
}

void save_model(const std::filesystem::path& path, const TrainedClassifier& clf) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write model file: " + path.string());
  out << to_json(clf).dump(1) << '\n';
}

TrainedClassifier load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read model file: " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError("model file " + path.string() + ": " + e.what());
  }
  return classifier_from_json(j);
}

// ---------------------------------------------------------------- metrics

EvalMetrics evaluate_classifier(std::span<const Label> pred, std::span<const Label> truth) {
  if (pred.size() != truth.size()) {
    throw ValidationError("evaluation: " + std::to_string(pred.size()) + " predictions vs " +
                          std::to_string(truth.size()) + " labels");
  }
  if (pred.empty()) throw ValidationError("evaluation: no samples");
  EvalMetrics m;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    ++m.confusion[static_cast<int>(truth[i])][static_cast<int>(pred[i])];
  }
  const double n = static_cast<double>(pred.size());
  m.accuracy = static_cast<double>(m.confusion[0][0] + m.confusion[1][1]) / n;
  for (int c = 0; c < 2; ++c) {
    const double tp = static_cast<double>(m.confusion[c][c]);
    const double support = static_cast<double>(m.confusion[c][0] + m.confusion[c][1]);
    const double predicted = static_cast<double>(m.confusion[0][c] + m.confusion[1][c]);
    const double precision = predicted > 0 ? tp / predicted : 0.0;
    const double recall = support > 0 ? tp / support : 0.0;
    const double f1 = precision + recall > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    const double weight = support / n;
    m.weighted_precision += weight * precision;
    m.weighted_recall += weight * recall;
    m.weighted_f1 += weight * f1;
  }
  return m;
}

// ---------------------------------------------------------------- splits

namespace {

std::array<std::vector<std::size_t>, 2> indices_by_class(std::span<const Label> labels) {
  std::array<std::vector<std::size_t>, 2> out;
  for (std::size_t i = 0; i < labels.size(); ++i) out[static_cast<int>(labels[i])].push_back(i);
  return out;
}

}  // namespace

Split stratified_split(std::span<const Label> labels, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ValidationError("test fraction must lie strictly between 0 and 1");
  }
  auto by_class = indices_by_class(labels);
  if (by_class[0].empty() || by_class[1].empty()) {
    throw ValidationError("stratified split needs both classes; labels contain a single class");
  }
  Rng rng(seed);
  Split s;
  for (auto& members : by_class) {
    rng.shuffle(std::span<std::size_t>(members));
    const auto n_test = static_cast<std::size_t>(
        std::llround(static_cast<double>(members.size()) * test_fraction));
    s.test.insert(s.test.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_test));
    s.train.insert(s.train.end(), members.begin() + static_cast<std::ptrdiff_t>(n_test), members.end());
  }
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

std::vector<Split> stratified_kfold(std::span<const Label> labels, std::size_t k,
                                    std::uint64_t seed) {
  if (k < 2) throw ValidationError("k-fold needs k >= 2");
  auto by_class = indices_by_class(labels);
  for (int c = 0; c < 2; ++c) {
    if (by_class[c].size() < k) {
      throw ValidationError("class " + std::to_string(c) + " has " +
                            std::to_string(by_class[c].size()) + " members, fewer than k = " +
                            std::to_string(k));
    }
  }
  Rng rng(seed);
  std::vector<std::vector<std::size_t>> folds(k);
  // Deal each class round-robin; the second class continues where the first
  // stopped so overall fold sizes also differ by at most one.
  std::size_t next = 0;
  for (auto& members : by_class) {
    rng.shuffle(std::span<std::size_t>(members));
    for (const auto i : members) {
      folds[next].push_back(i);
      next = (next + 1) % k;
    }
  }
  std::vector<Split> out(k);
  for (std::size_t f = 0; f < k; ++f) {
    std::sort(folds[f].begin(), folds[f].end());
    out[f].test = folds[f];
    for (std::size_t g = 0; g < k; ++g) {
      if (g != f) out[f].train.insert(out[f].train.end(), folds[g].begin(), folds[g].end());
    }
    std::sort(out[f].train.begin(), out[f].train.end());
  }
  return out;
}

std::vector<std::size_t> balanced_subsample(std::span<const Label> labels, std::uint64_t seed) {
  auto by_class = indices_by_class(labels);
  const std::size_t keep = std::min(by_class[0].size(), by_class[1].size());
  Rng rng(seed);
  std::vector<std::size_t> out;
  for (auto& members : by_class) {
    rng.shuffle(std::span<std::size_t>(members));
    out.insert(out.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(keep));
  }
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------- protocol

double CvReport::mean_fold_f1() const {
  if (per_fold.empty()) return 0.0;
  double s = 0.0;
  for (const auto& m : per_fold) s += m.weighted_f1;
  return s / static_cast<double>(per_fold.size());
}

namespace {

struct FittedPost {
  features::FeaturePipeline post;  // scaler / pca only
  FeatureMatrix train;
};

FittedPost fit_post(const FeatureMatrix& x_train, bool scale, std::optional<std::size_t> pca_k) {
  FittedPost out;
  out.train = x_train;
  if (scale) {
    out.post.scaler = features::fit_scaler(out.train);
    out.train = features::apply_scaler(*out.post.scaler, out.train);
  }
  if (pca_k) {
    out.post.pca = features::fit_pca(out.train, *pca_k);
    out.train = features::project(*out.post.pca, out.train);
  }
  return out;
}

struct CellRun {
  std::vector<EvalMetrics> folds;
  double mean_f1 = 0.0;
};

CellRun cross_validate(ClassifierKind kind, std::optional<std::size_t> pca_k, const GridSpec& spec,
                       const FeatureMatrix& x_train, std::span<const Label> y_train,
                       const std::vector<Split>& folds) {
  CellRun run;
  for (const auto& fold : folds) {
    const auto xf = features::select_rows(x_train, fold.train);
    const auto yf = gather(y_train, fold.train);
    const auto fitted = fit_post(xf, spec.scale, pca_k);
    const auto clf = train(kind, fitted.train, yf, spec.hyper, spec.seed);
    const auto xv = fitted.post.finish(features::select_rows(x_train, fold.test));
    run.folds.push_back(evaluate_classifier(predict(clf, xv), gather(y_train, fold.test)));
    run.mean_f1 += run.folds.back().weighted_f1;
  }
  run.mean_f1 /= static_cast<double>(folds.size());
  return run;
}

// Ordering key for the PCA tie-break: "no PCA" counts as the full dimension.
std::size_t pca_rank(const std::optional<std::size_t>& k) {
  return k ? *k : std::numeric_limits<std::size_t>::max();
}

}  // namespace

std::vector<GridResult> grid_search(const GridSpec& spec, const FeatureMatrix& x,
                                    std::span<const Label> y, const Split& split) {
  if (spec.kinds.empty() || spec.pca_grid.empty()) throw ValidationError("grid search: empty grid");
  const auto x_train = features::select_rows(x, split.train);
  const auto y_train = gather(y, split.train);
  const auto x_test = features::select_rows(x, split.test);
  const auto y_test = gather(y, split.test);
  const auto folds = stratified_kfold(y_train, spec.folds, spec.seed);

  std::vector<GridResult> results;
  for (const auto kind : spec.kinds) {
    GridResult best{kind, std::nullopt, {}, {}, {}};
    std::optional<CellRun> best_run;
    for (const auto& pca_k : spec.pca_grid) {
      auto run = cross_validate(kind, pca_k, spec, x_train, y_train, folds);
      best.cells.push_back({kind, pca_k, run.mean_f1});
      const bool better = !best_run || run.mean_f1 > best_run->mean_f1 ||
                          (run.mean_f1 == best_run->mean_f1 && pca_rank(pca_k) < pca_rank(best.pca_k));
      if (better) {
        best.pca_k = pca_k;
        best_run = std::move(run);
      }
    }
    auto fitted = fit_post(x_train, spec.scale, best.pca_k);
    best.model = train(kind, fitted.train, y_train, spec.hyper, spec.seed);
    best.model.pipeline = std::move(fitted.post);
    best.report.per_fold = std::move(best_run->folds);
    best.report.test =
        evaluate_classifier(predict(best.model, best.model.pipeline.finish(x_test)), y_test);
    best.report.config = json{{"features", spec.feature_label},
                              {"kind", std::string(to_string(kind))},
                              {"pca_k", best.pca_k ? json(*best.pca_k) : json(nullptr)},
                              {"scale", spec.scale},
                              {"folds", spec.folds},
                              {"test_fraction", spec.test_fraction},
                              {"seed", spec.seed},
                              {"hyper", to_json(spec.hyper)},
                              {"lambda_effective", spec.hyper.effective_lambda(y_train.size())},
                              {"train_size", split.train.size()},
                              {"test_size", split.test.size()},
                              {"mean_fold_f1", best.report.mean_fold_f1()},
                              {"test_metrics", metrics_json(best.report.test)}};
    results.push_back(std::move(best));
  }
  return results;
}

std::vector<GridResult> grid_search(const GridSpec& spec, const FeatureMatrix& x,
                                    std::span<const Label> y) {
  return grid_search(spec, x, y, stratified_split(y, spec.test_fraction, spec.seed));
}

}  // namespace logsieve::classify
