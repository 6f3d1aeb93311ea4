#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <json.hpp>

#include "logsieve/annotation.hpp"
#include "logsieve/corpus.hpp"

namespace logsieve::features {

using DenseMatrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Row-per-sample feature matrix. TF-IDF features stay sparse until a step
/// (scaling, PCA) needs them dense.
using FeatureMatrix = std::variant<DenseMatrix, SparseMatrix>;

std::size_t rows(const FeatureMatrix& x);
std::size_t cols(const FeatureMatrix& x);
DenseMatrix to_dense(const FeatureMatrix& x);
FeatureMatrix select_rows(const FeatureMatrix& x, std::span<const std::size_t> indices);
bool all_finite(const FeatureMatrix& x);

// ---------------------------------------------------------------- TF-IDF

/// Lowercase, split on runs of non-alphanumerics, drop all-digit terms longer
/// than 8 characters.
std::vector<std::string> tokenize_terms(std::string_view text);

struct TfIdfModel {
  static constexpr int kFormatVersion = 1;

  std::map<std::string, std::size_t> vocabulary;  // term -> column
  std::vector<double> idf;
  std::size_t doc_count = 0;
  std::size_t min_df = 2;

  std::size_t size() const { return idf.size(); }
};

/// idf(t) = ln((1 + N) / (1 + df(t))) + 1 over terms with df >= min_df.
/// Columns follow lexicographic term order.
TfIdfModel fit_tfidf(std::span<const std::string> lines, std::size_t min_df = 2);

using SparseVector = std::vector<std::pair<std::size_t, double>>;  // sorted by index

/// tf * idf, L2-normalized; all-zero rows are returned as-is.
SparseVector transform_tfidf(const TfIdfModel& model, std::string_view line);
SparseMatrix transform_tfidf(const TfIdfModel& model, std::span<const std::string> lines);

nlohmann::json to_json(const TfIdfModel& model);
TfIdfModel tfidf_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------- embeddings

class EmbeddingTable {
 public:
  /// Throws ValidationError while the table is empty.
  std::size_t dimension() const;
  bool empty() const { return vectors_.empty(); }
  std::size_t size() const { return vectors_.size(); }
  const std::string& provenance() const { return provenance_; }
  void set_provenance(std::string p) { provenance_ = std::move(p); }

  /// Throws ValidationError on a dimension mismatch.
  void insert(annotation::LineKey key, std::vector<double> vector);
  const std::vector<double>* find(const annotation::LineKey& key) const;

 private:
  std::size_t dimension_ = 0;
  std::map<annotation::LineKey, std::vector<double>> vectors_;
  std::string provenance_;
};

/// JSON Lines `{repo, run_id, line_index, vector}`; an optional `provenance`
/// field on any row names the encoder.
EmbeddingTable load_embeddings(const std::filesystem::path& path);
EmbeddingTable parse_embeddings(std::istream& in);

struct Coverage {
  std::size_t covered = 0;
  std::vector<annotation::LineKey> missing;
};

Coverage coverage(const EmbeddingTable& table, std::span<const corpus::LogDocument> docs);

/// Stacks the vectors for `keys`; throws ValidationError on a missing key.
DenseMatrix embedding_matrix(const EmbeddingTable& table,
                             std::span<const annotation::LineKey> keys);

// ---------------------------------------------------------------- scaling

struct ScalerParams {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;  // population std; 1 for zero-variance columns
};

ScalerParams fit_scaler(const FeatureMatrix& x);
DenseMatrix apply_scaler(const ScalerParams& p, const FeatureMatrix& x);
DenseMatrix inverse_scaler(const ScalerParams& p, const DenseMatrix& z);

nlohmann::json to_json(const ScalerParams& p);
ScalerParams scaler_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------- PCA

inline constexpr std::size_t kPcaGrid[] = {32, 64, 128, 256};

struct PcaBasis {
  Eigen::MatrixXd components;           // features x k, orthonormal columns
  Eigen::VectorXd explained_variance;  // non-increasing
  Eigen::VectorXd center;

  std::size_t k() const { return static_cast<std::size_t>(components.cols()); }
};

/// Top-k eigenvectors of the sample covariance of X, each signed so its
/// largest-magnitude coordinate is positive. Requires 1 <= k <= min(rows-1, cols).
PcaBasis fit_pca(const FeatureMatrix& x, std::size_t k);
DenseMatrix project(const PcaBasis& basis, const FeatureMatrix& x);

nlohmann::json to_json(const PcaBasis& b);
PcaBasis pca_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------- pipeline

enum class FeatureSource { kTfIdf, kEmbedding };

std::string_view to_string(FeatureSource s);
FeatureSource parse_feature_source(std::string_view text);

/// Fitted featurization state: raw features, then optional scaling, then
/// optional PCA.
struct FeaturePipeline {
  FeatureSource source = FeatureSource::kTfIdf;
  std::optional<TfIdfModel> tfidf;
  std::string embedding_provenance;
  std::optional<ScalerParams> scaler;
  std::optional<PcaBasis> pca;

  /// Raw features for every line of `doc` (embeddings looked up in `table`).
  FeatureMatrix raw_features(const corpus::LogDocument& doc,
                             const EmbeddingTable* table = nullptr) const;
  /// Scaler and PCA applied to raw features.
  FeatureMatrix finish(const FeatureMatrix& raw) const;
  FeatureMatrix transform(const corpus::LogDocument& doc,
                          const EmbeddingTable* table = nullptr) const {
    return finish(raw_features(doc, table));
  }
  /// Dimension of the features the classifier sees.
  std::size_t output_dimension() const;
};

nlohmann::json to_json(const FeaturePipeline& p);
FeaturePipeline pipeline_from_json(const nlohmann::json& j);

}  // namespace logsieve::features
