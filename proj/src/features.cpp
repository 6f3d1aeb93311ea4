#include "logsieve/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <unordered_map>

#include <Eigen/Eigenvalues>

#include "logsieve/error.hpp"

namespace logsieve::features {
namespace {

using nlohmann::json;

bool is_term_char(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
}

json vector_json(const Eigen::VectorXd& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

Eigen::VectorXd vector_from_json(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

void check_version(const json& j, int expected, const char* what) {
  if (j.value("format_version", 0) != expected) {
    throw InputError(std::string(what) + ": unsupported format_version");
  }
}

}  // namespace

std::size_t rows(const FeatureMatrix& x) {
  return std::visit([](const auto& m) { return static_cast<std::size_t>(m.rows()); }, x);
}

std::size_t cols(const FeatureMatrix& x) {
  return std::visit([](const auto& m) { return static_cast<std::size_t>(m.cols()); }, x);
}

DenseMatrix to_dense(const FeatureMatrix& x) {
  if (const auto* d = std::get_if<DenseMatrix>(&x)) return *d;
  return DenseMatrix(std::get<SparseMatrix>(x));
}

FeatureMatrix select_rows(const FeatureMatrix& x, std::span<const std::size_t> indices) {
  if (const auto* d = std::get_if<DenseMatrix>(&x)) {
    DenseMatrix out(static_cast<Eigen::Index>(indices.size()), d->cols());
    for (std::size_t r = 0; r < indices.size(); ++r) {
      out.row(static_cast<Eigen::Index>(r)) = d->row(static_cast<Eigen::Index>(indices[r]));
    }
    return out;
  }
  const auto& s = std::get<SparseMatrix>(x);
  std::vector<Eigen::Triplet<double>> triplets;
  for (std::size_t r = 0; r < indices.size(); ++r) {
    for (SparseMatrix::InnerIterator it(s, static_cast<Eigen::Index>(indices[r])); it; ++it) {
      triplets.emplace_back(static_cast<int>(r), static_cast<int>(it.col()), it.value());
    }
  }
  SparseMatrix out(static_cast<Eigen::Index>(indices.size()), s.cols());
  out.setFromTriplets(triplets.begin(), triplets.end());
  return out;
}

bool all_finite(const FeatureMatrix& x) {
  if (const auto* d = std::get_if<DenseMatrix>(&x)) return d->allFinite();
  const auto& s = std::get<SparseMatrix>(x);
  for (Eigen::Index k = 0; k < s.nonZeros(); ++k) {
    if (!std::isfinite(s.valuePtr()[k])) return false;
  }
  return true;
}

// ---------------------------------------------------------------- TF-IDF

std::vector<std::string> tokenize_terms(std::string_view text) {
  std::vector<std::string> terms;
  std::string current;
  auto flush = [&] {
    if (current.empty()) return;
    const bool all_digits = std::all_of(current.begin(), current.end(),
                                        [](char c) { return c >= '0' && c <= '9'; });
    if (!(all_digits && current.size() > 8)) terms.push_back(current);
    current.clear();
  };
  for (const char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (is_term_char(c)) {
      current.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : ch);
    } else {
      flush();
    }
  }
  flush();
  return terms;
}

TfIdfModel fit_tfidf(std::span<const std::string> lines, std::size_t min_df) {
  if (lines.empty()) throw ValidationError("tf-idf: empty corpus");
  std::map<std::string, std::size_t> df;
  bool any_term = false;
  for (const auto& line : lines) {
    auto terms = tokenize_terms(line);
    any_term = any_term || !terms.empty();
    std::sort(terms.begin(), terms.end());
    terms.erase(std::unique(terms.begin(), terms.end()), terms.end());
    for (auto& t : terms) ++df[std::move(t)];
  }
  if (!any_term) throw ValidationError("tf-idf: every line is empty of terms");

  TfIdfModel model;
  model.doc_count = lines.size();
  model.min_df = min_df;
  const double n = static_cast<double>(lines.size());
  for (const auto& [term, count] : df) {
    if (count < min_df) continue;
    model.vocabulary.emplace(term, model.idf.size());
    model.idf.push_back(std::log((1.0 + n) / (1.0 + static_cast<double>(count))) + 1.0);
  }
  if (model.vocabulary.empty()) {
    throw ValidationError("tf-idf: no term reaches min_df = " + std::to_string(min_df));
  }
  return model;
}

SparseVector transform_tfidf(const TfIdfModel& model, std::string_view line) {
  std::map<std::size_t, double> counts;
  for (const auto& term : tokenize_terms(line)) {
    if (const auto it = model.vocabulary.find(term); it != model.vocabulary.end()) {
      counts[it->second] += 1.0;
    }
  }
  SparseVector out;
  out.reserve(counts.size());
  double norm2 = 0.0;
  for (const auto& [col, tf] : counts) {
    const double v = tf * model.idf[col];
    out.emplace_back(col, v);
    norm2 += v * v;
  }
  if (norm2 > 0.0) {
    const double norm = std::sqrt(norm2);
    for (auto& entry : out) entry.second /= norm;
  }
  return out;
}

SparseMatrix transform_tfidf(const TfIdfModel& model, std::span<const std::string> lines) {
  std::vector<Eigen::Triplet<double>> triplets;
  for (std::size_t r = 0; r < lines.size(); ++r) {
    for (const auto& [col, v] : transform_tfidf(model, lines[r])) {
      triplets.emplace_back(static_cast<int>(r), static_cast<int>(col), v);
    }
  }
  SparseMatrix out(static_cast<Eigen::Index>(lines.size()),
                   static_cast<Eigen::Index>(model.size()));
  out.setFromTriplets(triplets.begin(), triplets.end());
  return out;
}

json to_json(const TfIdfModel& model) {
  std::vector<std::string> terms(model.size());
  for (const auto& [term, col] : model.vocabulary) terms[col] = term;
  return json{{"format_version", TfIdfModel::kFormatVersion},
              {"tokenization", "lowercase; split on non-alphanumeric runs; drop all-digit terms "
                               "longer than 8"},
              {"idf_variant", "smooth: ln((1+N)/(1+df))+1; l2 row norm"},
              {"doc_count", model.doc_count},
              {"min_df", model.min_df},
              {"terms", terms},
              {"idf", model.idf}};
}

TfIdfModel tfidf_from_json(const json& j) {
  check_version(j, TfIdfModel::kFormatVersion, "tf-idf model");
  TfIdfModel m;
  m.doc_count = j.at("doc_count").get<std::size_t>();
  m.min_df = j.at("min_df").get<std::size_t>();
  m.idf = j.at("idf").get<std::vector<double>>();
  const auto terms = j.at("terms").get<std::vector<std::string>>();
  if (terms.size() != m.idf.size()) throw InputError("tf-idf model: terms/idf length mismatch");
  for (std::size_t i = 0; i < terms.size(); ++i) m.vocabulary.emplace(terms[i], i);
  return m;
}

// ---------------------------------------------------------------- embeddings

std::size_t EmbeddingTable::dimension() const {
  if (vectors_.empty()) throw ValidationError("embedding table is empty; dimension undefined");
  return dimension_;
}

void EmbeddingTable::insert(annotation::LineKey key, std::vector<double> vector) {
  if (vector.empty()) throw ValidationError("embedding vector is empty");
  if (!vectors_.empty() && vector.size() != dimension_) {
    throw ValidationError("ragged embedding dimensions: expected " + std::to_string(dimension_) +
                          ", got " + std::to_string(vector.size()) + " for " + key.repo + "#" +
                          key.run_id + " line " + std::to_string(key.line_index));
  }
  dimension_ = vector.size();
  vectors_.insert_or_assign(std::move(key), std::move(vector));
}

const std::vector<double>* EmbeddingTable::find(const annotation::LineKey& key) const {
  const auto it = vectors_.find(key);
  return it == vectors_.end() ? nullptr : &it->second;
}

EmbeddingTable parse_embeddings(std::istream& in) {
  EmbeddingTable table;
  std::string row;
  std::size_t lineno = 0;
  while (std::getline(in, row)) {
    ++lineno;
    if (row.empty() || row == "\r") continue;
    try {
      const auto j = json::parse(row);
      annotation::LineKey key{j.at("repo").get<std::string>(), j.at("run_id").get<std::string>(),
                              j.at("line_index").get<std::size_t>()};
      auto vec = j.at("vector").get<std::vector<double>>();
      if (j.contains("provenance") && table.provenance().empty()) {
        table.set_provenance(j["provenance"].get<std::string>());
      }
      table.insert(std::move(key), std::move(vec));
    } catch (const json::exception& e) {
      throw InputError("embeddings line " + std::to_string(lineno) + ": malformed row (" +
                       e.what() + ")");
    } catch (const ValidationError& e) {
      throw ValidationError("embeddings line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return table;
}

EmbeddingTable load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read embeddings file: " + path.string());
  auto table = parse_embeddings(in);
  if (table.provenance().empty()) table.set_provenance(path.filename().string());
  return table;
}

Coverage coverage(const EmbeddingTable& table, std::span<const corpus::LogDocument> docs) {
  Coverage c;
  for (const auto& doc : docs) {
    for (const auto& line : doc.lines) {
      annotation::LineKey key{doc.repo, doc.run_id, line.index};
      if (table.find(key)) {
        ++c.covered;
      } else {
        c.missing.push_back(std::move(key));
      }
    }
  }
  return c;
}

DenseMatrix embedding_matrix(const EmbeddingTable& table,
                             std::span<const annotation::LineKey> keys) {
  const auto dim = table.dimension();
  DenseMatrix out(static_cast<Eigen::Index>(keys.size()), static_cast<Eigen::Index>(dim));
  for (std::size_t r = 0; r < keys.size(); ++r) {
    const auto* v = table.find(keys[r]);
    if (!v) {
      throw ValidationError("no embedding for " + keys[r].repo + "#" + keys[r].run_id + " line " +
                            std::to_string(keys[r].line_index));
    }
    out.row(static_cast<Eigen::Index>(r)) =
        Eigen::Map<const Eigen::RowVectorXd>(v->data(), static_cast<Eigen::Index>(dim));
  }
  return out;
}

// ---------------------------------------------------------------- scaling

ScalerParams fit_scaler(const FeatureMatrix& x) {
  const DenseMatrix d = to_dense(x);
  if (d.rows() == 0) throw ValidationError("scaler: empty matrix");
  ScalerParams p;
  p.mean = d.colwise().mean().transpose();
  p.scale.resize(d.cols());
  for (Eigen::Index c = 0; c < d.cols(); ++c) {
    const double var = (d.col(c).array() - p.mean(c)).square().mean();
    const double sd = std::sqrt(var);
    p.scale(c) = sd > 1e-12 * std::max(1.0, std::abs(p.mean(c))) ? sd : 1.0;
  }
  return p;
}

DenseMatrix apply_scaler(const ScalerParams& p, const FeatureMatrix& x) {
  DenseMatrix d = to_dense(x);
  if (static_cast<Eigen::Index>(p.mean.size()) != d.cols()) {
    throw ValidationError("scaler: expected " + std::to_string(p.mean.size()) + " features, got " +
                          std::to_string(d.cols()));
  }
  d.rowwise() -= p.mean.transpose();
  d.array().rowwise() /= p.scale.transpose().array();
  return d;
}

DenseMatrix inverse_scaler(const ScalerParams& p, const DenseMatrix& z) {
  DenseMatrix d = z;
  d.array().rowwise() *= p.scale.transpose().array();
  d.rowwise() += p.mean.transpose();
  return d;
}

json to_json(const ScalerParams& p) {
  return json{{"mean", vector_json(p.mean)}, {"scale", vector_json(p.scale)}};
}

ScalerParams scaler_from_json(const json& j) {
  ScalerParams p;
  p.mean = vector_from_json(j.at("mean"));
  p.scale = vector_from_json(j.at("scale"));
  if (p.mean.size() != p.scale.size()) throw InputError("scaler: mean/scale length mismatch");
  return p;
}

// ---------------------------------------------------------------- PCA

PcaBasis fit_pca(const FeatureMatrix& x, std::size_t k) {
  const DenseMatrix d = to_dense(x);
  const auto n = static_cast<std::size_t>(d.rows());
  const auto p = static_cast<std::size_t>(d.cols());
  const std::size_t limit = n == 0 ? 0 : std::min(n - 1, p);
  if (k < 1 || k > limit) {
    throw ValidationError("pca: k = " + std::to_string(k) + " out of range [1, " +
                          std::to_string(limit) + "] for a " + std::to_string(n) + "x" +
                          std::to_string(p) + " matrix");
  }
  PcaBasis b;
  b.center = d.colwise().mean().transpose();
  const DenseMatrix centered = d.rowwise() - b.center.transpose();
  const DenseMatrix cov =
      (centered.transpose() * centered) / static_cast<double>(n - 1);
  const Eigen::SelfAdjointEigenSolver<DenseMatrix> solver(cov);
  if (solver.info() != Eigen::Success) throw ValidationError("pca: eigendecomposition failed");

  // Eigenvalues come back ascending.
  b.components.resize(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(k));
  b.explained_variance.resize(static_cast<Eigen::Index>(k));
  for (std::size_t i = 0; i < k; ++i) {
    const auto src = static_cast<Eigen::Index>(p - 1 - i);
    Eigen::VectorXd v = solver.eigenvectors().col(src);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    b.components.col(static_cast<Eigen::Index>(i)) = v;
    b.explained_variance(static_cast<Eigen::Index>(i)) = std::max(0.0, solver.eigenvalues()(src));
  }
  return b;
}

DenseMatrix project(const PcaBasis& basis, const FeatureMatrix& x) {
  const DenseMatrix d = to_dense(x);
  if (d.cols() != basis.components.rows()) {
    throw ValidationError("pca: expected " + std::to_string(basis.components.rows()) +
                          " features, got " + std::to_string(d.cols()));
  }
  return (d.rowwise() - basis.center.transpose()) * basis.components;
}

json to_json(const PcaBasis& b) {
  json comps = json::array();
  for (Eigen::Index c = 0; c < b.components.cols(); ++c) {
    comps.push_back(vector_json(b.components.col(c)));
  }
  return json{{"components", comps},
              {"explained_variance", vector_json(b.explained_variance)},
              {"center", vector_json(b.center)}};
}

PcaBasis pca_from_json(const json& j) {
  PcaBasis b;
  b.center = vector_from_json(j.at("center"));
  b.explained_variance = vector_from_json(j.at("explained_variance"));
  const auto& comps = j.at("components");
  b.components.resize(b.center.size(), static_cast<Eigen::Index>(comps.size()));
  for (std::size_t c = 0; c < comps.size(); ++c) {
    const Eigen::VectorXd v = vector_from_json(comps[c]);
    if (v.size() != b.center.size()) throw InputError("pca: component length mismatch");
    b.components.col(static_cast<Eigen::Index>(c)) = v;
  }
  return b;
}

// ---------------------------------------------------------------- pipeline

std::string_view to_string(FeatureSource s) {
  return s == FeatureSource::kTfIdf ? "tfidf" : "embedding";
}

FeatureSource parse_feature_source(std::string_view text) {
  if (text == "tfidf") return FeatureSource::kTfIdf;
  if (text == "embedding" || text == "embeddings") return FeatureSource::kEmbedding;
  throw ValidationError("unknown feature source '" + std::string(text) + "'");
}

FeatureMatrix FeaturePipeline::raw_features(const corpus::LogDocument& doc,
                                            const EmbeddingTable* table) const {
  if (source == FeatureSource::kTfIdf) {
    if (!tfidf) throw ValidationError("pipeline has no tf-idf model");
    std::vector<std::string> lines;
    lines.reserve(doc.lines.size());
    for (const auto& l : doc.lines) lines.push_back(l.content);
    return transform_tfidf(*tfidf, lines);
  }
  if (!table) throw ValidationError("embedding pipeline needs an embedding table");
  std::vector<annotation::LineKey> keys;
  keys.reserve(doc.lines.size());
  for (const auto& l : doc.lines) keys.push_back({doc.repo, doc.run_id, l.index});
  return embedding_matrix(*table, keys);
}

FeatureMatrix FeaturePipeline::finish(const FeatureMatrix& raw) const {
  if (!scaler && !pca) return raw;
  FeatureMatrix x = raw;
  if (scaler) x = apply_scaler(*scaler, x);
  if (pca) x = project(*pca, x);
  return x;
}

std::size_t FeaturePipeline::output_dimension() const {
  if (pca) return pca->k();
  if (scaler) return static_cast<std::size_t>(scaler->mean.size());
  if (tfidf) return tfidf->size();
  return 0;
}

json to_json(const FeaturePipeline& p) {
  json j{{"source", std::string(to_string(p.source))}};
  j["tfidf"] = p.tfidf ? to_json(*p.tfidf) : json(nullptr);
  j["embedding_provenance"] = p.embedding_provenance;
  j["scaler"] = p.scaler ? to_json(*p.scaler) : json(nullptr);
  j["pca"] = p.pca ? to_json(*p.pca) : json(nullptr);
  return j;
}

FeaturePipeline pipeline_from_json(const json& j) {
  FeaturePipeline p;
  p.source = parse_feature_source(j.at("source").get<std::string>());
  if (!j.at("tfidf").is_null()) p.tfidf = tfidf_from_json(j["tfidf"]);
  p.embedding_provenance = j.value("embedding_provenance", "");
  if (!j.at("scaler").is_null()) p.scaler = scaler_from_json(j["scaler"]);
  if (!j.at("pca").is_null()) p.pca = pca_from_json(j["pca"]);
  return p;
}

}  // namespace logsieve::features
