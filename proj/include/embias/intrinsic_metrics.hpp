#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "embias/common.hpp"
#include "embias/embedding_store.hpp"

namespace embias {

// ---------------------------------------------------------------------------
// Biased word selection

struct LabeledWordSet {
  WordList words;
  std::vector<Group> labels;
  /// Cosine with the gender direction in the original space.
  std::vector<double> projections;

  std::size_t size() const { return words.size(); }
};

/// The n_per_class words with the largest cosine to g (label F) and the
/// n_per_class with the smallest (label M), each sorted by |cosine|
/// descending. Ties keep vocabulary order; a word is never in both classes.
LabeledWordSet most_biased_words(const Embedding& orig, const Eigen::Ref<const Vector>& g,
                                 std::size_t n_per_class, const WordList& vocab);

// ---------------------------------------------------------------------------
// Clustering bias

struct KMeansOptions {
  int k = 2;
  int restarts = 10;
  int max_iterations = 300;
  std::uint64_t seed = kDefaultSeed;
};

struct KMeansResult {
  std::vector<int> assignment;
  Matrix centroids;
  double inertia = 0.0;
  int iterations = 0;
};

/// Lloyd's algorithm with k-means++ seeding; best of `restarts` by inertia.
/// A restart that ends with an empty cluster is re-seeded.
KMeansResult kmeans(const Matrix& points, const KMeansOptions& options);

struct VMeasure {
  double homogeneity = 0.0;
  double completeness = 0.0;
  double v_measure = 0.0;
};

VMeasure v_measure(std::span<const int> labels, std::span<const int> clusters);

struct ClusteringResult {
  double accuracy = 0.0;
  double v_measure = 0.0;
  std::size_t n = 0;
};

ClusteringResult clustering_bias(const Embedding& deb, const LabeledWordSet& wordset, int k = 2,
                                 std::uint64_t seed = kDefaultSeed, bool normalize = false);

// ---------------------------------------------------------------------------
// Recoverability bias

enum class Classifier { Logistic, Mlp };
Classifier parse_classifier(std::string_view name);

/// L2-regularised binary logistic regression trained by full-batch gradient
/// descent with a backtracking step.
class LogisticRegression {
 public:
  struct Options {
    double lambda = 1e-4;
    double tolerance = 1e-6;
    int max_epochs = 5000;
  };

  LogisticRegression() = default;
  explicit LogisticRegression(Options options) : options_(options) {}

  /// Mean cross-entropy plus (lambda/2)||w||^2; params = [w; bias].
  /// Fills `grad` with the exact gradient.
  static double loss_and_gradient(const Matrix& x, std::span<const int> y, const Vector& params, double lambda,
                                  Vector& grad);

  void fit(const Matrix& x, std::span<const int> y);
  std::vector<int> predict(const Matrix& x) const;

  const Vector& params() const { return params_; }
  int epochs() const { return epochs_; }
  double final_gradient_norm() const { return grad_norm_; }

 private:
  Options options_;
  Vector params_;
  int epochs_ = 0;
  double grad_norm_ = 0.0;
};

/// One hidden layer of rectified units with a sigmoid output, trained with
/// mini-batch SGD on cross-entropy.
class Mlp {
 public:
  struct Options {
    int hidden = 32;
    int epochs = 200;
    double step = 0.01;
    int batch = 32;
    std::uint64_t seed = kDefaultSeed;
  };

  Mlp() = default;
  explicit Mlp(Options options) : options_(options) {}

  void fit(const Matrix& x, std::span<const int> y);
  std::vector<int> predict(const Matrix& x) const;

 private:
  Options options_;
  Eigen::MatrixXd w1_;
  Eigen::VectorXd b1_;
  Eigen::VectorXd w2_;
  double b2_ = 0.0;
};

/// Held-out accuracy of a classifier trained on a stratified train_frac
/// split of the word set in the debiased space.
double recoverability(const Embedding& deb, const LabeledWordSet& wordset, double train_frac,
                      Classifier classifier, std::uint64_t seed = kDefaultSeed, bool normalize = false);

// ---------------------------------------------------------------------------
// GIPE

struct IndirectBias {
  enum class Status { Ok, ZeroInner, ZeroPerpendicular };
  Status status = Status::Ok;
  double value = 0.0;

  bool ok() const { return status == Status::Ok; }
};

/// Relative change of <w, v> after removing the g components; w, v unit.
IndirectBias indirect_bias(const Eigen::Ref<const Vector>& w, const Eigen::Ref<const Vector>& v,
                           const Eigen::Ref<const Vector>& g);

struct GipeConfig {
  double theta = 0.03;
  std::size_t n_neighbors = 100;
  WordList vocab;

  void validate() const;
};

struct GipeResult {
  double value = 0.0;
  std::size_t covered = 0;
  std::size_t missing = 0;
  std::size_t skipped_pairs = 0;
};

/// Mean over vocab words of the fraction of their n nearest (cosine)
/// neighbours within vocab whose indirect bias reaches theta.
GipeResult gipe(const Embedding& emb, const GipeConfig& cfg, const Eigen::Ref<const Vector>& g,
                unsigned workers = 0);

// ---------------------------------------------------------------------------
// SemBias

enum class SemBiasTag { Definitional, Stereotypical, Other };
SemBiasTag parse_sembias_tag(std::string_view s);
std::string_view to_string(SemBiasTag t);

struct SemBiasTuple {
  /// (male-analog, female-analog) candidate pairs.
  std::array<std::pair<std::string, std::string>, 4> pairs;
  std::array<SemBiasTag, 4> tags{};
};

/// Native format: per line, four tab-separated `a:b` pairs and a fifth field
/// of four comma-separated tags (def, stereo, other).
std::vector<SemBiasTuple> load_sembias(const std::filesystem::path& path);
void save_sembias(const std::vector<SemBiasTuple>& tuples, const std::filesystem::path& path);

/// Converts the published release (four whitespace-separated `a:b` pairs per
/// line in the order definitional, stereotypical, other, other).
std::vector<SemBiasTuple> convert_sembias_release(const std::filesystem::path& path);

struct SemBiasResult {
  double def = 0.0;
  double stereo = 0.0;
  double other = 0.0;
  std::size_t retained = 0;
  std::size_t dropped = 0;
  std::size_t ties = 0;
};

/// Per tuple, picks the pair maximising cos(masc - fem, a - b).
SemBiasResult sembias(const Embedding& emb, const std::vector<SemBiasTuple>& tuples, std::string_view fem,
                      std::string_view masc);

// ---------------------------------------------------------------------------
// Metrics table and correlation

/// True for names in the metric registry (see README for the list).
bool is_registered_metric(std::string_view name);

class MetricsTable {
 public:
  MetricsTable() = default;
  explicit MetricsTable(std::vector<std::string> columns);

  const std::vector<std::string>& columns() const { return columns_; }
  const std::vector<std::string>& row_ids() const { return row_ids_; }
  std::size_t rows() const { return row_ids_.size(); }

  void add_row(const std::string& id, std::vector<std::optional<double>> values);
  void set(const std::string& id, const std::string& column, std::optional<double> value);
  std::optional<double> get(const std::string& id, const std::string& column) const;
  std::vector<std::optional<double>> column(const std::string& name) const;

 private:
  std::size_t column_index(const std::string& name) const;
  std::size_t row_index(const std::string& id) const;

  std::vector<std::string> columns_;
  std::vector<std::string> row_ids_;
  std::vector<std::vector<std::optional<double>>> values_;
};

/// Tab-separated; first column is the embedding id, `NA` marks missing.
MetricsTable load_metrics_table(const std::filesystem::path& path);
void save_metrics_table(const MetricsTable& table, const std::filesystem::path& path);

/// Pearson coefficient; nullopt when either series is constant or n < 2.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

struct CorrelationMatrix {
  std::vector<std::string> columns;
  /// NaN marks NA (fewer than 3 joint rows or a constant column).
  Eigen::MatrixXd r;
  Eigen::MatrixXi n;
  std::vector<std::string> flags;

  std::optional<double> at(const std::string& a, const std::string& b) const;
};

/// Pairwise-complete Pearson correlations between all columns.
CorrelationMatrix pearson_matrix(const MetricsTable& table);
void save_correlation_matrix(const CorrelationMatrix& m, const std::filesystem::path& path);

}  // namespace embias
