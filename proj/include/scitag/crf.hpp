#pragma once

// Linear-chain CRF and a softmax classifier over a bag-of-embeddings
// encoding. Everything here is a pure function of its arguments.
//
// A CRF path y_1..y_L over K labels scores
//
//   start[y_1] + sum_t E[t][y_t] + sum_t T[y_t][y_{t+1}] + end[y_L]
//
// where the emission E[t][y] = theta[.][y] . phi_sparse(t) + Theta[y] . e_dense(t).
// Forward-backward runs in log space with per-step max subtraction.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "scitag/features.hpp"
#include "scitag/matrix.hpp"

namespace scitag {

/// Score used in place of -infinity so masked arithmetic stays finite.
inline constexpr double kNegInf = -1e30;

class LabelSet {
 public:
  LabelSet() = default;
  explicit LabelSet(std::vector<std::string> labels);

  std::size_t size() const noexcept { return labels_.size(); }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  const std::string& label(std::size_t i) const { return labels_.at(i); }
  std::optional<int> indexOf(std::string_view label) const;
  /// Throws UnknownLabel.
  int require(std::string_view label) const;

  /// True when every label is `O` or `B-X`/`I-X` with a non-empty type.
  bool isBio() const;

  bool operator==(const LabelSet& other) const { return labels_ == other.labels_; }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, int> index_;
};

struct CrfModel {
  LabelSet labels;
  Matrix sparseWeights;  // F x K, feature-major
  Matrix denseWeights;   // K x D
  Matrix transitions;    // K x K, [previous][next]
  std::vector<double> startScores;
  std::vector<double> endScores;
  double l2 = 0.0;

  CrfModel() = default;
  CrfModel(LabelSet labelSet, std::size_t numFeatures, std::size_t denseDim, double l2 = 0.0);

  std::size_t numLabels() const noexcept { return labels.size(); }
  std::size_t numFeatures() const noexcept { return sparseWeights.rows(); }
  std::size_t denseDim() const noexcept { return denseWeights.cols(); }

  /// Half the squared L2 norm of every CRF parameter.
  double halfSquaredNorm() const;
};

/// Per-position sparse features plus an optional dense input (L x D).
struct FeaturizedSequence {
  std::vector<SparseFeatureVector> sparse;
  Matrix dense;

  std::size_t size() const noexcept { return sparse.size(); }
};

using EmissionTable = Matrix;  // L x K

EmissionTable computeEmissions(const CrfModel& model, const FeaturizedSequence& seq);

using Path = std::vector<int>;

double pathScore(const CrfModel& model, const EmissionTable& emissions, std::span<const int> path);
double logPartition(const CrfModel& model, const EmissionTable& emissions);

struct Posteriors {
  double logPartition = 0.0;
  Matrix nodes;              // L x K
  std::vector<Matrix> edges; // L-1 matrices of K x K, [t][prev][next]
};

Posteriors posteriors(const CrfModel& model, const EmissionTable& emissions);
Matrix marginals(const CrfModel& model, const EmissionTable& emissions);

struct Decoded {
  Path path;
  double score = 0.0;
};

/// Max-product decoding; ties go to the lower label index.
Decoded viterbi(const CrfModel& model, const EmissionTable& emissions);
/// Viterbi restricted to BIO-valid paths: I-X only after B-X or I-X, never first.
Decoded constrainedViterbi(const CrfModel& model, const EmissionTable& emissions);
bool isBioValid(const LabelSet& labels, std::span<const int> path);

double nll(const CrfModel& model, const EmissionTable& emissions, std::span<const int> gold);

struct CrfGradient {
  Matrix sparse;       // F x K
  Matrix dense;        // K x D
  Matrix transitions;  // K x K
  std::vector<double> start;
  std::vector<double> end;
  Matrix denseInput;   // L x D: d loss / d e_dense(t)

  explicit CrfGradient(const CrfModel& model, std::size_t length = 0);
};

/// Gradient of nll with respect to every parameter group; returns the loss.
double nllGradient(const CrfModel& model, const FeaturizedSequence& seq, std::span<const int> gold,
                   CrfGradient& grad);

// ---------------------------------------------------------------------------

enum class Aggregation { Sum, Average };

std::optional<Aggregation> aggregationFromName(std::string_view name);
std::string_view aggregationName(Aggregation a);

struct SoftmaxClassifier {
  Matrix weights;  // C x E
  std::vector<double> bias;
  Aggregation aggregation = Aggregation::Sum;
  bool useBias = true;

  SoftmaxClassifier() = default;
  SoftmaxClassifier(std::size_t numClasses, std::size_t encodingDim, Aggregation aggregation,
                    bool useBias);

  std::size_t numClasses() const noexcept { return weights.rows(); }
  std::size_t encodingDim() const noexcept { return weights.cols(); }
};

/// tokenVectors is L x E.
std::vector<double> encode(const SoftmaxClassifier& clf, const Matrix& tokenVectors);
std::vector<double> classifyScores(const SoftmaxClassifier& clf, const Matrix& tokenVectors);

struct ClassifierGradient {
  Matrix weights;
  std::vector<double> bias;
  Matrix input;  // L x E

  explicit ClassifierGradient(const SoftmaxClassifier& clf, std::size_t length = 0);
};

double classifierNllGradient(const SoftmaxClassifier& clf, const Matrix& tokenVectors,
                             std::size_t goldClass, ClassifierGradient& grad);

/// log(sum(exp(values))) with max subtraction.
double logSumExp(std::span<const double> values);

}  // namespace scitag
