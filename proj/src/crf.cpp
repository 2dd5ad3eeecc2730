#include "scitag/crf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "scitag/error.hpp"

namespace scitag {

// ---------------------------------------------------------------------------
// LabelSet

LabelSet::LabelSet(std::vector<std::string> labels) : labels_(std::move(labels)) {
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (!index_.emplace(labels_[i], static_cast<int>(i)).second) {
      throw Error(Errc::InvalidArgument, "duplicate label '" + labels_[i] + "'");
    }
  }
}

std::optional<int> LabelSet::indexOf(std::string_view label) const {
  auto it = index_.find(std::string(label));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

int LabelSet::require(std::string_view label) const {
  if (auto i = indexOf(label)) return *i;
  throw Error(Errc::UnknownLabel, "unknown label '" + std::string(label) + "'");
}

namespace {

// 'B' or 'I' for BIO tags, 'O' for outside, '\0' otherwise.
char bioPrefix(std::string_view label) {
  if (label == "O") return 'O';
  if (label.size() > 2 && (label[0] == 'B' || label[0] == 'I') && label[1] == '-') return label[0];
  return '\0';
}

}  // namespace

bool LabelSet::isBio() const {
  if (labels_.empty()) return false;
  return std::all_of(labels_.begin(), labels_.end(),
                     [](const std::string& l) { return bioPrefix(l) != '\0'; });
}

// ---------------------------------------------------------------------------
// CrfModel

CrfModel::CrfModel(LabelSet labelSet, std::size_t numFeatures, std::size_t denseDim, double l2In)
    : labels(std::move(labelSet)),
      sparseWeights(numFeatures, labels.size()),
      denseWeights(labels.size(), denseDim),
      transitions(labels.size(), labels.size()),
      startScores(labels.size(), 0.0),
      endScores(labels.size(), 0.0),
      l2(l2In) {}

double CrfModel::halfSquaredNorm() const {
  double sum = 0.0;
  auto add = [&sum](std::span<const double> v) {
    for (double x : v) sum += x * x;
  };
  add(sparseWeights.flat());
  add(denseWeights.flat());
  add(transitions.flat());
  add(startScores);
  add(endScores);
  return 0.5 * sum;
}

EmissionTable computeEmissions(const CrfModel& model, const FeaturizedSequence& seq) {
  const std::size_t L = seq.size();
  const std::size_t K = model.numLabels();
  const std::size_t D = model.denseDim();
  if (D > 0 && (seq.dense.rows() != L || seq.dense.cols() != D)) {
    throw Error(Errc::DimMismatch, "dense input shape does not match the model");
  }
  EmissionTable em(L, K);
  for (std::size_t t = 0; t < L; ++t) {
    const auto& fv = seq.sparse[t];
    for (std::size_t i = 0; i < fv.size(); ++i) {
      const auto f = static_cast<std::size_t>(fv.indices[i]);
      if (f >= model.numFeatures()) continue;  // features unseen at training time
      const auto w = model.sparseWeights.row(f);
      for (std::size_t y = 0; y < K; ++y) em(t, y) += fv.values[i] * w[y];
    }
    if (D > 0) {
      const auto e = seq.dense.row(t);
      for (std::size_t y = 0; y < K; ++y) {
        const auto w = model.denseWeights.row(y);
        double s = 0.0;
        for (std::size_t d = 0; d < D; ++d) s += w[d] * e[d];
        em(t, y) += s;
      }
    }
  }
  return em;
}

// ---------------------------------------------------------------------------
// Scoring and inference

double logSumExp(std::span<const double> values) {
  if (values.empty()) return -std::numeric_limits<double>::infinity();
  const double m = *std::max_element(values.begin(), values.end());
  double s = 0.0;
  for (double v : values) s += std::exp(v - m);
  return m + std::log(s);
}

namespace {

void checkEmissions(const CrfModel& model, const EmissionTable& emissions) {
  if (emissions.rows() == 0) throw Error(Errc::EmptySequence, "empty sequence");
  if (emissions.cols() != model.numLabels()) {
    throw Error(Errc::DimMismatch, "emission table has " + std::to_string(emissions.cols()) +
                                       " columns for " + std::to_string(model.numLabels()) +
                                       " labels");
  }
}

void checkPath(const CrfModel& model, const EmissionTable& emissions, std::span<const int> path) {
  if (path.size() != emissions.rows()) {
    throw Error(Errc::LengthMismatch, "path length " + std::to_string(path.size()) +
                                          " != sequence length " + std::to_string(emissions.rows()));
  }
  for (int y : path) {
    if (y < 0 || static_cast<std::size_t>(y) >= model.numLabels()) {
      throw Error(Errc::InvalidArgument, "label index " + std::to_string(y) + " out of range");
    }
  }
}

// alpha[t][y]: log-sum of prefix scores ending in y at t (emission included).
Matrix forward(const CrfModel& model, const EmissionTable& em) {
  const std::size_t L = em.rows();
  const std::size_t K = em.cols();
  Matrix alpha(L, K);
  std::vector<double> buf(K);
  for (std::size_t y = 0; y < K; ++y) alpha(0, y) = model.startScores[y] + em(0, y);
  for (std::size_t t = 1; t < L; ++t) {
    for (std::size_t y = 0; y < K; ++y) {
      for (std::size_t p = 0; p < K; ++p) buf[p] = alpha(t - 1, p) + model.transitions(p, y);
      alpha(t, y) = em(t, y) + logSumExp(buf);
    }
  }
  return alpha;
}

// beta[t][y]: log-sum of suffix scores after t given y at t (end score included).
Matrix backward(const CrfModel& model, const EmissionTable& em) {
  const std::size_t L = em.rows();
  const std::size_t K = em.cols();
  Matrix beta(L, K);
  std::vector<double> buf(K);
  for (std::size_t y = 0; y < K; ++y) beta(L - 1, y) = model.endScores[y];
  for (std::size_t t = L - 1; t-- > 0;) {
    for (std::size_t y = 0; y < K; ++y) {
      for (std::size_t n = 0; n < K; ++n) {
        buf[n] = model.transitions(y, n) + em(t + 1, n) + beta(t + 1, n);
      }
      beta(t, y) = logSumExp(buf);
    }
  }
  return beta;
}

double finalLogZ(const CrfModel& model, const Matrix& alpha) {
  const std::size_t L = alpha.rows();
  const std::size_t K = alpha.cols();
  std::vector<double> buf(K);
  for (std::size_t y = 0; y < K; ++y) buf[y] = alpha(L - 1, y) + model.endScores[y];
  return logSumExp(buf);
}

Decoded decode(const CrfModel& model, const EmissionTable& em, const Matrix* allowed,
               const std::vector<double>* startAllowed) {
  const std::size_t L = em.rows();
  const std::size_t K = em.cols();
  Matrix delta(L, K);
  std::vector<std::vector<int>> back(L, std::vector<int>(K, 0));
  for (std::size_t y = 0; y < K; ++y) {
    delta(0, y) = model.startScores[y] + em(0, y) + (startAllowed ? (*startAllowed)[y] : 0.0);
  }
  for (std::size_t t = 1; t < L; ++t) {
    for (std::size_t y = 0; y < K; ++y) {
      std::size_t best = 0;
      double bestScore = -std::numeric_limits<double>::infinity();
      for (std::size_t p = 0; p < K; ++p) {
        double s = delta(t - 1, p) + model.transitions(p, y);
        if (allowed) s += (*allowed)(p, y);
        if (s > bestScore) {
          bestScore = s;
          best = p;
        }
      }
      delta(t, y) = bestScore + em(t, y);
      back[t][y] = static_cast<int>(best);
    }
  }
  std::size_t last = 0;
  double bestFinal = -std::numeric_limits<double>::infinity();
  for (std::size_t y = 0; y < K; ++y) {
    const double s = delta(L - 1, y) + model.endScores[y];
    if (s > bestFinal) {
      bestFinal = s;
      last = y;
    }
  }
  Decoded out;
  out.path.assign(L, 0);
  out.path[L - 1] = static_cast<int>(last);
  for (std::size_t t = L - 1; t > 0; --t) {
    out.path[t - 1] = back[t][static_cast<std::size_t>(out.path[t])];
  }
  out.score = pathScore(model, em, out.path);
  return out;
}

}  // namespace

double pathScore(const CrfModel& model, const EmissionTable& emissions, std::span<const int> path) {
  checkEmissions(model, emissions);
  checkPath(model, emissions, path);
  const std::size_t L = path.size();
  auto at = [&](std::size_t t) { return static_cast<std::size_t>(path[t]); };
  double s = model.startScores[at(0)] + model.endScores[at(L - 1)];
  for (std::size_t t = 0; t < L; ++t) s += emissions(t, at(t));
  for (std::size_t t = 0; t + 1 < L; ++t) s += model.transitions(at(t), at(t + 1));
  return s;
}

double logPartition(const CrfModel& model, const EmissionTable& emissions) {
  checkEmissions(model, emissions);
  return finalLogZ(model, forward(model, emissions));
}

Posteriors posteriors(const CrfModel& model, const EmissionTable& emissions) {
  checkEmissions(model, emissions);
  const std::size_t L = emissions.rows();
  const std::size_t K = emissions.cols();
  const Matrix alpha = forward(model, emissions);
  const Matrix beta = backward(model, emissions);
  Posteriors post;
  post.logPartition = finalLogZ(model, alpha);
  post.nodes = Matrix(L, K);
  for (std::size_t t = 0; t < L; ++t) {
    for (std::size_t y = 0; y < K; ++y) {
      post.nodes(t, y) = std::exp(alpha(t, y) + beta(t, y) - post.logPartition);
    }
  }
  post.edges.reserve(L > 0 ? L - 1 : 0);
  for (std::size_t t = 0; t + 1 < L; ++t) {
    Matrix e(K, K);
    for (std::size_t p = 0; p < K; ++p) {
      for (std::size_t n = 0; n < K; ++n) {
        e(p, n) = std::exp(alpha(t, p) + model.transitions(p, n) + emissions(t + 1, n) +
                           beta(t + 1, n) - post.logPartition);
      }
    }
    post.edges.push_back(std::move(e));
  }
  return post;
}

Matrix marginals(const CrfModel& model, const EmissionTable& emissions) {
  return posteriors(model, emissions).nodes;
}

Decoded viterbi(const CrfModel& model, const EmissionTable& emissions) {
  checkEmissions(model, emissions);
  return decode(model, emissions, nullptr, nullptr);
}

bool isBioValid(const LabelSet& labels, std::span<const int> path) {
  for (std::size_t t = 0; t < path.size(); ++t) {
    const std::string& cur = labels.label(static_cast<std::size_t>(path[t]));
    if (bioPrefix(cur) != 'I') continue;
    if (t == 0) return false;
    const std::string& prev = labels.label(static_cast<std::size_t>(path[t - 1]));
    const char pp = bioPrefix(prev);
    if ((pp != 'B' && pp != 'I') || prev.substr(2) != cur.substr(2)) return false;
  }
  return true;
}

Decoded constrainedViterbi(const CrfModel& model, const EmissionTable& emissions) {
  checkEmissions(model, emissions);
  const LabelSet& ls = model.labels;
  if (!ls.isBio()) throw Error(Errc::NotBioLabelSet, "label set is not in BIO form");
  const std::size_t K = ls.size();
  Matrix allowed(K, K);
  std::vector<double> startAllowed(K, 0.0);
  for (std::size_t n = 0; n < K; ++n) {
    const std::string& next = ls.label(n);
    if (bioPrefix(next) != 'I') continue;
    startAllowed[n] = kNegInf;
    for (std::size_t p = 0; p < K; ++p) {
      const std::string& prev = ls.label(p);
      const char pp = bioPrefix(prev);
      const bool ok = (pp == 'B' || pp == 'I') && prev.substr(2) == next.substr(2);
      if (!ok) allowed(p, n) = kNegInf;
    }
  }
  return decode(model, emissions, &allowed, &startAllowed);
}

double nll(const CrfModel& model, const EmissionTable& emissions, std::span<const int> gold) {
  checkEmissions(model, emissions);
  checkPath(model, emissions, gold);
  double loss = logPartition(model, emissions) - pathScore(model, emissions, gold);
  if (model.l2 > 0.0) loss += model.l2 * model.halfSquaredNorm();
  return loss;
}

CrfGradient::CrfGradient(const CrfModel& model, std::size_t length)
    : sparse(model.numFeatures(), model.numLabels()),
      dense(model.numLabels(), model.denseDim()),
      transitions(model.numLabels(), model.numLabels()),
      start(model.numLabels(), 0.0),
      end(model.numLabels(), 0.0),
      denseInput(length, model.denseDim()) {}

double nllGradient(const CrfModel& model, const FeaturizedSequence& seq, std::span<const int> gold,
                   CrfGradient& grad) {
  const EmissionTable em = computeEmissions(model, seq);
  checkEmissions(model, em);
  checkPath(model, em, gold);
  const std::size_t L = em.rows();
  const std::size_t K = em.cols();
  const std::size_t D = model.denseDim();
  const Posteriors post = posteriors(model, em);

  // residual[t][y] = P(y_t = y) - [gold_t == y]
  Matrix residual = post.nodes;
  for (std::size_t t = 0; t < L; ++t) residual(t, static_cast<std::size_t>(gold[t])) -= 1.0;

  for (std::size_t t = 0; t < L; ++t) {
    const auto& fv = seq.sparse[t];
    for (std::size_t i = 0; i < fv.size(); ++i) {
      const auto f = static_cast<std::size_t>(fv.indices[i]);
      if (f >= model.numFeatures()) continue;
      auto g = grad.sparse.row(f);
      for (std::size_t y = 0; y < K; ++y) g[y] += fv.values[i] * residual(t, y);
    }
  }

  grad.denseInput = Matrix(L, D);
  if (D > 0) {
    for (std::size_t t = 0; t < L; ++t) {
      const auto e = seq.dense.row(t);
      auto gin = grad.denseInput.row(t);
      for (std::size_t y = 0; y < K; ++y) {
        const double r = residual(t, y);
        auto g = grad.dense.row(y);
        const auto w = model.denseWeights.row(y);
        for (std::size_t d = 0; d < D; ++d) {
          g[d] += r * e[d];
          gin[d] += r * w[d];
        }
      }
    }
  }

  for (std::size_t t = 0; t + 1 < L; ++t) {
    const Matrix& edge = post.edges[t];
    for (std::size_t p = 0; p < K; ++p) {
      for (std::size_t n = 0; n < K; ++n) grad.transitions(p, n) += edge(p, n);
    }
    grad.transitions(static_cast<std::size_t>(gold[t]), static_cast<std::size_t>(gold[t + 1])) -= 1.0;
  }
  for (std::size_t y = 0; y < K; ++y) {
    grad.start[y] += residual(0, y);
    grad.end[y] += residual(L - 1, y);
  }

  double loss = post.logPartition - pathScore(model, em, gold);
  if (model.l2 > 0.0) {
    loss += model.l2 * model.halfSquaredNorm();
    auto addScaled = [l2 = model.l2](std::span<double> g, std::span<const double> w) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += l2 * w[i];
    };
    addScaled(grad.sparse.flat(), model.sparseWeights.flat());
    addScaled(grad.dense.flat(), model.denseWeights.flat());
    addScaled(grad.transitions.flat(), model.transitions.flat());
    addScaled(grad.start, model.startScores);
    addScaled(grad.end, model.endScores);
  }
  return loss;
}

// ---------------------------------------------------------------------------
// Softmax classifier

std::optional<Aggregation> aggregationFromName(std::string_view name) {
  if (name == "sum") return Aggregation::Sum;
  if (name == "average") return Aggregation::Average;
  return std::nullopt;
}

std::string_view aggregationName(Aggregation a) {
  return a == Aggregation::Sum ? "sum" : "average";
}

SoftmaxClassifier::SoftmaxClassifier(std::size_t numClasses, std::size_t encodingDim,
                                     Aggregation agg, bool bias)
    : weights(numClasses, encodingDim), bias(numClasses, 0.0), aggregation(agg), useBias(bias) {
  if (numClasses < 2) throw Error(Errc::InvalidArgument, "a classifier needs at least 2 classes");
  if (encodingDim < 1) throw Error(Errc::InvalidArgument, "encoding dimension must be >= 1");
}

std::vector<double> encode(const SoftmaxClassifier& clf, const Matrix& tokenVectors) {
  if (tokenVectors.rows() == 0) throw Error(Errc::EmptyDocument, "document has no tokens");
  if (tokenVectors.cols() != clf.encodingDim()) {
    throw Error(Errc::DimMismatch, "token vectors have dimension " +
                                       std::to_string(tokenVectors.cols()) + ", classifier expects " +
                                       std::to_string(clf.encodingDim()));
  }
  std::vector<double> enc(clf.encodingDim(), 0.0);
  for (std::size_t t = 0; t < tokenVectors.rows(); ++t) {
    const auto row = tokenVectors.row(t);
    for (std::size_t d = 0; d < enc.size(); ++d) enc[d] += row[d];
  }
  if (clf.aggregation == Aggregation::Average) {
    for (double& v : enc) v /= static_cast<double>(tokenVectors.rows());
  }
  return enc;
}

namespace {

std::vector<double> softmaxOf(const SoftmaxClassifier& clf, const std::vector<double>& enc) {
  const std::size_t C = clf.numClasses();
  std::vector<double> logits(C, 0.0);
  for (std::size_t c = 0; c < C; ++c) {
    const auto w = clf.weights.row(c);
    double s = clf.useBias ? clf.bias[c] : 0.0;
    for (std::size_t d = 0; d < enc.size(); ++d) s += w[d] * enc[d];
    logits[c] = s;
  }
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double& v : logits) {
    v = std::exp(v - m);
    z += v;
  }
  for (double& v : logits) v /= z;
  return logits;
}

}  // namespace

std::vector<double> classifyScores(const SoftmaxClassifier& clf, const Matrix& tokenVectors) {
  return softmaxOf(clf, encode(clf, tokenVectors));
}

ClassifierGradient::ClassifierGradient(const SoftmaxClassifier& clf, std::size_t length)
    : weights(clf.numClasses(), clf.encodingDim()),
      bias(clf.numClasses(), 0.0),
      input(length, clf.encodingDim()) {}

double classifierNllGradient(const SoftmaxClassifier& clf, const Matrix& tokenVectors,
                             std::size_t goldClass, ClassifierGradient& grad) {
  if (goldClass >= clf.numClasses()) {
    throw Error(Errc::InvalidArgument, "gold class " + std::to_string(goldClass) + " out of range");
  }
  const std::vector<double> enc = encode(clf, tokenVectors);
  std::vector<double> p = softmaxOf(clf, enc);
  // Computed from the log-softmax so tiny probabilities do not underflow to -inf.
  const std::size_t C = clf.numClasses();
  std::vector<double> logits(C, 0.0);
  for (std::size_t c = 0; c < C; ++c) {
    const auto w = clf.weights.row(c);
    double s = clf.useBias ? clf.bias[c] : 0.0;
    for (std::size_t d = 0; d < enc.size(); ++d) s += w[d] * enc[d];
    logits[c] = s;
  }
  const double loss = logSumExp(logits) - logits[goldClass];

  p[goldClass] -= 1.0;  // p - onehot(gold)
  const std::size_t E = clf.encodingDim();
  for (std::size_t c = 0; c < C; ++c) {
    auto g = grad.weights.row(c);
    for (std::size_t d = 0; d < E; ++d) g[d] += p[c] * enc[d];
    if (clf.useBias) grad.bias[c] += p[c];
  }

  const std::size_t L = tokenVectors.rows();
  const double scale = clf.aggregation == Aggregation::Sum ? 1.0 : 1.0 / static_cast<double>(L);
  std::vector<double> dEnc(E, 0.0);
  for (std::size_t c = 0; c < C; ++c) {
    const auto w = clf.weights.row(c);
    for (std::size_t d = 0; d < E; ++d) dEnc[d] += w[d] * p[c];
  }
  grad.input = Matrix(L, E);
  for (std::size_t t = 0; t < L; ++t) {
    auto row = grad.input.row(t);
    for (std::size_t d = 0; d < E; ++d) row[d] = dEnc[d] * scale;
  }
  return loss;
}

}  // namespace scitag
