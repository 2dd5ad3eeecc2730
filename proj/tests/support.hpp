#pragma once
// Independent oracles and helpers shared by the unit and acceptance suites.
// Nothing here calls into the forward-backward or Viterbi code under test.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "scitag/crf.hpp"
#include "scitag/error.hpp"
#include "scitag/rng.hpp"

namespace testing {

namespace fs = std::filesystem;

inline fs::path fixtures() { return SCITAG_FIXTURES_DIR; }
inline fs::path goldenDir() { return SCITAG_GOLDEN_DIR; }
inline fs::path sourceDir() { return SCITAG_SOURCE_DIR; }

class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static std::uint64_t counter = 0;
    scitag::Rng rng(static_cast<std::uint64_t>(::getpid()) * 1000003ULL + counter++);
    path_ = fs::temp_directory_path() / ("scitag-" + tag + "-" + std::to_string(rng.next() % 1000000000));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const fs::path& p, const std::string& content) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << content;
}

// Golden comparison. With SCITAG_UPDATE_GOLDEN set the file is rewritten and
// the comparison trivially passes.
inline bool matchesGolden(const std::string& name, const std::string& actual) {
  const fs::path file = goldenDir() / name;
  if (const char* u = std::getenv("SCITAG_UPDATE_GOLDEN"); u && *u) {
    spit(file, actual);
    return true;
  }
  return fs::exists(file) && slurp(file) == actual;
}

// Error kind thrown by fn, or nullopt when it returns normally.
template <typename Fn>
std::optional<scitag::Errc> errcOf(Fn&& fn) {
  try {
    fn();
  } catch (const scitag::Error& e) {
    return e.code();
  }
  return std::nullopt;
}

template <typename Fn>
std::optional<scitag::Error> errorOf(Fn&& fn) {
  try {
    fn();
  } catch (const scitag::Error& e) {
    return e;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Random CRF instances

struct CrfInstance {
  scitag::CrfModel model;
  scitag::FeaturizedSequence seq;
  std::vector<int> gold;
};

inline scitag::LabelSet plainLabels(std::size_t k) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < k; ++i) names.push_back("L" + std::to_string(i));
  return scitag::LabelSet(names);
}

inline void fillUniform(std::span<double> xs, scitag::Rng& rng, double lo, double hi) {
  for (double& x : xs) x = rng.uniform(lo, hi);
}

inline CrfInstance randomCrf(scitag::Rng& rng, std::size_t L, std::size_t K, std::size_t F,
                             std::size_t D, double l2 = 0.0, double range = 2.0,
                             std::optional<scitag::LabelSet> labels = std::nullopt) {
  CrfInstance inst;
  inst.model = scitag::CrfModel(labels ? *labels : plainLabels(K), F, D, l2);
  fillUniform(inst.model.sparseWeights.flat(), rng, -range, range);
  fillUniform(inst.model.denseWeights.flat(), rng, -range, range);
  fillUniform(inst.model.transitions.flat(), rng, -range, range);
  fillUniform(inst.model.startScores, rng, -range, range);
  fillUniform(inst.model.endScores, rng, -range, range);
  inst.seq.dense = scitag::Matrix(L, D);
  fillUniform(inst.seq.dense.flat(), rng, -1.0, 1.0);
  for (std::size_t t = 0; t < L; ++t) {
    scitag::SparseFeatureVector v;
    for (std::size_t f = 0; f < F; ++f) {
      if (rng.below(2) == 0) {
        v.indices.push_back(static_cast<int>(f));
        v.values.push_back(rng.below(3) == 0 ? rng.uniform(-1.0, 1.0) : 1.0);
      }
    }
    inst.seq.sparse.push_back(std::move(v));
    inst.gold.push_back(static_cast<int>(rng.below(K)));
  }
  return inst;
}

// Random emission table plus parameters, no features (for inference oracles).
inline std::pair<scitag::CrfModel, scitag::Matrix> randomScored(scitag::Rng& rng, std::size_t L,
                                                                std::size_t K, double range = 2.0) {
  scitag::CrfModel model(plainLabels(K), 0, 0);
  fillUniform(model.transitions.flat(), rng, -range, range);
  fillUniform(model.startScores, rng, -range, range);
  fillUniform(model.endScores, rng, -range, range);
  scitag::Matrix em(L, K);
  fillUniform(em.flat(), rng, -range, range);
  return {std::move(model), std::move(em)};
}

// ---------------------------------------------------------------------------
// Exhaustive path enumeration

struct Enumeration {
  double logZ = 0.0;
  std::vector<std::vector<double>> nodes;               // L x K
  std::vector<std::vector<std::vector<double>>> edges;  // L-1 x K x K
  std::vector<int> best;                                // first maximum in lexicographic order
  double bestScore = -INFINITY;
  std::size_t paths = 0;
};

inline double referenceScore(const scitag::CrfModel& m, const scitag::Matrix& em,
                             const std::vector<int>& y) {
  double s = m.startScores[y.front()] + m.endScores[y.back()];
  for (std::size_t t = 0; t < y.size(); ++t) s += em(t, y[t]);
  for (std::size_t t = 0; t + 1 < y.size(); ++t) s += m.transitions(y[t], y[t + 1]);
  return s;
}

// Visits every path of length L over K labels in lexicographic order.
inline void forEachPath(std::size_t L, std::size_t K, const std::function<void(const std::vector<int>&)>& fn) {
  std::vector<int> y(L, 0);
  while (true) {
    fn(y);
    std::size_t i = L;
    while (i > 0) {
      --i;
      if (static_cast<std::size_t>(++y[i]) < K) break;
      y[i] = 0;
      if (i == 0) return;
    }
    if (L == 0) return;
  }
}

inline Enumeration enumerate(const scitag::CrfModel& m, const scitag::Matrix& em,
                             const std::function<bool(const std::vector<int>&)>& admit = {}) {
  const std::size_t L = em.rows(), K = em.cols();
  Enumeration e;
  std::vector<std::pair<std::vector<int>, double>> all;
  forEachPath(L, K, [&](const std::vector<int>& y) {
    if (admit && !admit(y)) return;
    const double s = referenceScore(m, em, y);
    all.emplace_back(y, s);
    if (s > e.bestScore) {
      e.bestScore = s;
      e.best = y;
    }
  });
  e.paths = all.size();
  double mx = -INFINITY;
  for (const auto& [y, s] : all) mx = std::max(mx, s);
  long double z = 0.0L;
  for (const auto& [y, s] : all) z += std::exp(static_cast<long double>(s - mx));
  e.logZ = mx + static_cast<double>(std::log(z));
  e.nodes.assign(L, std::vector<double>(K, 0.0));
  e.edges.assign(L ? L - 1 : 0, std::vector<std::vector<double>>(K, std::vector<double>(K, 0.0)));
  for (const auto& [y, s] : all) {
    const double p = std::exp(s - e.logZ);
    for (std::size_t t = 0; t < L; ++t) e.nodes[t][y[t]] += p;
    for (std::size_t t = 0; t + 1 < L; ++t) e.edges[t][y[t]][y[t + 1]] += p;
  }
  return e;
}

inline bool bioAdmissible(const scitag::LabelSet& labels, const std::vector<int>& y) {
  for (std::size_t t = 0; t < y.size(); ++t) {
    const std::string& cur = labels.label(y[t]);
    if (cur.rfind("I-", 0) != 0) continue;
    if (t == 0) return false;
    const std::string& prev = labels.label(y[t - 1]);
    if (prev.size() < 2 || prev.substr(2) != cur.substr(2) || prev[0] == 'O') return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Central finite differences

struct FdResult {
  std::size_t checked = 0;
  std::size_t failed = 0;
  double worstRel = 0.0;
  std::string worstWhere;
};

inline bool closeRel(double analytic, double numeric, double rel, double absFloor) {
  const double diff = std::fabs(analytic - numeric);
  return diff <= absFloor || diff <= rel * std::max(std::fabs(analytic), std::fabs(numeric));
}

// Perturbs every coordinate of `params` and compares with `analytic`.
inline void checkCoordinates(std::span<double> params, std::span<const double> analytic,
                             const std::function<double()>& loss, const std::string& group,
                             FdResult& out, double h = 1e-5, double rel = 1e-4,
                             double absFloor = 1e-7) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + h;
    const double up = loss();
    params[i] = saved - h;
    const double down = loss();
    params[i] = saved;
    const double numeric = (up - down) / (2.0 * h);
    ++out.checked;
    const double diff = std::fabs(analytic[i] - numeric);
    const double scale = std::max(std::fabs(analytic[i]), std::fabs(numeric));
    const double r = scale > 0 ? diff / scale : 0.0;
    if (!closeRel(analytic[i], numeric, rel, absFloor)) {
      ++out.failed;
      if (r > out.worstRel) {
        out.worstRel = r;
        out.worstWhere = group + "[" + std::to_string(i) + "] analytic " + std::to_string(analytic[i]) +
                         " numeric " + std::to_string(numeric);
      }
    }
  }
}

inline FdResult checkCrfGradient(CrfInstance& inst) {
  FdResult res;
  scitag::CrfGradient g(inst.model, inst.seq.size());
  scitag::nllGradient(inst.model, inst.seq, inst.gold, g);
  auto loss = [&] {
    return scitag::nll(inst.model, scitag::computeEmissions(inst.model, inst.seq), inst.gold);
  };
  auto& m = inst.model;
  checkCoordinates(m.sparseWeights.flat(), g.sparse.flat(), loss, "sparse", res);
  checkCoordinates(m.denseWeights.flat(), g.dense.flat(), loss, "dense", res);
  checkCoordinates(m.transitions.flat(), g.transitions.flat(), loss, "transitions", res);
  checkCoordinates(m.startScores, g.start, loss, "start", res);
  checkCoordinates(m.endScores, g.end, loss, "end", res);
  checkCoordinates(inst.seq.dense.flat(), g.denseInput.flat(), loss, "input", res);
  return res;
}

struct ClassifierInstance {
  scitag::SoftmaxClassifier clf;
  scitag::Matrix tokens;
  std::size_t gold = 0;
};

inline ClassifierInstance randomClassifier(scitag::Rng& rng) {
  ClassifierInstance c;
  const std::size_t C = 2 + rng.below(4), E = 1 + rng.below(5), L = 1 + rng.below(6);
  const auto agg = rng.below(2) ? scitag::Aggregation::Sum : scitag::Aggregation::Average;
  c.clf = scitag::SoftmaxClassifier(C, E, agg, rng.below(4) != 0);
  fillUniform(c.clf.weights.flat(), rng, -2.0, 2.0);
  fillUniform(c.clf.bias, rng, -2.0, 2.0);
  c.tokens = scitag::Matrix(L, E);
  fillUniform(c.tokens.flat(), rng, -1.0, 1.0);
  c.gold = rng.below(C);
  return c;
}

inline FdResult checkClassifierGradient(ClassifierInstance& c) {
  FdResult res;
  scitag::ClassifierGradient g(c.clf, c.tokens.rows());
  scitag::classifierNllGradient(c.clf, c.tokens, c.gold, g);
  auto loss = [&] { return -std::log(scitag::classifyScores(c.clf, c.tokens)[c.gold]); };
  checkCoordinates(c.clf.weights.flat(), g.weights.flat(), loss, "weights", res);
  if (c.clf.useBias) checkCoordinates(c.clf.bias, g.bias, loss, "bias", res);
  checkCoordinates(c.tokens.flat(), g.input.flat(), loss, "input", res);
  return res;
}

// ---------------------------------------------------------------------------
// Random DAGs for the planner

struct RandomDag {
  std::vector<std::string> ids;
  std::vector<std::pair<std::size_t, std::size_t>> edges;  // (dependency, dependent)
};

inline RandomDag randomDag(scitag::Rng& rng, std::size_t n, double density) {
  RandomDag d;
  // Ids are shuffled relative to the hidden topological order so that the
  // lexicographic tie-break cannot accidentally produce a valid order.
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
  for (std::size_t i = 0; i < n; ++i) d.ids.push_back("n" + std::to_string(perm[i]));
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      if (rng.uniform01() < density) d.edges.emplace_back(a, b);
    }
  }
  return d;
}

}  // namespace testing
