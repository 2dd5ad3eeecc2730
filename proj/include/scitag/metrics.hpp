#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "scitag/crf.hpp"

namespace scitag {

using LabelSeq = std::vector<std::string>;

/// Rows are gold labels, columns predicted labels.
struct ConfusionMatrix {
  LabelSet labels;
  std::vector<std::vector<std::size_t>> counts;

  std::size_t total() const;
  std::size_t diagonal() const;
  std::size_t at(const std::string& gold, const std::string& pred) const;
};

/// Token range [start, end], end inclusive.
struct Span {
  std::string type;
  std::size_t start = 0;
  std::size_t end = 0;

  auto operator<=>(const Span&) const = default;
};

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;  // gold count
  std::size_t predicted = 0;
  std::size_t correct = 0;

  bool operator==(const ClassScores&) const = default;
};

enum class ReportLevel { Item, Span };

struct MetricReport {
  ReportLevel level = ReportLevel::Item;
  std::map<std::string, ClassScores> perClass;
  double macroPrecision = 0.0;
  double macroRecall = 0.0;
  double macroF1 = 0.0;
  double microPrecision = 0.0;
  double microRecall = 0.0;
  double microF1 = 0.0;
  std::optional<double> accuracy;
  ConfusionMatrix confusion;
  std::size_t total = 0;  // scored items (tokens, documents or gold spans)

  bool operator==(const MetricReport& other) const;
};

/// Per-class P/R/F1 over single-label items; macro averages are taken over
/// the classes that occur in gold or prediction.
MetricReport classificationPRF(std::span<const std::string> gold, std::span<const std::string> pred);

double tokenAccuracy(std::span<const LabelSeq> gold, std::span<const LabelSeq> pred);

/// Chunks in conlleval style: a chunk opens at B-X, or at I-X whose
/// predecessor is not B-X/I-X of the same type.
std::vector<Span> extractSpans(std::span<const std::string> labels);

/// Runs of identical non-`O` labels, for flat (non-BIO) tag sets.
std::vector<Span> extractRuns(std::span<const std::string> labels);

/// Exact-match chunk scores (micro over all chunks plus per type) in
/// fractions; also carries token accuracy and the token confusion matrix.
MetricReport conllF1(std::span<const LabelSeq> gold, std::span<const LabelSeq> pred);

ConfusionMatrix confusionMatrix(std::span<const std::string> gold, std::span<const std::string> pred,
                                std::optional<LabelSet> labels = std::nullopt);

/// Fixed-width table; `percent` scales rates by 100 with two decimals.
std::string formatReport(const MetricReport& report, bool percent = false);
std::string formatConfusion(const ConfusionMatrix& matrix);

}  // namespace scitag
