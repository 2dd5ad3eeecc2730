#include "scitag/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include "scitag/error.hpp"

namespace scitag {

std::size_t ConfusionMatrix::total() const {
  std::size_t n = 0;
  for (const auto& row : counts) {
    for (std::size_t c : row) n += c;
  }
  return n;
}

std::size_t ConfusionMatrix::diagonal() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) n += counts[i][i];
  return n;
}

std::size_t ConfusionMatrix::at(const std::string& gold, const std::string& pred) const {
  const auto g = labels.indexOf(gold);
  const auto p = labels.indexOf(pred);
  if (!g || !p) return 0;
  return counts[static_cast<std::size_t>(*g)][static_cast<std::size_t>(*p)];
}

bool MetricReport::operator==(const MetricReport& other) const {
  return level == other.level && perClass == other.perClass &&
         macroPrecision == other.macroPrecision && macroRecall == other.macroRecall &&
         macroF1 == other.macroF1 && microPrecision == other.microPrecision &&
         microRecall == other.microRecall && microF1 == other.microF1 &&
         accuracy == other.accuracy && confusion.labels == other.confusion.labels &&
         confusion.counts == other.confusion.counts && total == other.total;
}

namespace {

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

double harmonic(double p, double r) { return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r); }

void finishClass(ClassScores& s) {
  s.precision = ratio(s.correct, s.predicted);
  s.recall = ratio(s.correct, s.support);
  s.f1 = harmonic(s.precision, s.recall);
}

void macroAverage(MetricReport& r) {
  if (r.perClass.empty()) return;
  double p = 0.0, rc = 0.0, f = 0.0;
  for (const auto& [_, s] : r.perClass) {
    p += s.precision;
    rc += s.recall;
    f += s.f1;
  }
  const auto n = static_cast<double>(r.perClass.size());
  r.macroPrecision = p / n;
  r.macroRecall = rc / n;
  r.macroF1 = f / n;
}

void checkAligned(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw Error(Errc::LengthMismatch, std::string(what) + ": " + std::to_string(a) + " gold vs " +
                                          std::to_string(b) + " predicted");
  }
}

// Parsed BIO tag: prefix 'O', 'B' or 'I' and the chunk type.
struct Tag {
  char prefix;
  std::string_view type;
};

Tag parseTag(const std::string& label, std::size_t index) {
  if (label == "O") return {'O', {}};
  if (label.size() > 2 && (label[0] == 'B' || label[0] == 'I') && label[1] == '-') {
    return {label[0], std::string_view(label).substr(2)};
  }
  throw Error(Errc::UnknownTagFormat,
              "label '" + label + "' at index " + std::to_string(index) + " is not O, B-X or I-X",
              index);
}

}  // namespace

ConfusionMatrix confusionMatrix(std::span<const std::string> gold, std::span<const std::string> pred,
                                std::optional<LabelSet> labels) {
  checkAligned(gold.size(), pred.size(), "confusion matrix");
  ConfusionMatrix m;
  if (labels) {
    m.labels = *labels;
  } else {
    std::set<std::string> all(gold.begin(), gold.end());
    all.insert(pred.begin(), pred.end());
    m.labels = LabelSet(std::vector<std::string>(all.begin(), all.end()));
  }
  const std::size_t K = m.labels.size();
  m.counts.assign(K, std::vector<std::size_t>(K, 0));
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const auto g = static_cast<std::size_t>(m.labels.require(gold[i]));
    const auto p = static_cast<std::size_t>(m.labels.require(pred[i]));
    ++m.counts[g][p];
  }
  return m;
}

MetricReport classificationPRF(std::span<const std::string> gold, std::span<const std::string> pred) {
  checkAligned(gold.size(), pred.size(), "classification metrics");
  if (gold.empty()) throw Error(Errc::Empty, "no items to score");
  MetricReport r;
  r.level = ReportLevel::Item;
  r.total = gold.size();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    ++r.perClass[gold[i]].support;
    ++r.perClass[pred[i]].predicted;
    if (gold[i] == pred[i]) {
      ++r.perClass[gold[i]].correct;
      ++correct;
    }
  }
  for (auto& [_, s] : r.perClass) finishClass(s);
  macroAverage(r);
  r.microPrecision = ratio(correct, gold.size());
  r.microRecall = r.microPrecision;
  r.microF1 = r.microPrecision;
  r.accuracy = r.microPrecision;
  r.confusion = confusionMatrix(gold, pred);
  return r;
}

double tokenAccuracy(std::span<const LabelSeq> gold, std::span<const LabelSeq> pred) {
  checkAligned(gold.size(), pred.size(), "token accuracy");
  std::size_t total = 0;
  std::size_t correct = 0;
  for (std::size_t s = 0; s < gold.size(); ++s) {
    checkAligned(gold[s].size(), pred[s].size(), "token accuracy sequence");
    for (std::size_t t = 0; t < gold[s].size(); ++t) {
      ++total;
      if (gold[s][t] == pred[s][t]) ++correct;
    }
  }
  return ratio(correct, total);
}

std::vector<Span> extractSpans(std::span<const std::string> labels) {
  std::vector<Span> spans;
  Tag prev{'O', {}};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const Tag cur = parseTag(labels[i], i);
    const bool continues = cur.prefix == 'I' && (prev.prefix == 'B' || prev.prefix == 'I') &&
                           prev.type == cur.type;
    if (continues) {
      spans.back().end = i;
    } else if (cur.prefix != 'O') {
      spans.push_back({std::string(cur.type), i, i});
    }
    prev = cur;
  }
  return spans;
}

std::vector<Span> extractRuns(std::span<const std::string> labels) {
  std::vector<Span> spans;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == "O") continue;
    if (!spans.empty() && spans.back().end + 1 == i && spans.back().type == labels[i]) {
      spans.back().end = i;
    } else {
      spans.push_back({labels[i], i, i});
    }
  }
  return spans;
}

MetricReport conllF1(std::span<const LabelSeq> gold, std::span<const LabelSeq> pred) {
  checkAligned(gold.size(), pred.size(), "chunk metrics");
  MetricReport r;
  r.level = ReportLevel::Span;
  std::size_t goldSpans = 0, predSpans = 0, correctSpans = 0;
  std::vector<std::string> flatGold, flatPred;
  for (std::size_t s = 0; s < gold.size(); ++s) {
    checkAligned(gold[s].size(), pred[s].size(), "chunk metrics sequence");
    const auto g = extractSpans(gold[s]);
    const auto p = extractSpans(pred[s]);
    const std::set<Span> goldSet(g.begin(), g.end());
    for (const auto& span : g) ++r.perClass[span.type].support;
    for (const auto& span : p) {
      auto& cls = r.perClass[span.type];
      ++cls.predicted;
      if (goldSet.contains(span)) {
        ++cls.correct;
        ++correctSpans;
      }
    }
    goldSpans += g.size();
    predSpans += p.size();
    flatGold.insert(flatGold.end(), gold[s].begin(), gold[s].end());
    flatPred.insert(flatPred.end(), pred[s].begin(), pred[s].end());
  }
  for (auto& [_, s] : r.perClass) finishClass(s);
  macroAverage(r);
  r.microPrecision = ratio(correctSpans, predSpans);
  r.microRecall = ratio(correctSpans, goldSpans);
  r.microF1 = harmonic(r.microPrecision, r.microRecall);
  r.total = goldSpans;
  r.accuracy = tokenAccuracy(gold, pred);
  r.confusion = confusionMatrix(flatGold, flatPred);
  return r;
}

// ---------------------------------------------------------------------------
// Text rendering

namespace {

std::string rate(double v, bool percent) {
  char buf[32];
  if (percent) {
    std::snprintf(buf, sizeof buf, "%10.2f", v * 100.0);
  } else {
    std::snprintf(buf, sizeof buf, "%10.4f", v);
  }
  return buf;
}

std::string padRight(const std::string& s, std::size_t width) {
  return s.size() >= width ? s + " " : s + std::string(width - s.size(), ' ');
}

std::string count(std::size_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%10zu", n);
  return buf;
}

}  // namespace

std::string formatReport(const MetricReport& report, bool percent) {
  std::size_t width = 12;
  for (const auto& [label, _] : report.perClass) width = std::max(width, label.size() + 2);
  std::string out = padRight(report.level == ReportLevel::Span ? "type" : "label", width) +
                    " precision    recall        f1   support\n";
  std::size_t predicted = 0;
  for (const auto& [label, s] : report.perClass) {
    out += padRight(label, width) + rate(s.precision, percent) + rate(s.recall, percent) +
           rate(s.f1, percent) + count(s.support) + "\n";
    predicted += s.predicted;
  }
  std::size_t support = 0;
  for (const auto& [_, s] : report.perClass) support += s.support;
  out += padRight("macro avg", width) + rate(report.macroPrecision, percent) +
         rate(report.macroRecall, percent) + rate(report.macroF1, percent) + count(support) + "\n";
  out += padRight("micro avg", width) + rate(report.microPrecision, percent) +
         rate(report.microRecall, percent) + rate(report.microF1, percent) + count(support) + "\n";
  if (report.accuracy) {
    out += padRight("accuracy", width) + std::string(20, ' ') + rate(*report.accuracy, percent) +
           count(report.confusion.total()) + "\n";
  }
  return out;
}

std::string formatConfusion(const ConfusionMatrix& matrix) {
  const auto& labels = matrix.labels.labels();
  std::size_t width = 8;
  for (const auto& l : labels) width = std::max(width, l.size() + 2);
  std::string out = padRight("gold\\pred", width);
  for (const auto& l : labels) {
    out += std::string(width - std::min(width, l.size()), ' ') + l;
  }
  out += "\n";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out += padRight(labels[i], width);
    for (std::size_t j = 0; j < labels.size(); ++j) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%*zu", static_cast<int>(width), matrix.counts[i][j]);
      out += buf;
    }
    out += "\n";
  }
  return out;
}

}  // namespace scitag
