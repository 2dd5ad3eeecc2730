#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "scitag/metrics.hpp"
#include "support.hpp"

using namespace scitag;
using doctest::Approx;
using testing::errcOf;

namespace {

using Labels = std::vector<std::string>;

// Token, gold and predicted label per line; blank lines separate sequences.
std::pair<std::vector<LabelSeq>, std::vector<LabelSeq>> readPairs(const std::filesystem::path& p) {
  std::vector<LabelSeq> gold(1), pred(1);
  std::istringstream in(testing::slurp(p));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) {
      if (!gold.back().empty()) {
        gold.emplace_back();
        pred.emplace_back();
      }
      continue;
    }
    std::istringstream cols(line);
    std::string tok, g, q;
    cols >> tok >> g >> q;
    gold.back().push_back(g);
    pred.back().push_back(q);
  }
  if (gold.back().empty()) {
    gold.pop_back();
    pred.pop_back();
  }
  return {gold, pred};
}

}  // namespace

TEST_CASE("classification PRF") {
  const Labels gold = {"a", "a", "b"}, pred = {"a", "b", "b"};
  const auto r = classificationPRF(gold, pred);
  CHECK(r.perClass.at("a").f1 == Approx(2.0 / 3).epsilon(1e-15));
  CHECK(r.perClass.at("b").f1 == Approx(2.0 / 3).epsilon(1e-15));
  CHECK(r.macroF1 == Approx(0.6667).epsilon(1e-4));
  CHECK(r.perClass.at("a").support == 2);
  CHECK(r.accuracy == Approx(2.0 / 3));

  const auto perfect = classificationPRF(gold, gold);
  CHECK(perfect.macroF1 == 1.0);
  CHECK(perfect.microF1 == 1.0);
  CHECK(perfect.accuracy == 1.0);

  const Labels disjoint = {"c", "c", "d"};
  CHECK(classificationPRF(gold, disjoint).macroF1 == 0.0);

  CHECK(errcOf([&] { classificationPRF(gold, Labels{"a"}); }) == Errc::LengthMismatch);
  CHECK(errcOf([] { classificationPRF(Labels{}, Labels{}); }) == Errc::Empty);

  SUBCASE("macro F1 is invariant under consistent renaming") {
    Rng rng(3);
    const Labels names = {"p", "q", "r", "s"};
    for (int iter = 0; iter < 50; ++iter) {
      Labels g, p, g2, p2;
      std::vector<std::size_t> perm = {0, 1, 2, 3};
      for (std::size_t i = 4; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
      for (std::uint64_t i = 0, n = 1 + rng.below(20); i < n; ++i) {
        const auto a = rng.below(4), b = rng.below(4);
        g.push_back(names[a]);
        p.push_back(names[b]);
        g2.push_back(names[perm[a]]);
        p2.push_back(names[perm[b]]);
      }
      const auto r1 = classificationPRF(g, p), r2 = classificationPRF(g2, p2);
      CHECK(r1.macroF1 == Approx(r2.macroF1).epsilon(1e-14));
      CHECK(r1.microF1 == Approx(*r1.accuracy).epsilon(1e-14));
      for (double v : {r1.macroPrecision, r1.macroRecall, r1.macroF1, r1.microF1}) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
      }
    }
  }
}

TEST_CASE("token accuracy") {
  CHECK(tokenAccuracy(std::vector<LabelSeq>{{"A", "B"}}, std::vector<LabelSeq>{{"A", "A"}}) == 0.5);
  const std::vector<LabelSeq> g = {{"A"}, {"A", "B", "C"}};
  CHECK(tokenAccuracy(g, g) == 1.0);
  CHECK(tokenAccuracy(g, std::vector<LabelSeq>{{"X"}, {"A", "B", "C"}}) == 0.75);
  CHECK(errcOf([&] { tokenAccuracy(g, std::vector<LabelSeq>{{"A"}, {"A"}}); }) == Errc::LengthMismatch);
}

TEST_CASE("span extraction") {
  CHECK(extractSpans(Labels{"B-PER", "I-PER", "O", "B-LOC"}) ==
        std::vector<Span>{{"PER", 0, 1}, {"LOC", 3, 3}});
  CHECK(extractSpans(Labels{"I-PER"}) == std::vector<Span>{{"PER", 0, 0}});
  CHECK(extractSpans(Labels{"B-PER", "I-LOC"}) == std::vector<Span>{{"PER", 0, 0}, {"LOC", 1, 1}});
  CHECK(extractSpans(Labels{"B-PER", "B-PER", "I-PER"}) == std::vector<Span>{{"PER", 0, 0}, {"PER", 1, 2}});
  CHECK(extractSpans(Labels{"O", "I-X", "I-X", "O", "I-X"}) == std::vector<Span>{{"X", 1, 2}, {"X", 4, 4}});
  CHECK(extractSpans(Labels{}).empty());

  auto bad = testing::errorOf([] { extractSpans(Labels{"O", "author"}); });
  REQUIRE(bad);
  CHECK(bad->code() == Errc::UnknownTagFormat);
  CHECK(bad->where() == std::optional<std::size_t>{1});

  CHECK(extractRuns(Labels{"author", "author", "title", "O", "title"}) ==
        std::vector<Span>{{"author", 0, 1}, {"title", 2, 2}, {"title", 4, 4}});

  SUBCASE("spans are ordered, disjoint and never cover O") {
    Rng rng(21);
    const Labels alphabet = {"O", "B-A", "I-A", "B-B", "I-B"};
    for (int iter = 0; iter < 300; ++iter) {
      Labels seq;
      for (std::uint64_t i = 0, n = rng.below(12); i < n; ++i) seq.push_back(alphabet[rng.below(5)]);
      const auto spans = extractSpans(seq);
      for (std::size_t i = 0; i < spans.size(); ++i) {
        CHECK(spans[i].start <= spans[i].end);
        if (i) CHECK(spans[i - 1].end < spans[i].start);
        for (std::size_t t = spans[i].start; t <= spans[i].end; ++t) {
          CHECK(seq[t] != "O");
          CHECK(seq[t].substr(2) == spans[i].type);
        }
      }
    }
  }
}

TEST_CASE("conll span F1") {
  const std::vector<LabelSeq> gold = {{"B-PER", "I-PER", "O", "B-LOC"}};
  const std::vector<LabelSeq> pred = {{"B-PER", "I-PER", "O", "O"}};
  const auto r = conllF1(gold, pred);
  CHECK(r.level == ReportLevel::Span);
  CHECK(r.microPrecision == 1.0);
  CHECK(r.microRecall == 0.5);
  CHECK(r.microF1 == Approx(2.0 / 3).epsilon(1e-15));
  CHECK(r.microF1 == Approx(0.6667).epsilon(1e-4));
  CHECK(r.accuracy == 0.75);

  CHECK(conllF1(gold, gold).microF1 == 1.0);

  const std::vector<LabelSeq> allO = {{"O", "O", "O", "O"}};
  const auto none = conllF1(gold, allO);
  CHECK(none.microPrecision == 0.0);
  CHECK(none.microRecall == 0.0);
  CHECK(none.microF1 == 0.0);

  CHECK(errcOf([&] { conllF1(gold, std::vector<LabelSeq>{}); }) == Errc::LengthMismatch);

  SUBCASE("F1 is one exactly when every span set agrees") {
    Rng rng(55);
    const Labels alphabet = {"O", "B-A", "I-A", "B-B", "I-B"};
    for (int iter = 0; iter < 200; ++iter) {
      std::vector<LabelSeq> g(3), p(3);
      bool same = true;
      for (std::size_t s = 0; s < 3; ++s) {
        for (std::uint64_t i = 0, n = 1 + rng.below(6); i < n; ++i) {
          g[s].push_back(alphabet[rng.below(5)]);
          p[s].push_back(rng.below(3) ? g[s].back() : alphabet[rng.below(5)]);
        }
        same = same && extractSpans(g[s]) == extractSpans(p[s]);
      }
      const auto rep = conllF1(g, p);
      bool anySpan = false;
      for (const auto& s : g) anySpan = anySpan || !extractSpans(s).empty();
      if (anySpan) CHECK((rep.microF1 == 1.0) == same);
    }
  }
}

TEST_CASE("golden corpus of thirty sequences") {
  // Counts were cross-checked once against seqeval's conlleval-compatible
  // default mode on the same file.
  const auto [gold, pred] = readPairs(testing::fixtures() / "golden30.conll");
  REQUIRE(gold.size() == 30);
  const auto r = conllF1(gold, pred);
  std::size_t goldSpans = 0, predSpans = 0, correct = 0;
  for (const auto& [type, s] : r.perClass) {
    goldSpans += s.support;
    predSpans += s.predicted;
    correct += s.correct;
  }
  CHECK(goldSpans == 50);
  CHECK(predSpans == 67);
  CHECK(correct == 37);
  CHECK(r.microPrecision == Approx(37.0 / 67).epsilon(1e-15));
  CHECK(r.microRecall == Approx(37.0 / 50).epsilon(1e-15));
  CHECK(r.microF1 == Approx(0.6324786325).epsilon(1e-10));
  CHECK(r.macroF1 == Approx(0.6347619048).epsilon(1e-10));
  CHECK(*r.accuracy == Approx(159.0 / 185).epsilon(1e-15));

  const auto& loc = r.perClass.at("LOC");
  CHECK(loc.correct == 12);
  CHECK(loc.predicted == 18);
  CHECK(loc.support == 14);
  const auto& org = r.perClass.at("ORG");
  CHECK(org.correct == 9);
  CHECK(org.predicted == 19);
  CHECK(org.support == 16);
  CHECK(org.f1 == Approx(0.5142857143).epsilon(1e-10));
  const auto& per = r.perClass.at("PER");
  CHECK(per.correct == 16);
  CHECK(per.predicted == 30);
  CHECK(per.support == 20);
}

TEST_CASE("confusion matrix") {
  const Labels gold = {"A", "B"}, pred = {"A", "A"};
  const auto m = confusionMatrix(gold, pred);
  CHECK(m.at("A", "A") == 1);
  CHECK(m.at("B", "A") == 1);
  CHECK(m.at("A", "B") == 0);
  CHECK(m.total() == 2);
  CHECK(static_cast<double>(m.diagonal()) / m.total() ==
        tokenAccuracy(std::vector<LabelSeq>{gold}, std::vector<LabelSeq>{pred}));

  const auto empty = confusionMatrix(Labels{}, Labels{}, LabelSet({"A", "B"}));
  CHECK(empty.total() == 0);
  for (const auto& row : empty.counts) {
    for (auto c : row) CHECK(c == 0);
  }
  CHECK(errcOf([&] { confusionMatrix(gold, Labels{"A"}); }) == Errc::LengthMismatch);
}

TEST_CASE("report formatting") {
  const Labels gold = {"a", "a", "b"}, pred = {"a", "b", "b"};
  const auto r = classificationPRF(gold, pred);
  CHECK(formatReport(r) ==
        "label        precision    recall        f1   support\n"
        "a               1.0000    0.5000    0.6667         2\n"
        "b               0.5000    1.0000    0.6667         1\n"
        "macro avg       0.7500    0.7500    0.6667         3\n"
        "micro avg       0.6667    0.6667    0.6667         3\n"
        "accuracy                            0.6667         3\n");
  CHECK(formatReport(r, true).find("66.67") != std::string::npos);
  CHECK(formatConfusion(r.confusion) ==
        "gold\\pred        a       b\n"
        "a              1       1\n"
        "b              0       1\n");
}
