#include <doctest.h>

#include <algorithm>

#include "scitag/features.hpp"
#include "scitag/utf8.hpp"
#include "support.hpp"

using namespace scitag;
using testing::errcOf;

namespace {

bool has(const std::vector<std::string>& xs, const std::string& x) {
  return std::find(xs.begin(), xs.end(), x) != xs.end();
}

}  // namespace

TEST_CASE("word vectors") {
  const auto e = parseWordVectors("the 0.1 0.2 0.3\n");
  CHECK(e.dim == 3);
  CHECK(e.table.at("the") == std::vector<double>{0.1, 0.2, 0.3});
  CHECK(embed(e, Token{"the", 0}) == std::vector<double>{0.1, 0.2, 0.3});
  CHECK(embed(e, Token{"zzz", 0}) == e.unkVector);

  const auto two = parseWordVectors("x 1 0 0\ny 0 1 0\n");
  CHECK(two.unkVector == std::vector<double>{0.5, 0.5, 0.0});
  CHECK(two.order == std::vector<std::string>{"x", "y"});

  auto dim = testing::errorOf([] { parseWordVectors("the 0.1 0.2 0.3\na 0.1 0.2\n"); });
  REQUIRE(dim);
  CHECK(dim->code() == Errc::DimMismatch);
  CHECK(dim->where() == std::optional<std::size_t>{2});

  auto nan = testing::errorOf([] { parseWordVectors("the 0.1 abc 0.3\n"); });
  REQUIRE(nan);
  CHECK(nan->code() == Errc::ParseError);
  CHECK(nan->where() == std::optional<std::size_t>{1});

  CHECK(errcOf([] { parseWordVectors("a 1 2\n", 3); }) == Errc::DimMismatch);
  CHECK(errcOf([] { loadWordVectors("/nonexistent/vectors.txt"); }) == Errc::Io);

  SUBCASE("an optional V D header line is skipped") {
    const auto h = parseWordVectors("2 2\na 1 2\nb 3 4\n");
    CHECK(h.dim == 2);
    CHECK(h.table.size() == 2);
  }
  SUBCASE("lookup honours the lowercase policy") {
    CHECK(embed(e, Token{"The", 0}, true) == std::vector<double>{0.1, 0.2, 0.3});
    CHECK(embed(e, Token{"The", 0}, false) == e.unkVector);
  }
  SUBCASE("output width is constant over a token stream") {
    for (const char* w : {"the", "a", "", "THE", "é"}) CHECK(embed(e, Token{w, 0}).size() == e.dim);
  }
}

TEST_CASE("concatenation") {
  const std::vector<std::vector<double>> parts = {{0.1, 0.2}, {0.3}};
  CHECK(concatEmbed(parts) == std::vector<double>{0.1, 0.2, 0.3});
  const std::vector<std::vector<double>> one = {{4.0, 5.0}};
  CHECK(concatEmbed(one) == one[0]);
  CHECK(errcOf([] { concatEmbed(std::vector<std::vector<double>>{}); }) == Errc::EmptyParts);

  const std::vector<double> a = {1}, b = {2, 3}, c = {4};
  const std::vector<std::vector<double>> ab = {a, b}, bc = {b, c};
  const std::vector<std::vector<double>> left = {concatEmbed(ab), c}, right = {a, concatEmbed(bc)};
  CHECK(concatEmbed(left) == concatEmbed(right));
}

TEST_CASE("word shapes") {
  CHECK(wordShape("(1982)") == "(dddd)");
  CHECK(wordShape("Calzolari,") == "Xxxxx,");
  CHECK(wordShape("IEEE") == "XXXX");
  CHECK(wordShape("IEEEXplore") == "XXXXxxxx");
  CHECK(wordShape("") == "");
  CHECK(wordShape("1234567") == "dddd");
  CHECK(wordShape("É.") == "X.");

  // Idempotent over the {X, x} alphabet; digits are excluded because `d`
  // itself is a lowercase letter.
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    std::string w;
    for (std::uint64_t k = 0, n = rng.below(12); k < n; ++k) w += "AbZq.-"[rng.below(6)];
    const std::string s = wordShape(w);
    CHECK(wordShape(s) == s);
  }
}

TEST_CASE("character n-grams") {
  CHECK(charNgramFeatures("ab", 2, 2) == std::vector<std::string>{"cng=^a", "cng=ab", "cng=b$"});
  CHECK(charNgramFeatures("", 2, 4).empty());
  for (const std::string w : {"a", "abc", "hello", "é1"}) {
    const auto L = static_cast<int>(utf8::length(w));
    for (int n = 2; n <= 4; ++n) {
      CHECK(static_cast<int>(charNgramFeatures(w, n, n).size()) == std::max(0, L + 2 - n + 1));
    }
  }
  CHECK(errcOf([] { charNgramFeatures("a", 1, 2); }) == Errc::InvalidArgument);
  CHECK(errcOf([] { charNgramFeatures("a", 3, 5); }) == Errc::InvalidArgument);
}

TEST_CASE("feature templates") {
  const auto seq = tokenizeWhitespace("Calzolari, N. (1982)");
  FeatureTemplateSet set;
  const auto date = set.featureStrings(seq, 2);
  CHECK(has(date, "shape=(dddd)"));
  CHECK(has(date, "isDigit=false"));
  CHECK(has(date, "hasDigit=true"));
  CHECK(has(date, "suffix2=2)"));
  CHECK(has(date, "bias"));
  CHECK(has(date, "nextLower=<EOS>"));
  CHECK(has(set.featureStrings(seq, 1), "lower=n."));
  CHECK(has(set.featureStrings(seq, 0), "prevLower=<BOS>"));
  CHECK(errcOf([&] { set.featureStrings(seq, 3); }) == Errc::PositionOutOfRange);

  SUBCASE("index grows until frozen, then unseen strings are dropped") {
    const auto v = extractFeatures(seq, 0, set);
    CHECK(std::is_sorted(v.indices.begin(), v.indices.end()));
    CHECK(std::adjacent_find(v.indices.begin(), v.indices.end()) == v.indices.end());
    CHECK(v.values.size() == v.indices.size());
    set.freeze();
    const std::size_t size = set.size();
    const auto unseen = extractFeatures(tokenizeWhitespace("Zyxw"), 0, std::as_const(set));
    CHECK(set.size() == size);
    REQUIRE(unseen.size() >= 1);
    CHECK(unseen.indices.size() < set.templates().size());
    CHECK(set.find("bias").has_value());
    CHECK(std::find(unseen.indices.begin(), unseen.indices.end(), *set.find("bias")) !=
          unseen.indices.end());
  }

  SUBCASE("frozen extraction is deterministic and never grows the universe") {
    FeatureTemplateSet grow(allTemplates(), 2, 3);
    for (std::size_t i = 0; i < seq.size(); ++i) extractFeatures(seq, i, grow);
    grow.freeze();
    const std::size_t size = grow.size();
    Rng rng(77);
    for (int iter = 0; iter < 200; ++iter) {
      std::string word;
      const char* alphabet[] = {"a", "Z", "9", "(", ".", ",", "é"};
      for (std::uint64_t k = 0, n = 1 + rng.below(8); k < n; ++k) word += alphabet[rng.below(7)];
      const auto s = tokenizeWhitespace(word + " x");
      CHECK(extractFeatures(s, 0, grow) == extractFeatures(s, 0, grow));
      CHECK(grow.size() == size);
    }
  }

  SUBCASE("template names round trip") {
    for (auto t : allTemplates()) CHECK(templateFromName(templateName(t)) == t);
    CHECK(!templateFromName("nope"));
  }
}
