#include "scitag/synthetic.hpp"

#include <array>
#include <string>

namespace scitag {

namespace {

constexpr std::array kSurnames = {
    "Calzolari", "Jurafsky", "Manning",  "Lafferty", "Pereira",  "McCallum", "Collins",
    "Kan",       "Councill", "Giles",    "Lopez",    "Romary",   "Prasad",   "Cohan",
    "Ammar",     "Beltagy",  "Lo",       "Wang",     "Nguyen",   "Schmidt",  "Okafor",
    "Tanaka",    "Ivanova",  "Moreau",   "Rossi",    "Andersen", "Kowalski", "Haddad",
    "Silva",     "Novak",    "Fischer",  "Dubois",   "Hughes",   "Ramirez",  "Costa",
    "Yamamoto",  "Petrov",   "Larsen",   "Becker",   "Murphy"};

constexpr std::array kTitleWords = {
    "towards", "a",         "an",        "the",      "of",         "for",       "and",
    "in",      "on",        "with",      "using",    "learning",   "neural",    "parsing",
    "citation", "reference", "strings",  "models",   "structured", "prediction", "random",
    "fields",  "conditional", "sequence", "labelling", "scientific", "documents", "extraction",
    "metadata", "analysis",  "corpus",   "evaluation", "approach", "framework", "robust",
    "efficient", "linguistic", "features", "semantic", "retrieval", "classification",
    "intent",  "logical",   "structure", "recovery", "toolkit",   "open",      "source"};

constexpr std::array kJournalWords = {
    "Journal",     "Proceedings",   "Transactions", "Review",   "Letters",  "Annals",
    "Computational", "Linguistics", "Information",  "Science",  "Digital",  "Libraries",
    "Language",    "Processing",    "Artificial",   "Intelligence", "Machine", "Learning",
    "Research",    "Communications", "Systems",     "Knowledge", "Engineering", "Data"};

constexpr std::array kInitials = {"A.", "B.", "C.", "D.", "E.", "F.", "G.", "H.", "J.", "K.",
                                  "L.", "M.", "N.", "P.", "R.", "S.", "T.", "V.", "W.", "Y."};

template <typename Array>
std::string pick(const Array& items, Rng& rng) {
  return items[static_cast<std::size_t>(rng.below(items.size()))];
}

std::size_t between(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng.below(hi - lo + 1));
}

struct Builder {
  std::vector<std::string> words;
  std::vector<std::string> labels;

  void add(std::string word, const char* label) {
    words.push_back(std::move(word));
    labels.emplace_back(label);
  }
};

void authors(Builder& b, Rng& rng) {
  const std::size_t n = between(rng, 1, 3);
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0 && i + 1 == n) b.add(rng.below(2) ? "and" : "&", "author");
    b.add(pick(kSurnames, rng) + ",", "author");
    const std::size_t initials = between(rng, 1, 2);
    for (std::size_t k = 0; k < initials; ++k) {
      std::string init = pick(kInitials, rng);
      if (k + 1 == initials && i + 2 < n) init += ",";
      b.add(init, "author");
    }
  }
}

}  // namespace

std::vector<TokenSequence> generateReferences(std::size_t count, Rng& rng) {
  std::vector<TokenSequence> out;
  out.reserve(count);
  for (std::size_t r = 0; r < count; ++r) {
    Builder b;
    authors(b, rng);
    b.add("(" + std::to_string(1960 + rng.below(61)) + ").", "date");

    const std::size_t titleLen = between(rng, 3, 9);
    for (std::size_t i = 0; i < titleLen; ++i) {
      std::string w = pick(kTitleWords, rng);
      if (i == 0) w[0] = static_cast<char>(w[0] - 'a' + 'A');
      if (i + 1 == titleLen) w += ".";
      b.add(std::move(w), "title");
    }

    const std::size_t journalLen = between(rng, 1, 4);
    for (std::size_t i = 0; i < journalLen; ++i) {
      std::string w = pick(kJournalWords, rng);
      if (i + 1 == journalLen) w += ",";
      b.add(std::move(w), "journal");
    }

    if (rng.below(4) != 0) {
      std::string vol = std::to_string(between(rng, 1, 60));
      if (rng.below(2)) vol += "(" + std::to_string(between(rng, 1, 12)) + ")";
      b.add(vol + ",", "volume");
    }

    const std::size_t first = between(rng, 1, 900);
    const std::string range = std::to_string(first) + "-" + std::to_string(first + between(rng, 5, 40)) + ".";
    if (rng.below(3) == 0) {
      b.add("pp.", "pages");
    }
    b.add(range, "pages");

    std::string line;
    for (std::size_t i = 0; i < b.words.size(); ++i) {
      if (i) line += ' ';
      line += b.words[i];
    }
    TokenSequence seq = tokenizeWhitespace(line);
    seq.labels = std::move(b.labels);
    out.push_back(std::move(seq));
  }
  return out;
}

SyntheticCorpus makeSyntheticCorpus(std::uint64_t seed, std::size_t train, std::size_t dev,
                                    std::size_t test) {
  Rng rng(seed);
  SyntheticCorpus c;
  c.train = generateReferences(train, rng);
  c.dev = generateReferences(dev, rng);
  c.test = generateReferences(test, rng);
  return c;
}

}  // namespace scitag
