#pragma once

#include <cstdint>
#include <vector>

#include "scitag/corpus.hpp"
#include "scitag/rng.hpp"

namespace scitag {

/// Reference strings of the form AUTHORS (YEAR). TITLE. JOURNAL, VOLUME, PAGES.
/// with one flat label per token: author, date, title, journal, volume, pages.
std::vector<TokenSequence> generateReferences(std::size_t count, Rng& rng);

struct SyntheticCorpus {
  std::vector<TokenSequence> train;
  std::vector<TokenSequence> dev;
  std::vector<TokenSequence> test;
};

inline constexpr std::uint64_t kSyntheticSeed = 20201116;

/// One generator stream, drawn train then dev then test.
SyntheticCorpus makeSyntheticCorpus(std::uint64_t seed = kSyntheticSeed, std::size_t train = 500,
                                    std::size_t dev = 100, std::size_t test = 100);

}  // namespace scitag
