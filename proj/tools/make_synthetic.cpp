// Writes the synthetic reference-string corpus as CoNLL files.
//
//   make_synthetic [--out DIR] [--seed N] [--train N] [--dev N] [--test N]

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "scitag/corpus.hpp"
#include "scitag/error.hpp"
#include "scitag/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate the synthetic reference-string corpus", "make_synthetic"};
  std::filesystem::path out = "data/synthetic";
  std::uint64_t seed = scitag::kSyntheticSeed;
  std::size_t train = 500, dev = 100, test = 100;
  app.add_option("--out", out, "output directory");
  app.add_option("--seed", seed, "generator seed");
  app.add_option("--train", train, "training sequences");
  app.add_option("--dev", dev, "dev sequences");
  app.add_option("--test", test, "test sequences");
  CLI11_PARSE(app, argc, argv);

  try {
    const auto corpus = scitag::makeSyntheticCorpus(seed, train, dev, test);
    std::filesystem::create_directories(out);
    scitag::writeFileAtomic(out / "train.conll", scitag::writeConll(corpus.train));
    scitag::writeFileAtomic(out / "dev.conll", scitag::writeConll(corpus.dev));
    scitag::writeFileAtomic(out / "test.conll", scitag::writeConll(corpus.test));
    std::cout << "wrote " << train << "/" << dev << "/" << test << " sequences to " << out.string()
              << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
