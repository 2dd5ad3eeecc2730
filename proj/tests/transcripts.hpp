#pragma once
// Scripted command-line sessions over the reference fixture. The unit and
// acceptance suites both compare these against tests/golden.

#include <sstream>
#include <string>
#include <vector>

#include "scitag/cli.hpp"
#include "support.hpp"

namespace testing {

struct CliOutcome {
  int code = -1;
  std::string out;
  std::string err;
};

inline CliOutcome cli(std::vector<std::string> args, const std::string& input = "") {
  args.insert(args.begin(), "scitag");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::istringstream in(input);
  std::ostringstream out, err;
  CliOutcome o;
  o.code = scitag::runCli(static_cast<int>(argv.size()), argv.data(), in, out, err);
  o.out = out.str();
  o.err = err.str();
  return o;
}

inline const char* kInteractScript =
    "cm\nprf\nerrors institution title\nerrors title title\n"
    "predict Smith, J. (2001). Deep things.\nfrobnicate\nquit\n";

// A copy of the reference fixture in a scratch directory, trained by `run`.
struct RefsWorkspace {
  TempDir dir{"cli"};
  CliOutcome run;

  RefsWorkspace() {
    for (const char* f : {"refs.toml", "refs_train.conll", "refs_dev.conll", "refs_test.conll",
                          "refs_predict.txt", "reference_labels.txt"}) {
      fs::copy_file(fixtures() / f, dir / f);
    }
    run = cli({"run", (dir / "refs.toml").string()});
  }
  fs::path config() const { return dir / "refs.toml"; }
  fs::path checkpoint() const { return dir / "runs" / "refs"; }
  fs::path predictInput() const { return dir / "refs_predict.txt"; }

  CliOutcome test() const { return cli({"test", config().string()}); }
  CliOutcome predictFile() const {
    return cli({"predict", checkpoint().string(), "--file", predictInput().string()});
  }
  CliOutcome interact() const { return cli({"interact", checkpoint().string()}, kInteractScript); }
};

inline RefsWorkspace& refsWorkspace() {
  static RefsWorkspace w;
  return w;
}

}  // namespace testing
