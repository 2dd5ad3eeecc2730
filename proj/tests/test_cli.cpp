#include <doctest.h>

#include <sstream>

#include "scitag/cli.hpp"
#include "scitag/infer.hpp"
#include "support.hpp"
#include "trained.hpp"
#include "transcripts.hpp"

using namespace scitag;
namespace fs = std::filesystem;

using testing::cli;

TEST_CASE("run, test, predict and interact transcripts") {
  auto& w = testing::refsWorkspace();
  REQUIRE(w.run.code == kExitOk);
  CHECK(w.run.err.empty());
  CHECK(testing::matchesGolden("cli_run.txt", w.run.out));
  CHECK(fs::exists(w.checkpoint() / "manifest.json"));
  CHECK(fs::exists(w.checkpoint() / "log.jsonl"));

  const auto test = w.test();
  CHECK(test.code == kExitOk);
  CHECK(testing::matchesGolden("cli_test.txt", test.out));

  const auto predict = w.predictFile();
  CHECK(predict.code == kExitOk);
  CHECK(testing::matchesGolden("cli_predict_file.txt", predict.out));
  const auto lines = [&] {
    std::vector<std::string> v;
    std::istringstream ss(predict.out);
    for (std::string l; std::getline(ss, l);) v.push_back(l);
    return v;
  }();
  REQUIRE(lines.size() == 4);
  CHECK(lines[1].empty());

  const std::string reference = "Calzolari, N. (1982). Towards the organization of lexical definitions on a database structure. In COLING 1982, pages 61-64.";
  const auto one = cli({"predict", w.checkpoint().string(), "--text", reference});
  CHECK(one.code == kExitOk);
  CHECK(one.out == formatPrediction(predictForText(loadModel(w.checkpoint()), reference)) + "\n");
  CHECK(lines[0] == reference + "\t" + formatPrediction(predictForText(loadModel(w.checkpoint()), reference)));

  const auto outFile = w.dir / "pred" / "out.tsv";
  fs::create_directories(outFile.parent_path());
  const auto toFile = cli({"predict", w.checkpoint().string(), "--file", (w.dir / "refs_predict.txt").string(),
                           "--out", outFile.string()});
  CHECK(toFile.code == kExitOk);
  CHECK(testing::slurp(outFile) == predict.out);

  const auto session = w.interact();
  CHECK(session.code == kExitOk);
  CHECK(testing::matchesGolden("cli_interact.txt", session.out));
}

TEST_CASE("exit codes") {
  testing::TempDir dir("cli-codes");

  SUBCASE("unknown component class is a usage error") {
    testing::spit(dir / "bad.toml", "[model]\nclass = \"TransformerTagger\"\n");
    const auto r = cli({"run", (dir / "bad.toml").string()});
    CHECK(r.code == kExitUsage);
    CHECK(r.err.find("TransformerTagger") != std::string::npos);
  }
  SUBCASE("missing data is a runtime error") {
    fs::copy_file(testing::fixtures() / "refs.toml", dir / "refs.toml");
    const auto r = cli({"run", (dir / "refs.toml").string()});
    CHECK(r.code == kExitRuntime);
    CHECK(r.err.starts_with("error: "));
  }
  SUBCASE("test before run names the missing checkpoint") {
    for (const char* f : {"refs.toml", "refs_test.conll"}) fs::copy_file(testing::fixtures() / f, dir / f);
    const auto r = cli({"test", (dir / "refs.toml").string()});
    CHECK(r.code == kExitRuntime);
    CHECK(r.err.find("run before test") != std::string::npos);
  }
  SUBCASE("predict needs exactly one input") {
    const auto ckpt = testing::refsModel().checkpoint.string();
    CHECK(cli({"predict", ckpt}).code == kExitUsage);
    CHECK(cli({"predict", ckpt, "--text", "a", "--file", "b"}).code == kExitUsage);
    CHECK(cli({"predict", (dir / "none").string(), "--text", "a"}).code == kExitRuntime);
  }
  SUBCASE("argument errors") {
    CHECK(cli({}).code == kExitUsage);
    CHECK(cli({"frobnicate"}).code == kExitUsage);
    CHECK(cli({"serve", "--model", "x=y", "--port", "70000"}).code == kExitUsage);
    CHECK(cli({"serve", "--model", "x=y", "--port", "0"}).code == kExitUsage);
    CHECK(cli({"download", "models", "--task", "x"}).code == kExitUsage);
    CHECK(cli({"--help"}).code == kExitOk);
  }
  SUBCASE("unknown download task lists the known ones") {
    testing::spit(dir / "tasks.toml",
                  "[alpha]\nurl = \"http://127.0.0.1:9/a\"\nsha256 = \"" + std::string(64, '0') +
                      "\"\nformat = \"conll\"\n");
    const auto r = cli({"download", "data", "--task", "beta", "--registry", (dir / "tasks.toml").string(),
                        "--dest", (dir / "data").string()});
    CHECK(r.code == kExitUsage);
    CHECK(r.err.find("alpha") != std::string::npos);
  }
}

TEST_CASE("data directory resolution") {
  const char* saved = std::getenv("SCITAG_DATA_DIR");
  const std::string keep = saved ? saved : "";
  ::setenv("SCITAG_DATA_DIR", "/tmp/scitag-data-test", 1);
  CHECK(defaultDataDir() == fs::path("/tmp/scitag-data-test"));
  ::unsetenv("SCITAG_DATA_DIR");
  ::setenv("TOOL_DATA_DIR", "/tmp/tool-data", 1);
  CHECK(defaultDataDir() == fs::path("/tmp/tool-data"));
  ::unsetenv("TOOL_DATA_DIR");
  if (saved) ::setenv("SCITAG_DATA_DIR", keep.c_str(), 1);
}
