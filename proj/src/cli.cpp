#include "scitag/cli.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "scitag/engine.hpp"
#include "scitag/error.hpp"
#include "scitag/infer.hpp"
#include "scitag/service.hpp"

namespace scitag {

namespace fs = std::filesystem;

namespace {

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return isConfigError(e.code()) || e.code() == Errc::UnknownTask ? kExitUsage : kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

std::string describeEpoch(const EpochLogRecord& train, const EpochLogRecord& dev,
                          const std::string& monitor) {
  std::string line = "epoch " + std::to_string(train.epoch) + "  train_loss " +
                     fmt("%.6f", train.loss) + "  dev_loss " + fmt("%.6f", dev.loss) +
                     "  dev_accuracy " + fmt("%.4f", dev.metrics.at("accuracy"));
  if (monitor != "accuracy" && monitor != "loss") {
    line += "  dev_" + monitor + " " + fmt("%.4f", dev.metrics.at(monitor));
  }
  return line + "  lr " + fmt("%g", train.lr);
}

fs::path checkpointDirOf(const Experiment& exp) {
  if (!exp.engine) {
    throw Error(Errc::MissingSection, "experiment has no [engine] section", std::nullopt, {"engine"});
  }
  return exp.resolve(exp.engine->checkpointDir);
}

// Reads a data file with the reader settings of the checkpoint's experiment.
std::vector<TokenSequence> readLike(const Checkpoint& ckpt, const fs::path& path) {
  const Experiment exp = compileExperiment(ckpt.experimentConfig, {});
  if (!exp.dataset || exp.dataset->format == DataFormat::Conll) {
    return readConll(path, exp.dataset ? exp.dataset->columnSep : ColumnSep::Auto);
  }
  return readCsv(path, exp.dataset->hasHeader);
}

std::string classificationText(const Classification& c) {
  std::string out = c.label + "\n";
  for (const auto& [label, p] : c.scores) out += "  " + label + " " + fmt("%.6f", p) + "\n";
  return out;
}

}  // namespace

fs::path defaultDataDir() {
  for (const char* var : {"SCITAG_DATA_DIR", "TOOL_DATA_DIR"}) {
    if (const char* v = std::getenv(var); v && *v) return v;
  }
  const char* home = std::getenv("HOME");
  return fs::path(home && *home ? home : ".") / ".scitag";
}

int cmdRun(const fs::path& experiment, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const Experiment exp = loadExperiment(experiment);
    const fs::path ckptDir = checkpointDirOf(exp);
    if (!exp.dataset) {
      throw Error(Errc::MissingSection, "experiment has no [dataset] section", std::nullopt,
                  {"dataset"});
    }
    const DataSplits data = loadSplits(exp);
    out << "experiment: " << experiment.filename().string() << "\n";
    out << "model: " << exp.model->className << " (" << modelKindName(exp.kind()) << ")\n";
    out << "data: " << data.train.size() << " train, " << data.dev.size() << " dev\n";

    const TrainResult result = trainExperiment(exp, data, ckptDir);
    const std::string& monitor = exp.engine->config.monitorMetric;
    for (std::size_t i = 0; i + 1 < result.log.size(); i += 2) {
      out << describeEpoch(result.log[i], result.log[i + 1], monitor) << "\n";
    }
    out << "best epoch " << result.best.epoch << ": dev " << monitor << " "
        << fmt("%.4f", result.best.bestMetric) << "\n\n";
    out << formatReport(result.bestDev.report);
    out << "\ncheckpoint: " << exp.engine->checkpointDir << "\n";
    return kExitOk;
  });
}

int cmdTest(const fs::path& experiment, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const Experiment exp = loadExperiment(experiment);
    const fs::path ckptDir = checkpointDirOf(exp);
    if (!fs::exists(ckptDir / "manifest.json")) {
      throw Error(Errc::Io, "no checkpoint in " + exp.engine->checkpointDir +
                                "; run before test (scitag run " + experiment.string() + ")");
    }
    const LoadedModel model = loadModel(ckptDir);
    const auto data = readSplit(exp, "test");
    const Evaluation ev = evaluateOnDataset(model, data);
    out << "test: " << data.size() << (model.kind == ModelKind::Tagger ? " sequences" : " documents")
        << ", checkpoint epoch " << model.checkpoint.epoch << "\n\n";
    out << formatReport(ev.report);
    return kExitOk;
  });
}

int cmdPredict(const fs::path& checkpoint, const std::optional<std::string>& text,
               const std::optional<fs::path>& file, const std::optional<fs::path>& outPath,
               std::ostream& out, std::ostream& err) {
  if (text.has_value() == file.has_value()) {
    err << "error: predict needs exactly one of --text or --file\n";
    return kExitUsage;
  }
  return guarded(err, [&] {
    const LoadedModel model = loadModel(checkpoint);
    std::string result;
    if (text) {
      const Prediction p = predictForText(model, *text);
      if (const auto* c = std::get_if<Classification>(&p)) {
        result = classificationText(*c);
      } else {
        result = formatPrediction(p) + "\n";
      }
    } else {
      const auto preds = predictForFile(model, *file);
      const std::string content = readFile(*file);
      std::istringstream lines(content);
      std::string line;
      for (const auto& p : preds) {
        std::getline(lines, line);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (p) result += line + "\t" + formatPrediction(*p);
        result += "\n";
      }
    }
    if (outPath) {
      writeFileAtomic(*outPath, result);
    } else {
      out << result;
    }
    return kExitOk;
  });
}

namespace {

constexpr const char* kInteractHelp =
    "commands:\n"
    "  cm                  confusion matrix on the dev split\n"
    "  prf                 per-class precision/recall/F1 on the dev split\n"
    "  errors GOLD PRED    dev instances with gold GOLD predicted as PRED\n"
    "  predict TEXT        label ad hoc input\n"
    "  help                this text\n"
    "  quit                leave\n";

}  // namespace

int cmdInteract(const fs::path& checkpoint, std::istream& in, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const LoadedModel model = loadModel(checkpoint);
    if (model.checkpoint.devPath.empty()) {
      throw Error(Errc::Io, "checkpoint does not record a dev split");
    }
    const auto dev = readLike(model.checkpoint, model.checkpoint.devPath);
    const Evaluation ev = evaluateOnDataset(model, dev);
    out << "loaded " << modelKindName(model.kind) << " from " << checkpoint.filename().string()
        << "; dev split has " << dev.size() << " instances. Type 'help' for commands.\n";

    std::string line;
    while (true) {
      out << "> " << std::flush;
      if (!std::getline(in, line)) break;
      std::istringstream words(line);
      std::string cmd;
      words >> cmd;
      if (cmd.empty()) continue;
      if (cmd == "quit" || cmd == "exit") break;
      try {
        if (cmd == "cm") {
          out << formatConfusion(ev.report.confusion);
          out << "accuracy " << fmt("%.4f", static_cast<double>(ev.report.confusion.diagonal()) /
                                                static_cast<double>(ev.report.confusion.total()))
              << " (" << ev.report.confusion.diagonal() << "/" << ev.report.confusion.total()
              << ")\n";
        } else if (cmd == "prf") {
          out << formatReport(ev.report);
        } else if (cmd == "errors") {
          std::string gold, pred, extra;
          if (!(words >> gold >> pred) || (words >> extra)) {
            out << "usage: errors GOLD PRED\n";
            continue;
          }
          out << formatErrors(queryErrors(ev, gold, pred));
        } else if (cmd == "predict") {
          std::string rest;
          std::getline(words, rest);
          const Prediction p = predictForText(model, rest);
          if (const auto* c = std::get_if<Classification>(&p)) {
            out << classificationText(*c);
          } else {
            out << formatPrediction(p) << "\n";
          }
        } else if (cmd == "help") {
          out << kInteractHelp;
        } else {
          out << "unknown command '" << cmd << "'\n" << kInteractHelp;
        }
      } catch (const Error& e) {
        out << "error: " << e.what() << "\n";
      }
    }
    out << "bye\n";
    return kExitOk;
  });
}

int cmdDownload(const std::string& task, const fs::path& registry, const fs::path& dest,
                std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const TaskRegistry reg = loadTaskRegistry(registry);
    try {
      out << downloadTask(task, reg, dest).string() << "\n";
    } catch (const Error& e) {
      if (e.code() != Errc::UnknownTask) throw;
      std::string known;
      for (const auto& name : e.items()) known += (known.empty() ? "" : ", ") + name;
      throw Error(Errc::UnknownTask, std::string(e.what()) + " (known tasks: " + known + ")");
    }
    return kExitOk;
  });
}

namespace {

std::atomic<Service*> gServing{nullptr};

extern "C" void stopServing(int) {
  if (Service* s = gServing.load()) s->stop();
}

int cmdServe(const std::vector<std::string>& specs, int port, const std::string& host,
             const std::string& allowOrigin, std::ostream& out, std::ostream& err) {
  ModelMap models;
  for (const auto& spec : specs) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size()) {
      err << "error: --model expects NAME=CHECKPOINT_DIR, got '" << spec << "'\n";
      return kExitUsage;
    }
    const std::string name = spec.substr(0, eq);
    if (models.contains(name)) {
      err << "error: model name '" << name << "' given twice\n";
      return kExitUsage;
    }
    const int rc = guarded(err, [&] {
      models[name] = std::make_shared<const LoadedModel>(loadModel(spec.substr(eq + 1)));
      return kExitOk;
    });
    if (rc != kExitOk) return rc;
  }
  ServiceOptions options;
  options.host = host;
  options.allowOrigin = allowOrigin;
  Service service(std::move(models), options);
  const int bound = service.bind(port);
  if (bound < 0) {
    err << "error: cannot bind " << host << ":" << port << "\n";
    return kExitRuntime;
  }
  out << "serving " << specs.size() << " model(s) on http://" << host << ":" << bound << "\n"
      << std::flush;
  gServing = &service;
  std::signal(SIGINT, stopServing);
  std::signal(SIGTERM, stopServing);
  service.listen();
  gServing = nullptr;
  return kExitOk;
}

}  // namespace

int runCli(int argc, const char* const* argv, std::istream& in, std::ostream& out,
           std::ostream& err) {
  CLI::App app{"Sequence tagging and text classification for scholarly documents", "scitag"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "show help for every subcommand");

  fs::path runPath, testPath;
  auto* run = app.add_subcommand("run", "train an experiment and save its best checkpoint");
  run->add_option("experiment", runPath, "experiment file")->required();

  auto* test = app.add_subcommand("test", "evaluate an experiment's checkpoint on its test split");
  test->add_option("experiment", testPath, "experiment file")->required();

  fs::path predictCkpt;
  std::optional<std::string> text;
  std::optional<fs::path> file, outPath;
  auto* predict = app.add_subcommand("predict", "label text or a file of lines");
  predict->add_option("checkpoint", predictCkpt, "checkpoint directory")->required();
  auto* textOpt = predict->add_option("--text", text, "text to label");
  auto* fileOpt = predict->add_option("--file", file, "file with one input per line");
  textOpt->excludes(fileOpt);
  predict->add_option("--out", outPath, "write predictions here instead of stdout");

  fs::path interactCkpt;
  auto* interact = app.add_subcommand("interact", "inspect a checkpoint on its dev split");
  interact->add_option("checkpoint", interactCkpt, "checkpoint directory")->required();

  std::string what, task;
  std::optional<fs::path> registry, dest;
  auto* download = app.add_subcommand("download", "fetch a dataset listed in a task registry");
  download->add_option("what", what, "what to download")->required()->check(CLI::IsMember({"data"}));
  download->add_option("--task", task, "task name")->required();
  download->add_option("--registry", registry, "task registry file");
  download->add_option("--dest", dest, "destination directory");

  std::vector<std::string> modelSpecs;
  int port = 8080;
  std::string host = "127.0.0.1";
  std::string allowOrigin = "*";
  auto* serve = app.add_subcommand("serve", "serve checkpoints over HTTP");
  serve->add_option("--model", modelSpecs, "NAME=CHECKPOINT_DIR (repeatable)")->required();
  serve->add_option("--port", port, "port to listen on")->check(CLI::Range(1, 65535));
  serve->add_option("--host", host, "address to bind");
  serve->add_option("--allow-origin", allowOrigin, "CORS allow-origin value");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  if (run->parsed()) return cmdRun(runPath, out, err);
  if (test->parsed()) return cmdTest(testPath, out, err);
  if (predict->parsed()) return cmdPredict(predictCkpt, text, file, outPath, out, err);
  if (interact->parsed()) return cmdInteract(interactCkpt, in, out, err);
  if (download->parsed()) {
    const fs::path dataDir = defaultDataDir();
    return cmdDownload(task, registry.value_or(dataDir / "tasks.toml"),
                       dest.value_or(dataDir / "data"), out, err);
  }
  return cmdServe(modelSpecs, port, host, allowOrigin, out, err);
}

}  // namespace scitag
