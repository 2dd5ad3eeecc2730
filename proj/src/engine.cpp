#include "scitag/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "scitag/error.hpp"

namespace scitag {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Optimisation primitives

namespace {

void checkShapes(std::size_t params, std::size_t grads, const char* what) {
  if (params != grads) {
    throw Error(Errc::ShapeMismatch, std::string(what) + ": " + std::to_string(params) +
                                         " parameters but " + std::to_string(grads) + " gradients");
  }
}

}  // namespace

void sgdStep(std::span<double> params, std::span<const double> grads, double lr, double momentum,
             std::vector<double>& velocity) {
  checkShapes(params.size(), grads.size(), "sgd");
  if (velocity.empty()) velocity.assign(params.size(), 0.0);
  checkShapes(params.size(), velocity.size(), "sgd velocity");
  for (std::size_t i = 0; i < params.size(); ++i) {
    velocity[i] = momentum * velocity[i] + grads[i];
    params[i] -= lr * velocity[i];
  }
}

void adagradStep(std::span<double> params, std::span<const double> grads, double lr,
                 std::vector<double>& accum, double eps) {
  checkShapes(params.size(), grads.size(), "adagrad");
  if (accum.empty()) accum.assign(params.size(), 0.0);
  checkShapes(params.size(), accum.size(), "adagrad accumulator");
  for (std::size_t i = 0; i < params.size(); ++i) {
    accum[i] += grads[i] * grads[i];
    params[i] -= lr * grads[i] / std::sqrt(accum[i] + eps);
  }
}

double globalNorm(const GradientGroups& grads) {
  double sq = 0.0;
  for (const auto& [_, g] : grads) {
    for (double v : g) sq += v * v;
  }
  return std::sqrt(sq);
}

double clipGlobalNorm(GradientGroups& grads, double maxNorm) {
  const double norm = globalNorm(grads);
  if (norm > maxNorm && norm > 0.0) {
    const double scale = maxNorm / norm;
    for (auto& [_, g] : grads) {
      for (double& v : g) v *= scale;
    }
  }
  return norm;
}

bool higherIsBetter(std::string_view metric) { return metric != "loss"; }

PlateauScheduler::PlateauScheduler(double lr, double factor, int patience, bool higherBetter)
    : lr_(lr), factor_(factor), patience_(patience), higherBetter_(higherBetter) {}

double PlateauScheduler::step(double metric) {
  const bool improved =
      !best_ || (higherBetter_ ? metric > *best_ + 1e-12 : metric < *best_ - 1e-12);
  if (improved) {
    best_ = metric;
    bad_ = 0;
  } else if (++bad_ >= patience_) {
    lr_ *= factor_;
    bad_ = 0;
  }
  return lr_;
}

double plateauSchedule(std::span<const double> history, double factor, int patience, double lr,
                       bool higherBetter) {
  PlateauScheduler s(lr, factor, patience, higherBetter);
  for (double m : history) s.step(m);
  return s.lr();
}

std::vector<int> applyWordDropout(std::span<const int> ids, double p, Rng& rng) {
  std::vector<int> out(ids.begin(), ids.end());
  for (int& id : out) {
    if (id == Vocabulary::kPad) continue;
    if (rng.uniform01() < p) id = Vocabulary::kUnk;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

double runSpanF1(const std::vector<LabelSeq>& gold, const std::vector<LabelSeq>& pred) {
  std::size_t g = 0, p = 0, c = 0;
  for (std::size_t s = 0; s < gold.size(); ++s) {
    const auto gs = extractRuns(gold[s]);
    const auto ps = extractRuns(pred[s]);
    const std::set<Span> goldSet(gs.begin(), gs.end());
    g += gs.size();
    p += ps.size();
    for (const auto& span : ps) c += goldSet.contains(span) ? 1 : 0;
  }
  const double prec = p ? static_cast<double>(c) / static_cast<double>(p) : 0.0;
  const double rec = g ? static_cast<double>(c) / static_cast<double>(g) : 0.0;
  return prec + rec == 0.0 ? 0.0 : 2.0 * prec * rec / (prec + rec);
}

}  // namespace

Evaluation evaluate(const Pipeline& model, std::span<const TokenSequence> data, bool withLoss) {
  if (data.empty()) throw Error(Errc::Empty, "no instances to evaluate");
  Evaluation ev;
  ev.kind = model.kind;
  double lossSum = 0.0;
  for (const auto& seq : data) {
    const PreparedInstance inst = model.prepare(seq);
    ev.tokens.push_back(seq.texts());
    if (model.kind == ModelKind::Tagger) {
      if (!seq.labels) throw Error(Errc::KindMismatch, "tagger model needs token-labelled data");
      const Path path = model.decode(inst);
      LabelSeq pred;
      for (int y : path) pred.push_back(model.labels.label(static_cast<std::size_t>(y)));
      ev.gold.push_back(*seq.labels);
      ev.pred.push_back(std::move(pred));
      if (withLoss && !seq.empty()) {
        std::vector<int> gold;
        for (const auto& l : *seq.labels) gold.push_back(model.labels.require(l));
        const FeaturizedSequence fs{inst.sparse, model.denseInput(inst)};
        lossSum += nll(model.crf, computeEmissions(model.crf, fs), gold);
      }
    } else {
      if (!seq.docClass) throw Error(Errc::KindMismatch, "classifier model needs class-labelled data");
      const auto probs = model.probabilities(inst);
      const auto best = static_cast<std::size_t>(
          std::max_element(probs.begin(), probs.end()) - probs.begin());
      ev.gold.push_back({*seq.docClass});
      ev.pred.push_back({model.labels.label(best)});
      if (withLoss) {
        ClassifierGradient scratch(model.classifier, 0);
        lossSum += classifierNllGradient(model.classifier, model.denseInput(inst),
                                         static_cast<std::size_t>(model.labels.require(*seq.docClass)),
                                         scratch);
      }
    }
  }
  if (withLoss) ev.loss = lossSum / static_cast<double>(data.size());

  if (model.kind == ModelKind::Tagger && model.labels.isBio()) {
    ev.report = conllF1(ev.gold, ev.pred);
    ev.metrics["span_f1"] = ev.report.microF1;
  } else {
    LabelSeq flatGold, flatPred;
    for (std::size_t s = 0; s < ev.gold.size(); ++s) {
      flatGold.insert(flatGold.end(), ev.gold[s].begin(), ev.gold[s].end());
      flatPred.insert(flatPred.end(), ev.pred[s].begin(), ev.pred[s].end());
    }
    ev.report = classificationPRF(flatGold, flatPred);
    if (model.kind == ModelKind::Tagger) ev.metrics["span_f1"] = runSpanF1(ev.gold, ev.pred);
  }
  ev.metrics["accuracy"] = ev.report.accuracy.value_or(0.0);
  ev.metrics["macro_precision"] = ev.report.macroPrecision;
  ev.metrics["macro_recall"] = ev.report.macroRecall;
  ev.metrics["macro_f1"] = ev.report.macroF1;
  ev.metrics["micro_f1"] = ev.report.microF1;
  return ev;
}

// ---------------------------------------------------------------------------
// Checkpoints

Checkpoint snapshot(Pipeline& model, const Experiment& exp) {
  Checkpoint c;
  c.experimentConfig = exp.source;
  c.kind = model.kind;
  if (exp.engine) {
    c.monitorMetric = exp.engine->config.monitorMetric;
    c.seed = exp.engine->config.seed;
  }
  c.rngIdentity = std::string(Rng::kIdentity);
  if (exp.dataset) {
    if (!exp.dataset->dev.empty()) c.devPath = exp.resolve(exp.dataset->dev).string();
    if (!exp.dataset->test.empty()) c.testPath = exp.resolve(exp.dataset->test).string();
  }
  c.planOrder = exp.plan.order;
  c.graphEdges = exp.graph.edges();
  for (const auto& n : exp.graph.nodes) c.graphClasses[n.id] = n.className;

  c.vocab = model.vocab;
  for (const auto& t : model.embeddings) c.tables[t.group] = t.index;
  for (auto t : model.features.templates()) c.templates.emplace_back(templateName(t));
  c.ngramMin = model.features.ngramMin();
  c.ngramMax = model.features.ngramMax();
  if (model.kind == ModelKind::Tagger) c.featureNames = model.features.names();
  c.labels = model.labels;
  for (const auto& [name, group] : model.parameters()) {
    c.weights[name] = WeightArray{group.shape, {group.data.begin(), group.data.end()}};
  }
  return c;
}

namespace {

json vocabToJson(const Vocabulary& v, bool withFreq) {
  json j;
  j["tokens"] = std::vector<std::string>(v.tokens().begin() + 2, v.tokens().end());
  j["lowercase"] = v.lowercase();
  j["min_freq"] = v.minFreq();
  if (withFreq) j["frequencies"] = v.frequencies();
  return j;
}

Vocabulary vocabFromJson(const json& j) {
  std::map<std::string, std::int64_t> freq;
  if (j.contains("frequencies")) freq = j.at("frequencies").get<std::map<std::string, std::int64_t>>();
  return Vocabulary::fromTokens(j.at("tokens").get<std::vector<std::string>>(),
                                j.at("lowercase").get<bool>(), j.at("min_freq").get<int>(),
                                std::move(freq));
}

std::string dump(const json& j) { return j.dump() + "\n"; }

json readJson(const std::filesystem::path& dir, const char* name) {
  const auto path = dir / name;
  if (!std::filesystem::exists(path)) {
    throw Error(Errc::CorruptCheckpoint, "checkpoint file " + path.string() + " is missing",
                std::nullopt, {name});
  }
  try {
    return json::parse(readFile(path));
  } catch (const json::exception& e) {
    throw Error(Errc::CorruptCheckpoint, "cannot parse " + path.string() + ": " + e.what(),
                std::nullopt, {name});
  }
}

}  // namespace

void saveCheckpoint(const Checkpoint& c, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);

  json vocab;
  vocab["word"] = vocabToJson(c.vocab, true);
  vocab["tables"] = json::object();
  for (const auto& [group, v] : c.tables) vocab["tables"][group] = vocabToJson(v, false);

  json features;
  features["templates"] = c.templates;
  features["char_ngrams"] = {c.ngramMin, c.ngramMax};
  features["index"] = json::object();
  for (std::size_t i = 0; i < c.featureNames.size(); ++i) features["index"][c.featureNames[i]] = i;

  json labels;
  labels["labels"] = c.labels.labels();

  json weights = json::object();
  for (const auto& [name, w] : c.weights) weights[name] = {{"shape", w.shape}, {"data", w.data}};

  json graph;
  graph["classes"] = c.graphClasses;
  graph["order"] = c.planOrder;
  graph["edges"] = json::array();
  for (const auto& [from, to] : c.graphEdges) graph["edges"].push_back({from, to});

  json manifest;
  manifest["format_version"] = c.formatVersion;
  manifest["kind"] = std::string(modelKindName(c.kind));
  manifest["graph"] = graph;
  manifest["monitor_metric"] = c.monitorMetric;
  manifest["best_metric"] = c.bestMetric;
  manifest["epoch"] = c.epoch;
  manifest["rng"] = c.rngIdentity;
  manifest["seed"] = c.seed;
  manifest["data"] = {{"dev", c.devPath}, {"test", c.testPath}};

  writeFileAtomic(dir / "config.orig", c.experimentConfig);
  writeFileAtomic(dir / "vocab.json", dump(vocab));
  writeFileAtomic(dir / "features.json", dump(features));
  writeFileAtomic(dir / "labels.json", dump(labels));
  writeFileAtomic(dir / "weights.json", dump(weights));
  writeFileAtomic(dir / "manifest.json", dump(manifest));
}

Checkpoint loadCheckpoint(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw Error(Errc::Io, "no checkpoint directory at " + dir.string());
  }
  Checkpoint c;
  const json manifest = readJson(dir, "manifest.json");
  try {
    c.formatVersion = manifest.at("format_version").get<int>();
  } catch (const json::exception& e) {
    throw Error(Errc::CorruptCheckpoint, std::string("manifest.json: ") + e.what(), std::nullopt,
                {"manifest.json"});
  }
  if (c.formatVersion != kCheckpointVersion) {
    throw Error(Errc::VersionMismatch, "checkpoint format version " +
                                           std::to_string(c.formatVersion) + ", expected " +
                                           std::to_string(kCheckpointVersion));
  }
  const char* current = "manifest.json";
  try {
    const auto kind = modelKindFromName(manifest.at("kind").get<std::string>());
    if (!kind) throw Error(Errc::CorruptCheckpoint, "manifest.json: unknown model kind");
    c.kind = *kind;
    c.monitorMetric = manifest.at("monitor_metric").get<std::string>();
    c.bestMetric = manifest.at("best_metric").get<double>();
    c.epoch = manifest.at("epoch").get<int>();
    c.rngIdentity = manifest.at("rng").get<std::string>();
    c.seed = manifest.at("seed").get<std::uint64_t>();
    c.devPath = manifest.at("data").at("dev").get<std::string>();
    c.testPath = manifest.at("data").at("test").get<std::string>();
    const auto& graph = manifest.at("graph");
    c.graphClasses = graph.at("classes").get<std::map<std::string, std::string>>();
    c.planOrder = graph.at("order").get<std::vector<std::string>>();
    for (const auto& e : graph.at("edges")) {
      c.graphEdges.emplace_back(e.at(0).get<std::string>(), e.at(1).get<std::string>());
    }

    const auto configPath = dir / "config.orig";
    if (!std::filesystem::exists(configPath)) {
      throw Error(Errc::CorruptCheckpoint, "checkpoint file config.orig is missing", std::nullopt,
                  {"config.orig"});
    }
    c.experimentConfig = readFile(configPath);

    current = "vocab.json";
    const json vocab = readJson(dir, current);
    c.vocab = vocabFromJson(vocab.at("word"));
    for (const auto& [group, v] : vocab.at("tables").items()) c.tables[group] = vocabFromJson(v);

    current = "features.json";
    const json features = readJson(dir, current);
    c.templates = features.at("templates").get<std::vector<std::string>>();
    c.ngramMin = features.at("char_ngrams").at(0).get<int>();
    c.ngramMax = features.at("char_ngrams").at(1).get<int>();
    const auto& index = features.at("index");
    c.featureNames.assign(index.size(), std::string());
    std::vector<char> seen(index.size(), 0);
    for (const auto& [name, id] : index.items()) {
      const auto i = id.get<std::size_t>();
      if (i >= seen.size() || seen[i]) {
        throw Error(Errc::CorruptCheckpoint, "features.json: feature ids are not 0..n-1",
                    std::nullopt, {current});
      }
      seen[i] = 1;
      c.featureNames[i] = name;
    }

    current = "labels.json";
    const json labels = readJson(dir, current);
    c.labels = LabelSet(labels.at("labels").get<std::vector<std::string>>());

    current = "weights.json";
    const json weights = readJson(dir, current);
    for (const auto& [name, w] : weights.items()) {
      WeightArray arr;
      arr.shape = w.at("shape").get<std::vector<std::size_t>>();
      arr.data = w.at("data").get<std::vector<double>>();
      const std::size_t expected = std::accumulate(arr.shape.begin(), arr.shape.end(),
                                                   std::size_t{1}, std::multiplies<>());
      if (expected != arr.data.size()) {
        throw Error(Errc::ShapeMismatch,
                    "weights group '" + name + "' has " + std::to_string(arr.data.size()) +
                        " values for shape of size " + std::to_string(expected),
                    std::nullopt, {name});
      }
      c.weights[name] = std::move(arr);
    }
  } catch (const json::exception& e) {
    throw Error(Errc::CorruptCheckpoint, std::string(current) + ": " + e.what(), std::nullopt,
                {current});
  }
  return c;
}

Pipeline restorePipeline(const Checkpoint& c) {
  const Experiment exp = compileExperiment(c.experimentConfig, {});
  if (exp.kind() != c.kind) {
    throw Error(Errc::CorruptCheckpoint, "manifest kind disagrees with config.orig", std::nullopt,
                {"manifest.json"});
  }
  std::vector<Vocabulary> indexes;
  std::vector<std::size_t> dims;
  for (const auto& group : Pipeline::tableGroups(exp)) {
    auto t = c.tables.find(group);
    auto w = c.weights.find(group);
    if (t == c.tables.end() || w == c.weights.end() || w->second.shape.size() != 2) {
      throw Error(Errc::CorruptCheckpoint, "embedding table '" + group + "' is missing",
                  std::nullopt, {group});
    }
    indexes.push_back(t->second);
    dims.push_back(w->second.shape[1]);
  }
  Pipeline p = Pipeline::skeleton(exp, c.vocab, c.labels, std::move(indexes), std::move(dims),
                                  c.featureNames.size());
  if (p.kind == ModelKind::Tagger) {
    std::vector<FeatureTemplate> templates;
    for (const auto& name : c.templates) {
      const auto t = templateFromName(name);
      if (!t) throw Error(Errc::CorruptCheckpoint, "unknown template '" + name + "'");
      templates.push_back(*t);
    }
    if (templates != p.features.templates() || c.ngramMin != p.features.ngramMin() ||
        c.ngramMax != p.features.ngramMax()) {
      throw Error(Errc::CorruptCheckpoint, "features.json disagrees with config.orig",
                  std::nullopt, {"features.json"});
    }
    p.features.restore(c.featureNames);
  }
  auto params = p.parameters();
  for (const auto& [name, group] : params) {
    auto it = c.weights.find(name);
    if (it == c.weights.end()) {
      throw Error(Errc::CorruptCheckpoint, "weights group '" + name + "' is missing", std::nullopt,
                  {name});
    }
    if (it->second.shape != group.shape) {
      throw Error(Errc::ShapeMismatch, "weights group '" + name + "' has the wrong shape",
                  std::nullopt, {name});
    }
    std::copy(it->second.data.begin(), it->second.data.end(), group.data.begin());
  }
  for (const auto& [name, _] : c.weights) {
    if (!params.contains(name)) {
      throw Error(Errc::ShapeMismatch, "unexpected weights group '" + name + "'", std::nullopt,
                  {name});
    }
  }
  return p;
}

// ---------------------------------------------------------------------------
// Logging

namespace {

std::string isoNow() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

std::string toJsonLine(const EpochLogRecord& r) {
  json j;
  j["epoch"] = r.epoch;
  j["split"] = r.split;
  j["loss"] = r.loss;
  j["metrics"] = r.metrics;
  j["lr"] = r.lr;
  j["wall_clock_ms"] = r.wallClockMs;
  j["timestamp"] = r.timestamp;
  return j.dump();
}

EpochLogRecord parseLogLine(std::string_view line) {
  const json j = json::parse(line);
  EpochLogRecord r;
  r.epoch = j.at("epoch").get<int>();
  r.split = j.at("split").get<std::string>();
  r.loss = j.at("loss").get<double>();
  r.metrics = j.at("metrics").get<std::map<std::string, double>>();
  r.lr = j.at("lr").get<double>();
  r.wallClockMs = j.at("wall_clock_ms").get<std::int64_t>();
  r.timestamp = j.at("timestamp").get<std::string>();
  return r;
}

// ---------------------------------------------------------------------------
// Training

std::vector<TokenSequence> readSplit(const Experiment& exp, std::string_view split) {
  if (!exp.dataset) throw Error(Errc::MissingSection, "experiment has no [dataset] section", std::nullopt, {"dataset"});
  const DatasetSpec& d = *exp.dataset;
  const std::string& rel = split == "train" ? d.train : split == "dev" ? d.dev : d.test;
  if (rel.empty()) {
    throw Error(Errc::ConfigError, "[dataset] has no " + std::string(split) + " split");
  }
  const auto path = exp.resolve(rel);
  return d.format == DataFormat::Conll ? readConll(path, d.columnSep) : readCsv(path, d.hasHeader);
}

DataSplits loadSplits(const Experiment& exp) {
  return DataSplits{readSplit(exp, "train"), readSplit(exp, "dev")};
}

namespace {

std::vector<std::string> readLabelFile(const std::filesystem::path& path) {
  std::vector<std::string> labels;
  std::istringstream in(readFile(path));
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    labels.push_back(line.substr(first, line.find_last_not_of(" \t") - first + 1));
  }
  if (labels.empty()) throw Error(Errc::ConfigError, "label file " + path.string() + " lists no labels");
  return labels;
}

LabelSet fitLabels(const Experiment& exp, const DataSplits& data, ModelKind kind) {
  std::set<std::string> all;
  for (const auto* split : {&data.train, &data.dev}) {
    for (const auto& seq : *split) {
      if (kind == ModelKind::Tagger) {
        if (!seq.labels) throw Error(Errc::KindMismatch, "tagger model needs token-labelled data");
        all.insert(seq.labels->begin(), seq.labels->end());
      } else {
        if (!seq.docClass) throw Error(Errc::KindMismatch, "classifier model needs class-labelled data");
        all.insert(*seq.docClass);
      }
    }
  }
  if (exp.dataset->labelFile.empty()) return LabelSet(std::vector<std::string>(all.begin(), all.end()));
  LabelSet fixed(readLabelFile(exp.resolve(exp.dataset->labelFile)));
  for (const auto& label : all) {
    if (!fixed.indexOf(label)) {
      throw Error(Errc::UnknownLabel,
                  "label '" + label + "' is not in " + exp.dataset->labelFile, std::nullopt, {label});
    }
  }
  return fixed;
}

void writeLog(const std::filesystem::path& dir, const std::vector<EpochLogRecord>& log) {
  std::string out;
  for (const auto& r : log) out += toJsonLine(r) + "\n";
  std::filesystem::create_directories(dir);
  writeFileAtomic(dir / "log.jsonl", out);
}

GradientGroups zeroGradients(Pipeline& model) {
  GradientGroups g;
  auto params = model.parameters();
  for (const auto& name : model.trainableGroups()) {
    g[name].assign(params.at(name).data.size(), 0.0);
  }
  return g;
}

void addInto(std::vector<double>& dst, std::span<const double> src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

// Scatters d loss / d dense-input rows back onto the embedding tables.
void scatterInput(const Pipeline& model, const PreparedInstance& inst,
                  const std::vector<char>* dropped, const Matrix& inputGrad, GradientGroups& grads) {
  std::size_t offset = 0;
  for (std::size_t j = 0; j < model.embeddings.size(); ++j) {
    const auto& table = model.embeddings[j];
    const std::size_t d = table.weights.cols();
    if (table.trainable) {
      auto& g = grads.at(table.group);
      for (std::size_t t = 0; t < inst.length; ++t) {
        const bool drop = dropped && (*dropped)[t];
        const auto row = static_cast<std::size_t>(drop ? Vocabulary::kUnk : inst.rows[j][t]);
        const auto src = inputGrad.row(t);
        for (std::size_t k = 0; k < d; ++k) g[row * d + k] += src[offset + k];
      }
    }
    offset += d;
  }
}

}  // namespace

TrainResult trainExperiment(const Experiment& exp, const DataSplits& data,
                            const std::optional<std::filesystem::path>& checkpointDir) {
  if (!exp.engine) throw Error(Errc::MissingSection, "experiment has no [engine] section", std::nullopt, {"engine"});
  if (!exp.dataset) throw Error(Errc::MissingSection, "experiment has no [dataset] section", std::nullopt, {"dataset"});
  if (data.train.empty()) throw Error(Errc::Empty, "training split is empty");
  if (data.dev.empty()) throw Error(Errc::Empty, "dev split is empty");
  const TrainConfig& cfg = exp.engine->config;
  cfg.validate();
  if (cfg.monitorMetric == "span_f1" && exp.kind() != ModelKind::Tagger) {
    throw Error(Errc::ConfigError, "[engine] metric \"span_f1\" needs a tagging model");
  }

  Rng rng(cfg.seed);
  const ModelKind kind = exp.kind();
  LabelSet labels = fitLabels(exp, data, kind);
  Vocabulary vocab = fitVocabulary(data.train, exp.dataset->minFreq, exp.dataset->lowercase);
  Pipeline model = Pipeline::create(exp, std::move(vocab), std::move(labels), rng);

  std::vector<PreparedInstance> train;
  std::vector<std::vector<int>> ids;
  for (const auto& seq : data.train) {
    if (seq.empty()) continue;
    train.push_back(model.prepareForTraining(seq));
    ids.push_back(numericalize(seq, model.vocab));
  }
  if (train.empty()) throw Error(Errc::Empty, "training split has no non-empty instances");
  if (kind == ModelKind::Tagger) model.finalizeFeatures();

  double dropoutRate = 0.0;
  if (cfg.wordDropout) {
    dropoutRate = *cfg.wordDropout;
  } else if (auto clf = exp.classifier()) {
    dropoutRate = clf->encoder->dropout;
  }
  const bool useDropout = dropoutRate > 0.0 && !model.embeddings.empty();

  const bool higher = higherIsBetter(cfg.monitorMetric);
  PlateauScheduler scheduler(cfg.lr, cfg.plateauFactor, cfg.plateauPatience, higher);
  double lr = cfg.lr;
  std::map<std::string, std::vector<double>> optState;

  TrainResult result;
  std::optional<double> best;
  int sinceBest = 0;
  const double l2 = kind == ModelKind::Tagger ? model.crf.l2 : 0.0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    const auto batches = makeBatches(ids, cfg.batchSize, rng.next());
    double epochLoss = 0.0;

    for (std::size_t b = 0; b < batches.size(); ++b) {
      const auto& batch = batches[b];
      GradientGroups grads = zeroGradients(model);
      double batchLoss = 0.0;

      if (kind == ModelKind::Tagger) {
        // Regularisation is added once per batch below instead of per instance.
        model.crf.l2 = 0.0;
        CrfGradient cg(model.crf, 0);
        for (std::size_t m : batch.members) {
          const PreparedInstance& inst = train[m];
          std::vector<char> dropped;
          if (useDropout) {
            const auto out = applyWordDropout(ids[m], dropoutRate, rng);
            dropped.resize(out.size());
            for (std::size_t t = 0; t < out.size(); ++t) dropped[t] = out[t] == Vocabulary::kUnk;
          }
          const auto* mask = useDropout ? &dropped : nullptr;
          const FeaturizedSequence fs{inst.sparse, model.denseInput(inst, mask)};
          batchLoss += nllGradient(model.crf, fs, inst.gold, cg);
          scatterInput(model, inst, mask, cg.denseInput, grads);
        }
        model.crf.l2 = l2;
        addInto(grads.at("crf.sparse"), cg.sparse.flat());
        addInto(grads.at("crf.dense"), cg.dense.flat());
        addInto(grads.at("crf.transitions"), cg.transitions.flat());
        addInto(grads.at("crf.start"), cg.start);
        addInto(grads.at("crf.end"), cg.end);
      } else {
        ClassifierGradient cg(model.classifier, 0);
        for (std::size_t m : batch.members) {
          const PreparedInstance& inst = train[m];
          std::vector<char> dropped;
          if (useDropout) {
            const auto out = applyWordDropout(ids[m], dropoutRate, rng);
            dropped.resize(out.size());
            for (std::size_t t = 0; t < out.size(); ++t) dropped[t] = out[t] == Vocabulary::kUnk;
          }
          const auto* mask = useDropout ? &dropped : nullptr;
          batchLoss += classifierNllGradient(model.classifier, model.denseInput(inst, mask),
                                             static_cast<std::size_t>(inst.gold[0]), cg);
          scatterInput(model, inst, mask, cg.input, grads);
        }
        addInto(grads.at("classifier.weights"), cg.weights.flat());
        if (model.classifier.useBias) addInto(grads.at("classifier.bias"), cg.bias);
      }

      const double n = static_cast<double>(batch.members.size());
      batchLoss /= n;
      for (auto& [_, g] : grads) {
        for (double& v : g) v /= n;
      }
      auto params = model.parameters();
      if (l2 > 0.0) {
        batchLoss += l2 * model.crf.halfSquaredNorm();
        for (auto& [name, g] : grads) {
          if (!name.starts_with("crf.")) continue;
          const auto w = params.at(name).data;
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += l2 * w[i];
        }
      }
      if (!std::isfinite(batchLoss)) {
        throw Error(Errc::NonFiniteLoss,
                    "loss became non-finite at epoch " + std::to_string(epoch) + ", batch " +
                        std::to_string(b + 1),
                    std::nullopt, {std::to_string(epoch), std::to_string(b + 1)});
      }
      epochLoss += batchLoss * n;

      if (cfg.clipNorm) clipGlobalNorm(grads, *cfg.clipNorm);
      for (auto& [name, g] : grads) {
        auto& state = optState[name];
        if (cfg.optimizer == Optimizer::Sgd) {
          sgdStep(params.at(name).data, g, lr, cfg.momentum, state);
        } else {
          adagradStep(params.at(name).data, g, lr, state);
        }
      }
    }

    const Evaluation trainEval = evaluate(model, data.train, false);
    const Evaluation devEval = evaluate(model, data.dev, true);
    const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                             std::chrono::steady_clock::now() - started)
                             .count();
    const std::string stamp = isoNow();
    result.log.push_back({epoch, "train", epochLoss / static_cast<double>(train.size()),
                          trainEval.metrics, lr, elapsed, stamp});
    result.log.push_back({epoch, "dev", *devEval.loss, devEval.metrics, lr, elapsed, stamp});

    const double monitored =
        cfg.monitorMetric == "loss" ? *devEval.loss : devEval.metrics.at(cfg.monitorMetric);
    const bool improved =
        !best || (higher ? monitored > *best + 1e-12 : monitored < *best - 1e-12);
    if (improved) {
      best = monitored;
      sinceBest = 0;
      result.model = model;
      result.bestDev = devEval;
      result.best = snapshot(model, exp);
      result.best.bestMetric = monitored;
      result.best.epoch = epoch;
      if (checkpointDir) saveCheckpoint(result.best, *checkpointDir);
    } else {
      ++sinceBest;
    }
    if (checkpointDir) writeLog(*checkpointDir, result.log);
    lr = scheduler.step(monitored);
    if (cfg.earlyStopPatience && sinceBest >= *cfg.earlyStopPatience) break;
  }
  return result;
}

}  // namespace scitag
