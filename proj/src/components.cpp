#include "scitag/components.hpp"

#include <algorithm>
#include <cmath>

#include "scitag/error.hpp"

namespace scitag {

std::string_view modelKindName(ModelKind kind) {
  return kind == ModelKind::Tagger ? "tagger" : "classifier";
}

std::optional<ModelKind> modelKindFromName(std::string_view name) {
  if (name == "tagger") return ModelKind::Tagger;
  if (name == "classifier") return ModelKind::Classifier;
  return std::nullopt;
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(Errc::ConfigError, "[engine] " + msg); };
  if (!(lr > 0.0) || !std::isfinite(lr)) fail("lr must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) fail("momentum must be in [0, 1)");
  if (epochs < 1) fail("epochs must be >= 1");
  if (batchSize < 1) fail("batch_size must be >= 1");
  if (clipNorm && !(*clipNorm > 0.0)) fail("clip_norm must be > 0");
  if (!(plateauFactor > 0.0 && plateauFactor < 1.0)) fail("plateau_factor must be in (0, 1)");
  if (plateauPatience < 1) fail("plateau_patience must be >= 1");
  if (earlyStopPatience && *earlyStopPatience < 1) fail("patience must be >= 1");
  if (wordDropout && !(*wordDropout >= 0.0 && *wordDropout < 1.0)) {
    fail("word_dropout must be in [0, 1)");
  }
  if (std::find(std::begin(kMonitorMetrics), std::end(kMonitorMetrics), monitorMetric) ==
      std::end(kMonitorMetrics)) {
    fail("unknown metric '" + monitorMetric + "'");
  }
}

std::vector<std::shared_ptr<EmbedderSpec>> flattenEmbedders(
    const std::vector<std::shared_ptr<EmbedderSpec>>& embedders) {
  std::vector<std::shared_ptr<EmbedderSpec>> out;
  for (const auto& e : embedders) {
    if (auto concat = std::dynamic_pointer_cast<ConcatEmbeddersSpec>(e)) {
      auto inner = flattenEmbedders(concat->parts);
      out.insert(out.end(), inner.begin(), inner.end());
    } else {
      out.push_back(e);
    }
  }
  return out;
}

namespace {

ParamValue str(const char* s) { return config::Scalar{std::string(s)}; }
ParamValue integer(std::int64_t v) { return config::Scalar{v}; }
ParamValue real(double v) { return config::Scalar{v}; }
ParamValue boolean(bool v) { return config::Scalar{v}; }

ParamSpec required(std::string name, ParamType type) { return {std::move(name), type, {}, false}; }
ParamSpec optional(std::string name, ParamType type) { return {std::move(name), type, {}, true}; }
ParamSpec withDefault(std::string name, ParamType type, ParamValue v) {
  return {std::move(name), type, std::move(v), false};
}

[[noreturn]] void invalid(const ComponentDecl& decl, const std::string& msg) {
  throw Error(Errc::ConfigError, "[" + decl.id + "] " + msg, decl.line, {decl.id});
}

template <typename T>
std::vector<std::shared_ptr<T>> role(const ComponentDecl& decl, const Dependencies& deps,
                                     const std::string& name, const char* expected) {
  std::vector<std::shared_ptr<T>> out;
  auto it = deps.find(name);
  if (it == deps.end()) return out;
  for (const auto& c : it->second) {
    auto typed = std::dynamic_pointer_cast<T>(c);
    if (!typed) invalid(decl, "'" + name + "' must be " + expected + ", got " + c->className);
    out.push_back(std::move(typed));
  }
  return out;
}

std::optional<std::size_t> positiveDim(const ComponentDecl& decl, const Params& p,
                                       const char* key) {
  if (!p.has(key)) return std::nullopt;
  const auto v = p.getInt(key);
  if (v < 1) invalid(decl, std::string(key) + " must be >= 1");
  return static_cast<std::size_t>(v);
}

ComponentClass datasetClass(ModelKind kind) {
  ComponentClass cls;
  const char* defaultFormat = kind == ModelKind::Tagger ? "conll" : "csv";
  cls.params = {
      required("train", ParamType::String),
      required("dev", ParamType::String),
      withDefault("test", ParamType::String, str("")),
      withDefault("format", ParamType::String, str(defaultFormat)),
      withDefault("lowercase", ParamType::Bool, boolean(false)),
      withDefault("min_freq", ParamType::Int, integer(1)),
      withDefault("has_header", ParamType::Bool, boolean(false)),
      withDefault("column_sep", ParamType::String, str("auto")),
      withDefault("labels", ParamType::String, str("")),
  };
  cls.construct = [kind, defaultFormat](const ComponentDecl& decl, const Params& p,
                                        const Dependencies&) {
    auto d = std::make_shared<DatasetSpec>();
    d->kind = kind;
    if (p.getString("format") != defaultFormat) {
      invalid(decl, decl.className + " reads format \"" + defaultFormat + "\", not \"" +
                        p.getString("format") + "\"");
    }
    d->format = kind == ModelKind::Tagger ? DataFormat::Conll : DataFormat::Csv;
    d->train = p.getString("train");
    d->dev = p.getString("dev");
    d->test = p.getString("test");
    d->lowercase = p.getBool("lowercase");
    const auto minFreq = p.getInt("min_freq");
    if (minFreq < 1) invalid(decl, "min_freq must be >= 1");
    d->minFreq = static_cast<int>(minFreq);
    d->hasHeader = p.getBool("has_header");
    const auto& sep = p.getString("column_sep");
    if (sep == "auto") {
      d->columnSep = ColumnSep::Auto;
    } else if (sep == "tab") {
      d->columnSep = ColumnSep::Tab;
    } else if (sep == "space") {
      d->columnSep = ColumnSep::Space;
    } else {
      invalid(decl, "column_sep must be \"auto\", \"tab\" or \"space\"");
    }
    d->labelFile = p.getString("labels");
    return d;
  };
  return cls;
}

ComponentClass vanillaEmbedderClass() {
  ComponentClass cls;
  cls.params = {
      withDefault("embed", ParamType::String, str("word_vocab")),
      withDefault("freeze", ParamType::Bool, boolean(true)),
      optional("emb_dim", ParamType::Int),
  };
  cls.construct = [](const ComponentDecl& decl, const Params& p, const Dependencies&) {
    if (p.getString("embed") != "word_vocab") {
      invalid(decl, "embed must be \"word_vocab\" (the dataset vocabulary)");
    }
    auto e = std::make_shared<VanillaEmbedderSpec>();
    e->freeze = p.getBool("freeze");
    e->dim = positiveDim(decl, p, "emb_dim");
    return e;
  };
  return cls;
}

ComponentClass wordEmbedderClass() {
  ComponentClass cls;
  cls.params = {
      required("path", ParamType::String),
      withDefault("freeze", ParamType::Bool, boolean(true)),
      optional("emb_dim", ParamType::Int),
  };
  cls.construct = [](const ComponentDecl& decl, const Params& p, const Dependencies&) {
    auto e = std::make_shared<WordEmbedderSpec>();
    e->path = p.getString("path");
    e->freeze = p.getBool("freeze");
    e->dim = positiveDim(decl, p, "emb_dim");
    return e;
  };
  return cls;
}

ComponentClass concatClass() {
  ComponentClass cls;
  cls.roles = {{"embedder", 1, 64}};
  cls.construct = [](const ComponentDecl& decl, const Params&, const Dependencies& deps) {
    auto e = std::make_shared<ConcatEmbeddersSpec>();
    e->parts = role<EmbedderSpec>(decl, deps, "embedder", "an embedder");
    return e;
  };
  return cls;
}

ComponentClass charNgramClass() {
  ComponentClass cls;
  cls.params = {
      withDefault("min_n", ParamType::Int, integer(2)),
      withDefault("max_n", ParamType::Int, integer(4)),
  };
  cls.construct = [](const ComponentDecl& decl, const Params& p, const Dependencies&) {
    auto f = std::make_shared<CharNGramSpec>();
    const auto lo = p.getInt("min_n");
    const auto hi = p.getInt("max_n");
    if (lo < 2 || hi > 4 || lo > hi) invalid(decl, "need 2 <= min_n <= max_n <= 4");
    f->minN = static_cast<int>(lo);
    f->maxN = static_cast<int>(hi);
    return f;
  };
  return cls;
}

ComponentClass bowEncoderClass() {
  ComponentClass cls;
  cls.params = {
      required("emb_dim", ParamType::Int),
      withDefault("dropout_value", ParamType::Float, real(0.0)),
      withDefault("aggregation_type", ParamType::String, str("sum")),
  };
  cls.roles = {{"embedder", 1, 64}};
  cls.construct = [](const ComponentDecl& decl, const Params& p, const Dependencies& deps) {
    auto enc = std::make_shared<BowEncoderSpec>();
    enc->embDim = *positiveDim(decl, p, "emb_dim");
    enc->dropout = p.getFloat("dropout_value");
    if (!(enc->dropout >= 0.0 && enc->dropout < 1.0)) invalid(decl, "dropout_value must be in [0, 1)");
    const auto agg = aggregationFromName(p.getString("aggregation_type"));
    if (!agg) invalid(decl, "aggregation_type must be \"sum\" or \"average\"");
    enc->aggregation = *agg;
    enc->embedders = role<EmbedderSpec>(decl, deps, "embedder", "an embedder");

    const auto leaves = flattenEmbedders(enc->embedders);
    if (leaves.size() == 1) {
      if (auto v = std::dynamic_pointer_cast<VanillaEmbedderSpec>(leaves[0]); v && !v->dim) {
        v->dim = enc->embDim;
      }
    }
    for (const auto& leaf : leaves) {
      auto v = std::dynamic_pointer_cast<VanillaEmbedderSpec>(leaf);
      if (v && !v->dim) invalid(decl, "embedder " + leaf->id + " needs emb_dim");
    }
    return enc;
  };
  return cls;
}

ComponentClass simpleClassifierClass() {
  ComponentClass cls;
  cls.params = {
      required("encoding_dimension", ParamType::Int),
      required("num_classes", ParamType::Int),
      withDefault("classification_layer_bias", ParamType::Bool, boolean(true)),
  };
  cls.roles = {{"encoder", 1, 1}};
  cls.construct = [](const ComponentDecl& decl, const Params& p, const Dependencies& deps) {
    auto clf = std::make_shared<ClassifierSpec>();
    clf->encodingDim = *positiveDim(decl, p, "encoding_dimension");
    const auto classes = p.getInt("num_classes");
    if (classes < 2) invalid(decl, "num_classes must be >= 2");
    clf->numClasses = static_cast<std::size_t>(classes);
    clf->bias = p.getBool("classification_layer_bias");
    clf->encoder = role<BowEncoderSpec>(decl, deps, "encoder", "a BOW_Encoder").at(0);
    if (clf->encoder->embDim != clf->encodingDim) {
      invalid(decl, "encoding_dimension (" + std::to_string(clf->encodingDim) +
                        ") must equal the encoder's emb_dim (" +
                        std::to_string(clf->encoder->embDim) + ")");
    }
    return clf;
  };
  return cls;
}

std::vector<std::string> templateNames(const std::vector<FeatureTemplate>& ts) {
  std::vector<std::string> out;
  for (auto t : ts) out.emplace_back(templateName(t));
  return out;
}

ComponentClass taggerClass() {
  ComponentClass cls;
  config::Array all;
  for (const auto& n : templateNames(allTemplates())) all.emplace_back(n);
  cls.params = {
      withDefault("templates", ParamType::StringList, all),
      withDefault("l2", ParamType::Float, real(0.0)),
      withDefault("decoding", ParamType::String, str("auto")),
  };
  cls.roles = {{"featurizer", 0, 1}, {"embedder", 0, 64}};
  cls.construct = [](const ComponentDecl& decl, const Params& p, const Dependencies& deps) {
    auto tagger = std::make_shared<TaggerSpec>();
    for (const auto& name : p.getStringList("templates")) {
      const auto t = templateFromName(name);
      if (!t) invalid(decl, "unknown feature template '" + name + "'");
      if (std::find(tagger->templates.begin(), tagger->templates.end(), *t) !=
          tagger->templates.end()) {
        invalid(decl, "feature template '" + name + "' listed twice");
      }
      tagger->templates.push_back(*t);
    }
    tagger->l2 = p.getFloat("l2");
    if (!(tagger->l2 >= 0.0)) invalid(decl, "l2 must be >= 0");
    const auto& dec = p.getString("decoding");
    if (dec == "auto") {
      tagger->decoding = DecodePolicy::Auto;
    } else if (dec == "constrained") {
      tagger->decoding = DecodePolicy::Constrained;
    } else if (dec == "unconstrained") {
      tagger->decoding = DecodePolicy::Unconstrained;
    } else {
      invalid(decl, "decoding must be \"auto\", \"constrained\" or \"unconstrained\"");
    }
    auto featurizers = role<CharNGramSpec>(decl, deps, "featurizer", "a CharNGramFeaturizer");
    if (!featurizers.empty()) tagger->ngrams = featurizers[0];
    tagger->embedders = role<EmbedderSpec>(decl, deps, "embedder", "an embedder");
    for (const auto& leaf : flattenEmbedders(tagger->embedders)) {
      auto v = std::dynamic_pointer_cast<VanillaEmbedderSpec>(leaf);
      if (v && !v->dim) invalid(decl, "embedder " + leaf->id + " needs emb_dim");
    }
    return tagger;
  };
  return cls;
}

ComponentClass engineClass() {
  ComponentClass cls;
  cls.params = {
      withDefault("optimizer", ParamType::String, str("sgd")),
      withDefault("lr", ParamType::Float, real(0.1)),
      withDefault("momentum", ParamType::Float, real(0.0)),
      withDefault("epochs", ParamType::Int, integer(10)),
      withDefault("batch_size", ParamType::Int, integer(16)),
      optional("clip_norm", ParamType::Float),
      withDefault("plateau_factor", ParamType::Float, real(0.5)),
      withDefault("plateau_patience", ParamType::Int, integer(2)),
      optional("patience", ParamType::Int),
      withDefault("seed", ParamType::Int, integer(0)),
      withDefault("metric", ParamType::String, str("macro_f1")),
      required("checkpoint_dir", ParamType::String),
      optional("word_dropout", ParamType::Float),
  };
  cls.construct = [](const ComponentDecl& decl, const Params& p, const Dependencies&) {
    auto e = std::make_shared<EngineSpec>();
    TrainConfig& c = e->config;
    const auto& opt = p.getString("optimizer");
    if (opt == "sgd") {
      c.optimizer = Optimizer::Sgd;
    } else if (opt == "adagrad") {
      c.optimizer = Optimizer::Adagrad;
    } else {
      invalid(decl, "optimizer must be \"sgd\" or \"adagrad\"");
    }
    c.lr = p.getFloat("lr");
    c.momentum = p.getFloat("momentum");
    c.epochs = static_cast<int>(p.getInt("epochs"));
    const auto batch = p.getInt("batch_size");
    if (batch < 1) invalid(decl, "batch_size must be >= 1");
    c.batchSize = static_cast<std::size_t>(batch);
    if (p.has("clip_norm")) c.clipNorm = p.getFloat("clip_norm");
    c.plateauFactor = p.getFloat("plateau_factor");
    c.plateauPatience = static_cast<int>(p.getInt("plateau_patience"));
    if (p.has("patience")) c.earlyStopPatience = static_cast<int>(p.getInt("patience"));
    const auto seed = p.getInt("seed");
    if (seed < 0) invalid(decl, "seed must be >= 0");
    c.seed = static_cast<std::uint64_t>(seed);
    c.monitorMetric = p.getString("metric");
    if (p.has("word_dropout")) c.wordDropout = p.getFloat("word_dropout");
    c.validate();
    e->checkpointDir = p.getString("checkpoint_dir");
    if (e->checkpointDir.empty()) invalid(decl, "checkpoint_dir must not be empty");
    return e;
  };
  return cls;
}

}  // namespace

ComponentRegistry builtinRegistry() {
  ComponentRegistry r;
  r.add("TaggingDataset", datasetClass(ModelKind::Tagger));
  r.add("ClassificationDataset", datasetClass(ModelKind::Classifier));
  r.add("VanillaEmbedder", vanillaEmbedderClass());
  r.add("WordEmbedder", wordEmbedderClass());
  r.add("ConcatEmbedders", concatClass());
  r.add("CharNGramFeaturizer", charNgramClass());
  r.add("BOW_Encoder", bowEncoderClass());
  r.add("SimpleClassifier", simpleClassifierClass());
  r.add("FeatureCrfTagger", taggerClass());
  r.add("Engine", engineClass());

  const std::string neural = "neural encoders and taggers are outside this toolkit; "
                             "use FeatureCrfTagger or BOW_Encoder";
  for (const char* name : {"LSTM2SeqEncoder", "RnnSeqCrfTagger", "CharEmbedder", "ElmoEmbedder",
                           "BertEmbedder", "BiLSTMEncoder"}) {
    r.reject(name, neural);
  }
  return r;
}

// ---------------------------------------------------------------------------

ModelKind Experiment::kind() const {
  return std::dynamic_pointer_cast<TaggerSpec>(model) ? ModelKind::Tagger : ModelKind::Classifier;
}

std::shared_ptr<TaggerSpec> Experiment::tagger() const {
  return std::dynamic_pointer_cast<TaggerSpec>(model);
}

std::shared_ptr<ClassifierSpec> Experiment::classifier() const {
  return std::dynamic_pointer_cast<ClassifierSpec>(model);
}

std::filesystem::path Experiment::resolve(const std::string& path) const {
  const std::filesystem::path p(path);
  return p.is_absolute() ? p : (baseDir / p).lexically_normal();
}

Experiment compileExperiment(std::string source, std::filesystem::path baseDir) {
  Experiment exp;
  exp.graph = parseExperimentText(source);
  validateGraph(exp.graph);
  exp.plan = topoOrder(exp.graph);
  const auto built = instantiate(exp.graph, exp.plan, builtinRegistry());
  exp.source = std::move(source);
  exp.baseDir = std::move(baseDir);

  auto root = [&](const char* id) -> ComponentPtr {
    auto it = built.find(id);
    return it == built.end() ? nullptr : it->second;
  };
  exp.model = root("model");
  if (!std::dynamic_pointer_cast<TaggerSpec>(exp.model) &&
      !std::dynamic_pointer_cast<ClassifierSpec>(exp.model)) {
    throw Error(Errc::ConfigError,
                "[model] must be a SimpleClassifier or FeatureCrfTagger, got " +
                    exp.model->className,
                exp.graph.find("model")->line, {"model"});
  }
  if (auto d = root("dataset")) {
    exp.dataset = std::dynamic_pointer_cast<DatasetSpec>(d);
    if (!exp.dataset) {
      throw Error(Errc::ConfigError, "[dataset] must be a dataset class, got " + d->className);
    }
    if (exp.dataset->kind != exp.kind()) {
      throw Error(Errc::ConfigError, "[dataset] " + d->className + " does not fit a " +
                                         std::string(modelKindName(exp.kind())) + " model");
    }
  }
  if (auto e = root("engine")) {
    exp.engine = std::dynamic_pointer_cast<EngineSpec>(e);
    if (!exp.engine) throw Error(Errc::ConfigError, "[engine] must be Engine, got " + e->className);
  }
  return exp;
}

Experiment loadExperiment(const std::filesystem::path& path) {
  return compileExperiment(readFile(path), std::filesystem::absolute(path).parent_path());
}

}  // namespace scitag
