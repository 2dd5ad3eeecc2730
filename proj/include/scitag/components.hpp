#pragma once

// Built-in component classes. Instantiating an experiment graph yields
// these blueprints; parameters are materialized later, once data is read
// (see model.hpp).

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "scitag/corpus.hpp"
#include "scitag/crf.hpp"
#include "scitag/features.hpp"
#include "scitag/graph.hpp"

namespace scitag {

enum class ModelKind { Tagger, Classifier };

std::string_view modelKindName(ModelKind kind);
std::optional<ModelKind> modelKindFromName(std::string_view name);

struct DatasetSpec : Component {
  ModelKind kind = ModelKind::Tagger;
  DataFormat format = DataFormat::Conll;
  std::string train;
  std::string dev;
  std::string test;
  bool lowercase = false;
  int minFreq = 1;
  bool hasHeader = false;
  ColumnSep columnSep = ColumnSep::Auto;
  std::string labelFile;  // fixed label inventory, one per line; empty = fit from data
};

struct EmbedderSpec : Component {};

/// Randomly initialised table over the dataset vocabulary.
struct VanillaEmbedderSpec : EmbedderSpec {
  std::optional<std::size_t> dim;
  bool freeze = true;
};

/// Static vectors from a GloVe-style text file.
struct WordEmbedderSpec : EmbedderSpec {
  std::string path;
  std::optional<std::size_t> dim;
  bool freeze = true;
};

struct ConcatEmbeddersSpec : EmbedderSpec {
  std::vector<std::shared_ptr<EmbedderSpec>> parts;
};

struct CharNGramSpec : Component {
  int minN = 2;
  int maxN = 4;
};

struct BowEncoderSpec : Component {
  std::size_t embDim = 0;
  double dropout = 0.0;
  Aggregation aggregation = Aggregation::Sum;
  std::vector<std::shared_ptr<EmbedderSpec>> embedders;
};

struct ClassifierSpec : Component {
  std::size_t encodingDim = 0;
  std::size_t numClasses = 0;
  bool bias = true;
  std::shared_ptr<BowEncoderSpec> encoder;
};

enum class DecodePolicy { Auto, Constrained, Unconstrained };

struct TaggerSpec : Component {
  std::vector<FeatureTemplate> templates;
  std::shared_ptr<CharNGramSpec> ngrams;
  double l2 = 0.0;
  DecodePolicy decoding = DecodePolicy::Auto;
  std::vector<std::shared_ptr<EmbedderSpec>> embedders;
};

enum class Optimizer { Sgd, Adagrad };

struct TrainConfig {
  Optimizer optimizer = Optimizer::Sgd;
  double lr = 0.1;
  double momentum = 0.0;
  int epochs = 10;
  std::size_t batchSize = 16;
  std::optional<double> clipNorm;
  double plateauFactor = 0.5;
  int plateauPatience = 2;
  std::optional<int> earlyStopPatience;
  std::uint64_t seed = 0;
  std::string monitorMetric = "macro_f1";
  std::optional<double> wordDropout;  // falls back to the encoder's dropout_value

  /// Throws ConfigError when a field is out of range.
  void validate() const;
};

inline constexpr std::string_view kMonitorMetrics[] = {"accuracy", "macro_f1", "micro_f1",
                                                       "span_f1", "loss"};

struct EngineSpec : Component {
  TrainConfig config;
  std::string checkpointDir;
};

/// Leaf embedders in concatenation order, ConcatEmbedders flattened.
std::vector<std::shared_ptr<EmbedderSpec>> flattenEmbedders(
    const std::vector<std::shared_ptr<EmbedderSpec>>& embedders);

ComponentRegistry builtinRegistry();

/// A parsed, validated and instantiated experiment file.
struct Experiment {
  ComponentGraph graph;
  InstantiationPlan plan;
  std::string source;
  std::filesystem::path baseDir;  // relative paths resolve against this
  std::shared_ptr<DatasetSpec> dataset;
  std::shared_ptr<Component> model;
  std::shared_ptr<EngineSpec> engine;

  ModelKind kind() const;
  std::shared_ptr<TaggerSpec> tagger() const;
  std::shared_ptr<ClassifierSpec> classifier() const;
  std::filesystem::path resolve(const std::string& path) const;
};

Experiment compileExperiment(std::string source, std::filesystem::path baseDir);
Experiment loadExperiment(const std::filesystem::path& path);

}  // namespace scitag
