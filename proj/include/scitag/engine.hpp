#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "scitag/components.hpp"
#include "scitag/metrics.hpp"
#include "scitag/model.hpp"
#include "scitag/rng.hpp"

namespace scitag {

// ---------------------------------------------------------------------------
// Optimisation primitives

/// v <- momentum*v + g; p <- p - lr*v. `velocity` is sized on first use.
void sgdStep(std::span<double> params, std::span<const double> grads, double lr, double momentum,
             std::vector<double>& velocity);

/// accum += g^2; p -= lr*g/sqrt(accum + eps). `accum` is sized on first use.
void adagradStep(std::span<double> params, std::span<const double> grads, double lr,
                 std::vector<double>& accum, double eps = 1e-8);

using GradientGroups = std::map<std::string, std::vector<double>>;

double globalNorm(const GradientGroups& grads);
/// Scales every group by maxNorm/norm when the global norm exceeds maxNorm.
/// Returns the norm before clipping.
double clipGlobalNorm(GradientGroups& grads, double maxNorm);

bool higherIsBetter(std::string_view metric);

class PlateauScheduler {
 public:
  PlateauScheduler(double lr, double factor, int patience, bool higherBetter = true);

  /// Feeds one epoch's monitored value and returns the learning rate to use next.
  double step(double metric);
  double lr() const noexcept { return lr_; }

 private:
  double lr_;
  double factor_;
  int patience_;
  bool higherBetter_;
  std::optional<double> best_;
  int bad_ = 0;
};

/// The learning rate after replaying `history` through a PlateauScheduler.
double plateauSchedule(std::span<const double> history, double factor, int patience, double lr,
                       bool higherBetter = true);

/// Each non-pad id becomes unk with probability p; one draw per non-pad position.
std::vector<int> applyWordDropout(std::span<const int> ids, double p, Rng& rng);

// ---------------------------------------------------------------------------
// Evaluation

struct Evaluation {
  ModelKind kind = ModelKind::Tagger;
  MetricReport report;
  std::map<std::string, double> metrics;
  std::vector<std::vector<std::string>> tokens;
  std::vector<LabelSeq> gold;  // classifier: one label per document
  std::vector<LabelSeq> pred;
  std::optional<double> loss;
};

/// Token-level scores for flat tag sets, conlleval spans for BIO tag sets,
/// document-level scores for classifiers. Loss is the mean NLL when requested.
Evaluation evaluate(const Pipeline& model, std::span<const TokenSequence> data, bool withLoss = false);

// ---------------------------------------------------------------------------
// Checkpoints

inline constexpr int kCheckpointVersion = 1;

struct WeightArray {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  bool operator==(const WeightArray&) const = default;
};

struct Checkpoint {
  int formatVersion = kCheckpointVersion;
  std::string experimentConfig;
  ModelKind kind = ModelKind::Tagger;
  std::string monitorMetric;
  double bestMetric = 0.0;
  int epoch = 0;
  std::string rngIdentity;
  std::uint64_t seed = 0;
  std::string devPath;   // absolute, empty if unknown
  std::string testPath;  // absolute, empty if unknown
  std::vector<std::string> planOrder;
  std::vector<std::pair<std::string, std::string>> graphEdges;
  std::map<std::string, std::string> graphClasses;

  Vocabulary vocab;
  std::map<std::string, Vocabulary> tables;  // by embedding group
  std::vector<std::string> templates;
  int ngramMin = 0;
  int ngramMax = 0;
  std::vector<std::string> featureNames;  // position = id
  LabelSet labels;
  std::map<std::string, WeightArray> weights;
};

/// Copies the pipeline's current state plus experiment metadata.
Checkpoint snapshot(Pipeline& model, const Experiment& exp);

/// Writes manifest.json, config.orig, vocab.json, features.json, labels.json
/// and weights.json, each via temp file and rename, manifest last.
void saveCheckpoint(const Checkpoint& ckpt, const std::filesystem::path& dir);
/// Throws Io, VersionMismatch, CorruptCheckpoint or ShapeMismatch.
Checkpoint loadCheckpoint(const std::filesystem::path& dir);

/// Recompiles the stored experiment and overlays the saved state.
Pipeline restorePipeline(const Checkpoint& ckpt);

// ---------------------------------------------------------------------------
// Training

struct EpochLogRecord {
  int epoch = 0;
  std::string split;  // train | dev
  double loss = 0.0;
  std::map<std::string, double> metrics;
  double lr = 0.0;
  std::int64_t wallClockMs = 0;
  std::string timestamp;
};

std::string toJsonLine(const EpochLogRecord& record);
EpochLogRecord parseLogLine(std::string_view line);

struct DataSplits {
  std::vector<TokenSequence> train;
  std::vector<TokenSequence> dev;
};

/// Reads one split named by the dataset section ("train", "dev" or "test").
std::vector<TokenSequence> readSplit(const Experiment& exp, std::string_view split);
DataSplits loadSplits(const Experiment& exp);

struct TrainResult {
  Checkpoint best;
  Pipeline model;  // state at the best epoch
  Evaluation bestDev;
  std::vector<EpochLogRecord> log;
};

/// Runs the training loop. When `checkpointDir` is set the best checkpoint
/// and log.jsonl are written there as training proceeds.
TrainResult trainExperiment(const Experiment& exp, const DataSplits& data,
                            const std::optional<std::filesystem::path>& checkpointDir);

}  // namespace scitag
