#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "scitag/engine.hpp"

namespace scitag {

struct LoadedModel {
  ModelKind kind = ModelKind::Tagger;
  Checkpoint checkpoint;
  Pipeline pipeline;
  std::filesystem::path dir;
};

LoadedModel loadModel(const std::filesystem::path& checkpointDir);

/// Token range [start, end] (inclusive) plus the character range
/// [charStart, charEnd) it covers in the input, counted in code points.
struct TaggedSpan {
  std::string type;
  std::size_t start = 0;
  std::size_t end = 0;
  std::size_t charStart = 0;
  std::size_t charEnd = 0;

  bool operator==(const TaggedSpan&) const = default;
};

struct TaggedText {
  std::vector<std::string> tokens;
  std::vector<std::string> labels;
  std::vector<TaggedSpan> spans;

  bool operator==(const TaggedText&) const = default;
};

struct Classification {
  std::string label;
  std::map<std::string, double> scores;

  bool operator==(const Classification&) const = default;
};

using Prediction = std::variant<TaggedText, Classification>;

/// Throws EmptyInput when the text has no tokens.
TaggedText tagText(const Pipeline& model, std::string_view text);
Classification classifyText(const Pipeline& model, std::string_view text);
Prediction predictForText(const LoadedModel& model, std::string_view text);

/// One entry per input line; blank lines give nullopt.
std::vector<std::optional<Prediction>> predictForFile(const LoadedModel& model,
                                                      const std::filesystem::path& path);

/// `tok|label tok|label ...` for tagging, the label for classification.
std::string formatPrediction(const Prediction& prediction);

/// Evaluates on labelled data; throws KindMismatch for the wrong data kind.
Evaluation evaluateOnDataset(const LoadedModel& model, std::span<const TokenSequence> data);

struct ErrorInstance {
  std::size_t sequenceIndex = 0;
  std::size_t position = 0;
  std::string token;
  std::string goldLabel;
  std::string predLabel;
  std::vector<std::string> contextWindow;  // up to 3 tokens either side
  std::size_t contextStart = 0;            // position of contextWindow[0]

  bool operator==(const ErrorInstance&) const = default;
};

/// Positions where gold is `gold` and the prediction is `pred`, in
/// (sequence, position) order. Throws UnknownQuery when gold == pred and
/// UnknownLabel for labels absent from the evaluation.
std::vector<ErrorInstance> queryErrors(const Evaluation& eval, std::string_view gold,
                                       std::string_view pred);

std::string formatErrors(const std::vector<ErrorInstance>& errors);

}  // namespace scitag
