#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "scitag/components.hpp"
#include "scitag/crf.hpp"
#include "scitag/features.hpp"
#include "scitag/matrix.hpp"
#include "scitag/rng.hpp"

namespace scitag {

/// A V x D lookup table. Rows 0 and 1 are the pad and unk vectors.
struct EmbeddingTable {
  std::string group;  // "embedding.<component id>"
  Vocabulary index;
  Matrix weights;
  bool trainable = false;
};

/// Model input for one sequence with everything text-derived precomputed.
struct PreparedInstance {
  std::vector<SparseFeatureVector> sparse;  // tagger only
  std::vector<std::vector<int>> rows;       // [table][position]
  std::vector<int> gold;                    // tag indices, or {class index}
  std::size_t length = 0;
};

struct ParamGroup {
  std::vector<std::size_t> shape;
  std::span<double> data;
};

class Pipeline {
 public:
  ModelKind kind = ModelKind::Tagger;
  Vocabulary vocab;  // fitted on the training split
  LabelSet labels;
  std::vector<EmbeddingTable> embeddings;

  FeatureTemplateSet features;
  CrfModel crf;
  bool constrained = false;

  SoftmaxClassifier classifier;

  /// Fresh parameters for an experiment; word-vector files are read here,
  /// Vanilla tables draw from `rng` in declaration order.
  static Pipeline create(const Experiment& exp, Vocabulary vocab, LabelSet labels, Rng& rng);

  /// Same structure as create() with every parameter zeroed and no file I/O;
  /// callers restore features, table indexes and weights afterwards.
  static Pipeline skeleton(const Experiment& exp, Vocabulary vocab, LabelSet labels,
                           std::vector<Vocabulary> tableIndexes, std::vector<std::size_t> tableDims,
                           std::size_t numFeatures);

  /// Embedding group names the experiment declares, in concatenation order.
  static std::vector<std::string> tableGroups(const Experiment& exp);

  std::size_t denseDim() const;

  /// Growing variant: unseen feature strings get new ids (training split only).
  PreparedInstance prepareForTraining(const TokenSequence& seq);
  PreparedInstance prepare(const TokenSequence& seq) const;

  /// Resizes the CRF's sparse weights to the current feature count and freezes it.
  void finalizeFeatures();

  /// Dense input rows (L x D); positions flagged in `dropped` read the unk row.
  Matrix denseInput(const PreparedInstance& inst, const std::vector<char>* dropped = nullptr) const;

  Path decode(const PreparedInstance& inst) const;
  std::vector<double> probabilities(const PreparedInstance& inst) const;

  /// All parameter groups by name, including frozen ones.
  std::map<std::string, ParamGroup> parameters();
  std::vector<std::string> trainableGroups() const;
};

}  // namespace scitag
