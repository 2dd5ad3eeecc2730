#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "scitag/corpus.hpp"

namespace scitag {

/// Static word vectors in the GloVe text format.
struct DenseEmbedding {
  std::size_t dim = 0;
  std::unordered_map<std::string, std::vector<double>> table;
  std::vector<std::string> order;  // file order of the stored tokens
  std::vector<double> unkVector;
  bool trainable = false;
};

DenseEmbedding loadWordVectors(const std::filesystem::path& path,
                               std::optional<std::size_t> expectedDim = std::nullopt);
DenseEmbedding parseWordVectors(std::string_view text,
                                std::optional<std::size_t> expectedDim = std::nullopt);

/// Vector for a token, lowercased first when the corpus policy says so.
std::vector<double> embed(const DenseEmbedding& embedding, const Token& token,
                          bool lowercase = false);

std::vector<double> concatEmbed(std::span<const std::vector<double>> parts);

/// X for uppercase, x for lowercase, d for digits, everything else kept;
/// runs of one class are capped at four characters.
std::string wordShape(std::string_view text);

/// `cng=<gram>` for every n-gram of ^text$ with n in [minN, maxN].
std::vector<std::string> charNgramFeatures(std::string_view text, int minN, int maxN);

struct SparseFeatureVector {
  std::vector<int> indices;  // strictly increasing
  std::vector<double> values;

  std::size_t size() const noexcept { return indices.size(); }
  bool operator==(const SparseFeatureVector&) const = default;
};

enum class FeatureTemplate {
  Lower,
  Shape,
  Prefix1,
  Prefix2,
  Prefix3,
  Prefix4,
  Suffix1,
  Suffix2,
  Suffix3,
  Suffix4,
  IsDigit,
  HasDigit,
  IsCapitalized,
  IsPunct,
  PrevLower,
  NextLower,
  Bias,
};

std::string_view templateName(FeatureTemplate t);
std::optional<FeatureTemplate> templateFromName(std::string_view name);
std::vector<FeatureTemplate> allTemplates();

class FeatureTemplateSet {
 public:
  FeatureTemplateSet() : FeatureTemplateSet(allTemplates()) {}
  explicit FeatureTemplateSet(std::vector<FeatureTemplate> templates, int ngramMin = 0,
                              int ngramMax = 0);

  const std::vector<FeatureTemplate>& templates() const noexcept { return templates_; }
  int ngramMin() const noexcept { return ngramMin_; }
  int ngramMax() const noexcept { return ngramMax_; }

  bool frozen() const noexcept { return frozen_; }
  void freeze() noexcept { frozen_ = true; }

  std::size_t size() const noexcept { return names_.size(); }
  std::optional<int> find(std::string_view feature) const;
  /// Existing id, a fresh id while unfrozen, nothing once frozen.
  std::optional<int> intern(const std::string& feature);
  const std::vector<std::string>& names() const noexcept { return names_; }

  /// Restores a saved index (ids are the positions in `names`); the result is frozen.
  void restore(std::vector<std::string> names);

  /// Raw feature strings active at a position, before indexing.
  std::vector<std::string> featureStrings(const TokenSequence& seq, std::size_t position) const;

 private:
  std::vector<FeatureTemplate> templates_;
  int ngramMin_ = 0;
  int ngramMax_ = 0;
  std::unordered_map<std::string, int> index_;
  std::vector<std::string> names_;
  bool frozen_ = false;
};

SparseFeatureVector extractFeatures(const TokenSequence& seq, std::size_t position,
                                    FeatureTemplateSet& templates);
/// Lookup-only variant; never grows the index.
SparseFeatureVector extractFeatures(const TokenSequence& seq, std::size_t position,
                                    const FeatureTemplateSet& templates);

}  // namespace scitag
