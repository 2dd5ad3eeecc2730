#include "scitag/model.hpp"

#include <algorithm>

#include "scitag/error.hpp"

namespace scitag {

namespace {

std::vector<std::shared_ptr<EmbedderSpec>> leavesOf(const Experiment& exp) {
  if (auto t = exp.tagger()) return flattenEmbedders(t->embedders);
  return flattenEmbedders(exp.classifier()->encoder->embedders);
}

std::string groupName(const EmbedderSpec& e) { return "embedding." + e.id; }

bool frozen(const EmbedderSpec& e) {
  if (auto v = dynamic_cast<const VanillaEmbedderSpec*>(&e)) return v->freeze;
  return dynamic_cast<const WordEmbedderSpec&>(e).freeze;
}

// Model-level structure shared by create() and skeleton(); embedding tables
// must already be in place.
void buildHeads(Pipeline& p, const Experiment& exp, std::size_t numFeatures) {
  const std::size_t D = p.denseDim();
  if (auto t = exp.tagger()) {
    p.kind = ModelKind::Tagger;
    p.features = FeatureTemplateSet(t->templates, t->ngrams ? t->ngrams->minN : 0,
                                    t->ngrams ? t->ngrams->maxN : 0);
    p.crf = CrfModel(p.labels, numFeatures, D, t->l2);
    switch (t->decoding) {
      case DecodePolicy::Auto: p.constrained = p.labels.isBio(); break;
      case DecodePolicy::Unconstrained: p.constrained = false; break;
      case DecodePolicy::Constrained:
        if (!p.labels.isBio()) {
          throw Error(Errc::NotBioLabelSet,
                      "[model] decoding = \"constrained\" needs a BIO label set");
        }
        p.constrained = true;
        break;
    }
    return;
  }
  const auto& c = *exp.classifier();
  p.kind = ModelKind::Classifier;
  if (D != c.encoder->embDim) {
    throw Error(Errc::ConfigError, "[model.encoder] emb_dim is " + std::to_string(c.encoder->embDim) +
                                       " but its embedders produce " + std::to_string(D) +
                                       " dimensions");
  }
  if (p.labels.size() != c.numClasses) {
    throw Error(Errc::ConfigError, "[model] num_classes is " + std::to_string(c.numClasses) +
                                       " but the dataset has " + std::to_string(p.labels.size()) +
                                       " classes");
  }
  p.classifier = SoftmaxClassifier(c.numClasses, c.encodingDim, c.encoder->aggregation, c.bias);
}

}  // namespace

Pipeline Pipeline::create(const Experiment& exp, Vocabulary vocab, LabelSet labels, Rng& rng) {
  Pipeline p;
  p.vocab = std::move(vocab);
  p.labels = std::move(labels);
  for (const auto& leaf : leavesOf(exp)) {
    EmbeddingTable table;
    table.group = groupName(*leaf);
    table.trainable = !frozen(*leaf);
    if (auto v = std::dynamic_pointer_cast<VanillaEmbedderSpec>(leaf)) {
      table.index = p.vocab;
      table.weights = Matrix(p.vocab.size(), *v->dim);
      for (std::size_t r = 1; r < table.weights.rows(); ++r) {
        for (double& x : table.weights.row(r)) x = rng.uniform(-0.1, 0.1);
      }
    } else {
      const auto& w = dynamic_cast<const WordEmbedderSpec&>(*leaf);
      const DenseEmbedding vectors = loadWordVectors(exp.resolve(w.path), w.dim);
      table.index = Vocabulary::fromTokens(vectors.order, p.vocab.lowercase());
      table.weights = Matrix(table.index.size(), vectors.dim);
      std::copy(vectors.unkVector.begin(), vectors.unkVector.end(), table.weights.row(1).begin());
      for (std::size_t r = 2; r < table.index.size(); ++r) {
        const auto& v = vectors.table.at(table.index.tokenOf(static_cast<int>(r)));
        std::copy(v.begin(), v.end(), table.weights.row(r).begin());
      }
    }
    p.embeddings.push_back(std::move(table));
  }
  buildHeads(p, exp, 0);
  return p;
}

Pipeline Pipeline::skeleton(const Experiment& exp, Vocabulary vocab, LabelSet labels,
                            std::vector<Vocabulary> tableIndexes,
                            std::vector<std::size_t> tableDims, std::size_t numFeatures) {
  Pipeline p;
  p.vocab = std::move(vocab);
  p.labels = std::move(labels);
  const auto leaves = leavesOf(exp);
  if (tableIndexes.size() != leaves.size() || tableDims.size() != leaves.size()) {
    throw Error(Errc::ShapeMismatch, "checkpoint has " + std::to_string(tableIndexes.size()) +
                                         " embedding tables, experiment declares " +
                                         std::to_string(leaves.size()),
                std::nullopt, {"embedding"});
  }
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    EmbeddingTable table;
    table.group = groupName(*leaves[i]);
    table.trainable = !frozen(*leaves[i]);
    table.index = std::move(tableIndexes[i]);
    table.weights = Matrix(table.index.size(), tableDims[i]);
    p.embeddings.push_back(std::move(table));
  }
  buildHeads(p, exp, numFeatures);
  return p;
}

std::vector<std::string> Pipeline::tableGroups(const Experiment& exp) {
  std::vector<std::string> out;
  for (const auto& leaf : leavesOf(exp)) out.push_back(groupName(*leaf));
  return out;
}

std::size_t Pipeline::denseDim() const {
  std::size_t d = 0;
  for (const auto& t : embeddings) d += t.weights.cols();
  return d;
}

namespace {

std::vector<std::vector<int>> tableRows(const std::vector<EmbeddingTable>& tables,
                                        const TokenSequence& seq) {
  std::vector<std::vector<int>> rows;
  for (const auto& t : tables) {
    std::vector<int> ids;
    ids.reserve(seq.size());
    for (const auto& tok : seq.tokens) ids.push_back(t.index.lookup(tok.text));
    rows.push_back(std::move(ids));
  }
  return rows;
}

}  // namespace

PreparedInstance Pipeline::prepareForTraining(const TokenSequence& seq) {
  PreparedInstance inst;
  inst.length = seq.size();
  if (kind == ModelKind::Tagger) {
    if (!seq.labels) throw Error(Errc::KindMismatch, "tagger training needs token labels");
    for (std::size_t t = 0; t < seq.size(); ++t) {
      inst.sparse.push_back(extractFeatures(seq, t, features));
    }
    for (const auto& l : *seq.labels) inst.gold.push_back(labels.require(l));
  } else {
    if (!seq.docClass) throw Error(Errc::KindMismatch, "classifier training needs a document class");
    inst.gold.push_back(labels.require(*seq.docClass));
  }
  inst.rows = tableRows(embeddings, seq);
  return inst;
}

PreparedInstance Pipeline::prepare(const TokenSequence& seq) const {
  PreparedInstance inst;
  inst.length = seq.size();
  if (kind == ModelKind::Tagger) {
    for (std::size_t t = 0; t < seq.size(); ++t) {
      inst.sparse.push_back(extractFeatures(seq, t, features));
    }
  }
  inst.rows = tableRows(embeddings, seq);
  return inst;
}

void Pipeline::finalizeFeatures() {
  features.freeze();
  crf.sparseWeights = Matrix(features.size(), crf.numLabels());
}

Matrix Pipeline::denseInput(const PreparedInstance& inst, const std::vector<char>* dropped) const {
  Matrix out(inst.length, denseDim());
  std::size_t offset = 0;
  for (std::size_t j = 0; j < embeddings.size(); ++j) {
    const auto& table = embeddings[j];
    const std::size_t d = table.weights.cols();
    for (std::size_t t = 0; t < inst.length; ++t) {
      const bool drop = dropped && (*dropped)[t];
      const auto src = table.weights.row(static_cast<std::size_t>(drop ? Vocabulary::kUnk : inst.rows[j][t]));
      std::copy(src.begin(), src.end(), out.row(t).begin() + static_cast<std::ptrdiff_t>(offset));
    }
    offset += d;
  }
  return out;
}

Path Pipeline::decode(const PreparedInstance& inst) const {
  if (inst.length == 0) return {};
  const FeaturizedSequence seq{inst.sparse, denseInput(inst)};
  const EmissionTable em = computeEmissions(crf, seq);
  return constrained ? constrainedViterbi(crf, em).path : viterbi(crf, em).path;
}

std::vector<double> Pipeline::probabilities(const PreparedInstance& inst) const {
  return classifyScores(classifier, denseInput(inst));
}

std::map<std::string, ParamGroup> Pipeline::parameters() {
  std::map<std::string, ParamGroup> out;
  auto add = [&](const std::string& name, Matrix& m) {
    out[name] = ParamGroup{{m.rows(), m.cols()}, m.flat()};
  };
  auto addVec = [&](const std::string& name, std::vector<double>& v) {
    out[name] = ParamGroup{{v.size()}, std::span<double>(v)};
  };
  if (kind == ModelKind::Tagger) {
    add("crf.sparse", crf.sparseWeights);
    add("crf.dense", crf.denseWeights);
    add("crf.transitions", crf.transitions);
    addVec("crf.start", crf.startScores);
    addVec("crf.end", crf.endScores);
  } else {
    add("classifier.weights", classifier.weights);
    addVec("classifier.bias", classifier.bias);
  }
  for (auto& t : embeddings) add(t.group, t.weights);
  return out;
}

std::vector<std::string> Pipeline::trainableGroups() const {
  std::vector<std::string> out;
  if (kind == ModelKind::Tagger) {
    out = {"crf.dense", "crf.end", "crf.sparse", "crf.start", "crf.transitions"};
  } else {
    out = {"classifier.weights"};
    if (classifier.useBias) out.push_back("classifier.bias");
  }
  for (const auto& t : embeddings) {
    if (t.trainable) out.push_back(t.group);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace scitag
