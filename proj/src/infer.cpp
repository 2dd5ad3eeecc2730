#include "scitag/infer.hpp"

#include <algorithm>
#include <fstream>

#include "scitag/error.hpp"
#include "scitag/utf8.hpp"

namespace scitag {

LoadedModel loadModel(const std::filesystem::path& checkpointDir) {
  LoadedModel m;
  m.dir = checkpointDir;
  m.checkpoint = loadCheckpoint(checkpointDir);
  m.pipeline = restorePipeline(m.checkpoint);
  m.kind = m.pipeline.kind;
  return m;
}

namespace {

TokenSequence tokenizeInput(std::string_view text) {
  TokenSequence seq = tokenizeWhitespace(text);
  if (seq.empty()) throw Error(Errc::EmptyInput, "input text has no tokens");
  return seq;
}

}  // namespace

TaggedText tagText(const Pipeline& model, std::string_view text) {
  if (model.kind != ModelKind::Tagger) throw Error(Errc::KindMismatch, "model is not a tagger");
  const TokenSequence seq = tokenizeInput(text);
  const Path path = model.decode(model.prepare(seq));
  TaggedText out;
  out.tokens = seq.texts();
  for (int y : path) out.labels.push_back(model.labels.label(static_cast<std::size_t>(y)));
  const auto spans = model.labels.isBio() ? extractSpans(out.labels) : extractRuns(out.labels);
  for (const auto& s : spans) {
    const auto& last = seq.tokens[s.end];
    out.spans.push_back({s.type, s.start, s.end, seq.tokens[s.start].start,
                         last.start + utf8::length(last.text)});
  }
  return out;
}

Classification classifyText(const Pipeline& model, std::string_view text) {
  if (model.kind != ModelKind::Classifier) {
    throw Error(Errc::KindMismatch, "model is not a classifier");
  }
  const TokenSequence seq = tokenizeInput(text);
  const auto probs = model.probabilities(model.prepare(seq));
  Classification out;
  const auto best =
      static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin());
  out.label = model.labels.label(best);
  for (std::size_t c = 0; c < probs.size(); ++c) out.scores[model.labels.label(c)] = probs[c];
  return out;
}

Prediction predictForText(const LoadedModel& model, std::string_view text) {
  if (model.kind == ModelKind::Tagger) return tagText(model.pipeline, text);
  return classifyText(model.pipeline, text);
}

std::vector<std::optional<Prediction>> predictForFile(const LoadedModel& model,
                                                      const std::filesystem::path& path) {
  const std::string content = readFile(path);
  std::vector<std::optional<Prediction>> out;
  std::size_t pos = 0;
  while (pos < content.size()) {
    std::size_t nl = content.find('\n', pos);
    if (nl == std::string::npos) nl = content.size();
    std::string_view line(content.data() + pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (tokenizeWhitespace(line).empty()) {
      out.emplace_back(std::nullopt);
    } else {
      out.emplace_back(predictForText(model, line));
    }
    pos = nl + 1;
  }
  return out;
}

std::string formatPrediction(const Prediction& prediction) {
  if (const auto* c = std::get_if<Classification>(&prediction)) return c->label;
  const auto& t = std::get<TaggedText>(prediction);
  std::string out;
  for (std::size_t i = 0; i < t.tokens.size(); ++i) {
    if (i) out += ' ';
    out += t.tokens[i] + "|" + t.labels[i];
  }
  return out;
}

Evaluation evaluateOnDataset(const LoadedModel& model, std::span<const TokenSequence> data) {
  for (const auto& seq : data) {
    if (model.kind == ModelKind::Tagger && !seq.labels) {
      throw Error(Errc::KindMismatch, "tagger model given data without token labels");
    }
    if (model.kind == ModelKind::Classifier && !seq.docClass) {
      throw Error(Errc::KindMismatch, "classifier model given data without document classes");
    }
  }
  return evaluate(model.pipeline, data, false);
}

std::vector<ErrorInstance> queryErrors(const Evaluation& eval, std::string_view gold,
                                       std::string_view pred) {
  if (gold == pred) {
    throw Error(Errc::UnknownQuery, "gold and predicted label are the same; nothing is an error");
  }
  for (auto label : {gold, pred}) {
    if (!eval.report.confusion.labels.indexOf(label)) {
      throw Error(Errc::UnknownLabel, "label '" + std::string(label) + "' does not occur",
                  std::nullopt, {std::string(label)});
    }
  }
  const bool documents = eval.kind == ModelKind::Classifier;
  std::vector<ErrorInstance> out;
  for (std::size_t s = 0; s < eval.gold.size(); ++s) {
    for (std::size_t t = 0; t < eval.gold[s].size(); ++t) {
      if (eval.gold[s][t] != gold || eval.pred[s][t] != pred) continue;
      ErrorInstance e;
      e.sequenceIndex = s;
      e.position = t;
      e.goldLabel = std::string(gold);
      e.predLabel = std::string(pred);
      const auto& toks = eval.tokens[s];
      if (documents) {
        // Classifier errors: the whole document is the instance.
        for (std::size_t i = 0; i < toks.size(); ++i) e.token += (i ? " " : "") + toks[i];
        e.contextWindow.assign(toks.begin(), toks.begin() + std::min<std::size_t>(7, toks.size()));
      } else {
        e.token = t < toks.size() ? toks[t] : "";
        e.contextStart = t >= 3 ? t - 3 : 0;
        const std::size_t stop = std::min(toks.size(), t + 4);
        e.contextWindow.assign(toks.begin() + static_cast<std::ptrdiff_t>(e.contextStart),
                               toks.begin() + static_cast<std::ptrdiff_t>(stop));
      }
      out.push_back(std::move(e));
    }
  }
  return out;
}

std::string formatErrors(const std::vector<ErrorInstance>& errors) {
  std::string out;
  for (const auto& e : errors) {
    out += std::to_string(e.sequenceIndex) + ":" + std::to_string(e.position) + "\t" + e.token +
           "\tgold=" + e.goldLabel + "\tpred=" + e.predLabel + "\t";
    for (std::size_t i = 0; i < e.contextWindow.size(); ++i) {
      if (i) out += ' ';
      const bool focus = e.contextStart + i == e.position;
      out += focus ? "[" + e.contextWindow[i] + "]" : e.contextWindow[i];
    }
    out += "\n";
  }
  out += std::to_string(errors.size()) + (errors.size() == 1 ? " instance\n" : " instances\n");
  return out;
}

}  // namespace scitag
