#include "scitag/features.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "scitag/error.hpp"
#include "scitag/utf8.hpp"

namespace scitag {

namespace {

std::vector<std::string_view> splitSpaces(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) ++pos;
    if (pos >= line.size()) break;
    std::size_t end = pos;
    while (end < line.size() && line[end] != ' ' && line[end] != '\t') ++end;
    out.push_back(line.substr(pos, end - pos));
    pos = end;
  }
  return out;
}

bool parseDouble(std::string_view s, double& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

bool isCount(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

}  // namespace

DenseEmbedding parseWordVectors(std::string_view text, std::optional<std::size_t> expectedDim) {
  DenseEmbedding emb;
  std::size_t lineNo = 0;
  std::size_t pos = 0;
  bool first = true;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++lineNo;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const auto fields = splitSpaces(line);
    if (fields.empty()) continue;
    if (first) {
      first = false;
      // word2vec-style "V D" header
      if (fields.size() == 2 && isCount(fields[0]) && isCount(fields[1])) continue;
    }
    if (fields.size() < 2) {
      throw Error(Errc::ParseError, "line " + std::to_string(lineNo) + ": no vector values", lineNo);
    }
    const std::size_t d = fields.size() - 1;
    if (emb.dim == 0) {
      if (expectedDim && *expectedDim != d) {
        throw Error(Errc::DimMismatch,
                    "line " + std::to_string(lineNo) + ": expected dimension " +
                        std::to_string(*expectedDim) + ", found " + std::to_string(d),
                    lineNo);
      }
      emb.dim = d;
    } else if (d != emb.dim) {
      throw Error(Errc::DimMismatch,
                  "line " + std::to_string(lineNo) + ": expected dimension " +
                      std::to_string(emb.dim) + ", found " + std::to_string(d),
                  lineNo);
    }
    std::vector<double> vec(d);
    for (std::size_t k = 0; k < d; ++k) {
      if (!parseDouble(fields[k + 1], vec[k])) {
        throw Error(Errc::ParseError,
                    "line " + std::to_string(lineNo) + ": non-numeric value '" +
                        std::string(fields[k + 1]) + "'",
                    lineNo);
      }
    }
    std::string token(fields[0]);
    if (emb.table.contains(token)) continue;
    emb.order.push_back(token);
    emb.table.emplace(std::move(token), std::move(vec));
  }
  if (emb.dim == 0) throw Error(Errc::ParseError, "no word vectors found", 0);

  emb.unkVector.assign(emb.dim, 0.0);
  for (const auto& token : emb.order) {
    const auto& vec = emb.table.at(token);
    for (std::size_t k = 0; k < emb.dim; ++k) emb.unkVector[k] += vec[k];
  }
  for (double& v : emb.unkVector) v /= static_cast<double>(emb.order.size());
  return emb;
}

DenseEmbedding loadWordVectors(const std::filesystem::path& path,
                               std::optional<std::size_t> expectedDim) {
  return parseWordVectors(readFile(path), expectedDim);
}

std::vector<double> embed(const DenseEmbedding& embedding, const Token& token, bool lowercase) {
  const std::string key = lowercase ? utf8::toLower(token.text) : token.text;
  auto it = embedding.table.find(key);
  return it == embedding.table.end() ? embedding.unkVector : it->second;
}

std::vector<double> concatEmbed(std::span<const std::vector<double>> parts) {
  if (parts.empty()) throw Error(Errc::EmptyParts, "nothing to concatenate");
  std::vector<double> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

std::string wordShape(std::string_view text) {
  std::u32string out;
  char32_t runClass = 0;
  int runLength = 0;
  for (char32_t cp : utf8::decode(text)) {
    char32_t mapped = cp;
    if (utf8::isUpper(cp)) {
      mapped = U'X';
    } else if (utf8::isLower(cp)) {
      mapped = U'x';
    } else if (utf8::isDigit(cp)) {
      mapped = U'd';
    }
    if (mapped == runClass) {
      ++runLength;
    } else {
      runClass = mapped;
      runLength = 1;
    }
    if (runLength <= 4) out.push_back(mapped);
  }
  return utf8::encode(out);
}

std::vector<std::string> charNgramFeatures(std::string_view text, int minN, int maxN) {
  if (minN < 2 || maxN > 4 || minN > maxN) {
    throw Error(Errc::InvalidArgument, "character n-gram range must lie within [2,4]");
  }
  std::vector<std::string> out;
  if (text.empty()) return out;
  std::u32string padded = U"^";
  padded += utf8::decode(text);
  padded += U'$';
  for (int n = minN; n <= maxN; ++n) {
    const auto un = static_cast<std::size_t>(n);
    if (padded.size() < un) continue;
    for (std::size_t i = 0; i + un <= padded.size(); ++i) {
      out.push_back("cng=" + utf8::encode(std::u32string_view(padded).substr(i, un)));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Templates

namespace {

constexpr std::pair<FeatureTemplate, std::string_view> kTemplateNames[] = {
    {FeatureTemplate::Lower, "lower"},
    {FeatureTemplate::Shape, "shape"},
    {FeatureTemplate::Prefix1, "prefix1"},
    {FeatureTemplate::Prefix2, "prefix2"},
    {FeatureTemplate::Prefix3, "prefix3"},
    {FeatureTemplate::Prefix4, "prefix4"},
    {FeatureTemplate::Suffix1, "suffix1"},
    {FeatureTemplate::Suffix2, "suffix2"},
    {FeatureTemplate::Suffix3, "suffix3"},
    {FeatureTemplate::Suffix4, "suffix4"},
    {FeatureTemplate::IsDigit, "isDigit"},
    {FeatureTemplate::HasDigit, "hasDigit"},
    {FeatureTemplate::IsCapitalized, "isCapitalized"},
    {FeatureTemplate::IsPunct, "isPunct"},
    {FeatureTemplate::PrevLower, "prevLower"},
    {FeatureTemplate::NextLower, "nextLower"},
    {FeatureTemplate::Bias, "bias"},
};

const char* boolText(bool b) { return b ? "true" : "false"; }

}  // namespace

std::string_view templateName(FeatureTemplate t) {
  for (const auto& [tpl, name] : kTemplateNames) {
    if (tpl == t) return name;
  }
  return "";
}

std::optional<FeatureTemplate> templateFromName(std::string_view name) {
  for (const auto& [tpl, n] : kTemplateNames) {
    if (n == name) return tpl;
  }
  return std::nullopt;
}

std::vector<FeatureTemplate> allTemplates() {
  std::vector<FeatureTemplate> out;
  for (const auto& [tpl, _] : kTemplateNames) out.push_back(tpl);
  return out;
}

FeatureTemplateSet::FeatureTemplateSet(std::vector<FeatureTemplate> templates, int ngramMin,
                                       int ngramMax)
    : templates_(std::move(templates)), ngramMin_(ngramMin), ngramMax_(ngramMax) {
  if (ngramMin_ != 0 || ngramMax_ != 0) {
    if (ngramMin_ < 2 || ngramMax_ > 4 || ngramMin_ > ngramMax_) {
      throw Error(Errc::InvalidArgument, "character n-gram range must lie within [2,4]");
    }
  }
}

std::optional<int> FeatureTemplateSet::find(std::string_view feature) const {
  auto it = index_.find(std::string(feature));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::optional<int> FeatureTemplateSet::intern(const std::string& feature) {
  if (auto it = index_.find(feature); it != index_.end()) return it->second;
  if (frozen_) return std::nullopt;
  const int id = static_cast<int>(names_.size());
  index_.emplace(feature, id);
  names_.push_back(feature);
  return id;
}

void FeatureTemplateSet::restore(std::vector<std::string> names) {
  index_.clear();
  names_ = std::move(names);
  for (std::size_t i = 0; i < names_.size(); ++i) index_.emplace(names_[i], static_cast<int>(i));
  frozen_ = true;
}

std::vector<std::string> FeatureTemplateSet::featureStrings(const TokenSequence& seq,
                                                            std::size_t position) const {
  if (position >= seq.size()) {
    throw Error(Errc::PositionOutOfRange,
                "position " + std::to_string(position) + " outside sequence of length " +
                    std::to_string(seq.size()),
                position);
  }
  const std::string& text = seq.tokens[position].text;
  const std::u32string cps = utf8::decode(text);
  auto prefix = [&](std::size_t n) { return utf8::encode(std::u32string_view(cps).substr(0, n)); };
  auto suffix = [&](std::size_t n) {
    return utf8::encode(std::u32string_view(cps).substr(cps.size() - n));
  };

  std::vector<std::string> out;
  for (FeatureTemplate t : templates_) {
    const std::string name(templateName(t));
    switch (t) {
      case FeatureTemplate::Lower:
        out.push_back(name + "=" + utf8::toLower(text));
        break;
      case FeatureTemplate::Shape:
        out.push_back(name + "=" + wordShape(text));
        break;
      case FeatureTemplate::Prefix1:
      case FeatureTemplate::Prefix2:
      case FeatureTemplate::Prefix3:
      case FeatureTemplate::Prefix4: {
        const auto n = static_cast<std::size_t>(t) - static_cast<std::size_t>(FeatureTemplate::Prefix1) + 1;
        if (cps.size() >= n) out.push_back(name + "=" + prefix(n));
        break;
      }
      case FeatureTemplate::Suffix1:
      case FeatureTemplate::Suffix2:
      case FeatureTemplate::Suffix3:
      case FeatureTemplate::Suffix4: {
        const auto n = static_cast<std::size_t>(t) - static_cast<std::size_t>(FeatureTemplate::Suffix1) + 1;
        if (cps.size() >= n) out.push_back(name + "=" + suffix(n));
        break;
      }
      case FeatureTemplate::IsDigit:
        out.push_back(name + "=" +
                      boolText(!cps.empty() && std::all_of(cps.begin(), cps.end(), utf8::isDigit)));
        break;
      case FeatureTemplate::HasDigit:
        out.push_back(name + "=" + boolText(std::any_of(cps.begin(), cps.end(), utf8::isDigit)));
        break;
      case FeatureTemplate::IsCapitalized:
        out.push_back(name + "=" + boolText(!cps.empty() && utf8::isUpper(cps.front())));
        break;
      case FeatureTemplate::IsPunct:
        out.push_back(name + "=" +
                      boolText(!cps.empty() && std::all_of(cps.begin(), cps.end(), utf8::isPunct)));
        break;
      case FeatureTemplate::PrevLower:
        out.push_back(name + "=" +
                      (position == 0 ? std::string("<BOS>")
                                     : utf8::toLower(seq.tokens[position - 1].text)));
        break;
      case FeatureTemplate::NextLower:
        out.push_back(name + "=" +
                      (position + 1 == seq.size() ? std::string("<EOS>")
                                                  : utf8::toLower(seq.tokens[position + 1].text)));
        break;
      case FeatureTemplate::Bias:
        out.push_back(name);
        break;
    }
  }
  if (ngramMin_ > 0) {
    auto grams = charNgramFeatures(text, ngramMin_, ngramMax_);
    out.insert(out.end(), std::make_move_iterator(grams.begin()), std::make_move_iterator(grams.end()));
  }
  return out;
}

namespace {

SparseFeatureVector collect(std::vector<int>& ids) {
  std::sort(ids.begin(), ids.end());
  SparseFeatureVector v;
  for (int id : ids) {
    if (!v.indices.empty() && v.indices.back() == id) {
      v.values.back() += 1.0;
    } else {
      v.indices.push_back(id);
      v.values.push_back(1.0);
    }
  }
  return v;
}

}  // namespace

SparseFeatureVector extractFeatures(const TokenSequence& seq, std::size_t position,
                                    FeatureTemplateSet& templates) {
  std::vector<int> ids;
  for (const auto& f : templates.featureStrings(seq, position)) {
    if (auto id = templates.intern(f)) ids.push_back(*id);
  }
  return collect(ids);
}

SparseFeatureVector extractFeatures(const TokenSequence& seq, std::size_t position,
                                    const FeatureTemplateSet& templates) {
  std::vector<int> ids;
  for (const auto& f : templates.featureStrings(seq, position)) {
    if (auto id = templates.find(f)) ids.push_back(*id);
  }
  return collect(ids);
}

}  // namespace scitag
