#include "scitag/corpus.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>

#include <httplib.h>

#include "scitag/config.hpp"
#include "scitag/error.hpp"
#include "scitag/log.hpp"
#include "scitag/utf8.hpp"

namespace scitag {

namespace log {
namespace {
Sink& sinkRef() {
  static Sink sink = [](std::string_view msg) {
    std::fprintf(stderr, "warning: %.*s\n", static_cast<int>(msg.size()), msg.data());
  };
  return sink;
}
}  // namespace

Sink setWarningSink(Sink sink) {
  Sink previous = std::move(sinkRef());
  sinkRef() = std::move(sink);
  return previous;
}

void warn(std::string_view message) {
  if (sinkRef()) sinkRef()(message);
}
}  // namespace log

namespace {

constexpr std::size_t kLongSequence = 512;

std::vector<std::string_view> splitLines(std::string_view content) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < content.size()) {
    std::size_t nl = content.find('\n', pos);
    if (nl == std::string_view::npos) nl = content.size();
    std::string_view line = content.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    pos = nl + 1;
  }
  return lines;
}

bool isBlank(std::string_view line) {
  return std::all_of(line.begin(), line.end(), [](char c) {
    return c == ' ' || c == '\t' || c == '\r' || c == '\v' || c == '\f';
  });
}

std::vector<std::string_view> splitColumns(std::string_view line, char sep) {
  std::vector<std::string_view> cols;
  if (sep == '\t') {
    std::size_t pos = 0;
    while (true) {
      const std::size_t tab = line.find('\t', pos);
      std::string_view col = line.substr(pos, tab == std::string_view::npos ? tab : tab - pos);
      while (!col.empty() && col.back() == ' ') col.remove_suffix(1);
      while (!col.empty() && col.front() == ' ') col.remove_prefix(1);
      if (!col.empty()) cols.push_back(col);
      if (tab == std::string_view::npos) break;
      pos = tab + 1;
    }
    return cols;
  }
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && line[pos] == ' ') ++pos;
    if (pos >= line.size()) break;
    std::size_t end = line.find(' ', pos);
    if (end == std::string_view::npos) end = line.size();
    cols.push_back(line.substr(pos, end - pos));
    pos = end;
  }
  return cols;
}

void warnIfLong(const TokenSequence& seq, std::size_t index) {
  if (seq.size() > kLongSequence) {
    log::warn("sequence " + std::to_string(index + 1) + " has " +
              std::to_string(seq.size()) + " tokens");
  }
}

}  // namespace

std::string_view formatName(DataFormat format) {
  return format == DataFormat::Conll ? "conll" : "csv";
}

std::vector<std::string> TokenSequence::texts() const {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(t.text);
  return out;
}

std::string readFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(Errc::Io, "read failed for " + path.string());
  return content;
}

void writeFileAtomic(const std::filesystem::path& path, std::string_view content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::Io, "cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error(Errc::Io, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(Errc::Io, "cannot rename " + tmp.string() + ": " + ec.message());
}

// ---------------------------------------------------------------------------
// Tokenization

TokenSequence tokenizeWhitespace(std::string_view line) {
  TokenSequence seq;
  const std::u32string cps = utf8::decode(line);
  std::size_t i = 0;
  while (i < cps.size()) {
    while (i < cps.size() && utf8::isSpace(cps[i])) ++i;
    if (i >= cps.size()) break;
    const std::size_t begin = i;
    while (i < cps.size() && !utf8::isSpace(cps[i])) ++i;
    seq.tokens.push_back(
        {utf8::encode(std::u32string_view(cps).substr(begin, i - begin)), begin});
  }
  return seq;
}

std::vector<std::string> tokenizeCharacters(const Token& token) {
  std::vector<std::string> out;
  for (char32_t cp : utf8::decode(token.text)) out.push_back(utf8::encode(cp));
  return out;
}

// ---------------------------------------------------------------------------
// CoNLL

std::vector<TokenSequence> parseConll(std::string_view content, ColumnSep sep) {
  const auto lines = splitLines(content);

  char sepChar = ' ';
  if (sep == ColumnSep::Tab) {
    sepChar = '\t';
  } else if (sep == ColumnSep::Auto) {
    for (auto line : lines) {
      if (isBlank(line)) continue;
      if (line.find('\t') != std::string_view::npos) sepChar = '\t';
      break;
    }
  }

  std::vector<TokenSequence> out;
  TokenSequence current;
  std::vector<std::string> labels;
  std::size_t offset = 0;

  auto flush = [&] {
    if (current.tokens.empty()) return;
    current.labels = std::move(labels);
    warnIfLong(current, out.size());
    out.push_back(std::move(current));
    current = TokenSequence{};
    labels.clear();
    offset = 0;
  };

  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string_view line = lines[i];
    if (isBlank(line)) {
      flush();
      continue;
    }
    if (line.starts_with("-DOCSTART-")) continue;
    const auto cols = splitColumns(line, sepChar);
    if (cols.size() < 2) {
      throw Error(Errc::MalformedLine,
                  "line " + std::to_string(i + 1) + ": expected token and label columns",
                  i + 1);
    }
    current.tokens.push_back({std::string(cols.front()), offset});
    labels.emplace_back(cols.back());
    offset += utf8::length(cols.front()) + 1;
  }
  flush();
  return out;
}

std::vector<TokenSequence> readConll(const std::filesystem::path& path, ColumnSep sep) {
  return parseConll(readFile(path), sep);
}

std::string writeConll(std::span<const TokenSequence> data, char sep) {
  std::string out;
  for (const auto& seq : data) {
    for (std::size_t i = 0; i < seq.size(); ++i) {
      out += seq.tokens[i].text;
      out += sep;
      out += seq.labels ? (*seq.labels)[i] : std::string("O");
      out += '\n';
    }
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV (RFC 4180)

std::vector<TokenSequence> parseCsv(std::string_view content, bool hasHeader) {
  std::vector<TokenSequence> out;
  std::size_t pos = 0;
  std::size_t recordNo = 0;

  while (pos < content.size()) {
    // Skip completely empty lines between records.
    if (content[pos] == '\n' || content[pos] == '\r') {
      ++pos;
      continue;
    }
    ++recordNo;
    std::vector<std::string> fields;
    std::string field;
    bool done = false;
    auto malformed = [&](const std::string& why) {
      return Error(Errc::MalformedRecord,
                   "record " + std::to_string(recordNo) + ": " + why, recordNo);
    };
    while (!done) {
      field.clear();
      if (pos < content.size() && content[pos] == '"') {
        ++pos;
        bool closed = false;
        while (pos < content.size()) {
          const char c = content[pos++];
          if (c == '"') {
            if (pos < content.size() && content[pos] == '"') {
              field.push_back('"');
              ++pos;
            } else {
              closed = true;
              break;
            }
          } else {
            field.push_back(c);
          }
        }
        if (!closed) throw malformed("unterminated quoted field");
        if (pos < content.size() && content[pos] != ',' && content[pos] != '\n' &&
            content[pos] != '\r') {
          throw malformed("characters after closing quote");
        }
      } else {
        while (pos < content.size() && content[pos] != ',' && content[pos] != '\n' &&
               content[pos] != '\r') {
          if (content[pos] == '"') throw malformed("quote inside unquoted field");
          field.push_back(content[pos++]);
        }
      }
      fields.push_back(field);
      if (pos < content.size() && content[pos] == ',') {
        ++pos;
        continue;
      }
      if (pos < content.size() && content[pos] == '\r') ++pos;
      if (pos < content.size() && content[pos] == '\n') ++pos;
      done = true;
    }
    if (hasHeader && recordNo == 1) continue;
    if (fields.size() != 2) {
      throw malformed("expected 2 fields, found " + std::to_string(fields.size()));
    }
    TokenSequence seq = tokenizeWhitespace(fields[0]);
    seq.docClass = fields[1];
    warnIfLong(seq, out.size());
    out.push_back(std::move(seq));
  }
  return out;
}

std::vector<TokenSequence> readCsv(const std::filesystem::path& path, bool hasHeader) {
  return parseCsv(readFile(path), hasHeader);
}

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary::Vocabulary() {
  tokenOf_ = {std::string(kPadToken), std::string(kUnkToken)};
  idOf_[tokenOf_[0]] = kPad;
  idOf_[tokenOf_[1]] = kUnk;
}

Vocabulary Vocabulary::fromTokens(const std::vector<std::string>& tokens, bool lowercase,
                                  int minFreq, std::map<std::string, std::int64_t> freq) {
  Vocabulary v;
  v.lowercase_ = lowercase;
  v.minFreq_ = minFreq;
  v.freq_ = std::move(freq);
  for (const auto& t : tokens) {
    if (v.idOf_.contains(t)) continue;
    v.idOf_[t] = static_cast<int>(v.tokenOf_.size());
    v.tokenOf_.push_back(t);
  }
  return v;
}

std::string Vocabulary::normalize(std::string_view token) const {
  return lowercase_ ? utf8::toLower(token) : std::string(token);
}

int Vocabulary::lookup(std::string_view token) const {
  auto it = idOf_.find(normalize(token));
  if (it == idOf_.end() || it->second < 2) return kUnk;
  return it->second;
}

std::optional<int> Vocabulary::idOf(std::string_view normalized) const {
  auto it = idOf_.find(std::string(normalized));
  if (it == idOf_.end()) return std::nullopt;
  return it->second;
}

const std::string& Vocabulary::tokenOf(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokenOf_.size()) {
    throw Error(Errc::InvalidArgument, "vocabulary id " + std::to_string(id) + " out of range");
  }
  return tokenOf_[static_cast<std::size_t>(id)];
}

std::int64_t Vocabulary::frequency(std::string_view normalized) const {
  auto it = freq_.find(std::string(normalized));
  return it == freq_.end() ? 0 : it->second;
}

Vocabulary fitVocabulary(std::span<const TokenSequence> corpus, int minFreq, bool lowercase) {
  if (minFreq < 1) throw Error(Errc::InvalidArgument, "minFreq must be >= 1");
  Vocabulary v;
  v.minFreq_ = minFreq;
  v.lowercase_ = lowercase;
  for (const auto& seq : corpus) {
    for (const auto& tok : seq.tokens) ++v.freq_[v.normalize(tok.text)];
  }
  std::vector<std::pair<std::string, std::int64_t>> kept;
  for (const auto& [tok, n] : v.freq_) {
    if (n >= minFreq) kept.emplace_back(tok, n);
  }
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  for (const auto& [tok, n] : kept) {
    if (v.idOf_.contains(tok)) continue;  // a literal "<pad>"/"<unk>" token
    v.idOf_[tok] = static_cast<int>(v.tokenOf_.size());
    v.tokenOf_.push_back(tok);
  }
  return v;
}

std::vector<int> numericalize(const TokenSequence& seq, const Vocabulary& vocab) {
  std::vector<int> ids;
  ids.reserve(seq.size());
  for (const auto& tok : seq.tokens) ids.push_back(vocab.lookup(tok.text));
  return ids;
}

// ---------------------------------------------------------------------------
// Batching

std::vector<std::size_t> shuffledIndices(std::size_t n, Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

std::vector<Batch> makeBatches(std::span<const std::vector<int>> idSeqs, std::size_t batchSize,
                               std::optional<std::uint64_t> shuffleSeed) {
  if (batchSize < 1) throw Error(Errc::InvalidArgument, "batchSize must be >= 1");
  std::vector<std::size_t> order(idSeqs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (shuffleSeed) {
    Rng rng(*shuffleSeed);
    order = shuffledIndices(idSeqs.size(), rng);
  }
  std::vector<Batch> batches;
  for (std::size_t begin = 0; begin < order.size(); begin += batchSize) {
    const std::size_t end = std::min(order.size(), begin + batchSize);
    Batch b;
    for (std::size_t k = begin; k < end; ++k) {
      b.maxLen = std::max(b.maxLen, idSeqs[order[k]].size());
    }
    for (std::size_t k = begin; k < end; ++k) {
      const auto& ids = idSeqs[order[k]];
      std::vector<int> padded(b.maxLen, Vocabulary::kPad);
      std::vector<bool> mask(b.maxLen, false);
      std::copy(ids.begin(), ids.end(), padded.begin());
      std::fill_n(mask.begin(), ids.size(), true);
      b.sequences.push_back(std::move(padded));
      b.mask.push_back(std::move(mask));
      b.members.push_back(order[k]);
    }
    batches.push_back(std::move(b));
  }
  return batches;
}

std::vector<Batch> makeBatches(std::span<const TokenSequence> data, const Vocabulary& vocab,
                               std::size_t batchSize, std::optional<std::uint64_t> shuffleSeed) {
  std::vector<std::vector<int>> ids;
  ids.reserve(data.size());
  for (const auto& seq : data) ids.push_back(numericalize(seq, vocab));
  return makeBatches(ids, batchSize, shuffleSeed);
}

// ---------------------------------------------------------------------------
// Task registry and downloads

TaskRegistry parseTaskRegistry(std::string_view text) {
  const config::Table root = config::parse(text);
  TaskRegistry reg;
  for (const auto& entry : root.entries) {
    const auto* table = std::get_if<config::TablePtr>(&entry.value);
    if (!table) {
      throw Error(Errc::ConfigError, "registry entry '" + entry.key + "' must be a table");
    }
    auto str = [&](std::string_view key) {
      const config::Entry* e = (*table)->find(key);
      const auto* scalar = e ? std::get_if<config::Scalar>(&e->value) : nullptr;
      const auto* s = scalar ? std::get_if<std::string>(scalar) : nullptr;
      if (!s) {
        throw Error(Errc::ConfigError,
                    "task '" + entry.key + "' needs a string '" + std::string(key) + "'");
      }
      return *s;
    };
    TaskEntry task;
    task.url = str("url");
    task.sha256 = str("sha256");
    std::transform(task.sha256.begin(), task.sha256.end(), task.sha256.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    const bool hex = task.sha256.size() == 64 &&
                     std::all_of(task.sha256.begin(), task.sha256.end(), [](char c) {
                       return std::isxdigit(static_cast<unsigned char>(c));
                     });
    if (!hex) throw Error(Errc::ConfigError, "task '" + entry.key + "': sha256 must be 64 hex chars");
    const std::string format = str("format");
    if (format == "conll") {
      task.format = DataFormat::Conll;
    } else if (format == "csv") {
      task.format = DataFormat::Csv;
    } else {
      throw Error(Errc::ConfigError, "task '" + entry.key + "': unknown format '" + format + "'");
    }
    for (const auto& e : (*table)->entries) {
      if (e.key != "url" && e.key != "sha256" && e.key != "format") {
        throw Error(Errc::ConfigError, "task '" + entry.key + "': unknown key '" + e.key + "'");
      }
    }
    reg.entries.emplace(entry.key, std::move(task));
  }
  return reg;
}

TaskRegistry loadTaskRegistry(const std::filesystem::path& path) {
  return parseTaskRegistry(readFile(path));
}

std::string sha256Hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(Errc::Io, "sha256 computation failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

std::string sha256File(const std::filesystem::path& path) { return sha256Hex(readFile(path)); }

std::filesystem::path downloadTask(const std::string& task, const TaskRegistry& registry,
                                   const std::filesystem::path& destDir) {
  auto it = registry.entries.find(task);
  if (it == registry.entries.end()) {
    std::vector<std::string> known;
    for (const auto& [name, _] : registry.entries) known.push_back(name);
    throw Error(Errc::UnknownTask, "unknown task '" + task + "'", std::nullopt, known);
  }
  const TaskEntry& entry = it->second;
  const auto dest = destDir / (task + "." + std::string(formatName(entry.format)));
  if (std::filesystem::exists(dest) && sha256File(dest) == entry.sha256) return dest;

  const std::string& url = entry.url;
  const auto schemeEnd = url.find("://");
  if (schemeEnd == std::string::npos) throw Error(Errc::Network, "malformed url " + url);
  const auto pathStart = url.find('/', schemeEnd + 3);
  const std::string origin = url.substr(0, pathStart);
  const std::string target = pathStart == std::string::npos ? "/" : url.substr(pathStart);

  httplib::Client client(origin);
  client.set_follow_location(true);
  client.set_connection_timeout(10);
  client.set_read_timeout(60);
  auto res = client.Get(target);
  if (!res) {
    throw Error(Errc::Network, "GET " + url + " failed: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw Error(Errc::Network, "GET " + url + " returned HTTP " + std::to_string(res->status));
  }

  std::filesystem::create_directories(destDir);
  std::filesystem::path part = dest;
  part += ".part";
  {
    std::ofstream out(part, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::Io, "cannot write " + part.string());
    out.write(res->body.data(), static_cast<std::streamsize>(res->body.size()));
    if (!out) throw Error(Errc::Io, "write failed for " + part.string());
  }
  const std::string actual = sha256Hex(res->body);
  if (actual != entry.sha256) {
    std::filesystem::remove(part);
    throw Error(Errc::DigestMismatch,
                "digest mismatch for '" + task + "': expected " + entry.sha256 + ", got " + actual,
                std::nullopt, {entry.sha256, actual});
  }
  std::filesystem::rename(part, dest);
  return dest;
}

}  // namespace scitag
