#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "scitag/rng.hpp"

namespace scitag {

/// A whitespace-free token and its offset, counted in Unicode scalar values,
/// into the line it came from.
struct Token {
  std::string text;
  std::size_t start = 0;

  bool operator==(const Token&) const = default;
};

/// One instance: a tagging sequence (labels), a classification document
/// (docClass), or unlabeled inference input (neither).
struct TokenSequence {
  std::vector<Token> tokens;
  std::optional<std::vector<std::string>> labels;
  std::optional<std::string> docClass;

  std::size_t size() const noexcept { return tokens.size(); }
  bool empty() const noexcept { return tokens.empty(); }
  std::vector<std::string> texts() const;

  bool operator==(const TokenSequence&) const = default;
};

enum class ColumnSep { Auto, Tab, Space };

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr std::string_view kPadToken = "<pad>";
  static constexpr std::string_view kUnkToken = "<unk>";

  Vocabulary();

  /// Builds a vocabulary whose ids 2.. follow the given token order
  /// (used for word-vector tables and for checkpoint reloads).
  static Vocabulary fromTokens(const std::vector<std::string>& tokens,
                               bool lowercase, int minFreq = 1,
                               std::map<std::string, std::int64_t> freq = {});

  std::size_t size() const noexcept { return tokenOf_.size(); }
  int minFreq() const noexcept { return minFreq_; }
  bool lowercase() const noexcept { return lowercase_; }

  /// Id for a surface token, applying the fitted lowercase policy;
  /// unknown tokens map to kUnk.
  int lookup(std::string_view token) const;
  std::optional<int> idOf(std::string_view normalized) const;
  const std::string& tokenOf(int id) const;
  std::int64_t frequency(std::string_view normalized) const;

  const std::vector<std::string>& tokens() const noexcept { return tokenOf_; }
  const std::map<std::string, std::int64_t>& frequencies() const noexcept {
    return freq_;
  }

  std::string normalize(std::string_view token) const;

  bool operator==(const Vocabulary& other) const {
    return tokenOf_ == other.tokenOf_ && freq_ == other.freq_ &&
           minFreq_ == other.minFreq_ && lowercase_ == other.lowercase_;
  }

 private:
  friend Vocabulary fitVocabulary(std::span<const TokenSequence>, int, bool);

  std::vector<std::string> tokenOf_;
  std::unordered_map<std::string, int> idOf_;
  std::map<std::string, std::int64_t> freq_;
  int minFreq_ = 1;
  bool lowercase_ = false;
};

struct Batch {
  std::vector<std::vector<int>> sequences;
  std::vector<std::vector<bool>> mask;
  std::size_t maxLen = 0;
  /// Position of each member in the input list.
  std::vector<std::size_t> members;
};

enum class DataFormat { Conll, Csv };

struct TaskEntry {
  std::string url;
  std::string sha256;
  DataFormat format = DataFormat::Conll;
};

struct TaskRegistry {
  std::map<std::string, TaskEntry> entries;
};

std::string_view formatName(DataFormat format);

TokenSequence tokenizeWhitespace(std::string_view line);
std::vector<std::string> tokenizeCharacters(const Token& token);

std::vector<TokenSequence> readConll(const std::filesystem::path& path,
                                     ColumnSep sep = ColumnSep::Auto);
std::vector<TokenSequence> parseConll(std::string_view content,
                                      ColumnSep sep = ColumnSep::Auto);
/// Token, separator, label per line; a blank line after each sequence.
std::string writeConll(std::span<const TokenSequence> data, char sep = ' ');

std::vector<TokenSequence> readCsv(const std::filesystem::path& path,
                                   bool hasHeader = false);
std::vector<TokenSequence> parseCsv(std::string_view content,
                                    bool hasHeader = false);

Vocabulary fitVocabulary(std::span<const TokenSequence> corpus, int minFreq,
                         bool lowercase);
std::vector<int> numericalize(const TokenSequence& seq, const Vocabulary& vocab);

std::vector<Batch> makeBatches(std::span<const std::vector<int>> idSeqs,
                               std::size_t batchSize,
                               std::optional<std::uint64_t> shuffleSeed);
std::vector<Batch> makeBatches(std::span<const TokenSequence> data,
                               const Vocabulary& vocab, std::size_t batchSize,
                               std::optional<std::uint64_t> shuffleSeed);

/// Fisher-Yates permutation of 0..n-1 drawn from the given generator.
std::vector<std::size_t> shuffledIndices(std::size_t n, Rng& rng);

TaskRegistry loadTaskRegistry(const std::filesystem::path& path);
TaskRegistry parseTaskRegistry(std::string_view text);

std::string sha256Hex(std::string_view bytes);
std::string sha256File(const std::filesystem::path& path);

/// Fetches the task's file into destDir/<task>.<format>, verifying its
/// digest. Returns immediately when a file with the right digest exists.
std::filesystem::path downloadTask(const std::string& task,
                                   const TaskRegistry& registry,
                                   const std::filesystem::path& destDir);

std::string readFile(const std::filesystem::path& path);
void writeFileAtomic(const std::filesystem::path& path, std::string_view content);

}  // namespace scitag
