#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace scitag {

enum class Errc {
  Io,
  MalformedLine,
  MalformedRecord,
  UnknownTask,
  DigestMismatch,
  Network,
  DimMismatch,
  ParseError,
  EmptyParts,
  PositionOutOfRange,
  SyntaxError,
  MissingSection,
  UnknownSection,
  MissingClassKey,
  UnknownClass,
  UnsupportedClass,
  ParamTypeError,
  MissingParam,
  ExtraParam,
  CycleDetected,
  DanglingReference,
  DuplicateId,
  ConfigError,
  LengthMismatch,
  EmptySequence,
  NotBioLabelSet,
  EmptyDocument,
  ShapeMismatch,
  NonFiniteLoss,
  VersionMismatch,
  CorruptCheckpoint,
  Empty,
  UnknownTagFormat,
  EmptyInput,
  KindMismatch,
  UnknownLabel,
  UnknownQuery,
  InvalidArgument,
};

std::string_view errcName(Errc code);

/// True for the error kinds that stem from a bad experiment file rather
/// than from the environment; the CLI maps these to exit code 2.
bool isConfigError(Errc code);

/// Every failure in the library is reported as an Error carrying a kind,
/// a message, and (depending on the kind) a 1-based line/record number or
/// index plus a list of related names (cycle members, expected/actual
/// digests, ...).
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message,
        std::optional<std::size_t> where = std::nullopt,
        std::vector<std::string> items = {})
      : std::runtime_error(message),
        code_(code),
        where_(where),
        items_(std::move(items)) {}

  Errc code() const noexcept { return code_; }
  std::optional<std::size_t> where() const noexcept { return where_; }
  const std::vector<std::string>& items() const noexcept { return items_; }

 private:
  Errc code_;
  std::optional<std::size_t> where_;
  std::vector<std::string> items_;
};

}  // namespace scitag
