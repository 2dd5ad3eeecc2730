#pragma once

// Reader for the small declarative configuration dialect used by experiment
// files and the task registry: `[a.b]` tables, `[[a.b]]` arrays of tables,
// `key = value` with string/integer/float/boolean scalars or a one-level
// array of scalars, and `#` comments. Anything else is a SyntaxError.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace scitag::config {

using Scalar = std::variant<std::string, std::int64_t, double, bool>;
using Array = std::vector<Scalar>;

struct Table;
using TablePtr = std::shared_ptr<Table>;
using TableArray = std::vector<TablePtr>;

using Value = std::variant<Scalar, Array, TablePtr, TableArray>;

struct Entry {
  std::string key;
  std::size_t line = 0;
  Value value;
};

struct Table {
  std::vector<Entry> entries;  // declaration order
  std::size_t line = 0;        // header line; 0 for the root or implicit tables
  bool defined = false;        // false while only created implicitly

  const Entry* find(std::string_view key) const;
  Entry* find(std::string_view key);
};

Table parse(std::string_view text);

std::string typeName(const Scalar& value);
std::string typeName(const Value& value);
/// Renders a scalar back in the dialect's syntax.
std::string render(const Scalar& value);

}  // namespace scitag::config
