#include "scitag/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "scitag/error.hpp"
#include "scitag/utf8.hpp"

namespace scitag::config {

const Entry* Table::find(std::string_view key) const {
  for (const auto& e : entries) {
    if (e.key == key) return &e;
  }
  return nullptr;
}

Entry* Table::find(std::string_view key) {
  for (auto& e : entries) {
    if (e.key == key) return &e;
  }
  return nullptr;
}

namespace {

[[noreturn]] void fail(std::size_t line, const std::string& what) {
  throw Error(Errc::SyntaxError, "line " + std::to_string(line) + ": " + what, line);
}

bool isBareKeyChar(char c) {
  return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') ||
         (c >= '0' && c <= '9') || c == '_' || c == '-';
}

class LineCursor {
 public:
  LineCursor(std::string_view text, std::size_t lineNo) : s_(text), line_(lineNo) {}

  void skipSpace() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }
  bool atEnd() const { return pos_ >= s_.size(); }
  char peek() const { return atEnd() ? '\0' : s_[pos_]; }
  bool consume(char c) {
    if (peek() != c) return false;
    ++pos_;
    return true;
  }
  void expect(char c) {
    if (!consume(c)) fail(line_, std::string("expected '") + c + "'");
  }
  bool startsWith(std::string_view prefix) const {
    return s_.substr(pos_).starts_with(prefix);
  }
  std::size_t line() const { return line_; }

  std::string key() {
    skipSpace();
    if (peek() == '"') return basicString();
    if (peek() == '\'') return literalString();
    const std::size_t begin = pos_;
    while (!atEnd() && isBareKeyChar(peek())) ++pos_;
    if (begin == pos_) fail(line_, "expected a key");
    return std::string(s_.substr(begin, pos_ - begin));
  }

  std::vector<std::string> dottedKey() {
    std::vector<std::string> parts{key()};
    skipSpace();
    while (consume('.')) {
      parts.push_back(key());
      skipSpace();
    }
    return parts;
  }

  std::string basicString() {
    if (startsWith("\"\"\"")) fail(line_, "multi-line strings are not supported");
    expect('"');
    std::string out;
    while (true) {
      if (atEnd()) fail(line_, "unterminated string");
      const char c = s_[pos_++];
      if (c == '"') break;
      if (c != '\\') {
        out.push_back(c);
        continue;
      }
      if (atEnd()) fail(line_, "unterminated escape");
      const char e = s_[pos_++];
      switch (e) {
        case '"': out.push_back('"'); break;
        case '\\': out.push_back('\\'); break;
        case 'n': out.push_back('\n'); break;
        case 't': out.push_back('\t'); break;
        case 'r': out.push_back('\r'); break;
        case 'b': out.push_back('\b'); break;
        case 'f': out.push_back('\f'); break;
        case 'u':
        case 'U': {
          const std::size_t n = e == 'u' ? 4 : 8;
          if (pos_ + n > s_.size()) fail(line_, "short unicode escape");
          std::uint32_t cp = 0;
          const auto* first = s_.data() + pos_;
          auto [ptr, ec] = std::from_chars(first, first + n, cp, 16);
          if (ec != std::errc() || ptr != first + n) fail(line_, "bad unicode escape");
          pos_ += n;
          out += utf8::encode(static_cast<char32_t>(cp));
          break;
        }
        default:
          fail(line_, std::string("unknown escape \\") + e);
      }
    }
    return out;
  }

  std::string literalString() {
    if (startsWith("'''")) fail(line_, "multi-line strings are not supported");
    expect('\'');
    const std::size_t end = s_.find('\'', pos_);
    if (end == std::string_view::npos) fail(line_, "unterminated string");
    std::string out(s_.substr(pos_, end - pos_));
    pos_ = end + 1;
    return out;
  }

  Scalar scalar() {
    skipSpace();
    const char c = peek();
    if (c == '"') return basicString();
    if (c == '\'') return literalString();
    if (c == '{') fail(line_, "inline tables are not supported");
    if (c == '[') fail(line_, "nested arrays are not supported");
    std::size_t end = pos_;
    while (end < s_.size() && s_[end] != ',' && s_[end] != ']' && s_[end] != ' ' &&
           s_[end] != '\t') {
      ++end;
    }
    const std::string_view word = s_.substr(pos_, end - pos_);
    if (word.empty()) fail(line_, "expected a value");
    pos_ = end;
    // Capitalized booleans are accepted alongside the lowercase forms.
    if (word == "true" || word == "True") return true;
    if (word == "false" || word == "False") return false;
    return number(word);
  }

  Scalar number(std::string_view word) {
    std::string cleaned;
    for (std::size_t i = 0; i < word.size(); ++i) {
      if (word[i] == '_') {
        const bool ok = i > 0 && i + 1 < word.size() &&
                        std::isdigit(static_cast<unsigned char>(word[i - 1])) &&
                        std::isdigit(static_cast<unsigned char>(word[i + 1]));
        if (!ok) fail(line_, "misplaced '_' in number");
        continue;
      }
      cleaned.push_back(word[i]);
    }
    std::string_view body = cleaned;
    if (!body.empty() && (body[0] == '+' || body[0] == '-')) body.remove_prefix(1);
    if (body.empty() || !std::isdigit(static_cast<unsigned char>(body[0]))) {
      fail(line_, "unsupported value '" + std::string(word) + "'");
    }
    const bool isFloat = cleaned.find_first_of(".eE") != std::string::npos;
    const char* first = cleaned.data();
    const char* last = first + cleaned.size();
    if (*first == '+') ++first;
    if (!isFloat) {
      std::int64_t v = 0;
      auto [ptr, ec] = std::from_chars(first, last, v);
      if (ec != std::errc() || ptr != last) {
        fail(line_, "invalid integer '" + std::string(word) + "'");
      }
      return v;
    }
    // Require digits on both sides of the decimal point.
    const auto dot = cleaned.find('.');
    if (dot != std::string::npos) {
      const bool digitBefore = dot > 0 && std::isdigit(static_cast<unsigned char>(cleaned[dot - 1]));
      const bool digitAfter = dot + 1 < cleaned.size() &&
                              std::isdigit(static_cast<unsigned char>(cleaned[dot + 1]));
      if (!digitBefore || !digitAfter) fail(line_, "invalid float '" + std::string(word) + "'");
    }
    double v = 0;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
      fail(line_, "invalid float '" + std::string(word) + "'");
    }
    return v;
  }

  Value value() {
    skipSpace();
    if (!consume('[')) return scalar();
    Array items;
    skipSpace();
    if (consume(']')) return items;
    while (true) {
      items.push_back(scalar());
      skipSpace();
      if (consume(']')) break;
      expect(',');
      skipSpace();
      if (consume(']')) break;  // trailing comma
    }
    return items;
  }

 private:
  std::string_view s_;
  std::size_t line_;
  std::size_t pos_ = 0;
};

// Strips a trailing comment, honoring quotes.
std::string_view stripComment(std::string_view line) {
  char quote = '\0';
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quote) {
      if (quote == '"' && c == '\\') {
        ++i;
      } else if (c == quote) {
        quote = '\0';
      }
    } else if (c == '"' || c == '\'') {
      quote = c;
    } else if (c == '#') {
      return line.substr(0, i);
    }
  }
  return line;
}

std::string joinPath(const std::vector<std::string>& parts) {
  std::string out;
  for (const auto& p : parts) {
    if (!out.empty()) out += '.';
    out += p;
  }
  return out;
}

// Walks to the parent of the last path segment, creating implicit tables.
Table* descend(Table& root, const std::vector<std::string>& path, std::size_t line) {
  Table* cur = &root;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    Entry* e = cur->find(path[i]);
    if (!e) {
      auto t = std::make_shared<Table>();
      cur->entries.push_back({path[i], line, t});
      cur = t.get();
    } else if (auto* t = std::get_if<TablePtr>(&e->value)) {
      cur = t->get();
    } else if (auto* arr = std::get_if<TableArray>(&e->value)) {
      cur = arr->back().get();
    } else {
      fail(line, "key '" + path[i] + "' is not a table");
    }
  }
  return cur;
}

}  // namespace

Table parse(std::string_view text) {
  Table root;
  root.defined = true;
  Table* current = &root;

  std::size_t lineNo = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view raw = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++lineNo;
    if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);

    LineCursor cur(stripComment(raw), lineNo);
    cur.skipSpace();
    if (cur.atEnd()) {
      if (nl == text.size()) break;
      continue;
    }

    if (cur.startsWith("[[")) {
      cur.expect('[');
      cur.expect('[');
      const auto path = cur.dottedKey();
      cur.expect(']');
      cur.expect(']');
      cur.skipSpace();
      if (!cur.atEnd()) fail(lineNo, "trailing characters after table header");
      Table* parent = descend(root, path, lineNo);
      auto t = std::make_shared<Table>();
      t->line = lineNo;
      t->defined = true;
      Entry* e = parent->find(path.back());
      if (!e) {
        parent->entries.push_back({path.back(), lineNo, TableArray{t}});
      } else if (auto* arr = std::get_if<TableArray>(&e->value)) {
        arr->push_back(t);
      } else {
        fail(lineNo, "'" + joinPath(path) + "' is already defined as a non-array");
      }
      current = t.get();
    } else if (cur.consume('[')) {
      const auto path = cur.dottedKey();
      cur.expect(']');
      cur.skipSpace();
      if (!cur.atEnd()) fail(lineNo, "trailing characters after table header");
      Table* parent = descend(root, path, lineNo);
      Entry* e = parent->find(path.back());
      if (!e) {
        auto t = std::make_shared<Table>();
        t->line = lineNo;
        t->defined = true;
        parent->entries.push_back({path.back(), lineNo, t});
        current = t.get();
      } else if (auto* t = std::get_if<TablePtr>(&e->value); t && !(*t)->defined) {
        (*t)->defined = true;
        (*t)->line = lineNo;
        current = t->get();
      } else {
        fail(lineNo, "table '" + joinPath(path) + "' defined twice");
      }
    } else {
      const auto keyPath = cur.dottedKey();
      if (keyPath.size() != 1) fail(lineNo, "dotted keys are not supported");
      cur.expect('=');
      Value v = cur.value();
      cur.skipSpace();
      if (!cur.atEnd()) fail(lineNo, "trailing characters after value");
      if (current->find(keyPath[0])) {
        fail(lineNo, "duplicate key '" + keyPath[0] + "'");
      }
      current->entries.push_back({keyPath[0], lineNo, std::move(v)});
    }
    if (nl == text.size()) break;
  }
  return root;
}

std::string typeName(const Scalar& value) {
  switch (value.index()) {
    case 0: return "string";
    case 1: return "integer";
    case 2: return "float";
    default: return "boolean";
  }
}

std::string typeName(const Value& value) {
  if (const auto* s = std::get_if<Scalar>(&value)) return typeName(*s);
  if (std::holds_alternative<Array>(value)) return "array";
  if (std::holds_alternative<TablePtr>(value)) return "table";
  return "array of tables";
}

std::string render(const Scalar& value) {
  if (const auto* s = std::get_if<std::string>(&value)) {
    std::string out = "\"";
    for (char c : *s) {
      switch (c) {
        case '\n': out += "\\n"; break;
        case '\t': out += "\\t"; break;
        case '\r': out += "\\r"; break;
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        default: out.push_back(c);
      }
    }
    return out + "\"";
  }
  if (const auto* i = std::get_if<std::int64_t>(&value)) return std::to_string(*i);
  if (const auto* d = std::get_if<double>(&value)) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", *d);
    std::string out = buf;
    if (out.find_first_of(".e") == std::string::npos) out += ".0";
    return out;
  }
  return std::get<bool>(value) ? "true" : "false";
}

}  // namespace scitag::config
