#include <doctest.h>

#include "scitag/config.hpp"
#include "support.hpp"

using namespace scitag;
using testing::errcOf;

namespace {

const config::Scalar& scalarAt(const config::Table& t, std::string_view key) {
  return std::get<config::Scalar>(t.find(key)->value);
}

const config::Table& tableAt(const config::Table& t, std::string_view key) {
  return *std::get<config::TablePtr>(t.find(key)->value);
}

std::optional<std::size_t> syntaxLine(const std::string& text) {
  auto e = testing::errorOf([&] { config::parse(text); });
  if (!e || e->code() != Errc::SyntaxError) return std::nullopt;
  return e->where();
}

}  // namespace

TEST_CASE("scalars") {
  const auto t = config::parse(
      "s = \"a\\tb \\\"q\\\" \\u00e9\"\n"
      "lit = 'C:\\path'\n"
      "i = -42\n"
      "big = 1_000\n"
      "f = 0.5\n"
      "e = 1e-3\n"
      "b1 = true\n"
      "b2 = False\n"
      "arr = [1, 2, 3]\n"
      "mixed = [\"x\", 'y',]\n");
  CHECK(std::get<std::string>(scalarAt(t, "s")) == "a\tb \"q\" é");
  CHECK(std::get<std::string>(scalarAt(t, "lit")) == "C:\\path");
  CHECK(std::get<std::int64_t>(scalarAt(t, "i")) == -42);
  CHECK(std::get<std::int64_t>(scalarAt(t, "big")) == 1000);
  CHECK(std::get<double>(scalarAt(t, "f")) == 0.5);
  CHECK(std::get<double>(scalarAt(t, "e")) == 1e-3);
  CHECK(std::get<bool>(scalarAt(t, "b1")));
  CHECK(!std::get<bool>(scalarAt(t, "b2")));
  const auto& arr = std::get<config::Array>(t.find("arr")->value);
  REQUIRE(arr.size() == 3);
  CHECK(std::get<std::int64_t>(arr[2]) == 3);
  CHECK(std::get<config::Array>(t.find("mixed")->value).size() == 2);
  CHECK(t.entries.front().key == "s");
  CHECK(t.entries.back().key == "mixed");
}

TEST_CASE("tables, arrays of tables and comments") {
  const auto t = config::parse(
      "# leading comment\n"
      "[model]  # trailing comment\n"
      "class = \"X\"   # also here\n"
      "    [model.encoder]\n"
      "    class = \"Y\"\n"
      "        [[model.encoder.embedder]]\n"
      "        class = \"A\"\n"
      "        [[model.encoder.embedder]]\n"
      "        class = \"B\"\n"
      "url = \"http://x/#not-a-comment\"\n");
  const auto& model = tableAt(t, "model");
  CHECK(model.line == 2);
  CHECK(std::get<std::string>(scalarAt(model, "class")) == "X");
  const auto& encoder = tableAt(model, "encoder");
  const auto& embedders = std::get<config::TableArray>(encoder.find("embedder")->value);
  REQUIRE(embedders.size() == 2);
  CHECK(std::get<std::string>(scalarAt(*embedders[1], "class")) == "B");
  CHECK(std::get<std::string>(scalarAt(*embedders[1], "url")) == "http://x/#not-a-comment");
}

TEST_CASE("syntax errors carry the line") {
  CHECK(syntaxLine("a = 1\nb = \n") == std::optional<std::size_t>{2});
  CHECK(syntaxLine("a = 1\na = 2\n") == std::optional<std::size_t>{2});
  CHECK(syntaxLine("[t]\n[t]\n") == std::optional<std::size_t>{2});
  CHECK(syntaxLine("x = \"unterminated\n") == std::optional<std::size_t>{1});
  CHECK(syntaxLine("x = {a = 1}\n") == std::optional<std::size_t>{1});
  CHECK(syntaxLine("x = [[1], [2]]\n") == std::optional<std::size_t>{1});
  CHECK(syntaxLine("x = 1979-05-27\n") == std::optional<std::size_t>{1});
  CHECK(syntaxLine("x = yes\n") == std::optional<std::size_t>{1});
  CHECK(syntaxLine("\n\n[bad\n") == std::optional<std::size_t>{3});
  CHECK(syntaxLine("just words\n") == std::optional<std::size_t>{1});
  CHECK(syntaxLine("x = 1 2\n") == std::optional<std::size_t>{1});
  CHECK(syntaxLine("a = 1\n[a]\n") == std::optional<std::size_t>{2});
}

TEST_CASE("render round trips scalars") {
  for (const config::Scalar& v : {config::Scalar{std::string("a\"b\\c\n")}, config::Scalar{std::int64_t{-7}},
                                 config::Scalar{0.1}, config::Scalar{1e300}, config::Scalar{true}}) {
    const auto t = config::parse("k = " + config::render(v) + "\n");
    CHECK(scalarAt(t, "k") == v);
  }
}
