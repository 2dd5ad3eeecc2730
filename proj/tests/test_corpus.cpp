#include <doctest.h>
#include <httplib.h>

#include <set>
#include <thread>

#include "scitag/corpus.hpp"
#include "scitag/utf8.hpp"
#include "support.hpp"

using namespace scitag;
using testing::errcOf;

namespace {

std::vector<std::string> texts(const TokenSequence& s) { return s.texts(); }

std::vector<std::size_t> starts(const TokenSequence& s) {
  std::vector<std::size_t> out;
  for (const auto& t : s.tokens) out.push_back(t.start);
  return out;
}

}  // namespace

TEST_CASE("whitespace tokenization records code point offsets") {
  const auto s = tokenizeWhitespace("Calzolari, N. (1982)");
  CHECK(texts(s) == std::vector<std::string>{"Calzolari,", "N.", "(1982)"});
  CHECK(starts(s) == std::vector<std::size_t>{0, 11, 14});

  CHECK(tokenizeWhitespace("").empty());
  const auto padded = tokenizeWhitespace("  a  b ");
  CHECK(texts(padded) == std::vector<std::string>{"a", "b"});
  CHECK(starts(padded) == std::vector<std::size_t>{2, 5});

  // U+00A0 and U+3000 are whitespace; é counts as one position.
  const auto uni = tokenizeWhitespace("é\xC2\xA0x\xE3\x80\x80y");
  CHECK(texts(uni) == std::vector<std::string>{"é", "x", "y"});
  CHECK(starts(uni) == std::vector<std::size_t>{0, 2, 4});
}

TEST_CASE("tokenization round trip and offset invariants") {
  Rng rng(99);
  const char* pieces[] = {"a", "bb", "Ω", " ", "  ", "\t", "x.", "é"};
  for (int iter = 0; iter < 300; ++iter) {
    std::string line;
    const auto n = rng.below(12);
    for (std::uint64_t i = 0; i < n; ++i) line += pieces[rng.below(8)];
    const auto seq = tokenizeWhitespace(line);
    std::string joined, normalized;
    for (const auto& t : seq.tokens) joined += (joined.empty() ? "" : " ") + t.text;
    {
      std::istringstream ss(line);
      std::string w;
      while (ss >> w) normalized += (normalized.empty() ? "" : " ") + w;
    }
    CHECK(joined == normalized);
    for (std::size_t i = 0; i < seq.size(); ++i) {
      CHECK(utf8::slice(line, seq.tokens[i].start, seq.tokens[i].start + utf8::length(seq.tokens[i].text)) ==
            seq.tokens[i].text);
      if (i) CHECK(seq.tokens[i].start > seq.tokens[i - 1].start);
    }
  }
}

TEST_CASE("character tokenization splits scalar values") {
  CHECK(tokenizeCharacters(Token{"N.", 0}) == std::vector<std::string>{"N", "."});
  CHECK(tokenizeCharacters(Token{"1982", 0}) == std::vector<std::string>{"1", "9", "8", "2"});
  CHECK(tokenizeCharacters(Token{"é", 0}) == std::vector<std::string>{"é"});
}

TEST_CASE("CoNLL reader") {
  const auto two = parseConll("a B-PER\nb O\n\nc O\n");
  REQUIRE(two.size() == 2);
  CHECK(*two[0].labels == std::vector<std::string>{"B-PER", "O"});
  CHECK(*two[1].labels == std::vector<std::string>{"O"});
  CHECK(parseConll("").empty());

  auto err = testing::errorOf([] { parseConll("solo\n"); });
  REQUIRE(err);
  CHECK(err->code() == Errc::MalformedLine);
  CHECK(err->where() == std::optional<std::size_t>{1});

  SUBCASE("docstart, CRLF, middle columns and trailing blanks") {
    const auto s = parseConll("-DOCSTART- -X- O\r\n\r\nEU NNP B-ORG\r\nrejects VBZ O\r\n\r\n\r\n");
    REQUIRE(s.size() == 1);
    CHECK(texts(s[0]) == std::vector<std::string>{"EU", "rejects"});
    CHECK(*s[0].labels == std::vector<std::string>{"B-ORG", "O"});
  }
  SUBCASE("tab separation keeps spaces inside the token column") {
    const auto s = parseConll("New York\tB-LOC\n");
    REQUIRE(s.size() == 1);
    CHECK(s[0].tokens[0].text == "New York");
    CHECK(errcOf([] { parseConll("a\tB\n", ColumnSep::Space); }) == Errc::MalformedLine);
  }
  SUBCASE("missing file is an Io error") {
    CHECK(errcOf([] { readConll("/nonexistent/file.conll"); }) == Errc::Io);
  }
}

TEST_CASE("CoNLL serialization is a fixed point of the reader") {
  const auto data = readConll(testing::fixtures() / "refs_train.conll");
  const std::string once = writeConll(data);
  const auto again = parseConll(once);
  CHECK(again == data);
  CHECK(writeConll(again) == once);
}

TEST_CASE("CSV reader") {
  const auto s = parseCsv("\"We follow prior work\",background\n");
  REQUIRE(s.size() == 1);
  CHECK(texts(s[0]) == std::vector<std::string>{"We", "follow", "prior", "work"});
  CHECK(s[0].docClass == std::optional<std::string>{"background"});

  const auto q = parseCsv("\"a \"\"q\"\" b\",method\n");
  CHECK(texts(q[0]) == std::vector<std::string>{"a", "\"q\"", "b"});
  CHECK(q[0].docClass == std::optional<std::string>{"method"});

  auto err = testing::errorOf([] { parseCsv("onlyonefield\n"); });
  REQUIRE(err);
  CHECK(err->code() == Errc::MalformedRecord);
  CHECK(err->where() == std::optional<std::size_t>{1});
  CHECK(errcOf([] { parseCsv("\"open,x\n"); }) == Errc::MalformedRecord);
  CHECK(errcOf([] { parseCsv("a,b,c\n"); }) == Errc::MalformedRecord);

  const auto header = parseCsv("text,label\nhello world,x\n", true);
  REQUIRE(header.size() == 1);
  CHECK(header[0].docClass == std::optional<std::string>{"x"});

  const auto multi = parseCsv("\"line one\nline two\",y\r\nz,w\r\n");
  REQUIRE(multi.size() == 2);
  CHECK(texts(multi[0]) == std::vector<std::string>{"line", "one", "line", "two"});
}

TEST_CASE("vocabulary fitting") {
  const std::vector<TokenSequence> aba = {tokenizeWhitespace("a b a")};
  const Vocabulary v1 = fitVocabulary(aba, 1, false);
  CHECK(v1.tokens() == std::vector<std::string>{"<pad>", "<unk>", "a", "b"});

  const Vocabulary v2 = fitVocabulary(aba, 2, false);
  CHECK(v2.tokens() == std::vector<std::string>{"<pad>", "<unk>", "a"});
  CHECK(v2.lookup("b") == Vocabulary::kUnk);

  CHECK(fitVocabulary(std::vector<TokenSequence>{}, 1, false).size() == 2);

  // Frequency ties break lexicographically.
  const Vocabulary ties = fitVocabulary(std::vector{tokenizeWhitespace("c b a c")}, 1, false);
  CHECK(ties.tokens() == std::vector<std::string>{"<pad>", "<unk>", "c", "a", "b"});

  CHECK(numericalize(tokenizeWhitespace("a zzz"), v1) == std::vector<int>{2, 1});
  CHECK(numericalize(tokenizeWhitespace(""), v1).empty());

  const Vocabulary lower = fitVocabulary(std::vector{tokenizeWhitespace("a")}, 1, true);
  CHECK(numericalize(tokenizeWhitespace("A"), lower) == std::vector<int>{2});

  CHECK(errcOf([&] { fitVocabulary(aba, 0, false); }) == Errc::InvalidArgument);
}

TEST_CASE("vocabulary invariants on a real corpus") {
  const auto data = readConll(testing::fixtures() / "refs_train.conll");
  for (int minFreq : {1, 2, 3}) {
    const Vocabulary v = fitVocabulary(data, minFreq, true);
    for (std::size_t id = 2; id < v.size(); ++id) {
      const auto& tok = v.tokenOf(static_cast<int>(id));
      CHECK(v.idOf(tok) == std::optional<int>{static_cast<int>(id)});
      CHECK(v.frequency(tok) >= minFreq);
    }
    for (const auto& seq : data) {
      for (int id : numericalize(seq, v)) CHECK(id != Vocabulary::kPad);
    }
  }
}

TEST_CASE("batching") {
  std::vector<std::vector<int>> five(5, std::vector<int>{2});
  std::vector<std::size_t> sizes;
  for (const auto& b : makeBatches(five, 2, std::nullopt)) sizes.push_back(b.sequences.size());
  CHECK(sizes == std::vector<std::size_t>{2, 2, 1});

  const std::vector<std::vector<int>> ragged = {{2, 3, 4}, {5}};
  const auto batches = makeBatches(ragged, 2, std::nullopt);
  REQUIRE(batches.size() == 1);
  CHECK(batches[0].maxLen == 3);
  CHECK(batches[0].mask[1] == std::vector<bool>{true, false, false});
  CHECK(batches[0].sequences[1] == std::vector<int>{5, 0, 0});

  CHECK(errcOf([&] { makeBatches(ragged, 0, std::nullopt); }) == Errc::InvalidArgument);

  SUBCASE("seeded shuffles are reproducible and partition the input") {
    std::vector<std::vector<int>> ids;
    for (int i = 0; i < 23; ++i) ids.push_back(std::vector<int>(1 + i % 4, i + 2));
    const auto a = makeBatches(ids, 4, 17);
    const auto b = makeBatches(ids, 4, 17);
    std::multiset<std::size_t> seen;
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].members == b[i].members);
      CHECK(a[i].sequences == b[i].sequences);
      for (std::size_t j = 0; j < a[i].members.size(); ++j) {
        seen.insert(a[i].members[j]);
        const auto& orig = ids[a[i].members[j]];
        for (std::size_t k = 0; k < a[i].maxLen; ++k) {
          CHECK(a[i].mask[j][k] == (k < orig.size()));
          CHECK(a[i].sequences[j][k] == (k < orig.size() ? orig[k] : 0));
        }
      }
    }
    CHECK(seen.size() == ids.size());
    CHECK(std::set<std::size_t>(seen.begin(), seen.end()).size() == ids.size());
  }
}

TEST_CASE("task registry parsing") {
  const std::string digest(64, 'a');
  const auto reg = parseTaskRegistry("[scienceie]\nurl = \"http://h/x\"\nsha256 = \"" + digest +
                                     "\"\nformat = \"conll\"\n");
  REQUIRE(reg.entries.contains("scienceie"));
  CHECK(reg.entries.at("scienceie").format == DataFormat::Conll);
  CHECK(errcOf([] { parseTaskRegistry("[t]\nurl=\"u\"\nsha256=\"abc\"\nformat=\"csv\"\n"); }) ==
        Errc::ConfigError);
  CHECK(sha256Hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("downloads verify digests against a local server") {
  const std::string payload = "tok O\n\n";
  httplib::Server server;
  server.Get("/data.conll", [&](const httplib::Request&, httplib::Response& res) {
    res.set_content(payload, "text/plain");
  });
  server.Get("/tampered.conll", [&](const httplib::Request&, httplib::Response& res) {
    res.set_content(payload + "x", "text/plain");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread serving([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  const std::string base = "http://127.0.0.1:" + std::to_string(port);
  const std::string good = sha256Hex(payload);
  const auto reg = parseTaskRegistry(
      "[good]\nurl = \"" + base + "/data.conll\"\nsha256 = \"" + good + "\"\nformat = \"conll\"\n" +
      "[bad]\nurl = \"" + base + "/tampered.conll\"\nsha256 = \"" + good + "\"\nformat = \"conll\"\n");
  testing::TempDir dest("dl");

  const auto path = downloadTask("good", reg, dest.path());
  CHECK(path == dest / "good.conll");
  CHECK(testing::slurp(path) == payload);
  CHECK(downloadTask("good", reg, dest.path()) == path);

  auto unknown = testing::errorOf([&] { downloadTask("foo", reg, dest.path()); });
  REQUIRE(unknown);
  CHECK(unknown->code() == Errc::UnknownTask);
  CHECK(unknown->items() == std::vector<std::string>{"bad", "good"});

  auto mismatch = testing::errorOf([&] { downloadTask("bad", reg, dest.path()); });
  REQUIRE(mismatch);
  CHECK(mismatch->code() == Errc::DigestMismatch);
  CHECK(!std::filesystem::exists(dest / "bad.conll"));
  for (const auto& entry : std::filesystem::directory_iterator(dest.path())) {
    CHECK(entry.path().filename() == "good.conll");
  }

  server.stop();
  serving.join();
}
