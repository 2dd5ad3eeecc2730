#include <doctest.h>

#include <httplib.h>

#include <json.hpp>
#include <sstream>
#include <thread>

#include "scitag/cli.hpp"
#include "scitag/service.hpp"
#include "support.hpp"
#include "trained.hpp"

using namespace scitag;
using json = nlohmann::json;

namespace {

const char* kReference =
    "Calzolari, N. (1982). Towards the organization of lexical definitions on a database "
    "structure. In COLING 1982, pages 61-64.";

ModelMap fixtureModels() {
  ModelMap m;
  m["refs"] = std::make_shared<const LoadedModel>(loadModel(testing::refsModel().checkpoint));
  m["intent"] = std::make_shared<const LoadedModel>(loadModel(testing::intentModel().checkpoint));
  return m;
}

std::string textBody(const std::string& text) { return json{{"text", text}}.dump(); }

std::string errorCode(const ApiResponse& r) { return json::parse(r.body).at("error").at("code"); }

}  // namespace

TEST_CASE("service handlers") {
  const Service svc(fixtureModels());

  SUBCASE("tag") {
    const auto r = svc.tag("refs", textBody(kReference));
    REQUIRE(r.status == 200);
    CHECK(testing::matchesGolden("service_tag.json", r.body + "\n"));
    const auto j = json::parse(r.body);
    CHECK(j.at("model") == "refs");
    CHECK(j.at("tokens").size() == j.at("labels").size());
    const auto& span = j.at("spans").at(0);
    CHECK(span.at("type") == "author");
    CHECK(span.at("charStart") == 0);
  }

  SUBCASE("classify") {
    const auto r = svc.classify("intent", textBody("Our method uses a conditional random field"));
    REQUIRE(r.status == 200);
    CHECK(testing::matchesGolden("service_classify.json", r.body + "\n"));
    const auto j = json::parse(r.body);
    double total = 0.0;
    for (const auto& [label, p] : j.at("scores").items()) total += p.get<double>();
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(j.at("scores").contains(j.at("label").get<std::string>()));
  }

  SUBCASE("error statuses") {
    const auto unknown = svc.tag("nope", textBody("x"));
    CHECK(unknown.status == 404);
    CHECK(errorCode(unknown) == "unknown_model");
    CHECK(svc.tag("intent", textBody("x")).status == 409);
    CHECK(svc.classify("refs", textBody("x")).status == 409);
    const auto empty = svc.tag("refs", textBody("   "));
    CHECK(empty.status == 422);
    CHECK(errorCode(empty) == "empty_text");
    CHECK(svc.tag("refs", "{not json").status == 400);
    CHECK(svc.tag("refs", "{\"text\": 3}").status == 400);
    CHECK(svc.tag("refs", "[\"text\"]").status == 400);
    CHECK(svc.tag("refs", textBody(std::string(64 * 1024 + 1, 'a'))).status == 413);
  }

  SUBCASE("health") {
    const auto r = svc.health();
    CHECK(r.status == 200);
    CHECK(json::parse(r.body) == json::parse(R"({"status":"ok","models":{"intent":"classifier","refs":"tagger"}})"));
  }

  SUBCASE("the API agrees with the command line") {
    std::ostringstream out, err;
    REQUIRE(cmdPredict(testing::refsModel().checkpoint, std::string(kReference), std::nullopt, std::nullopt,
                       out, err) == kExitOk);
    const auto j = json::parse(svc.tag("refs", textBody(kReference)).body);
    std::string fromApi;
    for (std::size_t i = 0; i < j.at("tokens").size(); ++i) {
      if (i) fromApi += ' ';
      fromApi += j["tokens"][i].get<std::string>() + "|" + j["labels"][i].get<std::string>();
    }
    CHECK(out.str() == fromApi + "\n");

    std::ostringstream cout2, cerr2;
    const std::string sentence = "Earlier studies have examined reference extraction";
    REQUIRE(cmdPredict(testing::intentModel().checkpoint, sentence, std::nullopt, std::nullopt, cout2,
                       cerr2) == kExitOk);
    const auto c = json::parse(svc.classify("intent", textBody(sentence)).body);
    CHECK(cout2.str().starts_with(c.at("label").get<std::string>() + "\n"));
  }
}

TEST_CASE("service over HTTP") {
  ServiceOptions opts;
  opts.allowOrigin = "https://demo.example";
  Service svc(fixtureModels(), opts);
  const int port = svc.bind(0);
  REQUIRE(port > 0);
  std::thread loop([&] { svc.listen(); });

  httplib::Client client("127.0.0.1", port);
  client.set_connection_timeout(5);

  const auto health = client.Get("/api/v1/health");
  REQUIRE(health);
  CHECK(health->status == 200);
  CHECK(health->get_header_value("Access-Control-Allow-Origin") == "https://demo.example");

  const auto tagged = client.Post("/api/v1/tag/refs", textBody(kReference), "application/json");
  REQUIRE(tagged);
  CHECK(tagged->status == 200);
  CHECK(tagged->body == svc.tag("refs", textBody(kReference)).body);
  CHECK(tagged->get_header_value("Content-Type").starts_with("application/json"));

  const auto missing = client.Post("/api/v1/tag/none", textBody("x"), "application/json");
  REQUIRE(missing);
  CHECK(missing->status == 404);

  const auto preflight = client.Options("/api/v1/tag/refs");
  REQUIRE(preflight);
  CHECK(preflight->status == 204);
  CHECK(preflight->get_header_value("Access-Control-Allow-Methods").find("POST") != std::string::npos);

  const auto nowhere = client.Get("/elsewhere");
  REQUIRE(nowhere);
  CHECK(nowhere->status == 404);
  CHECK(json::parse(nowhere->body).at("error").at("code") == "not_found");

  SUBCASE("concurrent requests see the same answers") {
    const std::string expected = svc.tag("refs", textBody(kReference)).body;
    std::vector<std::thread> workers;
    std::vector<int> good(4, 0);
    for (int w = 0; w < 4; ++w) {
      workers.emplace_back([&, w] {
        httplib::Client c("127.0.0.1", port);
        for (int i = 0; i < 5; ++i) {
          auto r = c.Post("/api/v1/tag/refs", textBody(kReference), "application/json");
          if (r && r->status == 200 && r->body == expected) ++good[w];
        }
      });
    }
    for (auto& t : workers) t.join();
    for (int g : good) CHECK(g == 5);
  }

  svc.stop();
  loop.join();
}
