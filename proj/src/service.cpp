#include "scitag/service.hpp"

#include <httplib.h>

#include <json.hpp>

#include "scitag/error.hpp"

namespace scitag {

using nlohmann::json;

std::string tagResponseBody(std::string_view model, const TaggedText& tagged) {
  json spans = json::array();
  for (const auto& s : tagged.spans) {
    spans.push_back({{"type", s.type},
                     {"start", s.start},
                     {"end", s.end},
                     {"charStart", s.charStart},
                     {"charEnd", s.charEnd}});
  }
  json j;
  j["model"] = std::string(model);
  j["tokens"] = tagged.tokens;
  j["labels"] = tagged.labels;
  j["spans"] = spans;
  return j.dump();
}

std::string classifyResponseBody(std::string_view model, const Classification& result) {
  json j;
  j["model"] = std::string(model);
  j["label"] = result.label;
  j["scores"] = result.scores;
  return j.dump();
}

std::string errorBody(std::string_view code, std::string_view message) {
  json j;
  j["error"] = {{"code", std::string(code)}, {"message", std::string(message)}};
  return j.dump();
}

Service::Service(ModelMap models, ServiceOptions options)
    : models_(std::move(models)), options_(std::move(options)) {}

Service::~Service() = default;

ApiResponse Service::predict(std::string_view name, std::string_view requestBody,
                             ModelKind kind) const {
  auto it = models_.find(name);
  if (it == models_.end()) {
    return {404, errorBody("unknown_model", "no model named '" + std::string(name) + "'")};
  }
  const LoadedModel& model = *it->second;
  if (model.kind != kind) {
    return {409, errorBody("kind_mismatch", "model '" + std::string(name) + "' is a " +
                                                std::string(modelKindName(model.kind)))};
  }
  std::string text;
  try {
    const json body = json::parse(requestBody);
    if (!body.is_object() || !body.contains("text") || !body["text"].is_string()) {
      return {400, errorBody("bad_request", "body must be a JSON object with a string 'text'")};
    }
    text = body["text"].get<std::string>();
  } catch (const json::exception&) {
    return {400, errorBody("bad_request", "body is not valid JSON")};
  }
  if (text.size() > options_.maxTextBytes) {
    return {413, errorBody("text_too_large", "text exceeds " +
                                                 std::to_string(options_.maxTextBytes) + " bytes")};
  }
  try {
    if (kind == ModelKind::Tagger) return {200, tagResponseBody(name, tagText(model.pipeline, text))};
    return {200, classifyResponseBody(name, classifyText(model.pipeline, text))};
  } catch (const Error& e) {
    if (e.code() == Errc::EmptyInput) return {422, errorBody("empty_text", e.what())};
    return {500, errorBody("internal", e.what())};
  } catch (const std::exception& e) {
    return {500, errorBody("internal", e.what())};
  }
}

ApiResponse Service::tag(std::string_view model, std::string_view requestBody) const {
  return predict(model, requestBody, ModelKind::Tagger);
}

ApiResponse Service::classify(std::string_view model, std::string_view requestBody) const {
  return predict(model, requestBody, ModelKind::Classifier);
}

ApiResponse Service::health() const {
  json models = json::object();
  for (const auto& [name, m] : models_) models[name] = std::string(modelKindName(m->kind));
  return {200, json{{"status", "ok"}, {"models", models}}.dump()};
}

int Service::bind(int port) {
  server_ = std::make_unique<httplib::Server>();
  auto& srv = *server_;
  const std::size_t threads = options_.threads;
  srv.new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
  srv.set_default_headers({{"Access-Control-Allow-Origin", options_.allowOrigin},
                           {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                           {"Access-Control-Allow-Headers", "Content-Type"}});
  // Generous transport limit; the text limit itself is enforced per request.
  srv.set_payload_max_length(options_.maxTextBytes * 8 + 4096);

  auto reply = [](httplib::Response& res, const ApiResponse& r) {
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  srv.Post(R"(/api/v1/tag/([^/]+))", [this, reply](const httplib::Request& req,
                                                   httplib::Response& res) {
    reply(res, tag(req.matches[1].str(), req.body));
  });
  srv.Post(R"(/api/v1/classify/([^/]+))", [this, reply](const httplib::Request& req,
                                                        httplib::Response& res) {
    reply(res, classify(req.matches[1].str(), req.body));
  });
  srv.Get("/api/v1/health", [this, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, health());
  });
  srv.Options(R"(/api/v1/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.status = 204;
  });
  srv.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (!res.body.empty()) return;
    const std::string code = res.status == 404   ? "not_found"
                             : res.status == 413 ? "text_too_large"
                                                 : "http_" + std::to_string(res.status);
    res.set_content(errorBody(code, httplib::status_message(res.status)), "application/json");
  });
  srv.set_exception_handler([](const httplib::Request&, httplib::Response& res,
                               std::exception_ptr ep) {
    std::string msg = "unexpected failure";
    try {
      if (ep) std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      msg = e.what();
    } catch (...) {
    }
    res.status = 500;
    res.set_content(errorBody("internal", msg), "application/json");
  });

  if (port == 0) return srv.bind_to_any_port(options_.host);
  return srv.bind_to_port(options_.host, port) ? port : -1;
}

void Service::listen() {
  if (server_) server_->listen_after_bind();
}

void Service::stop() {
  if (server_) server_->stop();
}

}  // namespace scitag
