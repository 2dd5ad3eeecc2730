#pragma once

#include <map>
#include <memory>
#include <string>
#include <string_view>

#include "scitag/infer.hpp"

namespace httplib {
class Server;
}

namespace scitag {

struct ServiceOptions {
  std::string host = "127.0.0.1";
  std::string allowOrigin = "*";
  std::size_t maxTextBytes = 64 * 1024;
  std::size_t threads = 4;
};

struct ApiResponse {
  int status = 200;
  std::string body;  // JSON
};

using ModelMap = std::map<std::string, std::shared_ptr<const LoadedModel>, std::less<>>;

/// Request handling is independent of the socket layer so it can be tested
/// directly; start() binds the handlers to an HTTP server.
class Service {
 public:
  explicit Service(ModelMap models, ServiceOptions options = {});
  ~Service();

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  ApiResponse tag(std::string_view model, std::string_view requestBody) const;
  ApiResponse classify(std::string_view model, std::string_view requestBody) const;
  ApiResponse health() const;

  /// Binds to `port` (0 picks a free one) and returns the bound port, or -1.
  int bind(int port);
  /// Serves until stop(); call after a successful bind().
  void listen();
  void stop();

 private:
  ApiResponse predict(std::string_view model, std::string_view requestBody, ModelKind kind) const;

  ModelMap models_;
  ServiceOptions options_;
  std::unique_ptr<httplib::Server> server_;
};

/// Wire bodies shared by the service and its tests.
std::string tagResponseBody(std::string_view model, const TaggedText& tagged);
std::string classifyResponseBody(std::string_view model, const Classification& result);
std::string errorBody(std::string_view code, std::string_view message);

}  // namespace scitag
