#pragma once

#include <memory>
#include <string>

#include "hardneg/llm_gateway.hpp"
#include "httplib.h"

namespace hardneg::llm {

/// cpp-httplib transport. The URL is split into scheme://host[:port] and a
/// path; https requires OpenSSL support compiled into httplib.
class HttplibTransport final : public HttpTransport {
 public:
  HttpResponse post(const HttpRequest& request) override {
    const auto scheme_end = request.url.find("://");
    if (scheme_end == std::string::npos)
      throw ConfigError("endpoint must be an absolute URL: " + request.url);
    const auto path_start = request.url.find('/', scheme_end + 3);
    const std::string base = request.url.substr(0, path_start);
    const std::string path =
        path_start == std::string::npos ? "/" : request.url.substr(path_start);

    httplib::Client client(base);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(request.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(
        request.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());

    httplib::Headers headers;
    for (const auto& [k, v] : request.headers) headers.emplace(k, v);
    auto res = client.Post(path, headers, request.body, "application/json");
    if (!res)
      throw TransportError("POST " + request.url + " failed: " +
                           httplib::to_string(res.error()));
    return {res->status, res->body};
  }
};

/// Builds the backend described by `config`, loading the mock script file
/// when needed.
inline std::shared_ptr<ChatBackend> make_backend(const BackendConfig& config) {
  config.validate();
  if (config.kind == BackendConfig::Kind::kMock) {
    return std::make_shared<MockBackend>(
        MockBackend::parse_script(read_file(config.script), config.script));
  }
  RequestLimiter::global().configure(config.max_concurrency,
                                     config.requests_per_second);
  return std::make_shared<HttpBackend>(config,
                                       std::make_shared<HttplibTransport>());
}

}  // namespace hardneg::llm
