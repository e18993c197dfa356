/*
 * Copyright 2026 The ObesEye Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// HTTP transport for DietService.

#ifndef OBESEYE_HTTP_SERVER_HPP_
#define OBESEYE_HTTP_SERVER_HPP_

#include <cstdlib>
#include <memory>
#include <optional>
#include <string>

#include "httplib.h"
#include "obeseye/service.hpp"

namespace obeseye {

struct ServerConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string bundle_path;
  std::uint64_t lime_seed = 0;
  std::string cors_origin;  // empty: no CORS headers
};

// "host:port" or ":port" or "port".
inline void parse_bind(const std::string& bind, ServerConfig& config) {
  const auto colon = bind.rfind(':');
  const std::string host = colon == std::string::npos ? "" : bind.substr(0, colon);
  const std::string port = colon == std::string::npos ? bind : bind.substr(colon + 1);
  const auto p = parse_double(port);
  if (!p || *p != static_cast<int>(*p) || *p < 0 || *p > 65535) {
    throw ValidationError("bind", "expected host:port, got '" + bind + "'");
  }
  if (!host.empty()) config.host = host;
  config.port = static_cast<int>(*p);
}

// Fills unset fields from OBESEYE_BIND, OBESEYE_BUNDLE, OBESEYE_LIME_SEED and
// OBESEYE_CORS_ORIGIN.
inline void apply_environment(ServerConfig& config) {
  if (const char* v = std::getenv("OBESEYE_BIND"); v && *v) parse_bind(v, config);
  if (const char* v = std::getenv("OBESEYE_BUNDLE"); v && *v) config.bundle_path = v;
  if (const char* v = std::getenv("OBESEYE_LIME_SEED"); v && *v) {
    const auto s = parse_double(v);
    if (!s || *s < 0 || *s != std::floor(*s)) throw ValidationError("OBESEYE_LIME_SEED", "expected an integer");
    config.lime_seed = static_cast<std::uint64_t>(*s);
  }
  if (const char* v = std::getenv("OBESEYE_CORS_ORIGIN"); v && *v) config.cors_origin = v;
}

inline std::unique_ptr<httplib::Server> make_http_server(const DietService& service, const std::string& cors_origin) {
  auto server = std::make_unique<httplib::Server>();
  auto reply = [&service, cors_origin](const httplib::Request& req, httplib::Response& res) {
    const auto r = service.handle(req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
    if (!cors_origin.empty()) res.set_header("Access-Control-Allow-Origin", cors_origin);
  };
  server->Get("/v1/model/info", reply);
  server->Post("/v1/predict", reply);
  server->Post("/v1/explain", reply);
  server->Post("/v1/whatif", reply);
  server->Options(R"(/v1/.*)", [cors_origin](const httplib::Request&, httplib::Response& res) {
    if (!cors_origin.empty()) {
      res.set_header("Access-Control-Allow-Origin", cors_origin);
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
    }
    res.status = 204;
  });
  server->set_error_handler([cors_origin](const httplib::Request& req, httplib::Response& res) {
    if (!res.body.empty()) return;
    const auto body = internal::error_body(res.status, "no such endpoint: " + req.method + " " + req.path);
    res.set_content(body.dump(), "application/json");
    if (!cors_origin.empty()) res.set_header("Access-Control-Allow-Origin", cors_origin);
  });
  return server;
}

}  // namespace obeseye

#endif  // OBESEYE_HTTP_SERVER_HPP_
