// Copyright 2026 The Sketchformer Developers
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "service.hpp"

#include <httplib.h>
#include <json.hpp>

namespace sketchformer::service {

namespace {

using json = nlohmann::json;
using ModelCall = sf_status (*)(const sf_model*, const char*, char**);

Response error(int status, const std::string& code, const std::string& message) {
    return {status, json{{"error", {{"code", code}, {"message", message}}}}.dump()};
}

// Runs a C API call and wraps its output or error.
template <class F>
Response from_call(F&& fn) {
    char* out = nullptr;
    const sf_status st = fn(&out);
    if (st != SF_OK) {
        return error(http_status(st), sf_status_name(st), sf_last_error());
    }
    Response r{200, out};
    sf_string_free(out);
    return r;
}

bool is_json(const std::string& content_type) {
    return content_type.rfind("application/json", 0) == 0;
}

} // namespace

int http_status(sf_status status) {
    switch (status) {
    case SF_OK: return 200;
    case SF_ERR_INVALID_ARGUMENT:
    case SF_ERR_PARSE:
    case SF_ERR_DECODE:
    case SF_ERR_USAGE: return 400;
    case SF_ERR_TRUNCATION: return 413;
    case SF_ERR_CONFIG: return 409;
    default: return 500;
    }
}

Response handle_request(const State& state, const std::string& method, const std::string& path,
                        const std::string& body, const std::string& content_type) {
    if (method == "OPTIONS") {
        return {204, "", "text/plain"};
    }
    if (method == "GET") {
        if (path == "/api/health") {
            if (!state.model) {
                return error(503, "unavailable", "no model loaded");
            }
            char* info = nullptr;
            if (sf_model_info(state.model, &info) != SF_OK) {
                return error(500, "internal_error", sf_last_error());
            }
            const std::string digest = json::parse(info)["digest"];
            sf_string_free(info);
            return {200, json{{"status", "ok"}, {"digest", digest}}.dump()};
        }
        if (path == "/api/config") {
            if (!state.model) {
                return error(503, "unavailable", "no model loaded");
            }
            return from_call([&](char** out) { return sf_model_info(state.model, out); });
        }
        return error(404, "not_found", "no route for GET " + path);
    }
    if (method != "POST") {
        return error(405, "method_not_allowed", method + " is not supported");
    }

    static const std::pair<const char*, ModelCall> routes[] = {
        {"/api/encode", sf_model_encode},       {"/api/reconstruct", sf_model_reconstruct},
        {"/api/interpolate", sf_model_interpolate}, {"/api/classify", sf_model_classify},
        {"/api/perturb", sf_model_perturb},     {"/api/decode", sf_model_decode},
    };
    ModelCall call = nullptr;
    for (const auto& [route, fn] : routes) {
        if (path == route) {
            call = fn;
        }
    }
    const bool retrieve = path == "/api/retrieve";
    if (!call && !retrieve) {
        return error(404, "not_found", "no route for POST " + path);
    }
    if (!is_json(content_type)) {
        return error(415, "unsupported_media_type", "request body must be application/json");
    }
    if (body.size() > state.max_body) {
        return error(413, "payload_too_large",
                     "body of " + std::to_string(body.size()) + " bytes exceeds " + std::to_string(state.max_body));
    }
    if (!state.model) {
        return error(503, "unavailable", "no model loaded");
    }
    if (retrieve) {
        if (!state.index) {
            return error(503, "unavailable", "no retrieval index loaded");
        }
        return from_call([&](char** out) { return sf_model_retrieve(state.model, state.index, body.c_str(), out); });
    }
    return from_call([&](char** out) { return call(state.model, body.c_str(), out); });
}

bool run_server(const State& state, const std::string& host, int port) {
    httplib::Server server;
    server.set_default_headers({{"Access-Control-Allow-Origin", state.cors_origin},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                                {"Access-Control-Allow-Headers", "Content-Type"}});
    // Oversized bodies are answered by handle_request; this only caps memory.
    server.set_payload_max_length(state.max_body * 4 + 1024);
    auto dispatch = [&state](const httplib::Request& req, httplib::Response& res) {
        const Response r =
            handle_request(state, req.method, req.path, req.body, req.get_header_value("Content-Type"));
        res.status = r.status;
        res.set_content(r.body, r.content_type);
    };
    server.Get(R"(/api/.*)", dispatch);
    server.Post(R"(/api/.*)", dispatch);
    server.Options(R"(/api/.*)", dispatch);
    return server.listen(host, port);
}

} // namespace sketchformer::service
