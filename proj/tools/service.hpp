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


#pragma once

#include <cstddef>
#include <string>

#include "sketchformer/sketchformer.h"

namespace sketchformer::service {

// What the service answers from. Handles are borrowed; the caller owns them.
struct State {
    const sf_model* model = nullptr;
    const sf_index* index = nullptr; // optional, for /api/retrieve
    std::size_t max_body = 1 << 20;
    std::string cors_origin = "*";
};

struct Response {
    int status = 200;
    std::string body;
    std::string content_type = "application/json";
};

/// Routes one request. Pure apart from the model calls, so tests can drive
/// it without sockets; bodies are exactly what the C API returns.
Response handle_request(const State& state, const std::string& method, const std::string& path,
                        const std::string& body, const std::string& content_type = "application/json");

/// HTTP status for a failed C API call.
int http_status(sf_status status);

/// Blocks serving on host:port until the process is stopped.
bool run_server(const State& state, const std::string& host, int port);

} // namespace sketchformer::service
