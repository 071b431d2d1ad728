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

#include "sketchformer/error.hpp"

namespace sketchformer {

const char* error_code_name(ErrorCode code) {
    switch (code) {
    case ErrorCode::InvalidArgument: return "invalid_argument";
    case ErrorCode::Parse: return "parse_error";
    case ErrorCode::Io: return "io_error";
    case ErrorCode::Truncation: return "truncation_error";
    case ErrorCode::Decode: return "decode_error";
    case ErrorCode::Usage: return "usage_error";
    case ErrorCode::NonFinite: return "non_finite";
    case ErrorCode::Config: return "config_error";
    case ErrorCode::Internal: return "internal_error";
    }
    return "unknown_error";
}

void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

} // namespace sketchformer
