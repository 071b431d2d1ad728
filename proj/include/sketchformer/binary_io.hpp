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

// Little-endian primitives shared by the binary containers.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

#include "sketchformer/error.hpp"

namespace sketchformer::binary {

static_assert(std::endian::native == std::endian::little,
              "binary containers assume a little-endian host");

template <class T>
void write(std::ostream& out, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T read(std::istream& in) {
    static_assert(std::is_trivially_copyable_v<T>);
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) {
        fail(ErrorCode::Io, "unexpected end of file");
    }
    return value;
}

inline void write_string(std::ostream& out, const std::string& s) {
    write<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& in) {
    const auto n = read<std::uint32_t>(in);
    std::string s(n, '\0');
    in.read(s.data(), n);
    if (!in) {
        fail(ErrorCode::Io, "unexpected end of file");
    }
    return s;
}

inline void expect_magic(std::istream& in, const char* magic, const std::string& what) {
    const std::size_t n = std::strlen(magic);
    std::string got(n, '\0');
    in.read(got.data(), static_cast<std::streamsize>(n));
    if (!in || got != magic) {
        fail(ErrorCode::Io, what + ": bad magic, expected " + magic);
    }
}

} // namespace sketchformer::binary
