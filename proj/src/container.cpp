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

#include "sketchformer/container.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "sketchformer/binary_io.hpp"
#include "sketchformer/error.hpp"

namespace sketchformer {

namespace {

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

void TensorArchive::set(const std::string& key, const std::string& value) {
    require(key.find_first_of("=\n ") == std::string::npos, ErrorCode::InvalidArgument,
            "manifest key '" + key + "' contains a reserved character");
    require(value.find('\n') == std::string::npos, ErrorCode::InvalidArgument,
            "manifest value for '" + key + "' contains a newline");
    meta_[key] = value;
}

void TensorArchive::set(const std::string& key, double value) { set(key, format_double(value)); }
void TensorArchive::set(const std::string& key, std::int64_t value) { set(key, std::to_string(value)); }
void TensorArchive::set(const std::string& key, std::uint64_t value) { set(key, std::to_string(value)); }

const std::string& TensorArchive::get(const std::string& key) const {
    auto it = meta_.find(key);
    require(it != meta_.end(), ErrorCode::Config, "archive has no '" + key + "' entry");
    return it->second;
}

std::optional<std::string> TensorArchive::find(const std::string& key) const {
    auto it = meta_.find(key);
    if (it == meta_.end()) {
        return std::nullopt;
    }
    return it->second;
}

double TensorArchive::get_double(const std::string& key) const {
    const auto& s = get(key);
    try {
        return std::stod(s);
    } catch (const std::exception&) {
        fail(ErrorCode::Config, "archive entry '" + key + "' is not a number");
    }
}

std::int64_t TensorArchive::get_int(const std::string& key) const {
    const auto& s = get(key);
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    require(ec == std::errc() && ptr == s.data() + s.size(), ErrorCode::Config,
            "archive entry '" + key + "' is not an integer");
    return v;
}

std::uint64_t TensorArchive::get_uint(const std::string& key) const {
    const auto& s = get(key);
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    require(ec == std::errc() && ptr == s.data() + s.size(), ErrorCode::Config,
            "archive entry '" + key + "' is not an unsigned integer");
    return v;
}

void TensorArchive::add_tensor(const std::string& name, const MatF& m) {
    require(name.find_first_of(" \n") == std::string::npos && !name.empty(), ErrorCode::InvalidArgument,
            "invalid tensor name '" + name + "'");
    require(!has_tensor(name), ErrorCode::InvalidArgument, "duplicate tensor '" + name + "'");
    Tensor t;
    t.name = name;
    t.rows = m.rows();
    t.cols = m.cols();
    t.data.assign(m.data(), m.data() + m.size());
    tensors_.push_back(std::move(t));
}

const TensorArchive::Tensor* TensorArchive::lookup(const std::string& name) const {
    for (const auto& t : tensors_) {
        if (t.name == name) {
            return &t;
        }
    }
    return nullptr;
}

bool TensorArchive::has_tensor(const std::string& name) const { return lookup(name) != nullptr; }

MatF TensorArchive::tensor(const std::string& name) const {
    const Tensor* t = lookup(name);
    require(t != nullptr, ErrorCode::Config, "archive has no tensor '" + name + "'");
    MatF m(t->rows, t->cols);
    std::copy(t->data.begin(), t->data.end(), m.data());
    return m;
}

std::string TensorArchive::manifest() const {
    std::ostringstream out;
    for (const auto& [k, v] : meta_) {
        out << "meta " << k << '=' << v << '\n';
    }
    std::int64_t offset = 0;
    for (const auto& t : tensors_) {
        out << "tensor " << t.name << ' ' << t.rows << ' ' << t.cols << ' ' << offset << '\n';
        offset += static_cast<std::int64_t>(t.data.size() * sizeof(float));
    }
    return out.str();
}

void TensorArchive::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), ErrorCode::Io, "cannot write " + path.string());
    const std::string text = manifest();
    out << "SKFM1\nmanifest_bytes " << text.size() << '\n' << text;
    for (const auto& t : tensors_) {
        out.write(reinterpret_cast<const char*>(t.data.data()),
                  static_cast<std::streamsize>(t.data.size() * sizeof(float)));
    }
    require(static_cast<bool>(out), ErrorCode::Io, "failed writing " + path.string());
}

TensorArchive TensorArchive::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorCode::Io, "cannot open " + path.string());
    binary::expect_magic(in, "SKFM1\n", path.string());
    std::string header;
    std::getline(in, header);
    std::size_t n_bytes = 0;
    if (std::sscanf(header.c_str(), "manifest_bytes %zu", &n_bytes) != 1) {
        fail(ErrorCode::Io, path.string() + ": missing manifest length");
    }
    std::string text(n_bytes, '\0');
    in.read(text.data(), static_cast<std::streamsize>(n_bytes));
    require(static_cast<bool>(in), ErrorCode::Io, path.string() + ": truncated manifest");

    TensorArchive archive;
    std::istringstream lines(text);
    std::string line;
    std::int64_t expected_offset = 0;
    while (std::getline(lines, line)) {
        if (line.rfind("meta ", 0) == 0) {
            const auto eq = line.find('=');
            require(eq != std::string::npos, ErrorCode::Io, path.string() + ": malformed meta line");
            archive.meta_[line.substr(5, eq - 5)] = line.substr(eq + 1);
        } else if (line.rfind("tensor ", 0) == 0) {
            std::istringstream fields(line.substr(7));
            Tensor t;
            std::int64_t offset = -1;
            fields >> t.name >> t.rows >> t.cols >> offset;
            require(!fields.fail() && t.rows >= 0 && t.cols >= 0, ErrorCode::Io,
                    path.string() + ": malformed tensor line");
            require(offset == expected_offset, ErrorCode::Io, path.string() + ": non-contiguous tensor blob");
            t.data.resize(static_cast<std::size_t>(t.rows * t.cols));
            expected_offset += static_cast<std::int64_t>(t.data.size() * sizeof(float));
            archive.tensors_.push_back(std::move(t));
        } else if (!line.empty()) {
            fail(ErrorCode::Io, path.string() + ": unknown manifest line '" + line + "'");
        }
    }
    for (auto& t : archive.tensors_) {
        in.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(t.data.size() * sizeof(float)));
        require(static_cast<bool>(in), ErrorCode::Io, path.string() + ": truncated tensor '" + t.name + "'");
    }
    return archive;
}

std::string file_digest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorCode::Io, "cannot open " + path.string());
    std::uint64_t h = 1469598103934665603ULL;
    char buf[1 << 14];
    while (in) {
        in.read(buf, sizeof(buf));
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ULL;
        }
    }
    char out[17];
    std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
    return out;
}

} // namespace sketchformer
