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

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sketchformer/tensor.hpp"

namespace sketchformer {

/// Versioned tensor container shared by model checkpoints, joint heads and
/// embedding dumps.
///
/// Layout:
///
///     SKFM1\n
///     manifest_bytes <N>\n
///     <N bytes of manifest text>
///     <contiguous little-endian float32 blobs>
///
/// Manifest lines are either `meta <key>=<value>` or
/// `tensor <name> <rows> <cols> <byte offset into the blob section>`.
class TensorArchive {
public:
    struct Tensor {
        std::string name;
        std::int64_t rows = 0;
        std::int64_t cols = 0;
        std::vector<float> data;

        friend bool operator==(const Tensor&, const Tensor&) = default;
    };

    void set(const std::string& key, const std::string& value);
    void set(const std::string& key, double value);
    void set(const std::string& key, std::int64_t value);
    void set(const std::string& key, int value) { set(key, static_cast<std::int64_t>(value)); }
    void set(const std::string& key, std::uint64_t value);

    bool has(const std::string& key) const { return meta_.count(key) != 0; }
    const std::string& get(const std::string& key) const;
    std::optional<std::string> find(const std::string& key) const;
    double get_double(const std::string& key) const;
    std::int64_t get_int(const std::string& key) const;
    std::uint64_t get_uint(const std::string& key) const;
    const std::map<std::string, std::string>& meta() const { return meta_; }

    void add_tensor(const std::string& name, const MatF& m);
    bool has_tensor(const std::string& name) const;
    MatF tensor(const std::string& name) const;
    const std::vector<Tensor>& tensors() const { return tensors_; }

    std::string manifest() const;
    void save(const std::filesystem::path& path) const;
    static TensorArchive load(const std::filesystem::path& path);

    friend bool operator==(const TensorArchive&, const TensorArchive&) = default;

private:
    const Tensor* lookup(const std::string& name) const;

    std::map<std::string, std::string> meta_;
    std::vector<Tensor> tensors_;
};

/// 64-bit FNV-1a digest of a file, as 16 hex digits.
std::string file_digest(const std::filesystem::path& path);

} // namespace sketchformer
