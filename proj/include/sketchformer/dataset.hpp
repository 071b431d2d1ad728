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
#include <istream>
#include <string>
#include <vector>

#include "sketchformer/sketch.hpp"

namespace sketchformer {

enum class Split : std::uint8_t { Train = 0, Test = 1 };

struct DatasetItem {
    Stroke3Seq seq; // raw canvas units, RDP-simplified
    Point origin;
    int label = -1;
    std::string id;
    Split split = Split::Train;

    Sketch sketch() const;

    friend bool operator==(const DatasetItem&, const DatasetItem&) = default;
};

struct Dataset {
    DatasetMeta meta;
    std::vector<DatasetItem> items;

    std::vector<std::size_t> indices(Split split) const;
    std::size_t find_id(const std::string& id) const;

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Pooled standard deviation of every dx and dy component in the training
/// split. Falls back to 1 when the split has no movement.
double compute_offset_scale(const Dataset& dataset);

/// Synthetic shape corpus: `train_per_class` + `test_per_class` sketches for
/// each requested class, simplified with `rdp_epsilon`.
Dataset build_synthetic(const std::vector<ShapeClass>& classes, std::size_t train_per_class,
                        std::size_t test_per_class, std::uint64_t seed, double rdp_epsilon = 2.0);

/// Reads newline-delimited QuickDraw records; every line must parse. A
/// deterministic `test_fraction` of records (per seed) goes to the test split.
Dataset ingest_quickdraw(std::istream& lines, double rdp_epsilon, double test_fraction,
                         std::uint64_t seed);

/// Binary cache: magic "SKDS1", counts, meta, then length-prefixed stroke-3
/// sequences. All integers and reals little-endian.
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

} // namespace sketchformer
