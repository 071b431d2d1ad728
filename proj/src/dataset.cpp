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

#include "sketchformer/dataset.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include "sketchformer/binary_io.hpp"
#include "sketchformer/error.hpp"

namespace sketchformer {

Sketch DatasetItem::sketch() const {
    Sketch s = from_stroke3(seq, origin);
    if (label >= 0) {
        s.label = label;
    }
    s.source_id = id;
    return s;
}

std::vector<std::size_t> Dataset::indices(Split split) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (items[i].split == split) {
            out.push_back(i);
        }
    }
    return out;
}

std::size_t Dataset::find_id(const std::string& id) const {
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (items[i].id == id) {
            return i;
        }
    }
    fail(ErrorCode::InvalidArgument, "no sketch with id '" + id + "'");
}

double compute_offset_scale(const Dataset& dataset) {
    double sum = 0.0;
    double sum_sq = 0.0;
    std::size_t n = 0;
    for (const auto& item : dataset.items) {
        if (item.split != Split::Train) {
            continue;
        }
        for (const auto& p : item.seq.points) {
            sum += p.dx + p.dy;
            sum_sq += p.dx * p.dx + p.dy * p.dy;
            n += 2;
        }
    }
    if (n == 0) {
        return 1.0;
    }
    const double mean = sum / static_cast<double>(n);
    const double var = sum_sq / static_cast<double>(n) - mean * mean;
    return var > 0.0 ? std::sqrt(var) : 1.0;
}

namespace {

void finalize(Dataset& ds) {
    ds.meta.train_size = static_cast<std::uint32_t>(ds.indices(Split::Train).size());
    ds.meta.test_size = static_cast<std::uint32_t>(ds.indices(Split::Test).size());
    ds.meta.offset_scale = compute_offset_scale(ds);
}

DatasetItem make_item(const Sketch& raw, double rdp_epsilon, Split split) {
    const Sketch simple = simplify_sketch(raw, rdp_epsilon);
    DatasetItem item;
    item.seq = to_stroke3(simple);
    item.origin = sketch_origin(simple);
    item.label = raw.label.value_or(-1);
    item.id = raw.source_id;
    item.split = split;
    return item;
}

} // namespace

Dataset build_synthetic(const std::vector<ShapeClass>& classes, std::size_t train_per_class,
                        std::size_t test_per_class, std::uint64_t seed, double rdp_epsilon) {
    require(!classes.empty(), ErrorCode::InvalidArgument, "at least one shape class is required");
    Dataset ds;
    ds.meta.rdp_epsilon = rdp_epsilon;
    for (auto c : classes) {
        ds.meta.class_names.emplace_back(shape_class_name(c));
    }
    const std::size_t per_class = train_per_class + test_per_class;
    for (std::size_t k = 0; k < classes.size(); ++k) {
        for (std::size_t i = 0; i < per_class; ++i) {
            const std::uint64_t item_seed = seed * 1000003ULL + k * 100000ULL + i;
            Sketch raw = synth_sketch(classes[k], item_seed);
            raw.label = static_cast<int>(k);
            ds.items.push_back(make_item(raw, rdp_epsilon, i < train_per_class ? Split::Train : Split::Test));
        }
    }
    finalize(ds);
    return ds;
}

Dataset ingest_quickdraw(std::istream& lines, double rdp_epsilon, double test_fraction,
                         std::uint64_t seed) {
    require(test_fraction >= 0.0 && test_fraction < 1.0, ErrorCode::InvalidArgument,
            "test fraction must lie in [0, 1)");
    Dataset ds;
    ds.meta.rdp_epsilon = rdp_epsilon;
    ClassTable classes;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(lines, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        Sketch raw;
        try {
            raw = parse_quickdraw(line, &classes);
        } catch (const Error& e) {
            fail(e.code(), "line " + std::to_string(line_no) + ": " + e.what());
        }
        if (raw.source_id.empty()) {
            raw.source_id = "line-" + std::to_string(line_no);
        }
        const Split split = unit(rng) < test_fraction ? Split::Test : Split::Train;
        ds.items.push_back(make_item(raw, rdp_epsilon, split));
    }
    require(!ds.items.empty(), ErrorCode::Parse, "no drawing records found");
    ds.meta.class_names = classes.names();
    finalize(ds);
    return ds;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), ErrorCode::Io, "cannot write " + path.string());
    out.write("SKDS1", 5);
    binary::write<std::uint32_t>(out, static_cast<std::uint32_t>(dataset.items.size()));
    binary::write<double>(out, dataset.meta.rdp_epsilon);
    binary::write<double>(out, dataset.meta.offset_scale);
    binary::write<std::uint32_t>(out, static_cast<std::uint32_t>(dataset.meta.class_names.size()));
    for (const auto& name : dataset.meta.class_names) {
        binary::write_string(out, name);
    }
    binary::write<std::uint32_t>(out, dataset.meta.train_size);
    binary::write<std::uint32_t>(out, dataset.meta.test_size);
    for (const auto& item : dataset.items) {
        binary::write<std::int32_t>(out, item.label);
        binary::write<std::uint8_t>(out, static_cast<std::uint8_t>(item.split));
        binary::write_string(out, item.id);
        binary::write<double>(out, item.origin.x);
        binary::write<double>(out, item.origin.y);
        binary::write<std::uint32_t>(out, static_cast<std::uint32_t>(item.seq.size()));
        for (const auto& p : item.seq.points) {
            binary::write<double>(out, p.dx);
            binary::write<double>(out, p.dy);
            binary::write<std::uint8_t>(out, static_cast<std::uint8_t>(p.lift));
        }
    }
    require(static_cast<bool>(out), ErrorCode::Io, "failed writing " + path.string());
}

Dataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorCode::Io, "cannot open " + path.string());
    binary::expect_magic(in, "SKDS1", path.string());
    Dataset ds;
    const auto n_items = binary::read<std::uint32_t>(in);
    ds.meta.rdp_epsilon = binary::read<double>(in);
    ds.meta.offset_scale = binary::read<double>(in);
    const auto n_classes = binary::read<std::uint32_t>(in);
    for (std::uint32_t i = 0; i < n_classes; ++i) {
        ds.meta.class_names.push_back(binary::read_string(in));
    }
    ds.meta.train_size = binary::read<std::uint32_t>(in);
    ds.meta.test_size = binary::read<std::uint32_t>(in);
    ds.items.resize(n_items);
    for (auto& item : ds.items) {
        item.label = binary::read<std::int32_t>(in);
        item.split = static_cast<Split>(binary::read<std::uint8_t>(in));
        item.id = binary::read_string(in);
        item.origin.x = binary::read<double>(in);
        item.origin.y = binary::read<double>(in);
        const auto n_points = binary::read<std::uint32_t>(in);
        item.seq.points.resize(n_points);
        for (auto& p : item.seq.points) {
            p.dx = binary::read<double>(in);
            p.dy = binary::read<double>(in);
            p.lift = binary::read<std::uint8_t>(in);
        }
    }
    require(ds.meta.offset_scale > 0.0, ErrorCode::Io, path.string() + ": offset_scale must be positive");
    return ds;
}

} // namespace sketchformer
