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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sketchformer {

struct Point {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point&, const Point&) = default;
};

using Polyline = std::vector<Point>;

/// A vector sketch: ordered strokes of absolute canvas points. The canvas
/// follows the QuickDraw convention (0-255, y grows downward).
struct Sketch {
    std::vector<Polyline> strokes;
    std::optional<int> label;
    std::string source_id;

    std::size_t point_count() const;
    /// Throws InvalidArgument unless every stroke is nonempty and finite.
    void validate() const;

    friend bool operator==(const Sketch&, const Sketch&) = default;
};

/// One relative pen movement. `lift` is set on the last point of a stroke.
struct Stroke3Point {
    double dx = 0.0;
    double dy = 0.0;
    int lift = 0;

    friend bool operator==(const Stroke3Point&, const Stroke3Point&) = default;
};

struct Stroke3Seq {
    std::vector<Stroke3Point> points;

    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
    std::size_t stroke_count() const;

    friend bool operator==(const Stroke3Seq&, const Stroke3Seq&) = default;
};

struct Stroke5Row {
    double dx = 0.0;
    double dy = 0.0;
    double p1 = 0.0; // draw
    double p2 = 0.0; // lift
    double p3 = 1.0; // end of sketch

    friend bool operator==(const Stroke5Row&, const Stroke5Row&) = default;
};

inline constexpr Stroke5Row kStroke5Padding{0.0, 0.0, 0.0, 0.0, 1.0};
inline constexpr Stroke5Row kStroke5Start{0.0, 0.0, 1.0, 0.0, 0.0};

struct Stroke5Seq {
    std::vector<Stroke5Row> rows;

    /// Number of rows up to and including the end-of-sketch row.
    std::size_t content_length() const;

    friend bool operator==(const Stroke5Seq&, const Stroke5Seq&) = default;
};

/// Grayscale image with intensities in [0,1], row-major.
struct RasterImage {
    int width = 0;
    int height = 0;
    std::vector<float> pixels;

    RasterImage() = default;
    RasterImage(int w, int h);

    float at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
    float& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
    std::size_t ink_count() const;

    friend bool operator==(const RasterImage&, const RasterImage&) = default;
};

struct DatasetMeta {
    double rdp_epsilon = 2.0;
    double offset_scale = 1.0;
    std::vector<std::string> class_names;
    std::uint32_t train_size = 0;
    std::uint32_t test_size = 0;

    friend bool operator==(const DatasetMeta&, const DatasetMeta&) = default;
};

// ---------------------------------------------------------------------------
// QuickDraw interchange form

/// Category words seen while parsing; the index of a word is its label.
class ClassTable {
public:
    ClassTable() = default;
    explicit ClassTable(std::vector<std::string> names) : names_(std::move(names)) {}

    int intern(const std::string& word);
    std::optional<int> find(const std::string& word) const;
    const std::vector<std::string>& names() const { return names_; }

private:
    std::vector<std::string> names_;
};

/// Parses one simplified-drawing record. Accepts either a full ndjson object
/// (`{"word": ..., "drawing": [[xs, ys], ...]}`) or the bare stroke list.
/// When `classes` is given the record's word is interned as the label.
Sketch parse_quickdraw(std::string_view record, ClassTable* classes = nullptr);

/// Serializes strokes as the bare `[[xs, ys], ...]` stroke list.
std::string strokes_to_json(const Sketch& sketch);
/// Full ndjson record with word/key_id fields when available.
std::string sketch_to_quickdraw(const Sketch& sketch, const ClassTable* classes = nullptr);

// ---------------------------------------------------------------------------
// Geometry and conversions

Polyline rdp_simplify(std::span<const Point> polyline, double epsilon);
Sketch simplify_sketch(const Sketch& sketch, double epsilon);

/// Distance from `p` to the closed segment [a, b].
double point_segment_distance(Point p, Point a, Point b);

Stroke3Seq normalize(const Stroke3Seq& seq, const DatasetMeta& meta);
Stroke3Seq denormalize(const Stroke3Seq& seq, const DatasetMeta& meta);

Stroke3Seq to_stroke3(const Sketch& sketch);
/// Rebuilds absolute strokes by cumulative summation from `origin`. An empty
/// sequence yields a single-point sketch at the origin.
Sketch from_stroke3(const Stroke3Seq& seq, Point origin);
inline Point sketch_origin(const Sketch& sketch) { return sketch.strokes.front().front(); }

Stroke5Seq to_stroke5(const Stroke3Seq& seq, std::size_t max_len);
Stroke3Seq from_stroke5(const Stroke5Seq& seq);

struct BoundingBox {
    double min_x, min_y, max_x, max_y;
};
BoundingBox bounding_box(const Sketch& sketch);

/// Draws the sketch into a side x side canvas. The bounding box is fitted
/// with a 5% margin, aspect preserved; lines are walked on integer pixels.
RasterImage rasterize(const Sketch& sketch, int side, int line_width = 1);

/// Symmetric mean nearest-ink distance in pixels. If exactly one image has
/// no ink the result is the canvas diagonal; two blank images give 0.
double chamfer_distance(const RasterImage& a, const RasterImage& b);

// ---------------------------------------------------------------------------
// Synthetic corpus

enum class ShapeClass { Circle = 0, Square = 1, Triangle = 2, Zigzag = 3, Star = 4 };

inline constexpr int kShapeClassCount = 5;
const char* shape_class_name(ShapeClass shape);
ShapeClass shape_class_from_name(std::string_view name);

/// Jittered parametric shape on the 0-255 integer canvas. Squares are drawn
/// as four strokes (one per edge); the other classes are single strokes.
Sketch synth_sketch(ShapeClass shape, std::uint64_t seed);

} // namespace sketchformer
