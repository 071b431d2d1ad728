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

#include "sketchformer/sketch.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include <json.hpp>

#include "sketchformer/error.hpp"

namespace sketchformer {

using nlohmann::json;

std::size_t Sketch::point_count() const {
    std::size_t n = 0;
    for (const auto& s : strokes) {
        n += s.size();
    }
    return n;
}

void Sketch::validate() const {
    require(!strokes.empty(), ErrorCode::InvalidArgument, "sketch has no strokes");
    for (std::size_t i = 0; i < strokes.size(); ++i) {
        require(!strokes[i].empty(), ErrorCode::InvalidArgument,
                "stroke " + std::to_string(i) + " has no points");
        for (const auto& p : strokes[i]) {
            require(std::isfinite(p.x) && std::isfinite(p.y), ErrorCode::InvalidArgument,
                    "stroke " + std::to_string(i) + " has a non-finite coordinate");
        }
    }
}

std::size_t Stroke3Seq::stroke_count() const {
    std::size_t n = 0;
    for (const auto& p : points) {
        n += p.lift != 0;
    }
    if (!points.empty() && points.back().lift == 0) {
        ++n;
    }
    return n;
}

std::size_t Stroke5Seq::content_length() const {
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].p3 > 0.5) {
            return i + 1;
        }
    }
    return rows.size();
}

RasterImage::RasterImage(int w, int h)
    : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, 0.0f) {
    require(w > 0 && h > 0, ErrorCode::InvalidArgument, "raster dimensions must be positive");
}

std::size_t RasterImage::ink_count() const {
    return static_cast<std::size_t>(
        std::count_if(pixels.begin(), pixels.end(), [](float v) { return v > 0.0f; }));
}

// ---------------------------------------------------------------------------

int ClassTable::intern(const std::string& word) {
    if (auto id = find(word)) {
        return *id;
    }
    names_.push_back(word);
    return static_cast<int>(names_.size() - 1);
}

std::optional<int> ClassTable::find(const std::string& word) const {
    auto it = std::find(names_.begin(), names_.end(), word);
    if (it == names_.end()) {
        return std::nullopt;
    }
    return static_cast<int>(it - names_.begin());
}

namespace {

Polyline parse_stroke(const json& stroke, std::size_t index) {
    const auto where = "stroke " + std::to_string(index);
    if (!stroke.is_array() || stroke.size() < 2 || !stroke[0].is_array() || !stroke[1].is_array()) {
        fail(ErrorCode::Parse, where + ": expected [xs, ys]");
    }
    const auto& xs = stroke[0];
    const auto& ys = stroke[1];
    if (xs.size() != ys.size()) {
        fail(ErrorCode::Parse, where + ": x and y arrays differ in length");
    }
    if (xs.empty()) {
        fail(ErrorCode::Parse, where + ": empty coordinate arrays");
    }
    Polyline line;
    line.reserve(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (!xs[i].is_number() || !ys[i].is_number()) {
            fail(ErrorCode::Parse, where + ": non-numeric coordinate");
        }
        Point p{xs[i].get<double>(), ys[i].get<double>()};
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
            fail(ErrorCode::Parse, where + ": non-finite coordinate");
        }
        line.push_back(p);
    }
    return line;
}

json number_json(double v) {
    if (std::abs(v) < 9.0e15 && v == std::floor(v)) {
        return static_cast<std::int64_t>(v);
    }
    return v;
}

json strokes_json(const Sketch& sketch) {
    json out = json::array();
    for (const auto& stroke : sketch.strokes) {
        json xs = json::array();
        json ys = json::array();
        for (const auto& p : stroke) {
            xs.push_back(number_json(p.x));
            ys.push_back(number_json(p.y));
        }
        out.push_back(json::array({xs, ys}));
    }
    return out;
}

} // namespace

Sketch parse_quickdraw(std::string_view record, ClassTable* classes) {
    json doc;
    try {
        doc = json::parse(record);
    } catch (const json::parse_error& e) {
        fail(ErrorCode::Parse, std::string("malformed record: ") + e.what());
    }
    Sketch sketch;
    const json* drawing = &doc;
    if (doc.is_object()) {
        auto it = doc.find("drawing");
        if (it == doc.end()) {
            it = doc.find("strokes");
        }
        if (it == doc.end()) {
            fail(ErrorCode::Parse, "record has no drawing field");
        }
        drawing = &*it;
        if (auto w = doc.find("word"); w != doc.end() && w->is_string() && classes != nullptr) {
            sketch.label = classes->intern(w->get<std::string>());
        }
        if (auto k = doc.find("key_id"); k != doc.end()) {
            sketch.source_id = k->is_string() ? k->get<std::string>() : k->dump();
        }
    }
    if (!drawing->is_array()) {
        fail(ErrorCode::Parse, "drawing is not a stroke list");
    }
    if (drawing->empty()) {
        fail(ErrorCode::Parse, "drawing has no strokes");
    }
    for (std::size_t i = 0; i < drawing->size(); ++i) {
        sketch.strokes.push_back(parse_stroke((*drawing)[i], i));
    }
    return sketch;
}

std::string strokes_to_json(const Sketch& sketch) {
    return strokes_json(sketch).dump();
}

std::string sketch_to_quickdraw(const Sketch& sketch, const ClassTable* classes) {
    json out = json::object();
    if (sketch.label && classes != nullptr && *sketch.label >= 0 &&
        static_cast<std::size_t>(*sketch.label) < classes->names().size()) {
        out["word"] = classes->names()[static_cast<std::size_t>(*sketch.label)];
    }
    if (!sketch.source_id.empty()) {
        out["key_id"] = sketch.source_id;
    }
    out["drawing"] = strokes_json(sketch);
    return out.dump();
}

// ---------------------------------------------------------------------------

double point_segment_distance(Point p, Point a, Point b) {
    const double vx = b.x - a.x;
    const double vy = b.y - a.y;
    const double len2 = vx * vx + vy * vy;
    if (len2 == 0.0) {
        return std::hypot(p.x - a.x, p.y - a.y);
    }
    double t = ((p.x - a.x) * vx + (p.y - a.y) * vy) / len2;
    t = std::clamp(t, 0.0, 1.0);
    return std::hypot(p.x - (a.x + t * vx), p.y - (a.y + t * vy));
}

Polyline rdp_simplify(std::span<const Point> polyline, double epsilon) {
    require(epsilon >= 0.0, ErrorCode::InvalidArgument, "rdp epsilon must be non-negative");
    if (polyline.size() <= 2) {
        return Polyline(polyline.begin(), polyline.end());
    }
    std::vector<char> keep(polyline.size(), 0);
    keep.front() = 1;
    keep.back() = 1;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{0, polyline.size() - 1}};
    while (!stack.empty()) {
        auto [first, last] = stack.back();
        stack.pop_back();
        if (last <= first + 1) {
            continue;
        }
        double best = -1.0;
        std::size_t index = first;
        for (std::size_t i = first + 1; i < last; ++i) {
            const double d = point_segment_distance(polyline[i], polyline[first], polyline[last]);
            if (d > best) {
                best = d;
                index = i;
            }
        }
        // A point is discarded only when it deviates strictly less than epsilon.
        if (best >= epsilon) {
            keep[index] = 1;
            stack.emplace_back(index, last);
            stack.emplace_back(first, index);
        }
    }
    Polyline out;
    for (std::size_t i = 0; i < polyline.size(); ++i) {
        if (keep[i]) {
            out.push_back(polyline[i]);
        }
    }
    return out;
}

Sketch simplify_sketch(const Sketch& sketch, double epsilon) {
    Sketch out = sketch;
    for (auto& stroke : out.strokes) {
        stroke = rdp_simplify(stroke, epsilon);
    }
    return out;
}

Stroke3Seq normalize(const Stroke3Seq& seq, const DatasetMeta& meta) {
    require(meta.offset_scale > 0.0, ErrorCode::InvalidArgument, "offset_scale must be positive");
    Stroke3Seq out = seq;
    for (auto& p : out.points) {
        p.dx /= meta.offset_scale;
        p.dy /= meta.offset_scale;
    }
    return out;
}

Stroke3Seq denormalize(const Stroke3Seq& seq, const DatasetMeta& meta) {
    require(meta.offset_scale > 0.0, ErrorCode::InvalidArgument, "offset_scale must be positive");
    Stroke3Seq out = seq;
    for (auto& p : out.points) {
        p.dx *= meta.offset_scale;
        p.dy *= meta.offset_scale;
    }
    return out;
}

Stroke3Seq to_stroke3(const Sketch& sketch) {
    sketch.validate();
    Stroke3Seq seq;
    seq.points.reserve(sketch.point_count());
    Point prev = sketch_origin(sketch);
    for (const auto& stroke : sketch.strokes) {
        for (std::size_t i = 0; i < stroke.size(); ++i) {
            const Point p = stroke[i];
            seq.points.push_back({p.x - prev.x, p.y - prev.y, i + 1 == stroke.size() ? 1 : 0});
            prev = p;
        }
    }
    return seq;
}

Sketch from_stroke3(const Stroke3Seq& seq, Point origin) {
    Sketch sketch;
    if (seq.empty()) {
        sketch.strokes.push_back({origin});
        return sketch;
    }
    Point cursor = origin;
    Polyline current;
    for (const auto& p : seq.points) {
        cursor.x += p.dx;
        cursor.y += p.dy;
        current.push_back(cursor);
        if (p.lift != 0) {
            sketch.strokes.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) {
        sketch.strokes.push_back(std::move(current));
    }
    return sketch;
}

Stroke5Seq to_stroke5(const Stroke3Seq& seq, std::size_t max_len) {
    const std::size_t required = seq.size() + 1;
    if (required > max_len) {
        fail(ErrorCode::Truncation, "stroke-5 sequence needs " + std::to_string(required) +
                                        " rows but max_len is " + std::to_string(max_len));
    }
    Stroke5Seq out;
    out.rows.reserve(max_len);
    for (const auto& p : seq.points) {
        if (p.lift != 0) {
            out.rows.push_back({p.dx, p.dy, 0.0, 1.0, 0.0});
        } else {
            out.rows.push_back({p.dx, p.dy, 1.0, 0.0, 0.0});
        }
    }
    while (out.rows.size() < max_len) {
        out.rows.push_back(kStroke5Padding);
    }
    return out;
}

Stroke3Seq from_stroke5(const Stroke5Seq& seq) {
    Stroke3Seq out;
    for (const auto& row : seq.rows) {
        if (row.p3 > 0.5) {
            break;
        }
        out.points.push_back({row.dx, row.dy, row.p2 > 0.5 ? 1 : 0});
    }
    return out;
}

BoundingBox bounding_box(const Sketch& sketch) {
    BoundingBox box{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
                    -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (const auto& stroke : sketch.strokes) {
        for (const auto& p : stroke) {
            box.min_x = std::min(box.min_x, p.x);
            box.min_y = std::min(box.min_y, p.y);
            box.max_x = std::max(box.max_x, p.x);
            box.max_y = std::max(box.max_y, p.y);
        }
    }
    return box;
}

// ---------------------------------------------------------------------------

namespace {

void stamp(RasterImage& img, int x, int y, int width) {
    const int lo = -(width - 1) / 2;
    const int hi = width / 2;
    for (int dy = lo; dy <= hi; ++dy) {
        for (int dx = lo; dx <= hi; ++dx) {
            const int px = x + dx;
            const int py = y + dy;
            if (px >= 0 && py >= 0 && px < img.width && py < img.height) {
                img.at(px, py) = 1.0f;
            }
        }
    }
}

void draw_line(RasterImage& img, int x0, int y0, int x1, int y1, int width) {
    const int dx = std::abs(x1 - x0);
    const int sx = x0 < x1 ? 1 : -1;
    const int dy = -std::abs(y1 - y0);
    const int sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    while (true) {
        stamp(img, x0, y0, width);
        if (x0 == x1 && y0 == y1) {
            break;
        }
        const int e2 = 2 * err;
        if (e2 >= dy) {
            err += dy;
            x0 += sx;
        }
        if (e2 <= dx) {
            err += dx;
            y0 += sy;
        }
    }
}

} // namespace

RasterImage rasterize(const Sketch& sketch, int side, int line_width) {
    require(side >= 16, ErrorCode::InvalidArgument, "raster side must be at least 16 pixels");
    require(line_width >= 1, ErrorCode::InvalidArgument, "line width must be at least 1 pixel");
    sketch.validate();
    RasterImage img(side, side);
    const BoundingBox box = bounding_box(sketch);
    const double w = box.max_x - box.min_x;
    const double h = box.max_y - box.min_y;
    const double extent = std::max(w, h);
    if (extent == 0.0) {
        stamp(img, side / 2, side / 2, line_width);
        return img;
    }
    const double margin = 0.05 * side;
    const double avail = side - 2.0 * margin - 1.0;
    const double scale = avail / extent;
    const double off_x = margin + 0.5 * (avail - w * scale);
    const double off_y = margin + 0.5 * (avail - h * scale);
    auto to_pixel = [&](Point p) {
        const int px = static_cast<int>(std::lround(off_x + (p.x - box.min_x) * scale));
        const int py = static_cast<int>(std::lround(off_y + (p.y - box.min_y) * scale));
        return std::pair{std::clamp(px, 0, side - 1), std::clamp(py, 0, side - 1)};
    };
    for (const auto& stroke : sketch.strokes) {
        auto [x0, y0] = to_pixel(stroke.front());
        if (stroke.size() == 1) {
            stamp(img, x0, y0, line_width);
            continue;
        }
        for (std::size_t i = 1; i < stroke.size(); ++i) {
            auto [x1, y1] = to_pixel(stroke[i]);
            draw_line(img, x0, y0, x1, y1, line_width);
            x0 = x1;
            y0 = y1;
        }
    }
    return img;
}

namespace {

// Exact squared Euclidean distance transform (lower envelope of parabolas).
void edt_1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& v,
            std::vector<double>& z) {
    const int n = static_cast<int>(f.size());
    constexpr double inf = std::numeric_limits<double>::infinity();
    int k = 0;
    v[0] = 0;
    z[0] = -inf;
    z[1] = inf;
    for (int q = 1; q < n; ++q) {
        if (f[q] == inf) {
            continue;
        }
        while (true) {
            const int p = v[k];
            if (f[p] == inf) {
                v[k] = q;
                z[k] = -inf;
                z[k + 1] = inf;
                break;
            }
            const double s = ((f[q] + q * q) - (f[p] + p * p)) / (2.0 * q - 2.0 * p);
            if (s <= z[k]) {
                if (k == 0) {
                    v[0] = q;
                    z[0] = -inf;
                    z[1] = inf;
                    break;
                }
                --k;
                continue;
            }
            ++k;
            v[k] = q;
            z[k] = s;
            z[k + 1] = inf;
            break;
        }
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q) {
            ++k;
        }
        const int p = v[k];
        d[q] = f[p] == inf ? inf : (q - p) * (q - p) + f[p];
    }
}

std::vector<double> squared_distance_to_ink(const RasterImage& img) {
    const int w = img.width;
    const int h = img.height;
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> grid(static_cast<std::size_t>(w) * h);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        grid[i] = img.pixels[i] > 0.0f ? 0.0 : inf;
    }
    const int n = std::max(w, h);
    std::vector<double> f(n), d(n), z(n + 1);
    std::vector<int> v(n);
    for (int x = 0; x < w; ++x) {
        f.resize(h);
        d.resize(h);
        for (int y = 0; y < h; ++y) {
            f[y] = grid[static_cast<std::size_t>(y) * w + x];
        }
        edt_1d(f, d, v, z);
        for (int y = 0; y < h; ++y) {
            grid[static_cast<std::size_t>(y) * w + x] = d[y];
        }
    }
    for (int y = 0; y < h; ++y) {
        f.resize(w);
        d.resize(w);
        for (int x = 0; x < w; ++x) {
            f[x] = grid[static_cast<std::size_t>(y) * w + x];
        }
        edt_1d(f, d, v, z);
        for (int x = 0; x < w; ++x) {
            grid[static_cast<std::size_t>(y) * w + x] = d[x];
        }
    }
    return grid;
}

double directed_mean(const RasterImage& from, const std::vector<double>& to_dt) {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < from.pixels.size(); ++i) {
        if (from.pixels[i] > 0.0f) {
            sum += std::sqrt(to_dt[i]);
            ++n;
        }
    }
    return sum / static_cast<double>(n);
}

} // namespace

double chamfer_distance(const RasterImage& a, const RasterImage& b) {
    require(a.width == b.width && a.height == b.height, ErrorCode::InvalidArgument,
            "chamfer distance needs equal image dimensions");
    const std::size_t ink_a = a.ink_count();
    const std::size_t ink_b = b.ink_count();
    if (ink_a == 0 && ink_b == 0) {
        return 0.0;
    }
    if (ink_a == 0 || ink_b == 0) {
        return std::hypot(static_cast<double>(a.width), static_cast<double>(a.height));
    }
    const auto dt_a = squared_distance_to_ink(a);
    const auto dt_b = squared_distance_to_ink(b);
    return 0.5 * (directed_mean(a, dt_b) + directed_mean(b, dt_a));
}

// ---------------------------------------------------------------------------

const char* shape_class_name(ShapeClass shape) {
    switch (shape) {
    case ShapeClass::Circle: return "circle";
    case ShapeClass::Square: return "square";
    case ShapeClass::Triangle: return "triangle";
    case ShapeClass::Zigzag: return "zigzag";
    case ShapeClass::Star: return "star";
    }
    return "unknown";
}

ShapeClass shape_class_from_name(std::string_view name) {
    for (int i = 0; i < kShapeClassCount; ++i) {
        if (name == shape_class_name(static_cast<ShapeClass>(i))) {
            return static_cast<ShapeClass>(i);
        }
    }
    fail(ErrorCode::InvalidArgument, "unknown shape class '" + std::string(name) + "'");
}

namespace {

struct ShapeFrame {
    double cx, cy, radius, angle;
};

Point place(const ShapeFrame& f, double u, double v, std::mt19937_64& rng, double jitter) {
    std::uniform_real_distribution<double> noise(-jitter, jitter);
    const double c = std::cos(f.angle);
    const double s = std::sin(f.angle);
    const double x = f.cx + f.radius * (c * u - s * v) + noise(rng);
    const double y = f.cy + f.radius * (s * u + c * v) + noise(rng);
    return {std::clamp(std::round(x), 0.0, 255.0), std::clamp(std::round(y), 0.0, 255.0)};
}

} // namespace

Sketch synth_sketch(ShapeClass shape, std::uint64_t seed) {
    std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(shape) + 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    ShapeFrame frame{};
    frame.radius = 45.0 + 55.0 * unit(rng);
    frame.cx = 127.5 + (unit(rng) - 0.5) * 2.0 * (120.0 - frame.radius);
    frame.cy = 127.5 + (unit(rng) - 0.5) * 2.0 * (120.0 - frame.radius);
    frame.angle = (unit(rng) - 0.5) * 0.5;
    constexpr double jitter = 2.0;
    constexpr double pi = std::numbers::pi;

    Sketch sketch;
    sketch.label = static_cast<int>(shape);
    switch (shape) {
    case ShapeClass::Circle: {
        const int n = 12 + static_cast<int>(unit(rng) * 8.0);
        const double start = unit(rng) * 2.0 * pi;
        const double squash = 0.85 + 0.3 * unit(rng);
        Polyline line;
        for (int i = 0; i <= n; ++i) {
            const double t = start + 2.0 * pi * i / n;
            line.push_back(place(frame, std::cos(t), squash * std::sin(t), rng, jitter));
        }
        sketch.strokes.push_back(std::move(line));
        break;
    }
    case ShapeClass::Square: {
        const std::array<std::pair<double, double>, 4> corners{{{-1, -1}, {1, -1}, {1, 1}, {-1, 1}}};
        std::array<Point, 4> pts;
        for (int i = 0; i < 4; ++i) {
            pts[i] = place(frame, 0.8 * corners[i].first, 0.8 * corners[i].second, rng, jitter);
        }
        for (int i = 0; i < 4; ++i) {
            sketch.strokes.push_back({pts[i], pts[(i + 1) % 4]});
        }
        break;
    }
    case ShapeClass::Triangle: {
        Polyline line;
        for (int i = 0; i <= 3; ++i) {
            const double t = -pi / 2.0 + 2.0 * pi * (i % 3) / 3.0;
            line.push_back(place(frame, std::cos(t), std::sin(t), rng, jitter));
        }
        sketch.strokes.push_back(std::move(line));
        break;
    }
    case ShapeClass::Zigzag: {
        const int teeth = 4 + static_cast<int>(unit(rng) * 4.0);
        Polyline line;
        for (int i = 0; i <= teeth; ++i) {
            const double u = -1.0 + 2.0 * i / teeth;
            const double v = (i % 2 == 0) ? -0.45 : 0.45;
            line.push_back(place(frame, u, v, rng, jitter));
        }
        sketch.strokes.push_back(std::move(line));
        break;
    }
    case ShapeClass::Star: {
        const double inner = 0.35 + 0.1 * unit(rng);
        Polyline line;
        for (int i = 0; i <= 10; ++i) {
            const double t = -pi / 2.0 + pi * (i % 10) / 5.0;
            const double r = (i % 2 == 0) ? 1.0 : inner;
            line.push_back(place(frame, r * std::cos(t), r * std::sin(t), rng, jitter));
        }
        sketch.strokes.push_back(std::move(line));
        break;
    }
    }
    sketch.source_id = std::string(shape_class_name(shape)) + "-" + std::to_string(seed);
    return sketch;
}

} // namespace sketchformer
