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


#include <doctest.h>

#include <filesystem>
#include <random>

#include "oracles.hpp"
#include "sketchformer/codec.hpp"
#include "sketchformer/dataset.hpp"
#include "sketchformer/error.hpp"
#include "sketchformer/tokenizer.hpp"

using namespace sketchformer;

namespace {

Codebook random_codebook(int k, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> n(0, 20);
    Codebook cb;
    for (int i = 0; i < k; ++i) {
        cb.centroids.push_back({n(rng), n(rng)});
    }
    return cb;
}

std::vector<std::pair<double, double>> as_pairs(const Codebook& cb) {
    std::vector<std::pair<double, double>> out;
    for (const auto& c : cb.centroids) out.emplace_back(c[0], c[1]);
    return out;
}

Sketch random_sketch(std::mt19937_64& rng, int strokes, int points) {
    std::uniform_real_distribution<double> u(0, 255);
    Sketch s;
    for (int i = 0; i < strokes; ++i) {
        Polyline line;
        for (int j = 0; j < points; ++j) line.push_back({u(rng), u(rng)});
        s.strokes.push_back(line);
    }
    return s;
}

} // namespace

TEST_CASE("dict tokens are the brute-force nearest centroids") {
    const Codebook cb = random_codebook(200, 3);
    const auto pairs = as_pairs(cb);
    std::mt19937_64 rng(11);
    std::normal_distribution<double> n(0, 30);
    Stroke3Seq seq;
    for (int i = 0; i < 2000; ++i) seq.points.push_back({n(rng), n(rng), i % 7 == 6});
    const TokenSequence t = dict_encode(seq, cb, 4000);
    std::size_t pos = 1;
    for (const auto& p : seq.points) {
        CHECK(t.tokens[pos++] == oracle::nearest(pairs, p.dx, p.dy) + token::kFirstContent);
        if (p.lift) CHECK(t.tokens[pos++] == token::kSep);
    }
    CHECK(t.tokens[pos] == token::kEos);
    CHECK(token_sequence_problem(t).empty());
}

TEST_CASE("dict endpoint drift is the summed quantization error") {
    const Codebook cb = random_codebook(64, 5);
    std::mt19937_64 rng(2);
    std::normal_distribution<double> n(0, 15);
    Stroke3Seq seq;
    for (int i = 0; i < 50; ++i) seq.points.push_back({n(rng), n(rng), i % 10 == 9});
    const Stroke3Seq back = dict_decode(dict_encode(seq, cb, 200), cb);
    REQUIRE(back.size() == seq.size());
    double ex = 0, ey = 0;
    for (std::size_t i = 0; i < seq.size(); ++i) {
        ex += back.points[i].dx - seq.points[i].dx;
        ey += back.points[i].dy - seq.points[i].dy;
        CHECK(back.points[i].lift == seq.points[i].lift);
    }
    const Sketch a = from_stroke3(seq, {10, 10}), b = from_stroke3(back, {10, 10});
    CHECK(std::abs((b.strokes.back().back().x - a.strokes.back().back().x) - ex) <= 1e-9);
    CHECK(std::abs((b.strokes.back().back().y - a.strokes.back().back().y) - ey) <= 1e-9);
}

TEST_CASE("grid round trip is within half a cell diagonal") {
    std::mt19937_64 rng(8);
    for (int n : {10, 50, 100}) {
        const GridSpec grid{n};
        const double bound = grid.cell_size() * std::sqrt(2.0) / 2;
        for (int trial = 0; trial < 20; ++trial) {
            const Sketch s = random_sketch(rng, 1 + trial % 3, 2 + trial % 6);
            const Sketch back = grid_decode(grid_encode(s, grid, 100), grid);
            REQUIRE(back.strokes.size() == s.strokes.size());
            for (std::size_t i = 0; i < s.strokes.size(); ++i) {
                REQUIRE(back.strokes[i].size() == s.strokes[i].size());
                for (std::size_t j = 0; j < s.strokes[i].size(); ++j) {
                    const Point p = s.strokes[i][j], q = back.strokes[i][j];
                    CHECK(std::hypot(p.x - q.x, p.y - q.y) <= bound + 1e-12);
                }
            }
        }
    }
}

TEST_CASE("grid cells use fixed canvas bounds and clamp outliers") {
    const GridSpec grid{10};
    bool outlier = false;
    CHECK(grid.cell_of({0, 0}, &outlier) == 0);
    CHECK(!outlier);
    CHECK(grid.cell_of({255, 255}) == 99);
    CHECK(grid.cell_of({300, -4}, &outlier) == 9);
    CHECK(outlier);
    const Point c = grid.cell_center(11);
    CHECK(c.x == doctest::Approx(1.5 * 25.5));
    CHECK(c.y == doctest::Approx(1.5 * 25.5));
    Sketch out{{{{-20, 10}, {400, 10}}}};
    std::size_t clamped = 0;
    grid_encode(out, grid, 10, &clamped);
    CHECK(clamped == 2);
}

TEST_CASE("token sequences are checked for shape") {
    CHECK(token_sequence_problem({{1, 4, 3, 2, 0}, 8, TokenScheme::Dict}).empty());
    CHECK(!token_sequence_problem({{4, 3, 2}, 8, TokenScheme::Dict}).empty());
    CHECK(!token_sequence_problem({{1, 4, 3}, 8, TokenScheme::Dict}).empty());
    CHECK(!token_sequence_problem({{1, 4, 2, 5}, 8, TokenScheme::Dict}).empty());
    CHECK(!token_sequence_problem({{1, 9, 2}, 8, TokenScheme::Dict}).empty());
    CHECK_THROWS_AS(validate_tokens({{1, 2, 2}, 8, TokenScheme::Dict}), Error);
}

TEST_CASE("over-long sketches raise a truncation error") {
    const Codebook cb = random_codebook(8, 1);
    Stroke3Seq seq;
    for (int i = 0; i < 10; ++i) seq.points.push_back({1, 1, 0});
    try {
        dict_encode(seq, cb, 10);
        FAIL("expected truncation");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Truncation);
    }
    CHECK(dict_encode(seq, cb, 12).tokens.size() == 12);
}

TEST_CASE("k-means objective never increases and recovers separated clusters") {
    const std::vector<Offset2> centers = {{{-100, -80}}, {{90, -110}}, {{120, 70}}, {{-60, 130}}};
    std::mt19937_64 rng(21);
    std::normal_distribution<double> noise(0, 2);
    std::vector<Offset2> points;
    for (int i = 0; i < 2000; ++i) {
        const auto& c = centers[i % 4];
        points.push_back({c[0] + noise(rng), c[1] + noise(rng)});
    }
    const KMeansResult r = kmeans(points, 4, 5);
    for (std::size_t i = 1; i < r.objective_history.size(); ++i) {
        CHECK(r.objective_history[i] <= r.objective_history[i - 1]);
    }
    for (const auto& c : centers) {
        double best = 1e9;
        for (const auto& f : r.centroids) best = std::min(best, std::hypot(f[0] - c[0], f[1] - c[1]));
        CHECK(best <= 0.01 * std::hypot(c[0], c[1]));
    }
    const KMeansResult again = kmeans(points, 4, 5);
    CHECK(again.centroids == r.centroids);
    CHECK(again.objective_history == r.objective_history);
}

TEST_CASE("k-means rejects impossible requests") {
    std::vector<Offset2> few = {{{0, 0}}, {{0, 0}}, {{1, 1}}};
    CHECK_THROWS_AS(kmeans(few, 4, 1), Error);
    CHECK_THROWS_AS(kmeans(few, 3, 1), Error);
}

TEST_CASE("pen-movement sample honours the lift fraction") {
    const Dataset ds = build_synthetic({ShapeClass::Square, ShapeClass::Zigzag}, 30, 0, 2);
    std::vector<Stroke3Seq> corpus;
    for (const auto& item : ds.items) corpus.push_back(item.seq);
    const auto sample = sample_pen_movements(corpus, 1000, 0.2, 4);
    CHECK(sample.size() == 1000);
    CHECK(sample == sample_pen_movements(corpus, 1000, 0.2, 4));
}

TEST_CASE("codebook file round trip is exact") {
    const Dataset ds = build_synthetic({ShapeClass::Star, ShapeClass::Circle}, 20, 0, 2);
    std::vector<Stroke3Seq> corpus;
    for (const auto& item : ds.items) corpus.push_back(item.seq);
    const CodebookFit fit = fit_codebook(corpus, 16, 500, 0.2, 3, ds.meta.offset_scale);
    const auto path = std::filesystem::temp_directory_path() / "sketchformer_test_codebook.bin";
    save_codebook(fit.codebook, path);
    CHECK(load_codebook(path) == fit.codebook);
    std::filesystem::remove(path);
}

TEST_CASE("codec decoding tolerates missing terminators") {
    SketchCodec codec;
    codec.kind = CodecKind::Grid;
    codec.grid.n = 10;
    const Sketch s{{{{12, 12}, {200, 40}}, {{90, 90}}}};
    const SequenceInput in = codec.encode(s, 20);
    CHECK(in.tokens.back() == token::kEos);
    const Sketch full = codec.decode(in, {});
    SequenceInput cut = in;
    cut.tokens.pop_back();
    CHECK(codec.decode(cut, {}) == full);
    cut.tokens.erase(cut.tokens.begin());
    CHECK(codec.decode(cut, {}) == full);

    codec.kind = CodecKind::Continuous;
    codec.offset_scale = 4;
    const SequenceInput rows = codec.encode(s, 20);
    CHECK(rows.rows.back().p3 == 1.0);
    const Sketch back = codec.decode(rows, s.strokes[0][0]);
    REQUIRE(back.strokes.size() == 2);
    CHECK(back.strokes[1][0].x == doctest::Approx(90));
    SequenceInput open = rows;
    open.rows.pop_back();
    CHECK(codec.decode(open, s.strokes[0][0]) == back);
}
