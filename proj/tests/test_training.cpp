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
#include <set>

#include "sketchformer/container.hpp"
#include "sketchformer/error.hpp"
#include "sketchformer/training.hpp"

using namespace sketchformer;

namespace {

TrainConfig small_config(CodecKind scheme = CodecKind::Grid) {
    TrainConfig c;
    c.scheme = scheme;
    c.grid_n = 20;
    c.model.d_model = 16;
    c.model.n_layers = 1;
    c.model.n_heads = 2;
    c.model.d_ff = 32;
    c.model.max_len = 48;
    c.batch_size = 4;
    c.steps = 6;
    c.warmup = 5;
    return c;
}

const Dataset& corpus() {
    static const Dataset ds = build_synthetic({ShapeClass::Circle, ShapeClass::Square, ShapeClass::Star}, 6, 2, 4);
    return ds;
}

std::filesystem::path temp_file(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("sketchformer_test_" + name);
}

} // namespace

TEST_CASE("learning rate warms up linearly then decays as inverse sqrt") {
    TrainConfig c;
    c.learning_rate = 0.01;
    c.warmup = 100;
    CHECK(learning_rate_at(c, 1) == doctest::Approx(0.0001));
    CHECK(learning_rate_at(c, 50) == doctest::Approx(0.005));
    CHECK(learning_rate_at(c, 100) == doctest::Approx(0.01));
    CHECK(learning_rate_at(c, 400) == doctest::Approx(0.005));
    for (int s = 101; s < 300; ++s) CHECK(learning_rate_at(c, s + 1) < learning_rate_at(c, s));
}

TEST_CASE("batches cover every example once per epoch") {
    const std::size_t n = 10;
    std::multiset<std::size_t> seen;
    for (int step = 0; step < 5; ++step) {
        for (auto i : batch_indices(n, 4, 3, step)) seen.insert(i);
    }
    for (std::size_t i = 0; i < n; ++i) CHECK(seen.count(i) == 2);
    CHECK(batch_indices(n, 4, 3, 7) == batch_indices(n, 4, 3, 7));
    CHECK(batch_indices(n, 4, 3, 7) != batch_indices(n, 4, 4, 7));
}

TEST_CASE("config text round trips and rejects bad input") {
    TrainConfig c = small_config();
    c.shuffle_strokes = true;
    c.lambda_cls = 0.5;
    c.clip_norm = 1.25;
    const TrainConfig back = TrainConfig::parse(c.to_text());
    CHECK(back.to_text() == c.to_text());
    CHECK(TrainConfig::parse("# comment\nsteps = 12\n\nseed=4").steps == 12);
    for (std::string bad : {"nonsense=1", "steps=abc", "steps", "batch_size=0", "scheme=pixels", "d_model=10\nn_heads=4"}) {
        CAPTURE(bad);
        try {
            TrainConfig::parse(bad).validate();
            FAIL("accepted bad config");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::Config);
        }
    }
}

TEST_CASE("stroke shuffling keeps every stroke's geometry") {
    for (const auto& item : corpus().items) {
        for (std::uint64_t seed = 0; seed < 4; ++seed) {
            std::mt19937_64 rng(seed);
            Point origin = item.origin;
            const Stroke3Seq shuffled = shuffle_strokes(item.seq, rng, &origin);
            CHECK(shuffled.size() == item.seq.size());
            CHECK(shuffled.stroke_count() == item.seq.stroke_count());
            const Sketch a = from_stroke3(item.seq, item.origin), b = from_stroke3(shuffled, origin);
            std::multiset<std::vector<std::pair<double, double>>> sa, sb;
            for (const auto& s : a.strokes) {
                std::vector<std::pair<double, double>> v;
                for (auto p : s) v.emplace_back(std::round(p.x * 1e6), std::round(p.y * 1e6));
                sa.insert(v);
            }
            for (const auto& s : b.strokes) {
                std::vector<std::pair<double, double>> v;
                for (auto p : s) v.emplace_back(std::round(p.x * 1e6), std::round(p.y * 1e6));
                sb.insert(v);
            }
            CHECK(sa == sb);
            CHECK(rasterize(a, 64) == rasterize(b, 64));
        }
    }
}

TEST_CASE("zero steps leave the checkpoint at initialization") {
    TrainConfig c = small_config();
    c.steps = 0;
    Checkpoint ck = new_checkpoint(c, make_codec(c, corpus().meta), corpus().meta);
    const auto init = ck.params;
    run_training(ck, corpus());
    CHECK(ck.optimizer.step == 0);
    bool same = true;
    std::vector<const MatF*> a;
    init.visit([&](const std::string&, const MatF& m) { a.push_back(&m); });
    std::size_t i = 0;
    ck.params.visit([&](const std::string&, const MatF& m) { same = same && m == *a[i++]; });
    CHECK(same);
}

TEST_CASE("training lowers the loss on a tiny corpus") {
    TrainConfig c = small_config();
    c.steps = 60;
    c.model.dropout = 0;
    c.learning_rate = 3e-3;
    Checkpoint ck = new_checkpoint(c, make_codec(c, corpus().meta), corpus().meta);
    std::vector<double> losses;
    run_training(ck, corpus(), [&](const LossReport& r) { losses.push_back(r.total); });
    REQUIRE(losses.size() == 60);
    double head = 0, tail = 0;
    for (int i = 0; i < 10; ++i) {
        head += losses[i];
        tail += losses[50 + i];
    }
    CHECK(tail < 0.8 * head);
}

TEST_CASE("checkpoint save and load are bit-exact and resuming matches an uninterrupted run") {
    TrainConfig c = small_config(CodecKind::Continuous);
    c.steps = 8;
    c.clip_norm = 1.0;
    Checkpoint straight = new_checkpoint(c, make_codec(c, corpus().meta), corpus().meta);
    run_training(straight, corpus());

    c.steps = 4;
    Checkpoint half = new_checkpoint(c, make_codec(c, corpus().meta), corpus().meta);
    run_training(half, corpus());
    const auto path = temp_file("checkpoint.bin");
    save_checkpoint(half, path);
    Checkpoint resumed = load_checkpoint(path);
    CHECK(resumed.optimizer == half.optimizer);
    CHECK(resumed.train.to_text() == half.train.to_text());
    CHECK(resumed.meta == half.meta);
    resumed.train.steps = 8;
    run_training(resumed, corpus());
    CHECK(resumed.optimizer == straight.optimizer);

    save_checkpoint(straight, path);
    const std::string d1 = file_digest(path);
    save_checkpoint(load_checkpoint(path), path);
    CHECK(file_digest(path) == d1);
    std::filesystem::remove(path);
}

TEST_CASE("dict scheme without a codebook is a config error") {
    TrainConfig c = small_config(CodecKind::Dict);
    try {
        make_codec(c, corpus().meta);
        FAIL("expected config error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Config);
    }
}

TEST_CASE("over-long items are skipped, not truncated") {
    TrainConfig c = small_config();
    const SketchCodec codec = make_codec(c, corpus().meta);
    const ExampleSet all = prepare_examples(corpus(), Split::Train, codec, 200);
    const ExampleSet cut = prepare_examples(corpus(), Split::Train, codec, 12);
    CHECK(all.skipped.empty());
    CHECK(cut.examples.size() + cut.skipped.size() == all.examples.size());
    CHECK(!cut.skipped.empty());
    for (const auto& ex : cut.examples) CHECK(ex.input.tokens.size() <= 12);
}

TEST_CASE("a divergent step reports non-finite values") {
    TrainConfig c = small_config();
    c.learning_rate = 1e30;
    c.warmup = 1;
    c.steps = 20;
    Checkpoint ck = new_checkpoint(c, make_codec(c, corpus().meta), corpus().meta);
    try {
        run_training(ck, corpus());
        FAIL("expected a non-finite error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NonFinite);
    }
}
