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
#include "sketchformer/embedding_ops.hpp"
#include "sketchformer/error.hpp"

using namespace sketchformer;

namespace {

std::vector<double> random_vector(std::mt19937_64& rng, int d) {
    std::normal_distribution<double> n(0, 1);
    std::vector<double> v(d);
    for (auto& x : v) x = n(rng);
    return v;
}

double norm(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

std::vector<double> unit(std::vector<double> v) {
    const double n = norm(v);
    for (auto& x : v) x /= n;
    return v;
}

} // namespace

TEST_CASE("slerp hits its endpoints exactly and stays on the sphere") {
    std::mt19937_64 rng(1);
    for (int t = 0; t < 50; ++t) {
        const auto a = unit(random_vector(rng, 16)), b = unit(random_vector(rng, 16));
        CHECK(slerp(a, b, 0.0) == a);
        CHECK(slerp(a, b, 1.0) == b);
        for (double s : interpolation_grid(9)) {
            CHECK(std::abs(norm(slerp(a, b, s)) - 1.0) <= 1e-9);
        }
        // Equal angular steps along the arc.
        const auto q = slerp(a, b, 0.25), h = slerp(a, b, 0.5);
        CHECK(oracle::cosine(a, q) == doctest::Approx(oracle::cosine(q, h)).epsilon(1e-9));
    }
}

TEST_CASE("slerp of nearly parallel vectors falls back to linear") {
    const std::vector<double> a = {1, 0, 0}, b = {1, 1e-9, 0};
    const auto m = slerp(a, b, 0.5);
    CHECK(m[1] == doctest::Approx(5e-10));
    CHECK_THROWS_AS(slerp(std::vector<double>{0, 0, 0}, b, 0.5), Error);
}

TEST_CASE("slerp on float rows matches the double path") {
    MatF a(1, 3), b(1, 3);
    a << 0.3f, -1.2f, 0.5f;
    b << -0.7f, 0.1f, 2.0f;
    CHECK(slerp(a, b, 0.0) == a);
    CHECK(slerp(a, b, 1.0) == b);
}

TEST_CASE("interpolation grid includes both endpoints") {
    CHECK(interpolation_grid(2) == std::vector<double>{0.0, 1.0});
    const auto g = interpolation_grid(5);
    CHECK(g.size() == 5);
    CHECK(g[2] == 0.5);
    CHECK_THROWS_AS(interpolation_grid(1), Error);
}

TEST_CASE("perturbation with zero sigma is the identity") {
    MatF z = MatF::Random(1, 8);
    std::mt19937_64 rng(3);
    CHECK(perturb(z, 0.0, rng) == z);
    std::mt19937_64 r1(3), r2(3);
    CHECK(perturb(z, 0.5, r1) == perturb(z, 0.5, r2));
}

TEST_CASE("classification picks the most probable class") {
    MatF logits(1, 4);
    logits << 0.1f, 2.0f, -1.0f, 2.0f;
    const Classification c = classify(logits);
    CHECK(c.label == 1);
    double sum = 0;
    for (double p : c.probabilities) sum += p;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("average precision and precision@k match the oracle") {
    std::mt19937_64 rng(7);
    std::bernoulli_distribution coin(0.3);
    std::vector<std::vector<bool>> rankings;
    for (int t = 0; t < 1000; ++t) {
        std::vector<bool> rel(1 + t % 40);
        for (std::size_t i = 0; i < rel.size(); ++i) rel[i] = coin(rng);
        rankings.push_back(rel);
        std::unique_ptr<bool[]> flags(new bool[rel.size()]);
        for (std::size_t i = 0; i < rel.size(); ++i) flags[i] = rel[i];
        const std::span<const bool> view(flags.get(), rel.size());
        CHECK(average_precision(view) == oracle::average_precision(rel));
        for (std::size_t k = 1; k <= rel.size(); ++k) {
            CHECK(precision_at_k(view, k) == oracle::precision_at(rel, k));
        }
    }
    double sum = 0;
    for (const auto& r : rankings) sum += oracle::average_precision(r);
    CHECK(mean_average_precision(rankings) == doctest::Approx(sum / rankings.size()).epsilon(1e-12));
    bool none = false;
    const bool empty[] = {false, false};
    CHECK(average_precision(empty, &none) == 0.0);
    CHECK(none);
}

TEST_CASE("knn equals a full sort for both metrics") {
    std::mt19937_64 rng(9);
    const int n = 300, d = 12;
    MatF vectors(n, d);
    std::vector<std::string> ids;
    std::uniform_int_distribution<int> small(-2, 2);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j) vectors(i, j) = static_cast<float>(small(rng)); // many ties
        if (vectors.row(i).squaredNorm() == 0) vectors(i, 0) = 1;
        ids.push_back("item" + std::to_string(1000 - i));
    }
    for (Metric metric : {Metric::Cosine, Metric::Euclidean}) {
        const EmbeddingIndex index(vectors, ids, metric);
        for (int q = 0; q < 20; ++q) {
            MatF query(1, d);
            for (int j = 0; j < d; ++j) query(0, j) = static_cast<float>(small(rng));
            query(0, 1) += 0.5f;
            std::vector<std::pair<std::string, double>> scored;
            std::vector<double> qv(query.data(), query.data() + d);
            for (int i = 0; i < n; ++i) {
                std::vector<double> v(vectors.row(i).data(), vectors.row(i).data() + d);
                double s;
                if (metric == Metric::Cosine) {
                    s = oracle::cosine(qv, v);
                } else {
                    double acc = 0;
                    for (int j = 0; j < d; ++j) acc += (qv[j] - v[j]) * (qv[j] - v[j]);
                    s = -std::sqrt(acc);
                }
                scored.emplace_back(ids[i], s);
                CHECK(index.score(query, i) == doctest::Approx(s).epsilon(1e-9));
            }
            // Recompute the oracle ordering from the index's own scores so the
            // test isolates ranking from floating-point summation order.
            for (int i = 0; i < n; ++i) scored[i].second = index.score(query, i);
            for (std::size_t k : {1, 5, 37, 300}) {
                const auto expect = oracle::top_k(scored, k);
                const auto got = index.knn(query, k);
                REQUIRE(got.size() == expect.size());
                for (std::size_t i = 0; i < got.size(); ++i) {
                    CHECK(got[i].id == expect[i].first);
                    CHECK(got[i].score == expect[i].second);
                }
            }
            CHECK_THROWS_AS(index.knn(query, 301), Error);
        }
    }
}

TEST_CASE("embedding dump round trip is exact") {
    MatF v = MatF::Random(5, 4);
    const EmbeddingIndex index(v, {"a", "b", "c", "d", "e"}, Metric::Euclidean, {0, 1, 0, 2, 1});
    const auto path = std::filesystem::temp_directory_path() / "sketchformer_test_index.bin";
    index.save(path);
    CHECK(EmbeddingIndex::load(path) == index);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(EmbeddingIndex(v, {"a"}), Error);
}
