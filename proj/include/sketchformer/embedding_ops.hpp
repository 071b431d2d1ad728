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
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sketchformer/tensor.hpp"

namespace sketchformer {

struct Classification {
    int label = 0;
    std::vector<double> probabilities;
};

/// Softmax over class logits; ties go to the lowest class id.
Classification classify(const MatF& class_logits);

/// Spherical interpolation; linear when the angle is below 1e-6. Zero inputs
/// are an error.
std::vector<double> slerp(std::span<const double> z1, std::span<const double> z2, double t);
MatF slerp(const MatF& z1, const MatF& z2, double t);

/// Uniform grid over [0, 1] including both endpoints.
std::vector<double> interpolation_grid(int steps);

/// z + N(0, sigma^2 I); sigma = 0 returns z unchanged.
MatF perturb(const MatF& z, double sigma, std::mt19937_64& rng);

enum class Metric { Cosine, Euclidean };
const char* metric_name(Metric metric);
Metric metric_from_name(const std::string& name);

struct Ranked {
    std::string id;
    double score = 0; // cosine similarity, or negated Euclidean distance
};

class EmbeddingIndex {
public:
    EmbeddingIndex() = default;
    EmbeddingIndex(MatF vectors, std::vector<std::string> ids, Metric metric = Metric::Cosine,
                   std::vector<int> labels = {});

    std::size_t size() const { return ids_.size(); }
    Metric metric() const { return metric_; }
    const MatF& vectors() const { return vectors_; }
    const std::vector<std::string>& ids() const { return ids_; }
    const std::vector<int>& labels() const { return labels_; }

    double score(const MatF& query, std::size_t row) const;
    /// Exact top-k by score, ties broken by ascending id.
    std::vector<Ranked> knn(const MatF& query, std::size_t k) const;

    /// Embedding dump: the tensor container with ids (and labels) in the manifest.
    void save(const std::filesystem::path& path) const;
    static EmbeddingIndex load(const std::filesystem::path& path);

    friend bool operator==(const EmbeddingIndex&, const EmbeddingIndex&) = default;

private:
    MatF vectors_;
    std::vector<std::string> ids_;
    std::vector<int> labels_;
    Metric metric_ = Metric::Cosine;
    std::vector<double> norms_;
};

/// Mean over relevant ranks of precision at that rank. Returns 0 (and sets
/// *no_relevant) when nothing is relevant.
double average_precision(std::span<const bool> relevant_in_rank_order, bool* no_relevant = nullptr);
double mean_average_precision(const std::vector<std::vector<bool>>& rankings);
double precision_at_k(std::span<const bool> relevant_in_rank_order, std::size_t k);

} // namespace sketchformer
