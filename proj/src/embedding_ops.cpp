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

#include "sketchformer/embedding_ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sketchformer/container.hpp"
#include "sketchformer/error.hpp"

namespace sketchformer {

Classification classify(const MatF& logits) {
    require(logits.rows() == 1 && logits.cols() >= 1, ErrorCode::InvalidArgument, "class logits must be one row");
    const Eigen::RowVectorXd l = logits.row(0).cast<double>();
    const double top = l.maxCoeff();
    Eigen::RowVectorXd p = (l.array() - top).exp();
    p /= p.sum();
    Classification c;
    c.probabilities.assign(p.data(), p.data() + p.size());
    Eigen::Index best = 0;
    l.maxCoeff(&best);
    c.label = static_cast<int>(best);
    return c;
}

std::vector<double> slerp(std::span<const double> z1, std::span<const double> z2, double t) {
    require(z1.size() == z2.size() && !z1.empty(), ErrorCode::InvalidArgument, "slerp inputs differ in length");
    double n1 = 0, n2 = 0, dot = 0;
    for (std::size_t i = 0; i < z1.size(); ++i) {
        n1 += z1[i] * z1[i];
        n2 += z2[i] * z2[i];
        dot += z1[i] * z2[i];
    }
    require(n1 > 0 && n2 > 0, ErrorCode::InvalidArgument, "slerp of a zero vector is undefined");
    std::vector<double> out(z1.size());
    if (t == 0.0) {
        out.assign(z1.begin(), z1.end());
        return out;
    }
    if (t == 1.0) {
        out.assign(z2.begin(), z2.end());
        return out;
    }
    const double cos_omega = std::clamp(dot / std::sqrt(n1 * n2), -1.0, 1.0);
    const double omega = std::acos(cos_omega);
    double a = 1.0 - t, b = t;
    if (omega >= 1e-6) {
        const double s = std::sin(omega);
        a = std::sin((1.0 - t) * omega) / s;
        b = std::sin(t * omega) / s;
    }
    for (std::size_t i = 0; i < z1.size(); ++i) {
        out[i] = a * z1[i] + b * z2[i];
    }
    return out;
}

MatF slerp(const MatF& z1, const MatF& z2, double t) {
    require(z1.rows() == 1 && z2.rows() == 1, ErrorCode::InvalidArgument, "slerp expects row vectors");
    const Eigen::RowVectorXd a = z1.cast<double>(), b = z2.cast<double>();
    const auto r = slerp(std::span<const double>(a.data(), a.size()), std::span<const double>(b.data(), b.size()), t);
    MatF out(1, z1.cols());
    for (Eigen::Index i = 0; i < out.cols(); ++i) {
        out(0, i) = static_cast<float>(r[static_cast<std::size_t>(i)]);
    }
    return out;
}

std::vector<double> interpolation_grid(int steps) {
    require(steps >= 2, ErrorCode::InvalidArgument, "interpolation needs at least 2 steps");
    std::vector<double> t(static_cast<std::size_t>(steps));
    for (int i = 0; i < steps; ++i) {
        t[static_cast<std::size_t>(i)] = static_cast<double>(i) / (steps - 1);
    }
    return t;
}

MatF perturb(const MatF& z, double sigma, std::mt19937_64& rng) {
    require(sigma >= 0 && std::isfinite(sigma), ErrorCode::InvalidArgument, "sigma must be a non-negative number");
    if (sigma == 0) {
        return z;
    }
    std::normal_distribution<double> noise(0.0, sigma);
    MatF out = z;
    for (Eigen::Index i = 0; i < out.size(); ++i) {
        out.data()[i] = static_cast<float>(out.data()[i] + noise(rng));
    }
    return out;
}

const char* metric_name(Metric metric) { return metric == Metric::Cosine ? "cosine" : "euclidean"; }

Metric metric_from_name(const std::string& name) {
    if (name == "cosine") {
        return Metric::Cosine;
    }
    if (name == "euclidean") {
        return Metric::Euclidean;
    }
    fail(ErrorCode::Config, "unknown metric '" + name + "'");
}

EmbeddingIndex::EmbeddingIndex(MatF vectors, std::vector<std::string> ids, Metric metric, std::vector<int> labels)
    : vectors_(std::move(vectors)), ids_(std::move(ids)), labels_(std::move(labels)), metric_(metric) {
    require(static_cast<std::size_t>(vectors_.rows()) == ids_.size(), ErrorCode::InvalidArgument,
            "index rows and ids differ in count");
    require(labels_.empty() || labels_.size() == ids_.size(), ErrorCode::InvalidArgument,
            "index labels and ids differ in count");
    require(vectors_.allFinite(), ErrorCode::NonFinite, "index contains non-finite entries");
    norms_.resize(ids_.size());
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        norms_[i] = vectors_.row(static_cast<Eigen::Index>(i)).cast<double>().norm();
    }
}

double EmbeddingIndex::score(const MatF& query, std::size_t row) const {
    const auto r = static_cast<Eigen::Index>(row);
    const Eigen::RowVectorXd q = query.row(0).cast<double>();
    const Eigen::RowVectorXd v = vectors_.row(r).cast<double>();
    if (metric_ == Metric::Euclidean) {
        return -(q - v).norm();
    }
    const double denom = q.norm() * norms_[row];
    return denom > 0 ? q.dot(v) / denom : 0.0;
}

std::vector<Ranked> EmbeddingIndex::knn(const MatF& query, std::size_t k) const {
    require(!ids_.empty(), ErrorCode::InvalidArgument, "the index is empty");
    require(query.rows() == 1 && query.cols() == vectors_.cols(), ErrorCode::InvalidArgument,
            "query width does not match the index");
    require(k >= 1 && k <= ids_.size(), ErrorCode::InvalidArgument,
            "k must lie in [1, " + std::to_string(ids_.size()) + "]");
    std::vector<Ranked> all(ids_.size());
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        all[i] = {ids_[i], score(query, i)};
    }
    auto better = [](const Ranked& a, const Ranked& b) { return a.score > b.score || (a.score == b.score && a.id < b.id); };
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), better);
    all.resize(k);
    return all;
}

void EmbeddingIndex::save(const std::filesystem::path& path) const {
    TensorArchive a;
    a.set("format", std::string("sketchformer-embeddings"));
    a.set("metric", std::string(metric_name(metric_)));
    a.set("count", static_cast<std::int64_t>(ids_.size()));
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        a.set("id." + std::to_string(i), ids_[i]);
        if (!labels_.empty()) {
            a.set("label." + std::to_string(i), labels_[i]);
        }
    }
    a.add_tensor("embeddings", vectors_);
    a.save(path);
}

EmbeddingIndex EmbeddingIndex::load(const std::filesystem::path& path) {
    const TensorArchive a = TensorArchive::load(path);
    require(a.find("format").value_or("") == "sketchformer-embeddings", ErrorCode::Config,
            path.string() + " is not an embedding dump");
    const auto n = a.get_int("count");
    std::vector<std::string> ids;
    std::vector<int> labels;
    for (std::int64_t i = 0; i < n; ++i) {
        ids.push_back(a.get("id." + std::to_string(i)));
        if (a.has("label." + std::to_string(i))) {
            labels.push_back(static_cast<int>(a.get_int("label." + std::to_string(i))));
        }
    }
    return EmbeddingIndex(a.tensor("embeddings"), std::move(ids), metric_from_name(a.get("metric")), std::move(labels));
}

namespace {

template <class Range>
double average_precision_of(const Range& ranking, bool* no_relevant) {
    double hits = 0, sum = 0;
    for (std::size_t i = 0; i < ranking.size(); ++i) {
        if (ranking[i]) {
            hits += 1;
            sum += hits / static_cast<double>(i + 1);
        }
    }
    if (no_relevant != nullptr) {
        *no_relevant = hits == 0;
    }
    return hits > 0 ? sum / hits : 0.0;
}

} // namespace

double average_precision(std::span<const bool> ranking, bool* no_relevant) {
    return average_precision_of(ranking, no_relevant);
}

double mean_average_precision(const std::vector<std::vector<bool>>& rankings) {
    require(!rankings.empty(), ErrorCode::InvalidArgument, "no queries");
    double sum = 0;
    for (const auto& r : rankings) {
        sum += average_precision_of(r, nullptr);
    }
    return sum / static_cast<double>(rankings.size());
}

double precision_at_k(std::span<const bool> ranking, std::size_t k) {
    require(k >= 1, ErrorCode::InvalidArgument, "k must be positive");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < std::min(k, ranking.size()); ++i) {
        hits += ranking[i];
    }
    return static_cast<double>(hits) / static_cast<double>(k);
}

} // namespace sketchformer
