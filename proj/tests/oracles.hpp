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

// Independent reference implementations used as test oracles. They favour
// the most literal formulation over speed and share no code with src/.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

// Index of the closest centroid by exhaustive scan; first index wins ties.
inline int nearest(const std::vector<std::pair<double, double>>& centroids, double x, double y) {
    int best = -1;
    double best_d = 0;
    for (int i = 0; i < static_cast<int>(centroids.size()); ++i) {
        const double d = std::hypot(x - centroids[i].first, y - centroids[i].second);
        if (best < 0 || d < best_d) {
            best = i;
            best_d = d;
        }
    }
    return best;
}

// Distance from p to segment ab via projection clamped to [0,1].
inline double segment_distance(double px, double py, double ax, double ay, double bx, double by) {
    const double vx = bx - ax, vy = by - ay;
    const double len2 = vx * vx + vy * vy;
    double t = len2 == 0 ? 0 : ((px - ax) * vx + (py - ay) * vy) / len2;
    t = std::clamp(t, 0.0, 1.0);
    return std::hypot(px - (ax + t * vx), py - (ay + t * vy));
}

// Symmetric mean nearest-ink distance by comparing every pair of ink pixels.
inline double chamfer(const std::vector<float>& a, const std::vector<float>& b, int side) {
    std::vector<std::pair<int, int>> ia, ib;
    for (int y = 0; y < side; ++y) {
        for (int x = 0; x < side; ++x) {
            if (a[y * side + x] > 0) ia.emplace_back(x, y);
            if (b[y * side + x] > 0) ib.emplace_back(x, y);
        }
    }
    if (ia.empty() && ib.empty()) {
        return 0;
    }
    if (ia.empty() || ib.empty()) {
        return std::sqrt(2.0) * side;
    }
    auto directed = [](const auto& from, const auto& to) {
        double sum = 0;
        for (auto [x, y] : from) {
            double best = std::numeric_limits<double>::infinity();
            for (auto [u, v] : to) {
                best = std::min(best, std::hypot(double(x - u), double(y - v)));
            }
            sum += best;
        }
        return sum / from.size();
    };
    return 0.5 * (directed(ia, ib) + directed(ib, ia));
}

// AP straight from the definition: average of precision@r over the ranks r
// that hold a relevant item.
inline double average_precision(const std::vector<bool>& rel) {
    double hits = 0, sum = 0;
    for (std::size_t r = 1; r <= rel.size(); ++r) {
        if (rel[r - 1]) {
            hits += 1;
            sum += hits / r;
        }
    }
    return hits == 0 ? 0 : sum / hits;
}

inline double precision_at(const std::vector<bool>& rel, std::size_t k) {
    double hits = 0;
    for (std::size_t i = 0; i < k; ++i) {
        hits += i < rel.size() && rel[i];
    }
    return hits / k;
}

// Full sort of (score desc, id asc).
inline std::vector<std::pair<std::string, double>> top_k(std::vector<std::pair<std::string, double>> scored,
                                                         std::size_t k) {
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    scored.resize(std::min(k, scored.size()));
    return scored;
}

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double ab = 0, aa = 0, bb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    return ab / std::sqrt(aa * bb);
}

// Central difference of f around x[i].
inline double central_difference(const std::function<double()>& f, double& x, double h) {
    const double saved = x;
    x = saved + h;
    const double up = f();
    x = saved - h;
    const double down = f();
    x = saved;
    return (up - down) / (2 * h);
}

// |a - n| / max(|a|, |n|, floor): relative where the gradient is meaningful,
// absolute below the floor.
inline double relative_error(double analytic, double numeric, double floor = 1e-7) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

// k distinct indices in [0, n), or all of them when n <= k.
inline std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, std::uint64_t seed) {
    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    if (n <= k) {
        return all;
    }
    std::mt19937_64 rng(seed);
    std::shuffle(all.begin(), all.end(), rng);
    all.resize(k);
    std::sort(all.begin(), all.end());
    return all;
}

} // namespace oracle
