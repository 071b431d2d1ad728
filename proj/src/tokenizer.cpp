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

#include "sketchformer/tokenizer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include "sketchformer/binary_io.hpp"
#include "sketchformer/error.hpp"

namespace sketchformer {

const char* token_scheme_name(TokenScheme scheme) {
    return scheme == TokenScheme::Dict ? "dict" : "grid";
}

std::size_t TokenSequence::content_length() const {
    auto it = std::find(tokens.begin(), tokens.end(), token::kEos);
    return it == tokens.end() ? tokens.size() : static_cast<std::size_t>(it - tokens.begin()) + 1;
}

std::string token_sequence_problem(const TokenSequence& seq) {
    if (seq.tokens.empty() || seq.tokens.front() != token::kSos) {
        return "sequence does not start with SOS";
    }
    std::size_t eos_count = 0;
    bool after_eos = false;
    for (std::size_t i = 0; i < seq.tokens.size(); ++i) {
        const int t = seq.tokens[i];
        if (t < 0 || t >= seq.vocab_size) {
            return "token " + std::to_string(t) + " at position " + std::to_string(i) +
                   " outside vocabulary of " + std::to_string(seq.vocab_size);
        }
        if (after_eos && t != token::kPad) {
            return "non-PAD token after EOS at position " + std::to_string(i);
        }
        if (t == token::kEos) {
            ++eos_count;
            after_eos = true;
        }
    }
    if (eos_count != 1) {
        return "sequence has no EOS";
    }
    return {};
}

void validate_tokens(const TokenSequence& seq) {
    if (auto problem = token_sequence_problem(seq); !problem.empty()) {
        fail(ErrorCode::Decode, problem);
    }
}

namespace {

void finish_sequence(TokenSequence& out, std::size_t max_len) {
    out.tokens.push_back(token::kEos);
    if (out.tokens.size() > max_len) {
        fail(ErrorCode::Truncation, "token sequence needs " + std::to_string(out.tokens.size()) +
                                        " slots but max_len is " + std::to_string(max_len));
    }
    out.tokens.resize(max_len, token::kPad);
}

void check_decodable(const TokenSequence& seq, TokenScheme scheme, int vocab_size) {
    require(seq.scheme == scheme, ErrorCode::Decode,
            std::string("expected a ") + token_scheme_name(scheme) + " token sequence");
    require(seq.vocab_size == vocab_size, ErrorCode::Decode, "vocabulary size does not match the tokenizer");
    bool has_eos = false;
    for (int t : seq.tokens) {
        require(t >= 0 && t < vocab_size, ErrorCode::Decode,
                "token " + std::to_string(t) + " outside vocabulary of " + std::to_string(vocab_size));
        has_eos = has_eos || t == token::kEos;
    }
    require(has_eos, ErrorCode::Decode, "sequence has no EOS");
}

double sq_dist(const Offset2& a, const Offset2& b) {
    const double dx = a[0] - b[0];
    const double dy = a[1] - b[1];
    return dx * dx + dy * dy;
}

std::size_t count_distinct(std::span<const Offset2> points) {
    std::vector<Offset2> sorted(points.begin(), points.end());
    std::sort(sorted.begin(), sorted.end());
    return static_cast<std::size_t>(std::unique(sorted.begin(), sorted.end()) - sorted.begin());
}

} // namespace

// ---------------------------------------------------------------------------

int Codebook::nearest(double dx, double dy) const {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int i = 0; i < size(); ++i) {
        const double ex = dx - centroids[i][0];
        const double ey = dy - centroids[i][1];
        const double d = ex * ex + ey * ey;
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return best;
}

KMeansResult kmeans(std::span<const Offset2> points, int k, std::uint64_t seed, const KMeansOptions& options) {
    require(k >= 1, ErrorCode::InvalidArgument, "K must be at least 1");
    require(points.size() >= static_cast<std::size_t>(k), ErrorCode::InvalidArgument,
            "K exceeds the number of sample points");
    const std::size_t distinct = count_distinct(points);
    if (distinct < static_cast<std::size_t>(k)) {
        fail(ErrorCode::InvalidArgument, "only " + std::to_string(distinct) + " distinct points for K=" +
                                             std::to_string(k) + "; use K <= " + std::to_string(distinct));
    }
    const std::size_t n = points.size();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    KMeansResult result;
    auto& centers = result.centroids;
    centers.reserve(k);
    centers.push_back(points[std::min(n - 1, static_cast<std::size_t>(unit(rng) * n))]);
    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) {
        d2[i] = sq_dist(points[i], centers[0]);
    }
    while (centers.size() < static_cast<std::size_t>(k)) {
        const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
        double target = unit(rng) * total;
        std::size_t pick = n;
        for (std::size_t i = 0; i < n; ++i) {
            if (d2[i] <= 0.0) {
                continue;
            }
            target -= d2[i];
            if (target < 0.0) {
                pick = i;
                break;
            }
        }
        if (pick == n) {
            // Rounding left the draw past the end: take the last unseated point.
            for (std::size_t i = n; i-- > 0;) {
                if (d2[i] > 0.0) {
                    pick = i;
                    break;
                }
            }
        }
        centers.push_back(points[pick]);
        for (std::size_t i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], sq_dist(points[i], centers.back()));
        }
    }

    std::vector<int> assign(n, 0);
    std::vector<Offset2> sums(k);
    std::vector<std::size_t> counts(k);
    for (int iter = 0; iter < options.max_iterations; ++iter) {
        double objective = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            int best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (int c = 0; c < k; ++c) {
                const double d = sq_dist(points[i], centers[c]);
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            assign[i] = best;
            objective += best_d;
        }
        result.objective_history.push_back(objective);
        result.iterations = iter + 1;
        const auto& hist = result.objective_history;
        if (hist.size() >= 2) {
            const double prev = hist[hist.size() - 2];
            if (prev - objective <= options.relative_tolerance * prev) {
                break;
            }
        }
        std::fill(sums.begin(), sums.end(), Offset2{0.0, 0.0});
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            sums[assign[i]][0] += points[i][0];
            sums[assign[i]][1] += points[i][1];
            ++counts[assign[i]];
        }
        for (int c = 0; c < k; ++c) {
            // Empty clusters keep their previous center.
            if (counts[c] > 0) {
                centers[c] = {sums[c][0] / counts[c], sums[c][1] / counts[c]};
            }
        }
    }
    return result;
}

std::vector<Offset2> sample_pen_movements(std::span<const Stroke3Seq> corpus, std::size_t sample_size,
                                          double lift_fraction, std::uint64_t seed) {
    require(!corpus.empty(), ErrorCode::InvalidArgument, "codebook corpus is empty");
    require(lift_fraction > 0.0 && lift_fraction < 1.0, ErrorCode::InvalidArgument,
            "lift fraction must lie in (0, 1)");
    std::vector<Offset2> lift_pool;
    std::vector<Offset2> draw_pool;
    for (const auto& seq : corpus) {
        for (std::size_t i = 0; i < seq.points.size(); ++i) {
            const Offset2 o{seq.points[i].dx, seq.points[i].dy};
            if (i > 0 && seq.points[i - 1].lift != 0) {
                lift_pool.push_back(o);
            } else {
                draw_pool.push_back(o);
            }
        }
    }
    require(!draw_pool.empty() || !lift_pool.empty(), ErrorCode::InvalidArgument, "codebook corpus has no points");
    std::size_t n_lift = static_cast<std::size_t>(std::ceil(lift_fraction * static_cast<double>(sample_size)));
    if (lift_pool.empty()) {
        n_lift = 0;
    }
    if (draw_pool.empty()) {
        n_lift = sample_size;
    }
    std::mt19937_64 rng(seed ^ 0xC0DEB00CULL);
    std::vector<Offset2> sample;
    sample.reserve(sample_size);
    auto take = [&](std::vector<Offset2>& pool, std::size_t count) {
        if (count <= pool.size()) {
            // Partial Fisher-Yates: without replacement.
            for (std::size_t i = 0; i < count; ++i) {
                std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
                std::swap(pool[i], pool[pick(rng)]);
                sample.push_back(pool[i]);
            }
        } else {
            std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
            for (std::size_t i = 0; i < count; ++i) {
                sample.push_back(pool[pick(rng)]);
            }
        }
    };
    take(lift_pool, n_lift);
    take(draw_pool, sample_size - n_lift);
    return sample;
}

CodebookFit fit_codebook(std::span<const Stroke3Seq> corpus, int k, std::size_t sample_size,
                         double lift_fraction, std::uint64_t seed, double offset_scale,
                         const KMeansOptions& options) {
    require(k >= 2, ErrorCode::InvalidArgument, "K must be at least 2");
    require(static_cast<std::size_t>(k) <= sample_size, ErrorCode::InvalidArgument,
            "K must not exceed the sample size");
    const auto sample = sample_pen_movements(corpus, sample_size, lift_fraction, seed);
    CodebookFit fit;
    fit.kmeans = kmeans(sample, k, seed, options);
    fit.codebook.lift_fraction = lift_fraction;
    fit.codebook.seed = seed;
    fit.codebook.offset_scale = offset_scale;
    fit.codebook.centroids.reserve(k);
    for (const auto& c : fit.kmeans.centroids) {
        fit.codebook.centroids.push_back({static_cast<float>(c[0]), static_cast<float>(c[1])});
    }
    return fit;
}

TokenSequence dict_encode(const Stroke3Seq& seq, const Codebook& codebook, std::size_t max_len) {
    require(codebook.size() >= 2, ErrorCode::InvalidArgument, "codebook needs at least 2 centroids");
    TokenSequence out;
    out.scheme = TokenScheme::Dict;
    out.vocab_size = codebook.vocab_size();
    out.tokens.reserve(max_len);
    out.tokens.push_back(token::kSos);
    for (const auto& p : seq.points) {
        out.tokens.push_back(codebook.nearest(p.dx, p.dy) + token::kFirstContent);
        if (p.lift != 0) {
            out.tokens.push_back(token::kSep);
        }
    }
    finish_sequence(out, max_len);
    return out;
}

Stroke3Seq dict_decode(const TokenSequence& seq, const Codebook& codebook) {
    check_decodable(seq, TokenScheme::Dict, codebook.vocab_size());
    Stroke3Seq out;
    for (int t : seq.tokens) {
        if (t == token::kEos) {
            break;
        }
        if (t == token::kSep) {
            if (!out.points.empty()) {
                out.points.back().lift = 1;
            }
            continue;
        }
        if (t < token::kFirstContent) {
            continue;
        }
        const auto& c = codebook.centroids[static_cast<std::size_t>(t - token::kFirstContent)];
        out.points.push_back({static_cast<double>(c[0]), static_cast<double>(c[1]), 0});
    }
    return out;
}

void save_codebook(const Codebook& codebook, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), ErrorCode::Io, "cannot write " + path.string());
    out.write("SKCB1", 5);
    binary::write<std::uint32_t>(out, static_cast<std::uint32_t>(codebook.size()));
    binary::write<double>(out, codebook.lift_fraction);
    binary::write<std::uint64_t>(out, codebook.seed);
    binary::write<double>(out, codebook.offset_scale);
    for (const auto& c : codebook.centroids) {
        binary::write<float>(out, c[0]);
        binary::write<float>(out, c[1]);
    }
    require(static_cast<bool>(out), ErrorCode::Io, "failed writing " + path.string());
}

Codebook load_codebook(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorCode::Io, "cannot open " + path.string());
    binary::expect_magic(in, "SKCB1", path.string());
    Codebook cb;
    const auto k = binary::read<std::uint32_t>(in);
    cb.lift_fraction = binary::read<double>(in);
    cb.seed = binary::read<std::uint64_t>(in);
    cb.offset_scale = binary::read<double>(in);
    cb.centroids.resize(k);
    for (auto& c : cb.centroids) {
        c[0] = binary::read<float>(in);
        c[1] = binary::read<float>(in);
    }
    require(k >= 2, ErrorCode::Io, path.string() + ": codebook needs at least 2 centroids");
    return cb;
}

// ---------------------------------------------------------------------------

Point GridSpec::cell_center(int cell) const {
    const int row = cell / n;
    const int col = cell % n;
    return {min_x + (col + 0.5) * cell_size(), min_y + (row + 0.5) * cell_size()};
}

int GridSpec::cell_of(Point p, bool* outlier) const {
    const double u = (p.x - min_x) / extent;
    const double v = (p.y - min_y) / extent;
    if (outlier != nullptr) {
        *outlier = u < 0.0 || u > 1.0 || v < 0.0 || v > 1.0;
    }
    const int col = std::clamp(static_cast<int>(std::floor(n * u)), 0, n - 1);
    const int row = std::clamp(static_cast<int>(std::floor(n * v)), 0, n - 1);
    return row * n + col;
}

TokenSequence grid_encode(const Sketch& sketch, const GridSpec& grid, std::size_t max_len, std::size_t* clamped) {
    require(grid.n >= 2, ErrorCode::InvalidArgument, "grid needs at least 2 cells per side");
    require(grid.extent > 0.0, ErrorCode::InvalidArgument, "grid extent must be positive");
    sketch.validate();
    TokenSequence out;
    out.scheme = TokenScheme::Grid;
    out.vocab_size = grid.vocab_size();
    out.tokens.reserve(max_len);
    out.tokens.push_back(token::kSos);
    std::size_t outliers = 0;
    for (const auto& stroke : sketch.strokes) {
        for (const auto& p : stroke) {
            bool outlier = false;
            out.tokens.push_back(grid.cell_of(p, &outlier) + token::kFirstContent);
            outliers += outlier;
        }
        out.tokens.push_back(token::kSep);
    }
    if (clamped != nullptr) {
        *clamped = outliers;
    }
    finish_sequence(out, max_len);
    return out;
}

Sketch grid_decode(const TokenSequence& seq, const GridSpec& grid) {
    check_decodable(seq, TokenScheme::Grid, grid.vocab_size());
    Sketch sketch;
    Polyline current;
    for (int t : seq.tokens) {
        if (t == token::kEos) {
            break;
        }
        if (t == token::kSep) {
            if (!current.empty()) {
                sketch.strokes.push_back(std::move(current));
                current.clear();
            }
            continue;
        }
        if (t < token::kFirstContent) {
            continue;
        }
        current.push_back(grid.cell_center(t - token::kFirstContent));
    }
    if (!current.empty()) {
        sketch.strokes.push_back(std::move(current));
    }
    if (sketch.strokes.empty()) {
        sketch.strokes.push_back({{grid.min_x + 0.5 * grid.extent, grid.min_y + 0.5 * grid.extent}});
    }
    return sketch;
}

} // namespace sketchformer
