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

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "sketchformer/sketch.hpp"

namespace sketchformer {

/// Reserved ids shared by every vocabulary; content tokens start at 4.
namespace token {
inline constexpr int kPad = 0;
inline constexpr int kSos = 1;
inline constexpr int kEos = 2;
inline constexpr int kSep = 3;
inline constexpr int kFirstContent = 4;
} // namespace token

enum class TokenScheme { Dict, Grid };

const char* token_scheme_name(TokenScheme scheme);

struct TokenSequence {
    std::vector<int> tokens;
    int vocab_size = 0;
    TokenScheme scheme = TokenScheme::Dict;

    /// Tokens up to and including EOS (the whole sequence if there is none).
    std::size_t content_length() const;

    friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

/// Checks the sequence shape: SOS first, exactly one EOS, only PAD after it,
/// every id below vocab_size. Returns an empty string when valid.
std::string token_sequence_problem(const TokenSequence& seq);
void validate_tokens(const TokenSequence& seq);

// ---------------------------------------------------------------------------
// Learned dictionary

using Offset2 = std::array<double, 2>;

struct Codebook {
    std::vector<std::array<float, 2>> centroids;
    double lift_fraction = 0.2;
    std::uint64_t seed = 0;
    double offset_scale = 1.0;

    int size() const { return static_cast<int>(centroids.size()); }
    int vocab_size() const { return size() + token::kFirstContent; }
    /// Index of the nearest centroid; ties go to the lowest index.
    int nearest(double dx, double dy) const;

    friend bool operator==(const Codebook&, const Codebook&) = default;
};

struct KMeansOptions {
    int max_iterations = 100;
    double relative_tolerance = 1e-6;
};

struct KMeansResult {
    std::vector<Offset2> centroids;
    /// Objective (sum of squared distances) after each assignment step.
    std::vector<double> objective_history;
    int iterations = 0;
};

/// Lloyd's algorithm with k-means++ seeding on 2-D points.
KMeansResult kmeans(std::span<const Offset2> points, int k, std::uint64_t seed,
                    const KMeansOptions& options = {});

/// Draws the clustering sample: ceil(lift_fraction * sample_size) movements
/// that follow a pen lift and the remainder from within-stroke movements.
std::vector<Offset2> sample_pen_movements(std::span<const Stroke3Seq> corpus, std::size_t sample_size,
                                          double lift_fraction, std::uint64_t seed);

struct CodebookFit {
    Codebook codebook;
    KMeansResult kmeans;
};

/// Fits a K-word dictionary over normalized stroke-3 movements.
CodebookFit fit_codebook(std::span<const Stroke3Seq> corpus, int k, std::size_t sample_size,
                         double lift_fraction, std::uint64_t seed, double offset_scale,
                         const KMeansOptions& options = {});

TokenSequence dict_encode(const Stroke3Seq& seq, const Codebook& codebook, std::size_t max_len);
Stroke3Seq dict_decode(const TokenSequence& seq, const Codebook& codebook);

void save_codebook(const Codebook& codebook, const std::filesystem::path& path);
Codebook load_codebook(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Spatial grid

/// n x n cells over the square canvas [origin, origin + extent]. The default
/// bounds are the 0-255 QuickDraw canvas.
struct GridSpec {
    int n = 100;
    double min_x = 0.0;
    double min_y = 0.0;
    double extent = 255.0;

    int vocab_size() const { return n * n + token::kFirstContent; }
    double cell_size() const { return extent / n; }
    Point cell_center(int cell) const;
    /// Cell index with inward clamping; `outlier` reports points outside the bounds.
    int cell_of(Point p, bool* outlier = nullptr) const;
};

TokenSequence grid_encode(const Sketch& sketch, const GridSpec& grid, std::size_t max_len,
                          std::size_t* clamped = nullptr);
/// Cell centers per content token; SEP starts a new stroke. A sequence with no
/// content decodes to a single point at the canvas center.
Sketch grid_decode(const TokenSequence& seq, const GridSpec& grid);

// ---------------------------------------------------------------------------
// Continuous scheme

inline Stroke5Seq continuous_pack(const Stroke3Seq& seq, std::size_t max_len) {
    return to_stroke5(seq, max_len);
}

} // namespace sketchformer
