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
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sketchformer/embedding_ops.hpp"
#include "sketchformer/raster_encoder.hpp"
#include "sketchformer/tensor.hpp"
#include "sketchformer/training.hpp"

namespace sketchformer {

inline constexpr int kJointDim = 128;

enum class Branch { Vector, Raster };

// F_V and F_R are domain-specific pairs of dense layers, F_S the shared pair.
// ReLU follows every dense layer except the last of F_S; the output is
// L2-normalized. `cls` is the auxiliary classifier on the joint vector.
template <class T>
struct JointHeads {
    Mat<T> v1_w, v1_b, v2_w, v2_b;
    Mat<T> r1_w, r1_b, r2_w, r2_b;
    Mat<T> s1_w, s1_b, s2_w, s2_b;
    Mat<T> cls_w, cls_b;

    template <class F>
    void visit(F&& f) {
        f(std::string("v1_w"), v1_w);
        f(std::string("v1_b"), v1_b);
        f(std::string("v2_w"), v2_w);
        f(std::string("v2_b"), v2_b);
        f(std::string("r1_w"), r1_w);
        f(std::string("r1_b"), r1_b);
        f(std::string("r2_w"), r2_w);
        f(std::string("r2_b"), r2_b);
        f(std::string("s1_w"), s1_w);
        f(std::string("s1_b"), s1_b);
        f(std::string("s2_w"), s2_w);
        f(std::string("s2_b"), s2_b);
        f(std::string("cls_w"), cls_w);
        f(std::string("cls_b"), cls_b);
    }
    template <class F>
    void visit(F&& f) const {
        const_cast<JointHeads*>(this)->visit([&](const std::string& n, Mat<T>& m) { f(n, static_cast<const Mat<T>&>(m)); });
    }
    JointHeads zeros_like() const;
    friend bool operator==(const JointHeads&, const JointHeads&) = default;
};

template <class T>
JointHeads<T> init_joint_heads(int vector_dim, int raster_dim, int n_classes, std::uint64_t seed);

template <class T>
struct HeadPass {
    Mat<T> input;
    std::array<Mat<T>, 4> hidden; // post-activation outputs of the first three layers (index 3 unused)
    Mat<T> out;                   // pre-normalization
    Mat<T> u;
    T norm = 0;
};

template <class T>
HeadPass<T> head_forward(const JointHeads<T>& heads, Branch branch, const Mat<T>& feature);

/// Accumulates head gradients for d loss / d u; returns d loss / d feature.
template <class T>
Mat<T> head_backward(const JointHeads<T>& heads, Branch branch, const HeadPass<T>& pass, const Mat<T>& d_u,
                     JointHeads<T>& grads);

template <class T>
struct TripletValue {
    T loss = 0;
    T d_pos = 0;
    T d_neg = 0;
    Mat<T> g_anchor, g_positive, g_negative;
};

/// max(0, |a - p| - |a - n| + margin) with unsquared Euclidean distances.
template <class T>
TripletValue<T> triplet_loss(const Mat<T>& anchor, const Mat<T>& positive, const Mat<T>& negative, T margin);

// Precomputed branch inputs: E(x) for every vector sketch and P(x) for its
// rasterization, row-aligned with ids and labels.
struct JointCorpus {
    std::vector<std::string> ids;
    std::vector<int> labels;
    MatF vector_features;
    MatF raster_features;

    std::size_t size() const { return ids.size(); }
};

struct Triplet {
    std::size_t anchor = 0;   // vector sketch
    std::size_t positive = 0; // raster
    std::size_t negative = 0; // raster
};

struct TripletBatch {
    int phase = 1;
    std::vector<Triplet> items;
};

/// Phase 1: positive shares the anchor's category, negative does not.
/// Phase 2: positive is the anchor's own rasterization, negative another
/// instance of the same category.
TripletBatch sample_triplets(const JointCorpus& corpus, int phase, std::size_t batch_size, std::mt19937_64& rng);
/// Empty string when every triplet satisfies the phase constraints.
std::string triplet_batch_problem(const JointCorpus& corpus, const TripletBatch& batch);

struct JointConfig {
    int phase1_steps = 400;
    int phase2_steps = 200;
    int batch_size = 32;
    double margin1 = 0.2;
    double margin2 = 0.05;
    double cls_weight = 0.1;
    double learning_rate = 1e-3;
    std::uint64_t seed = 11;
    bool fine_tune_encoder = false;
};

struct JointStep {
    int phase = 1;
    int step = 0;
    double triplet = 0;
    double classification = 0;
    double active_fraction = 0; // triplets with nonzero hinge
};

// Optional fine-tuning of the vector encoder E; row i of the corpus must
// correspond to examples[i].
struct EncoderTuning {
    Transformer<float>* model = nullptr;
    std::span<const Example> examples;
    OptimizerState* optimizer = nullptr;
};

/// Two-phase training of the heads. Only the heads change unless `tuning`
/// is supplied with config.fine_tune_encoder set.
using PhaseCallback = std::function<void(int phase, const JointHeads<float>& heads)>;

std::vector<JointStep> train_joint(JointHeads<float>& heads, const JointCorpus& corpus, const JointConfig& config,
                                   EncoderTuning* tuning = nullptr, const PhaseCallback& on_phase_end = {});

MatF embed_rows(const JointHeads<float>& heads, Branch branch, const MatF& features);

/// Fraction of held-out phase-1 triplets with d(a, p) < d(a, n).
double triplet_satisfaction(const JointHeads<float>& heads, const JointCorpus& corpus, std::size_t count,
                            std::uint64_t seed);
/// Mean 1-based rank of each sketch's own rasterization when its u_v queries
/// all u_r of the corpus.
double own_instance_mean_rank(const JointHeads<float>& heads, const JointCorpus& corpus);
/// Category-level mAP of u_v queries against u_r.
double category_map(const JointHeads<float>& heads, const JointCorpus& corpus);

/// Sketch-based retrieval over an index of raster embeddings.
std::vector<Ranked> sbir_query(const JointHeads<float>& heads, const MatF& z, const EmbeddingIndex& image_index,
                               std::size_t k);

struct JointModel {
    JointHeads<float> heads;
    RasterEncoder raster;
    JointConfig config;
    std::string encoder_digest; // digest of the checkpoint that supplied E

    void save(const std::filesystem::path& path) const;
    static JointModel load(const std::filesystem::path& path);
};

} // namespace sketchformer
