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
#include <string>
#include <vector>

#include "sketchformer/codec.hpp"
#include "sketchformer/crossmodal.hpp"
#include "sketchformer/dataset.hpp"
#include "sketchformer/embedding_ops.hpp"
#include "sketchformer/training.hpp"
#include "sketchformer/transformer.hpp"

namespace sketchformer {

// A loaded checkpoint ready for inference: the network, its tokenizer and the
// dataset metadata it was trained with. Read-only after construction.
class Engine {
public:
    explicit Engine(Checkpoint checkpoint, std::string digest = {});
    static Engine load(const std::filesystem::path& checkpoint);

    const Checkpoint& checkpoint() const { return checkpoint_; }
    const Transformer<float>& model() const { return model_; }
    const SketchCodec& codec() const { return checkpoint_.codec; }
    const std::string& digest() const { return digest_; }
    const std::vector<std::string>& class_names() const { return checkpoint_.meta.class_names; }

    /// Simplifies with the training RDP epsilon, then tokenizes.
    SequenceInput prepare(const Sketch& sketch) const;
    MatF embed(const Sketch& sketch) const;
    /// Greedy decode of z; relative schemes are anchored at `origin`.
    Sketch generate(const MatF& z, Point origin) const;
    Sketch reconstruct(const Sketch& sketch) const;
    std::vector<Sketch> interpolate(const Sketch& a, const Sketch& b, int steps) const;
    Classification classify(const Sketch& sketch) const;
    Classification classify_embedding(const MatF& z) const;
    Sketch perturb(const Sketch& sketch, double sigma, std::uint64_t seed) const;

    /// Embeddings of one split as an index (ids and labels preserved).
    EmbeddingIndex build_index(const Dataset& dataset, Split split, Metric metric = Metric::Cosine) const;

private:
    Checkpoint checkpoint_;
    Transformer<float> model_;
    std::string digest_;
};

struct ClassifyEval {
    std::size_t items = 0;
    std::size_t skipped = 0;
    double accuracy = 0;
};

ClassifyEval eval_classify(const Engine& engine, const Dataset& dataset, Split split);

struct RetrievalEval {
    std::size_t queries = 0;
    double mean_ap = 0;
    std::vector<double> precision_at; // precision@1..k averaged over queries
};

/// Sketch-to-sketch retrieval within one split: every item queries all the
/// others; relevant means same category.
RetrievalEval eval_retrieval(const Engine& engine, const Dataset& dataset, Split split, std::size_t k,
                             Metric metric = Metric::Cosine);

struct QuantizationRow {
    std::string scheme; // "grid" or "dict"
    int parameter = 0;  // n or K
    double mean_error = 0;
    double max_error = 0;
    double mean_endpoint_error = 0;
    std::size_t points = 0;
};

struct QuantizationOptions {
    std::vector<int> grid_sizes = {10, 20, 30, 40, 50, 60, 70, 80, 90, 100};
    std::vector<int> dict_sizes = {500, 1000};
    std::size_t sample_size = 100000;
    double lift_fraction = 0.2;
    std::uint64_t seed = 1;
};

/// Absolute per-point round-trip error of each tokenizer over a split; the
/// dictionaries are fitted on the training split.
std::vector<QuantizationRow> quantization_report(const Dataset& dataset, Split split,
                                                 const QuantizationOptions& options = {});
std::string quantization_csv(const std::vector<QuantizationRow>& rows);

// ---------------------------------------------------------------------------
// Cross-modal pipeline

/// Rows for every item of the split that fits the model: E(x) from the
/// engine, P(x) from the raster encoder on the item's rasterization.
JointCorpus make_joint_corpus(const Engine& engine, const RasterEncoder& raster, const Dataset& dataset, Split split);

struct JointPhaseMetrics {
    double triplet_satisfaction = 0; // held-out
    double own_instance_rank = 0;    // held-out, lower is better
    double category_map = 0;         // held-out
};

struct JointReport {
    double raster_train_accuracy = 0;
    double raster_test_accuracy = 0;
    JointPhaseMetrics after_phase1;
    JointPhaseMetrics after_phase2;
    bool encoder_frozen = true; // E bit-identical before and after
    bool raster_frozen = true;  // P bit-identical before and after
    std::vector<JointStep> steps;
};

JointPhaseMetrics joint_metrics(const JointHeads<float>& heads, const JointCorpus& held_out, std::uint64_t seed);

/// Pretrains and freezes P on the training split, then trains the heads in
/// two phases and evaluates after each on the test split.
JointReport build_joint_model(const Engine& engine, const Dataset& dataset, const JointConfig& config,
                              const RasterTrainConfig& raster_config, JointModel& out);

/// u_r for every item of the split, as a Euclidean index.
EmbeddingIndex joint_image_index(const JointModel& joint, const Dataset& dataset, Split split);

} // namespace sketchformer
