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

#include "sketchformer/codec.hpp"
#include "sketchformer/dataset.hpp"
#include "sketchformer/transformer.hpp"

namespace sketchformer {

class TensorArchive;

// Everything a training run needs: the data scheme, the network shape and
// the optimization schedule. Parsed from a key=value file and echoed into the
// checkpoint.
struct TrainConfig {
    CodecKind scheme = CodecKind::Dict;
    int grid_n = 100;
    std::string codebook; // path, dict scheme

    ModelConfig model;

    int batch_size = 16;
    int steps = 1000;
    double lambda_cls = 1.0;
    double learning_rate = 1e-3; // peak rate, reached at the end of warmup
    int warmup = 200;
    double clip_norm = 0.0;      // 0 disables clipping
    std::uint64_t seed = 1;
    bool shuffle_strokes = false;
    int log_every = 50;

    /// Applies one key=value assignment; unknown keys are a config error.
    void set(const std::string& key, const std::string& value);
    void validate() const;
    /// Canonical key=value text (round-trips through parse).
    std::string to_text() const;
    static TrainConfig parse(const std::string& text);
    static TrainConfig load(const std::filesystem::path& path);

    void write(TensorArchive& archive) const;
    static TrainConfig read(const TensorArchive& archive);
};

/// Warmup-then-inverse-sqrt: base * min(step / warmup, sqrt(warmup / step)),
/// for 1-based steps.
double learning_rate_at(const TrainConfig& config, std::int64_t step);

// Moves whole strokes around while keeping each stroke's absolute geometry:
// the offset that enters each stroke is recomputed. When `origin` is given it
// is updated to the new first point.
Stroke3Seq shuffle_strokes(const Stroke3Seq& seq, std::mt19937_64& rng, Point* origin = nullptr);

struct Example {
    SequenceInput input;
    TeacherForcing forcing;
    int label = -1;
    std::string id;
    Point origin;
};

struct ExampleSet {
    std::vector<Example> examples;
    std::vector<std::string> skipped; // ids that did not fit max_len
};

ExampleSet prepare_examples(const Dataset& dataset, Split split, const SketchCodec& codec, int max_len,
                            bool shuffle = false, std::uint64_t seed = 0);

struct OptimizerState {
    ModelParams<float> m;
    ModelParams<float> v;
    std::int64_t step = 0;

    static OptimizerState zeros_for(const ModelParams<float>& params);
    friend bool operator==(const OptimizerState&, const OptimizerState&);
};

struct LossReport {
    std::int64_t step = 0;
    double recon_loss = 0;
    double class_loss = 0;
    double total = 0;
    double token_accuracy = 0; // tokenized
    double offset_mse = 0;     // continuous
    double pen_accuracy = 0;   // continuous
    double class_accuracy = 0;
    double learning_rate = 0;
    double grad_norm = 0;
    double seconds = 0;

    std::string to_json() const;
    friend bool operator==(const LossReport&, const LossReport&) = default;
};

/// Example indices for a 0-based step: consecutive slices of per-epoch
/// permutations, so any step's batch is computable without history.
std::vector<std::size_t> batch_indices(std::size_t n_examples, int batch_size, std::uint64_t seed,
                                       std::int64_t step);

/// One Adam update on the mean of recon + lambda_cls * class over the batch.
/// Throws NonFinite (naming the step and item ids) if the loss or a gradient
/// is not finite.
LossReport train_step(Transformer<float>& model, OptimizerState& optimizer, const TrainConfig& config,
                      std::span<const Example> examples, std::span<const std::size_t> batch);

using StepCallback = std::function<void(const LossReport&)>;

/// Runs train_step until optimizer.step reaches config.steps.
void train(Transformer<float>& model, OptimizerState& optimizer, const TrainConfig& config,
           std::span<const Example> examples, const StepCallback& on_step = {});

struct EvalReport {
    std::size_t items = 0;
    double recon_loss = 0;
    double token_accuracy = 0; // teacher-forced
    double pen_accuracy = 0;
    double offset_mse = 0;
    double class_accuracy = 0;
    double exact_reproduction = 0; // greedy decode equals the input (tokenized only)
};

EvalReport evaluate(const Transformer<float>& model, std::span<const Example> examples, bool autoregressive);

struct Checkpoint {
    TrainConfig train;
    SketchCodec codec;
    DatasetMeta meta;
    ModelParams<float> params;
    OptimizerState optimizer;

    ModelConfig config() const { return train.model; }
};

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);
TensorArchive checkpoint_archive(const Checkpoint& checkpoint);
Checkpoint checkpoint_from_archive(const TensorArchive& archive);

/// Tokenizer for the configured scheme. The dict scheme uses `codebook` when
/// given, otherwise loads config.codebook.
SketchCodec make_codec(const TrainConfig& config, const DatasetMeta& meta, const Codebook* codebook = nullptr);
/// Untrained checkpoint; vocabulary and class count come from codec and meta.
Checkpoint new_checkpoint(TrainConfig config, SketchCodec codec, DatasetMeta meta);

struct RunSummary {
    std::size_t examples = 0;
    std::size_t skipped = 0;
    LossReport last;
};

/// Continues the checkpoint's run on the training split up to train.steps.
RunSummary run_training(Checkpoint& checkpoint, const Dataset& dataset, const StepCallback& on_step = {});

void write_dataset_meta(const DatasetMeta& meta, TensorArchive& archive);
DatasetMeta read_dataset_meta(const TensorArchive& archive);

} // namespace sketchformer
