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

// Helpers shared by the unit tests and the acceptance binary.

#include <map>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "sketchformer/losses.hpp"
#include "sketchformer/transformer.hpp"

namespace fixtures {

using namespace sketchformer;

inline ModelConfig tiny_config(int max_len = 6, double dropout = 0.1) {
    ModelConfig c;
    c.mode = InputMode::Tokenized;
    c.vocab_size = 64;
    c.d_model = 8;
    c.n_layers = 1;
    c.n_heads = 2;
    c.d_ff = 16;
    c.max_len = max_len;
    c.dropout = dropout;
    c.n_classes = 3;
    return c;
}

// recon + lambda * class for one example, with analytic gradients when asked.
// Dropout is active with a fixed seed so the function stays deterministic.
inline double total_loss(const Transformer<double>& model, const SequenceInput& input, const TeacherForcing& tf,
                         int label, double lambda, ModelParams<double>* grads) {
    const auto pass = model.forward(input, tf.decoder_input, {true, 42});
    double loss = 0;
    MatD d_out, d_cls;
    if (model.config().mode == InputMode::Tokenized) {
        auto r = token_cross_entropy<double>(pass.outputs, tf.target_tokens);
        loss = r.loss;
        d_out = r.grad;
    } else {
        auto r = continuous_loss<double>(pass.outputs, tf.target_rows);
        loss = r.total;
        d_out = r.grad;
    }
    auto c = class_cross_entropy<double>(pass.class_logits, label);
    loss += lambda * c.loss;
    if (grads) {
        *grads = model.params().zeros_like();
        d_cls = c.grad * lambda;
        model.backward(pass, d_out, d_cls, nullptr, *grads);
    }
    return loss;
}

struct TensorCheck {
    std::size_t checked = 0;
    std::size_t size = 0;
    double worst = 0;
};

// Central differences on every coordinate of the bottleneck tensors and on
// `samples` random coordinates of every other tensor.
inline std::map<std::string, TensorCheck> gradient_check(Transformer<double>& model, const SequenceInput& input,
                                                         int label, std::size_t samples, double h = 1e-4) {
    const TeacherForcing tf = make_teacher_forcing(input, model.config().mode);
    ModelParams<double> grads;
    total_loss(model, input, tf, label, 1.0, &grads);
    std::vector<const MatD*> analytic;
    grads.visit([&](const std::string&, const MatD& m) { analytic.push_back(&m); });

    std::map<std::string, TensorCheck> out;
    std::size_t t = 0;
    std::uint64_t seed = 1;
    model.params().visit([&](const std::string& name, MatD& w) {
        const MatD& g = *analytic[t++];
        if (w.size() == 0) {
            return;
        }
        const bool full = name.rfind("bottleneck.", 0) == 0;
        const auto idx = oracle::sample_indices(static_cast<std::size_t>(w.size()),
                                                full ? static_cast<std::size_t>(w.size()) : samples, seed++);
        TensorCheck& c = out[name];
        c.size = static_cast<std::size_t>(w.size());
        for (auto i : idx) {
            const double numeric = oracle::central_difference(
                [&] { return total_loss(model, input, tf, label, 1.0, nullptr); }, w.data()[i], h);
            c.worst = std::max(c.worst, oracle::relative_error(g.data()[i], numeric));
            ++c.checked;
        }
    });
    return out;
}

} // namespace fixtures
