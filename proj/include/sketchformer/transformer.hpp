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
#include <string>
#include <vector>

#include "sketchformer/layers.hpp"
#include "sketchformer/sketch.hpp"
#include "sketchformer/tensor.hpp"

namespace sketchformer {

class TensorArchive;

enum class InputMode { Continuous, Tokenized };
enum class ExpandMode { Affine, Tile };

const char* input_mode_name(InputMode mode);
InputMode input_mode_from_name(const std::string& name);
const char* expand_mode_name(ExpandMode mode);
ExpandMode expand_mode_from_name(const std::string& name);

struct ModelConfig {
    InputMode mode = InputMode::Tokenized;
    int vocab_size = 0; // tokenized mode only
    int d_model = 128;
    int n_layers = 4;
    int n_heads = 8;
    int d_ff = 512;
    int max_len = 64;
    double dropout = 0.1;
    double attention_scale = 0.0; // 0 selects 1/sqrt(d_model / n_heads)
    int n_classes = 1;
    ExpandMode expand = ExpandMode::Affine;

    double alpha() const;
    /// Width of a decoder output row: vocab_size logits, or 2 offsets + 3 pen logits.
    int output_dim() const;
    void validate() const;

    void write(TensorArchive& archive) const;
    static ModelConfig read(const TensorArchive& archive);

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// A model input or decoder input sequence; which field is used depends on
/// the configured input mode.
struct SequenceInput {
    std::vector<int> tokens;
    std::vector<Stroke5Row> rows;

    static SequenceInput from_tokens(std::vector<int> tokens);
    static SequenceInput from_rows(std::vector<Stroke5Row> rows);

    int length(InputMode mode) const;
    /// Positions that are not padding: before and including EOS / the p3 row.
    std::vector<bool> valid_positions(InputMode mode) const;
    /// Drops trailing padding after the terminator.
    SequenceInput trimmed(InputMode mode) const;
};

/// Teacher-forcing pair: the decoder reads the sequence shifted forward by one
/// (SOS first) and is scored against the original up to its terminator.
struct TeacherForcing {
    SequenceInput decoder_input;
    std::vector<int> target_tokens;
    std::vector<Stroke5Row> target_rows;
};

TeacherForcing make_teacher_forcing(const SequenceInput& full, InputMode mode);

template <class T>
struct EncoderLayerParams {
    AttentionParams<T> attention;
    Mat<T> ln1_gain, ln1_bias;
    FfnParams<T> ffn;
    Mat<T> ln2_gain, ln2_bias;
};

template <class T>
struct DecoderLayerParams {
    AttentionParams<T> self_attention;
    Mat<T> ln1_gain, ln1_bias;
    AttentionParams<T> cross_attention;
    Mat<T> ln2_gain, ln2_bias;
    FfnParams<T> ffn;
    Mat<T> ln3_gain, ln3_bias;
};

template <class T>
struct ModelParams {
    Mat<T> token_embedding;      // vocab x d (tokenized)
    Mat<T> input_w, input_b;     // 5 x d, 1 x d (continuous)
    std::vector<EncoderLayerParams<T>> encoder;
    Mat<T> bottleneck_key;       // d x d
    Mat<T> bottleneck_bias;      // 1 x d
    Mat<T> bottleneck_value;     // 1 x d
    Mat<T> expand_w, expand_b;   // d x (max_len d), 1 x (max_len d); empty for tiled expansion
    std::vector<DecoderLayerParams<T>> decoder;
    Mat<T> output_w, output_b;   // d x output_dim
    Mat<T> classifier_w, classifier_b; // d x n_classes

    /// Visits every tensor as (name, matrix) in a fixed order.
    template <class F>
    void visit(F&& f) {
        visit_impl(*this, f);
    }
    template <class F>
    void visit(F&& f) const {
        visit_impl(*this, f);
    }

    ModelParams zeros_like() const;
    std::size_t parameter_count() const;

    template <class U>
    ModelParams<U> cast() const;

private:
    template <class Self, class F>
    static void visit_impl(Self& self, F& f);
};

template <class T>
ModelParams<T> init_params(const ModelConfig& config, std::uint64_t seed);

void write_params(const ModelParams<float>& params, TensorArchive& archive, const std::string& prefix = "");
ModelParams<float> read_params(const ModelConfig& config, const TensorArchive& archive,
                               const std::string& prefix = "");

// ---------------------------------------------------------------------------
// Forward caches

template <class T>
struct EncoderLayerCache {
    AttentionCache<T> attention;
    Mat<T> drop_attention;
    LayerNormCache<T> ln1;
    FfnCache<T> ffn;
    Mat<T> drop_ffn;
    LayerNormCache<T> ln2;
};

template <class T>
struct DecoderLayerCache {
    AttentionCache<T> self_attention;
    Mat<T> drop_self;
    LayerNormCache<T> ln1;
    AttentionCache<T> cross_attention;
    Mat<T> drop_cross;
    LayerNormCache<T> ln2;
    FfnCache<T> ffn;
    Mat<T> drop_ffn;
    LayerNormCache<T> ln3;
};

template <class T>
struct BottleneckCache {
    Mat<T> h;
    Mat<T> activation; // tanh(h K^T + b)
    std::vector<bool> valid;
};

template <class T>
struct BottleneckResult {
    Mat<T> z;       // 1 x d
    Mat<T> weights; // 1 x L, zero at masked steps
};

/// Self-attention pooling: s = softmax(tanh(h K^T + b) v) over valid steps,
/// z = sum_i s_i h_i. Throws when no step is valid.
template <class T>
BottleneckResult<T> bottleneck(const Mat<T>& h, const Mat<T>& key, const Mat<T>& bias, const Mat<T>& value,
                               const std::vector<bool>& valid, BottleneckCache<T>* cache = nullptr);

/// Accumulates parameter gradients; returns dL/dh.
template <class T>
Mat<T> bottleneck_backward(const Mat<T>& dz, const BottleneckResult<T>& result, const BottleneckCache<T>& cache,
                           const Mat<T>& key, const Mat<T>& value, Mat<T>& dkey, Mat<T>& dbias, Mat<T>& dvalue);

struct ForwardOptions {
    bool training = false;
    std::uint64_t dropout_seed = 0;
};

/// Everything recorded by a forward pass that backward needs.
template <class T>
struct ForwardPass {
    bool recorded = false;
    bool has_decoder = false;

    SequenceInput encoder_input;
    Mat<T> encoder_embed_drop;
    AttentionMask encoder_mask;
    std::vector<EncoderLayerCache<T>> encoder;
    BottleneckCache<T> bottleneck_cache;
    BottleneckResult<T> bottleneck;
    Mat<T> z;
    Mat<T> class_logits;

    Mat<T> memory;
    SequenceInput decoder_input;
    Mat<T> decoder_embed_drop;
    AttentionMask decoder_mask;
    std::vector<DecoderLayerCache<T>> decoder;
    Mat<T> decoder_out;
    Mat<T> outputs;
};

template <class T>
struct EncodeResult {
    Mat<T> z;
    Mat<T> weights;
    Mat<T> h;
};

template <class T>
class Transformer {
public:
    Transformer(ModelConfig config, ModelParams<T> params);

    const ModelConfig& config() const { return config_; }
    const ModelParams<T>& params() const { return params_; }
    ModelParams<T>& params() { return params_; }

    /// Token embedding (scaled by sqrt(d)) or continuous projection, plus
    /// positional encoding.
    Mat<T> embed(const SequenceInput& input) const;
    /// Encoder stack followed by the attention bottleneck.
    EncodeResult<T> encode(const SequenceInput& input) const;
    /// Maps z to a max_len x d decoder memory.
    Mat<T> expand(const Mat<T>& z) const;
    /// Decoder stack over a shifted input; causal self-attention only.
    Mat<T> decode(const Mat<T>& memory, const SequenceInput& decoder_input) const;
    Mat<T> output_head(const Mat<T>& decoder_out) const;
    Mat<T> class_logits(const Mat<T>& z) const;

    /// Full recorded pass (encoder, bottleneck, classifier, expansion, decoder).
    ForwardPass<T> forward(const SequenceInput& encoder_input, const SequenceInput& decoder_input,
                           const ForwardOptions& options = {}) const;
    /// Recorded encoder-only pass (no decoder); backward accepts dz only.
    ForwardPass<T> forward_encoder(const SequenceInput& encoder_input, const ForwardOptions& options = {}) const;

    /// Accumulates parameter gradients into `grads`. `d_outputs` and
    /// `d_class_logits` may be empty (treated as zero); `d_z` adds a direct
    /// gradient on the embedding. Throws a usage error for an unrecorded pass.
    void backward(const ForwardPass<T>& pass, const Mat<T>& d_outputs, const Mat<T>& d_class_logits,
                  const Mat<T>* d_z, ModelParams<T>& grads) const;

    /// Greedy decoding from SOS; stops at EOS / the p3 row or after max_steps
    /// generated elements. The result starts with SOS (tokens) or the start
    /// row is omitted (rows).
    SequenceInput autoregress(const Mat<T>& z, int max_steps) const;

private:
    Mat<T> encoder_stack(const Mat<T>& x, const AttentionMask& mask, DropoutSource* dropout,
                         std::vector<EncoderLayerCache<T>>* caches) const;
    Mat<T> decoder_stack(const Mat<T>& x, const Mat<T>& memory, const AttentionMask& mask, DropoutSource* dropout,
                         std::vector<DecoderLayerCache<T>>* caches) const;
    void embed_backward(const SequenceInput& input, const Mat<T>& dx, ModelParams<T>& grads) const;
    void check_length(const SequenceInput& input) const;

    ModelConfig config_;
    ModelParams<T> params_;
    Mat<T> positional_;
};

extern template class Transformer<float>;
extern template class Transformer<double>;

} // namespace sketchformer

// ---------------------------------------------------------------------------
// ModelParams template members

namespace sketchformer {

template <class T>
template <class Self, class F>
void ModelParams<T>::visit_impl(Self& self, F& f) {
    f(std::string("token_embedding"), self.token_embedding);
    f(std::string("input_w"), self.input_w);
    f(std::string("input_b"), self.input_b);
    auto visit_attention = [&f](const std::string& p, auto& a) {
        f(p + "wq", a.wq);
        f(p + "wk", a.wk);
        f(p + "wv", a.wv);
        f(p + "wo", a.wo);
    };
    auto visit_ffn = [&f](const std::string& p, auto& n) {
        f(p + "w1", n.w1);
        f(p + "b1", n.b1);
        f(p + "w2", n.w2);
        f(p + "b2", n.b2);
    };
    for (std::size_t l = 0; l < self.encoder.size(); ++l) {
        const std::string p = "encoder." + std::to_string(l) + ".";
        auto& layer = self.encoder[l];
        visit_attention(p + "attention.", layer.attention);
        f(p + "ln1_gain", layer.ln1_gain);
        f(p + "ln1_bias", layer.ln1_bias);
        visit_ffn(p + "ffn.", layer.ffn);
        f(p + "ln2_gain", layer.ln2_gain);
        f(p + "ln2_bias", layer.ln2_bias);
    }
    f(std::string("bottleneck.key"), self.bottleneck_key);
    f(std::string("bottleneck.bias"), self.bottleneck_bias);
    f(std::string("bottleneck.value"), self.bottleneck_value);
    f(std::string("expand_w"), self.expand_w);
    f(std::string("expand_b"), self.expand_b);
    for (std::size_t l = 0; l < self.decoder.size(); ++l) {
        const std::string p = "decoder." + std::to_string(l) + ".";
        auto& layer = self.decoder[l];
        visit_attention(p + "self_attention.", layer.self_attention);
        f(p + "ln1_gain", layer.ln1_gain);
        f(p + "ln1_bias", layer.ln1_bias);
        visit_attention(p + "cross_attention.", layer.cross_attention);
        f(p + "ln2_gain", layer.ln2_gain);
        f(p + "ln2_bias", layer.ln2_bias);
        visit_ffn(p + "ffn.", layer.ffn);
        f(p + "ln3_gain", layer.ln3_gain);
        f(p + "ln3_bias", layer.ln3_bias);
    }
    f(std::string("output_w"), self.output_w);
    f(std::string("output_b"), self.output_b);
    f(std::string("classifier_w"), self.classifier_w);
    f(std::string("classifier_b"), self.classifier_b);
}

template <class T>
ModelParams<T> ModelParams<T>::zeros_like() const {
    ModelParams<T> out = *this;
    out.visit([](const std::string&, Mat<T>& m) { m.setZero(); });
    return out;
}

template <class T>
std::size_t ModelParams<T>::parameter_count() const {
    std::size_t n = 0;
    visit([&n](const std::string&, const Mat<T>& m) { n += static_cast<std::size_t>(m.size()); });
    return n;
}

template <class T>
template <class U>
ModelParams<U> ModelParams<T>::cast() const {
    ModelParams<U> out;
    out.encoder.resize(encoder.size());
    out.decoder.resize(decoder.size());
    std::vector<Mat<U>*> slots;
    out.visit([&slots](const std::string&, Mat<U>& m) { slots.push_back(&m); });
    std::size_t i = 0;
    visit([&](const std::string&, const Mat<T>& m) { *slots[i++] = m.template cast<U>(); });
    return out;
}

} // namespace sketchformer
