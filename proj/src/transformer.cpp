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

#include "sketchformer/transformer.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "sketchformer/container.hpp"
#include "sketchformer/error.hpp"
#include "sketchformer/tokenizer.hpp"

namespace sketchformer {

const char* input_mode_name(InputMode mode) {
    return mode == InputMode::Continuous ? "continuous" : "tokenized";
}

InputMode input_mode_from_name(const std::string& name) {
    if (name == "continuous") {
        return InputMode::Continuous;
    }
    if (name == "tokenized") {
        return InputMode::Tokenized;
    }
    fail(ErrorCode::Config, "unknown input mode '" + name + "'");
}

const char* expand_mode_name(ExpandMode mode) { return mode == ExpandMode::Affine ? "affine" : "tile"; }

ExpandMode expand_mode_from_name(const std::string& name) {
    if (name == "affine") {
        return ExpandMode::Affine;
    }
    if (name == "tile") {
        return ExpandMode::Tile;
    }
    fail(ErrorCode::Config, "unknown expansion mode '" + name + "'");
}

double ModelConfig::alpha() const {
    return attention_scale > 0.0 ? attention_scale : 1.0 / std::sqrt(static_cast<double>(d_model) / n_heads);
}

int ModelConfig::output_dim() const { return mode == InputMode::Tokenized ? vocab_size : 5; }

void ModelConfig::validate() const {
    require(d_model > 0 && n_heads > 0 && d_model % n_heads == 0, ErrorCode::Config,
            "d_model must be a positive multiple of n_heads");
    require(n_layers >= 0, ErrorCode::Config, "n_layers must be non-negative");
    require(d_ff > 0, ErrorCode::Config, "d_ff must be positive");
    require(max_len >= 2, ErrorCode::Config, "max_len must be at least 2");
    require(dropout >= 0.0 && dropout < 1.0, ErrorCode::Config, "dropout must lie in [0, 1)");
    require(n_classes >= 1, ErrorCode::Config, "n_classes must be at least 1");
    if (mode == InputMode::Tokenized) {
        require(vocab_size > token::kFirstContent, ErrorCode::Config, "vocab_size must exceed the special tokens");
    }
}

void ModelConfig::write(TensorArchive& a) const {
    a.set("model.mode", std::string(input_mode_name(mode)));
    a.set("model.vocab_size", vocab_size);
    a.set("model.d_model", d_model);
    a.set("model.n_layers", n_layers);
    a.set("model.n_heads", n_heads);
    a.set("model.d_ff", d_ff);
    a.set("model.max_len", max_len);
    a.set("model.dropout", dropout);
    a.set("model.attention_scale", attention_scale);
    a.set("model.n_classes", n_classes);
    a.set("model.expand", std::string(expand_mode_name(expand)));
}

ModelConfig ModelConfig::read(const TensorArchive& a) {
    ModelConfig c;
    c.mode = input_mode_from_name(a.get("model.mode"));
    c.vocab_size = static_cast<int>(a.get_int("model.vocab_size"));
    c.d_model = static_cast<int>(a.get_int("model.d_model"));
    c.n_layers = static_cast<int>(a.get_int("model.n_layers"));
    c.n_heads = static_cast<int>(a.get_int("model.n_heads"));
    c.d_ff = static_cast<int>(a.get_int("model.d_ff"));
    c.max_len = static_cast<int>(a.get_int("model.max_len"));
    c.dropout = a.get_double("model.dropout");
    c.attention_scale = a.get_double("model.attention_scale");
    c.n_classes = static_cast<int>(a.get_int("model.n_classes"));
    c.expand = expand_mode_from_name(a.get("model.expand"));
    c.validate();
    return c;
}

// ---------------------------------------------------------------------------

SequenceInput SequenceInput::from_tokens(std::vector<int> tokens) {
    SequenceInput s;
    s.tokens = std::move(tokens);
    return s;
}

SequenceInput SequenceInput::from_rows(std::vector<Stroke5Row> rows) {
    SequenceInput s;
    s.rows = std::move(rows);
    return s;
}

int SequenceInput::length(InputMode mode) const {
    return static_cast<int>(mode == InputMode::Tokenized ? tokens.size() : rows.size());
}

std::vector<bool> SequenceInput::valid_positions(InputMode mode) const {
    std::vector<bool> valid(static_cast<std::size_t>(length(mode)), false);
    for (std::size_t i = 0; i < valid.size(); ++i) {
        valid[i] = true;
        const bool terminator = mode == InputMode::Tokenized ? tokens[i] == token::kEos : rows[i].p3 > 0.5;
        if (terminator) {
            break;
        }
    }
    return valid;
}

SequenceInput SequenceInput::trimmed(InputMode mode) const {
    SequenceInput out = *this;
    if (mode == InputMode::Tokenized) {
        TokenSequence t{tokens, 0, TokenScheme::Dict};
        out.tokens.resize(t.content_length());
    } else {
        Stroke5Seq s{rows};
        out.rows.resize(s.content_length());
    }
    return out;
}

TeacherForcing make_teacher_forcing(const SequenceInput& full, InputMode mode) {
    TeacherForcing tf;
    if (mode == InputMode::Tokenized) {
        const auto n = TokenSequence{full.tokens, 0, TokenScheme::Dict}.content_length();
        require(n >= 2 && full.tokens.front() == token::kSos, ErrorCode::InvalidArgument,
                "teacher forcing needs SOS ... EOS");
        tf.decoder_input.tokens.assign(full.tokens.begin(), full.tokens.begin() + static_cast<std::ptrdiff_t>(n - 1));
        tf.target_tokens.assign(full.tokens.begin() + 1, full.tokens.begin() + static_cast<std::ptrdiff_t>(n));
    } else {
        const auto m = Stroke5Seq{full.rows}.content_length();
        require(m >= 1, ErrorCode::InvalidArgument, "teacher forcing needs at least the end-of-sketch row");
        tf.decoder_input.rows.push_back(kStroke5Start);
        tf.decoder_input.rows.insert(tf.decoder_input.rows.end(), full.rows.begin(),
                                     full.rows.begin() + static_cast<std::ptrdiff_t>(m - 1));
        tf.target_rows.assign(full.rows.begin(), full.rows.begin() + static_cast<std::ptrdiff_t>(m));
    }
    return tf;
}

// ---------------------------------------------------------------------------

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

template <class T>
void shape_params(ModelParams<T>& p, const ModelConfig& c) {
    const int d = c.d_model;
    auto attention = [d](AttentionParams<T>& a) {
        a.wq.resize(d, d);
        a.wk.resize(d, d);
        a.wv.resize(d, d);
        a.wo.resize(d, d);
    };
    auto ffn_shape = [&c, d](FfnParams<T>& f) {
        f.w1.resize(d, c.d_ff);
        f.b1.resize(1, c.d_ff);
        f.w2.resize(c.d_ff, d);
        f.b2.resize(1, d);
    };
    if (c.mode == InputMode::Tokenized) {
        p.token_embedding.resize(c.vocab_size, d);
    } else {
        p.input_w.resize(5, d);
        p.input_b.resize(1, d);
    }
    p.encoder.resize(static_cast<std::size_t>(c.n_layers));
    for (auto& l : p.encoder) {
        attention(l.attention);
        ffn_shape(l.ffn);
        l.ln1_gain.resize(1, d);
        l.ln1_bias.resize(1, d);
        l.ln2_gain.resize(1, d);
        l.ln2_bias.resize(1, d);
    }
    p.bottleneck_key.resize(d, d);
    p.bottleneck_bias.resize(1, d);
    p.bottleneck_value.resize(1, d);
    if (c.expand == ExpandMode::Affine) {
        p.expand_w.resize(d, c.max_len * d);
        p.expand_b.resize(1, c.max_len * d);
    }
    p.decoder.resize(static_cast<std::size_t>(c.n_layers));
    for (auto& l : p.decoder) {
        attention(l.self_attention);
        attention(l.cross_attention);
        ffn_shape(l.ffn);
        l.ln1_gain.resize(1, d);
        l.ln1_bias.resize(1, d);
        l.ln2_gain.resize(1, d);
        l.ln2_bias.resize(1, d);
        l.ln3_gain.resize(1, d);
        l.ln3_bias.resize(1, d);
    }
    p.output_w.resize(d, c.output_dim());
    p.output_b.resize(1, c.output_dim());
    p.classifier_w.resize(d, c.n_classes);
    p.classifier_b.resize(1, c.n_classes);
}

} // namespace

template <class T>
ModelParams<T> init_params(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    ModelParams<T> p;
    shape_params(p, config);
    std::mt19937_64 rng(seed);
    // Values are drawn in double and rounded through float so that every
    // instantiation starts from identical weights.
    p.visit([&](const std::string& name, Mat<T>& m) {
        if (m.size() == 0) {
            return;
        }
        if (ends_with(name, "_gain")) {
            m.setOnes();
            return;
        }
        if (ends_with(name, "_b") || ends_with(name, "b1") || ends_with(name, "b2") || ends_with(name, "_bias") ||
            name == "bottleneck.bias") {
            m.setZero();
            return;
        }
        if (name == "token_embedding") {
            std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(config.d_model)));
            for (Eigen::Index i = 0; i < m.size(); ++i) {
                m.data()[i] = static_cast<T>(static_cast<float>(normal(rng)));
            }
            return;
        }
        double limit = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
        if (name == "expand_w") {
            limit = std::sqrt(3.0 / static_cast<double>(m.rows()));
        }
        std::uniform_real_distribution<double> uniform(-limit, limit);
        for (Eigen::Index i = 0; i < m.size(); ++i) {
            m.data()[i] = static_cast<T>(static_cast<float>(uniform(rng)));
        }
    });
    return p;
}

template ModelParams<float> init_params<float>(const ModelConfig&, std::uint64_t);
template ModelParams<double> init_params<double>(const ModelConfig&, std::uint64_t);

void write_params(const ModelParams<float>& params, TensorArchive& archive, const std::string& prefix) {
    params.visit([&](const std::string& name, const MatF& m) { archive.add_tensor(prefix + name, m); });
}

ModelParams<float> read_params(const ModelConfig& config, const TensorArchive& archive, const std::string& prefix) {
    ModelParams<float> p;
    shape_params(p, config);
    p.visit([&](const std::string& name, MatF& m) {
        MatF loaded = archive.tensor(prefix + name);
        require(loaded.rows() == m.rows() && loaded.cols() == m.cols(), ErrorCode::Config,
                "tensor '" + prefix + name + "' has the wrong shape");
        m = std::move(loaded);
    });
    return p;
}

// ---------------------------------------------------------------------------

template <class T>
BottleneckResult<T> bottleneck(const Mat<T>& h, const Mat<T>& key, const Mat<T>& bias, const Mat<T>& value,
                               const std::vector<bool>& valid, BottleneckCache<T>* cache) {
    require(static_cast<Eigen::Index>(valid.size()) == h.rows(), ErrorCode::Config,
            "bottleneck mask length does not match the sequence");
    require(std::find(valid.begin(), valid.end(), true) != valid.end(), ErrorCode::InvalidArgument,
            "bottleneck input has no unmasked time step");
    Mat<T> pre = h * key.transpose();
    pre.rowwise() += bias.row(0);
    Mat<T> activation = pre.array().tanh();
    const Mat<T> scores = (activation * value.transpose()).transpose(); // 1 x L
    AttentionMask mask = AttentionMask::padding(1, valid);
    BottleneckResult<T> out;
    out.weights = masked_softmax<T>(scores, mask);
    out.z = out.weights * h;
    if (cache != nullptr) {
        cache->h = h;
        cache->activation = std::move(activation);
        cache->valid = valid;
    }
    return out;
}

template <class T>
Mat<T> bottleneck_backward(const Mat<T>& dz, const BottleneckResult<T>& r, const BottleneckCache<T>& c,
                           const Mat<T>& key, const Mat<T>& value, Mat<T>& dkey, Mat<T>& dbias, Mat<T>& dvalue) {
    const Mat<T>& s = r.weights; // 1 x L
    Mat<T> dh = s.transpose() * dz;                      // L x d
    const Mat<T> ds = (c.h * dz.transpose()).transpose(); // 1 x L
    const T mean = s.cwiseProduct(ds).sum();
    const Mat<T> dscore = s.cwiseProduct((ds.array() - mean).matrix()); // 1 x L
    dvalue.noalias() += dscore * c.activation;
    Mat<T> dact = dscore.transpose() * value; // L x d_b
    const Mat<T> dpre = dact.cwiseProduct((T(1) - c.activation.array().square()).matrix());
    dkey.noalias() += dpre.transpose() * c.h;
    dbias += dpre.colwise().sum();
    dh.noalias() += dpre * key;
    return dh;
}

template BottleneckResult<float> bottleneck<float>(const MatF&, const MatF&, const MatF&, const MatF&,
                                                   const std::vector<bool>&, BottleneckCache<float>*);
template BottleneckResult<double> bottleneck<double>(const MatD&, const MatD&, const MatD&, const MatD&,
                                                     const std::vector<bool>&, BottleneckCache<double>*);
template MatF bottleneck_backward<float>(const MatF&, const BottleneckResult<float>&, const BottleneckCache<float>&,
                                         const MatF&, const MatF&, MatF&, MatF&, MatF&);
template MatD bottleneck_backward<double>(const MatD&, const BottleneckResult<double>&,
                                          const BottleneckCache<double>&, const MatD&, const MatD&, MatD&, MatD&,
                                          MatD&);

// ---------------------------------------------------------------------------

template <class T>
Transformer<T>::Transformer(ModelConfig config, ModelParams<T> params)
    : config_(std::move(config)), params_(std::move(params)) {
    config_.validate();
    require(params_.encoder.size() == static_cast<std::size_t>(config_.n_layers) &&
                params_.decoder.size() == static_cast<std::size_t>(config_.n_layers),
            ErrorCode::Config, "parameter layer count does not match the configuration");
    require(params_.output_w.cols() == config_.output_dim(), ErrorCode::Config,
            "output head width does not match the configuration");
    positional_ = positional_encoding<T>(config_.max_len, config_.d_model);
}

template <class T>
void Transformer<T>::check_length(const SequenceInput& input) const {
    const int n = input.length(config_.mode);
    require(n >= 1, ErrorCode::InvalidArgument, "empty input sequence");
    require(n <= config_.max_len, ErrorCode::InvalidArgument,
            "sequence of length " + std::to_string(n) + " exceeds max_len " + std::to_string(config_.max_len));
}

template <class T>
Mat<T> Transformer<T>::embed(const SequenceInput& input) const {
    check_length(input);
    const int n = input.length(config_.mode);
    Mat<T> x(n, config_.d_model);
    if (config_.mode == InputMode::Tokenized) {
        const T scale = std::sqrt(static_cast<T>(config_.d_model));
        for (int i = 0; i < n; ++i) {
            const int t = input.tokens[static_cast<std::size_t>(i)];
            require(t >= 0 && t < config_.vocab_size, ErrorCode::InvalidArgument,
                    "token " + std::to_string(t) + " outside the model vocabulary");
            x.row(i) = params_.token_embedding.row(t) * scale;
        }
    } else {
        Mat<T> rows(n, 5);
        for (int i = 0; i < n; ++i) {
            const auto& r = input.rows[static_cast<std::size_t>(i)];
            rows.row(i) << static_cast<T>(r.dx), static_cast<T>(r.dy), static_cast<T>(r.p1), static_cast<T>(r.p2),
                static_cast<T>(r.p3);
        }
        x = affine<T>(rows, params_.input_w, params_.input_b);
    }
    x += positional_.topRows(n);
    return x;
}

template <class T>
void Transformer<T>::embed_backward(const SequenceInput& input, const Mat<T>& dx, ModelParams<T>& grads) const {
    const int n = input.length(config_.mode);
    if (config_.mode == InputMode::Tokenized) {
        const T scale = std::sqrt(static_cast<T>(config_.d_model));
        for (int i = 0; i < n; ++i) {
            grads.token_embedding.row(input.tokens[static_cast<std::size_t>(i)]) += dx.row(i) * scale;
        }
    } else {
        Mat<T> rows(n, 5);
        for (int i = 0; i < n; ++i) {
            const auto& r = input.rows[static_cast<std::size_t>(i)];
            rows.row(i) << static_cast<T>(r.dx), static_cast<T>(r.dy), static_cast<T>(r.p1), static_cast<T>(r.p2),
                static_cast<T>(r.p3);
        }
        affine_backward<T>(rows, params_.input_w, dx, grads.input_w, grads.input_b);
    }
}

template <class T>
Mat<T> Transformer<T>::encoder_stack(const Mat<T>& x0, const AttentionMask& mask, DropoutSource* dropout,
                                     std::vector<EncoderLayerCache<T>>* caches) const {
    const T alpha = static_cast<T>(config_.alpha());
    if (caches != nullptr) {
        caches->assign(params_.encoder.size(), {});
    }
    Mat<T> x = x0;
    for (std::size_t l = 0; l < params_.encoder.size(); ++l) {
        const auto& p = params_.encoder[l];
        EncoderLayerCache<T>* c = caches != nullptr ? &(*caches)[l] : nullptr;
        const Mat<T> att = mha<T>(x, x, x, p.attention, config_.n_heads, alpha, mask, c ? &c->attention : nullptr);
        Mat<T> drop1 = dropout ? dropout->template mask<T>(att.rows(), att.cols()) : Mat<T>();
        const Mat<T> a = layer_norm<T>(x + apply_dropout<T>(att, drop1), p.ln1_gain, p.ln1_bias, c ? &c->ln1 : nullptr);
        const Mat<T> f = ffn<T>(a, p.ffn, c ? &c->ffn : nullptr);
        Mat<T> drop2 = dropout ? dropout->template mask<T>(f.rows(), f.cols()) : Mat<T>();
        x = layer_norm<T>(a + apply_dropout<T>(f, drop2), p.ln2_gain, p.ln2_bias, c ? &c->ln2 : nullptr);
        if (c != nullptr) {
            c->drop_attention = std::move(drop1);
            c->drop_ffn = std::move(drop2);
        }
    }
    return x;
}

template <class T>
Mat<T> Transformer<T>::decoder_stack(const Mat<T>& x0, const Mat<T>& memory, const AttentionMask& mask,
                                     DropoutSource* dropout, std::vector<DecoderLayerCache<T>>* caches) const {
    const T alpha = static_cast<T>(config_.alpha());
    if (caches != nullptr) {
        caches->assign(params_.decoder.size(), {});
    }
    const AttentionMask cross = AttentionMask::none(static_cast<int>(x0.rows()), static_cast<int>(memory.rows()));
    Mat<T> x = x0;
    for (std::size_t l = 0; l < params_.decoder.size(); ++l) {
        const auto& p = params_.decoder[l];
        DecoderLayerCache<T>* c = caches != nullptr ? &(*caches)[l] : nullptr;
        const Mat<T> s = mha<T>(x, x, x, p.self_attention, config_.n_heads, alpha, mask, c ? &c->self_attention : nullptr);
        Mat<T> drop1 = dropout ? dropout->template mask<T>(s.rows(), s.cols()) : Mat<T>();
        const Mat<T> a = layer_norm<T>(x + apply_dropout<T>(s, drop1), p.ln1_gain, p.ln1_bias, c ? &c->ln1 : nullptr);
        const Mat<T> m = mha<T>(a, memory, memory, p.cross_attention, config_.n_heads, alpha, cross,
                                c ? &c->cross_attention : nullptr);
        Mat<T> drop2 = dropout ? dropout->template mask<T>(m.rows(), m.cols()) : Mat<T>();
        const Mat<T> b = layer_norm<T>(a + apply_dropout<T>(m, drop2), p.ln2_gain, p.ln2_bias, c ? &c->ln2 : nullptr);
        const Mat<T> f = ffn<T>(b, p.ffn, c ? &c->ffn : nullptr);
        Mat<T> drop3 = dropout ? dropout->template mask<T>(f.rows(), f.cols()) : Mat<T>();
        x = layer_norm<T>(b + apply_dropout<T>(f, drop3), p.ln3_gain, p.ln3_bias, c ? &c->ln3 : nullptr);
        if (c != nullptr) {
            c->drop_self = std::move(drop1);
            c->drop_cross = std::move(drop2);
            c->drop_ffn = std::move(drop3);
        }
    }
    return x;
}

template <class T>
EncodeResult<T> Transformer<T>::encode(const SequenceInput& input) const {
    const Mat<T> x = embed(input);
    const auto valid = input.valid_positions(config_.mode);
    const AttentionMask mask = AttentionMask::padding(static_cast<int>(x.rows()), valid);
    EncodeResult<T> out;
    out.h = encoder_stack(x, mask, nullptr, nullptr);
    auto b = bottleneck<T>(out.h, params_.bottleneck_key, params_.bottleneck_bias, params_.bottleneck_value, valid);
    out.z = std::move(b.z);
    out.weights = std::move(b.weights);
    return out;
}

template <class T>
Mat<T> Transformer<T>::expand(const Mat<T>& z) const {
    require(z.rows() == 1 && z.cols() == config_.d_model, ErrorCode::InvalidArgument,
            "embedding has the wrong width");
    require(z.allFinite(), ErrorCode::NonFinite, "embedding is not finite");
    const int L = config_.max_len;
    const int d = config_.d_model;
    Mat<T> memory(L, d);
    if (config_.expand == ExpandMode::Affine) {
        const Mat<T> flat = affine<T>(z, params_.expand_w, params_.expand_b);
        memory = Eigen::Map<const Mat<T>>(flat.data(), L, d);
    } else {
        memory = z.replicate(L, 1);
    }
    memory += positional_;
    return memory;
}

template <class T>
Mat<T> Transformer<T>::decode(const Mat<T>& memory, const SequenceInput& decoder_input) const {
    require(memory.cols() == config_.d_model, ErrorCode::InvalidArgument, "decoder memory has the wrong width");
    const Mat<T> x = embed(decoder_input);
    const AttentionMask mask = AttentionMask::causal(static_cast<int>(x.rows()));
    return decoder_stack(x, memory, mask, nullptr, nullptr);
}

template <class T>
Mat<T> Transformer<T>::output_head(const Mat<T>& decoder_out) const {
    return affine<T>(decoder_out, params_.output_w, params_.output_b);
}

template <class T>
Mat<T> Transformer<T>::class_logits(const Mat<T>& z) const {
    return affine<T>(z, params_.classifier_w, params_.classifier_b);
}

template <class T>
ForwardPass<T> Transformer<T>::forward_encoder(const SequenceInput& encoder_input, const ForwardOptions& options) const {
    ForwardPass<T> pass;
    const bool drop = options.training && config_.dropout > 0.0;
    DropoutSource dropout(drop ? config_.dropout : 0.0, options.dropout_seed);
    DropoutSource* dp = drop ? &dropout : nullptr;

    pass.encoder_input = encoder_input;
    const Mat<T> x = embed(encoder_input);
    pass.encoder_embed_drop = dp ? dp->template mask<T>(x.rows(), x.cols()) : Mat<T>();
    const auto valid = encoder_input.valid_positions(config_.mode);
    pass.encoder_mask = AttentionMask::padding(static_cast<int>(x.rows()), valid);
    const Mat<T> h = encoder_stack(apply_dropout<T>(x, pass.encoder_embed_drop), pass.encoder_mask, dp, &pass.encoder);
    pass.bottleneck = bottleneck<T>(h, params_.bottleneck_key, params_.bottleneck_bias, params_.bottleneck_value,
                                    valid, &pass.bottleneck_cache);
    pass.z = pass.bottleneck.z;
    pass.class_logits = class_logits(pass.z);
    pass.recorded = true;
    return pass;
}

template <class T>
ForwardPass<T> Transformer<T>::forward(const SequenceInput& encoder_input, const SequenceInput& decoder_input,
                                       const ForwardOptions& options) const {
    // The decoder draws its dropout masks from a separate stream so that the
    // encoder's masks do not depend on the decoder length.
    ForwardPass<T> pass = forward_encoder(encoder_input, options);
    const bool drop = options.training && config_.dropout > 0.0;
    DropoutSource dropout(drop ? config_.dropout : 0.0, options.dropout_seed ^ 0x5DEECE66DULL);
    DropoutSource* dp = drop ? &dropout : nullptr;

    pass.memory = expand(pass.z);
    pass.decoder_input = decoder_input;
    const Mat<T> x = embed(decoder_input);
    pass.decoder_embed_drop = dp ? dp->template mask<T>(x.rows(), x.cols()) : Mat<T>();
    pass.decoder_mask = AttentionMask::causal(static_cast<int>(x.rows()));
    pass.decoder_out = decoder_stack(apply_dropout<T>(x, pass.decoder_embed_drop), pass.memory, pass.decoder_mask,
                                     dp, &pass.decoder);
    pass.outputs = output_head(pass.decoder_out);
    pass.has_decoder = true;
    return pass;
}

template <class T>
void Transformer<T>::backward(const ForwardPass<T>& pass, const Mat<T>& d_outputs, const Mat<T>& d_class_logits,
                              const Mat<T>* d_z, ModelParams<T>& grads) const {
    require(pass.recorded, ErrorCode::Usage, "backward called without a recorded forward pass");
    const T alpha = static_cast<T>(config_.alpha());
    const int heads = config_.n_heads;
    Mat<T> dz = Mat<T>::Zero(1, config_.d_model);

    if (d_outputs.size() > 0) {
        require(pass.has_decoder, ErrorCode::Usage, "output gradient given for an encoder-only pass");
        require(d_outputs.rows() == pass.outputs.rows() && d_outputs.cols() == pass.outputs.cols(), ErrorCode::Usage,
                "output gradient shape does not match the forward pass");
        Mat<T> dx = affine_backward<T>(pass.decoder_out, params_.output_w, d_outputs, grads.output_w, grads.output_b);
        Mat<T> dmemory = Mat<T>::Zero(pass.memory.rows(), pass.memory.cols());
        for (std::size_t l = params_.decoder.size(); l-- > 0;) {
            const auto& p = params_.decoder[l];
            const auto& c = pass.decoder[l];
            auto& g = grads.decoder[l];
            const Mat<T> dr3 = layer_norm_backward<T>(dx, p.ln3_gain, c.ln3, g.ln3_gain, g.ln3_bias);
            const Mat<T> db = dr3 + ffn_backward<T>(apply_dropout<T>(dr3, c.drop_ffn), p.ffn, c.ffn, g.ffn);
            const Mat<T> dr2 = layer_norm_backward<T>(db, p.ln2_gain, c.ln2, g.ln2_gain, g.ln2_bias);
            auto gc = mha_backward<T>(apply_dropout<T>(dr2, c.drop_cross), p.cross_attention, heads, alpha,
                                      c.cross_attention, g.cross_attention);
            const Mat<T> da = dr2 + gc.dq;
            dmemory += gc.dk + gc.dv;
            const Mat<T> dr1 = layer_norm_backward<T>(da, p.ln1_gain, c.ln1, g.ln1_gain, g.ln1_bias);
            auto gs = mha_backward<T>(apply_dropout<T>(dr1, c.drop_self), p.self_attention, heads, alpha,
                                      c.self_attention, g.self_attention);
            dx = dr1 + gs.dq + gs.dk + gs.dv;
        }
        embed_backward(pass.decoder_input, apply_dropout<T>(dx, pass.decoder_embed_drop), grads);
        if (config_.expand == ExpandMode::Affine) {
            const Eigen::Map<const Mat<T>> dflat(dmemory.data(), 1, dmemory.size());
            dz += affine_backward<T>(pass.z, params_.expand_w, Mat<T>(dflat), grads.expand_w, grads.expand_b);
        } else {
            dz += dmemory.colwise().sum();
        }
    }
    if (d_class_logits.size() > 0) {
        dz += affine_backward<T>(pass.z, params_.classifier_w, d_class_logits, grads.classifier_w, grads.classifier_b);
    }
    if (d_z != nullptr) {
        dz += *d_z;
    }
    Mat<T> dh = bottleneck_backward<T>(dz, pass.bottleneck, pass.bottleneck_cache, params_.bottleneck_key,
                                       params_.bottleneck_value, grads.bottleneck_key, grads.bottleneck_bias,
                                       grads.bottleneck_value);
    for (std::size_t l = params_.encoder.size(); l-- > 0;) {
        const auto& p = params_.encoder[l];
        const auto& c = pass.encoder[l];
        auto& g = grads.encoder[l];
        const Mat<T> dr2 = layer_norm_backward<T>(dh, p.ln2_gain, c.ln2, g.ln2_gain, g.ln2_bias);
        const Mat<T> da = dr2 + ffn_backward<T>(apply_dropout<T>(dr2, c.drop_ffn), p.ffn, c.ffn, g.ffn);
        const Mat<T> dr1 = layer_norm_backward<T>(da, p.ln1_gain, c.ln1, g.ln1_gain, g.ln1_bias);
        auto gi = mha_backward<T>(apply_dropout<T>(dr1, c.drop_attention), p.attention, heads, alpha, c.attention,
                                  g.attention);
        dh = dr1 + gi.dq + gi.dk + gi.dv;
    }
    embed_backward(pass.encoder_input, apply_dropout<T>(dh, pass.encoder_embed_drop), grads);
}

template <class T>
SequenceInput Transformer<T>::autoregress(const Mat<T>& z, int max_steps) const {
    const Mat<T> memory = expand(z);
    SequenceInput seq;
    if (config_.mode == InputMode::Tokenized) {
        seq.tokens.push_back(token::kSos);
        for (int step = 0; step < max_steps && static_cast<int>(seq.tokens.size()) < config_.max_len; ++step) {
            const Mat<T> out = decode(memory, seq);
            const Mat<T> logits = output_head(out.bottomRows(1));
            Eigen::Index best = 0;
            logits.row(0).maxCoeff(&best);
            seq.tokens.push_back(static_cast<int>(best));
            if (best == token::kEos) {
                break;
            }
        }
        return seq;
    }
    SequenceInput generated;
    seq.rows.push_back(kStroke5Start);
    for (int step = 0; step < max_steps && static_cast<int>(seq.rows.size()) < config_.max_len; ++step) {
        const Mat<T> out = decode(memory, seq);
        const Mat<T> o = output_head(out.bottomRows(1));
        Eigen::Index pen = 0;
        o.row(0).segment(2, 3).maxCoeff(&pen);
        Stroke5Row row{static_cast<double>(o(0, 0)), static_cast<double>(o(0, 1)), pen == 0 ? 1.0 : 0.0,
                       pen == 1 ? 1.0 : 0.0, pen == 2 ? 1.0 : 0.0};
        if (pen == 2) {
            row.dx = 0.0;
            row.dy = 0.0;
        }
        seq.rows.push_back(row);
        generated.rows.push_back(row);
        if (pen == 2) {
            break;
        }
    }
    return generated;
}

template class Transformer<float>;
template class Transformer<double>;

} // namespace sketchformer
