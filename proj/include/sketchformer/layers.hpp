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

// Network building blocks with explicit forward caches and backward passes.
// Instantiated for float (training and inference) and double (gradient
// checking).

#include <cstdint>
#include <random>
#include <vector>

#include "sketchformer/tensor.hpp"

namespace sketchformer {

/// Fixed sinusoidal table: even columns sin(pos / 10000^(2i/d)), odd columns cos.
template <class T>
Mat<T> positional_encoding(int length, int d_model);

// ---------------------------------------------------------------------------
// Affine map y = x W + b (b broadcast over rows)

template <class T>
Mat<T> affine(const Mat<T>& x, const Mat<T>& w, const Mat<T>& b);

/// Accumulates into dw/db; returns dx.
template <class T>
Mat<T> affine_backward(const Mat<T>& x, const Mat<T>& w, const Mat<T>& dy, Mat<T>& dw, Mat<T>& db);

// ---------------------------------------------------------------------------
// Row-wise layer normalization

template <class T>
struct LayerNormCache {
    Mat<T> xhat;
    Mat<T> inv_std; // rows x 1
};

inline constexpr double kLayerNormEps = 1e-5;

template <class T>
Mat<T> layer_norm(const Mat<T>& x, const Mat<T>& gain, const Mat<T>& bias, LayerNormCache<T>* cache);

template <class T>
Mat<T> layer_norm_backward(const Mat<T>& dy, const Mat<T>& gain, const LayerNormCache<T>& cache, Mat<T>& dgain,
                           Mat<T>& dbias);

// ---------------------------------------------------------------------------
// Attention

enum class MaskKind { None, Padding, Causal };

/// Boolean keep-matrix over (query, key) positions.
struct AttentionMask {
    MaskKind kind = MaskKind::None;
    Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> keep;

    static AttentionMask none(int queries, int keys);
    /// Every query may attend to the keys flagged valid.
    static AttentionMask padding(int queries, const std::vector<bool>& key_valid);
    /// Lower-triangular: query i sees keys 0..i.
    static AttentionMask causal(int length);

    int queries() const { return static_cast<int>(keep.rows()); }
    int keys() const { return static_cast<int>(keep.cols()); }
};

/// Softmax over kept entries of each row; a row with no kept entry is zero.
template <class T>
Mat<T> masked_softmax(const Mat<T>& scores, const AttentionMask& mask);

/// Single-head attention softmax(alpha q k^T) v. `probs` receives the weights.
template <class T>
Mat<T> sha(const Mat<T>& q, const Mat<T>& k, const Mat<T>& v, T alpha, const AttentionMask& mask,
           Mat<T>* probs = nullptr);

template <class T>
struct AttentionParams {
    Mat<T> wq, wk, wv; // d x d, head h uses columns [h*dk, (h+1)*dk)
    Mat<T> wo;         // d x d
};

template <class T>
struct AttentionCache {
    Mat<T> q_in, k_in, v_in;
    Mat<T> q, k, v;
    std::vector<Mat<T>> probs; // one Lq x Lk matrix per head
    Mat<T> concat;
};

template <class T>
Mat<T> mha(const Mat<T>& q, const Mat<T>& k, const Mat<T>& v, const AttentionParams<T>& p, int n_heads, T alpha,
           const AttentionMask& mask, AttentionCache<T>* cache);

template <class T>
struct AttentionInputGrads {
    Mat<T> dq, dk, dv;
};

template <class T>
AttentionInputGrads<T> mha_backward(const Mat<T>& dout, const AttentionParams<T>& p, int n_heads, T alpha,
                                    const AttentionCache<T>& cache, AttentionParams<T>& grads);

// ---------------------------------------------------------------------------
// Position-wise feed-forward: max(0, x W1 + b1) W2 + b2

template <class T>
struct FfnParams {
    Mat<T> w1, b1, w2, b2;
};

template <class T>
struct FfnCache {
    Mat<T> x;
    Mat<T> hidden; // after ReLU
};

template <class T>
Mat<T> ffn(const Mat<T>& x, const FfnParams<T>& p, FfnCache<T>* cache);

template <class T>
Mat<T> ffn_backward(const Mat<T>& dy, const FfnParams<T>& p, const FfnCache<T>& cache, FfnParams<T>& grads);

// ---------------------------------------------------------------------------
// Inverted dropout

class DropoutSource {
public:
    DropoutSource(double rate, std::uint64_t seed) : rate_(rate), rng_(seed) {}

    /// Scaled keep mask (entries 0 or 1/(1-rate)); empty when rate is 0.
    template <class T>
    Mat<T> mask(Eigen::Index rows, Eigen::Index cols);

private:
    double rate_;
    std::mt19937_64 rng_;
};

/// Applies a mask produced by DropoutSource (empty mask = identity).
template <class T>
Mat<T> apply_dropout(const Mat<T>& x, const Mat<T>& mask) {
    return mask.size() == 0 ? x : Mat<T>(x.cwiseProduct(mask));
}

} // namespace sketchformer
