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

#include "sketchformer/layers.hpp"

#include <cmath>
#include <limits>

#include "sketchformer/error.hpp"

namespace sketchformer {

template <class T>
Mat<T> positional_encoding(int length, int d_model) {
    Mat<T> pe(length, d_model);
    for (int pos = 0; pos < length; ++pos) {
        for (int i = 0; i < d_model; i += 2) {
            const double freq = std::pow(10000.0, -static_cast<double>(i) / d_model);
            pe(pos, i) = static_cast<T>(std::sin(pos * freq));
            if (i + 1 < d_model) {
                pe(pos, i + 1) = static_cast<T>(std::cos(pos * freq));
            }
        }
    }
    return pe;
}

template <class T>
Mat<T> affine(const Mat<T>& x, const Mat<T>& w, const Mat<T>& b) {
    Mat<T> y = x * w;
    y.rowwise() += b.row(0);
    return y;
}

template <class T>
Mat<T> affine_backward(const Mat<T>& x, const Mat<T>& w, const Mat<T>& dy, Mat<T>& dw, Mat<T>& db) {
    dw.noalias() += x.transpose() * dy;
    db += dy.colwise().sum();
    return dy * w.transpose();
}

// ---------------------------------------------------------------------------

template <class T>
Mat<T> layer_norm(const Mat<T>& x, const Mat<T>& gain, const Mat<T>& bias, LayerNormCache<T>* cache) {
    const auto n = x.cols();
    Mat<T> xhat(x.rows(), n);
    Mat<T> inv_std(x.rows(), 1);
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const T mean = x.row(r).mean();
        const auto centered = (x.row(r).array() - mean).matrix();
        const T var = centered.squaredNorm() / static_cast<T>(n);
        const T inv = T(1) / std::sqrt(var + static_cast<T>(kLayerNormEps));
        xhat.row(r) = centered * inv;
        inv_std(r, 0) = inv;
    }
    Mat<T> y = xhat.array().rowwise() * gain.row(0).array();
    y.rowwise() += bias.row(0);
    if (cache != nullptr) {
        cache->xhat = std::move(xhat);
        cache->inv_std = std::move(inv_std);
    }
    return y;
}

template <class T>
Mat<T> layer_norm_backward(const Mat<T>& dy, const Mat<T>& gain, const LayerNormCache<T>& cache, Mat<T>& dgain,
                           Mat<T>& dbias) {
    const T n = static_cast<T>(dy.cols());
    dgain += dy.cwiseProduct(cache.xhat).colwise().sum();
    dbias += dy.colwise().sum();
    const Mat<T> dxhat = dy.array().rowwise() * gain.row(0).array();
    Mat<T> dx(dy.rows(), dy.cols());
    for (Eigen::Index r = 0; r < dy.rows(); ++r) {
        const T sum_d = dxhat.row(r).sum();
        const T sum_dx = dxhat.row(r).dot(cache.xhat.row(r));
        dx.row(r) = (cache.inv_std(r, 0) / n) *
                    (n * dxhat.row(r).array() - sum_d - cache.xhat.row(r).array() * sum_dx).matrix();
    }
    return dx;
}

// ---------------------------------------------------------------------------

AttentionMask AttentionMask::none(int queries, int keys) {
    AttentionMask m;
    m.kind = MaskKind::None;
    m.keep.setOnes(queries, keys);
    return m;
}

AttentionMask AttentionMask::padding(int queries, const std::vector<bool>& key_valid) {
    AttentionMask m;
    m.kind = MaskKind::Padding;
    m.keep.resize(queries, static_cast<Eigen::Index>(key_valid.size()));
    for (int i = 0; i < queries; ++i) {
        for (std::size_t j = 0; j < key_valid.size(); ++j) {
            m.keep(i, static_cast<Eigen::Index>(j)) = key_valid[j] ? 1 : 0;
        }
    }
    return m;
}

AttentionMask AttentionMask::causal(int length) {
    AttentionMask m;
    m.kind = MaskKind::Causal;
    m.keep.setZero(length, length);
    for (int i = 0; i < length; ++i) {
        for (int j = 0; j <= i; ++j) {
            m.keep(i, j) = 1;
        }
    }
    return m;
}

template <class T>
Mat<T> masked_softmax(const Mat<T>& scores, const AttentionMask& mask) {
    require(mask.queries() == scores.rows() && mask.keys() == scores.cols(), ErrorCode::Config,
            "attention mask shape does not match the score matrix");
    Mat<T> out = Mat<T>::Zero(scores.rows(), scores.cols());
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
        T max_score = -std::numeric_limits<T>::infinity();
        for (Eigen::Index j = 0; j < scores.cols(); ++j) {
            if (mask.keep(i, j)) {
                max_score = std::max(max_score, scores(i, j));
            }
        }
        if (max_score == -std::numeric_limits<T>::infinity()) {
            continue;
        }
        T total = 0;
        for (Eigen::Index j = 0; j < scores.cols(); ++j) {
            if (mask.keep(i, j)) {
                const T e = std::exp(scores(i, j) - max_score);
                out(i, j) = e;
                total += e;
            }
        }
        out.row(i) /= total;
    }
    return out;
}

template <class T>
Mat<T> sha(const Mat<T>& q, const Mat<T>& k, const Mat<T>& v, T alpha, const AttentionMask& mask, Mat<T>* probs) {
    require(q.cols() == k.cols(), ErrorCode::Config, "query and key widths differ");
    require(k.rows() == v.rows(), ErrorCode::Config, "key and value lengths differ");
    Mat<T> p = masked_softmax<T>(alpha * (q * k.transpose()), mask);
    Mat<T> out = p * v;
    if (probs != nullptr) {
        *probs = std::move(p);
    }
    return out;
}

template <class T>
Mat<T> mha(const Mat<T>& q, const Mat<T>& k, const Mat<T>& v, const AttentionParams<T>& p, int n_heads, T alpha,
           const AttentionMask& mask, AttentionCache<T>* cache) {
    const auto d = p.wq.cols();
    require(n_heads > 0 && d % n_heads == 0, ErrorCode::Config, "model width must divide into heads");
    require(q.cols() == p.wq.rows() && k.cols() == p.wk.rows() && v.cols() == p.wv.rows(), ErrorCode::Config,
            "attention input width does not match its projections");
    require(k.rows() == v.rows(), ErrorCode::Config, "key and value lengths differ");
    const auto dk = d / n_heads;
    Mat<T> qp = q * p.wq;
    Mat<T> kp = k * p.wk;
    Mat<T> vp = v * p.wv;
    Mat<T> concat(q.rows(), d);
    std::vector<Mat<T>> probs(static_cast<std::size_t>(n_heads));
    for (int h = 0; h < n_heads; ++h) {
        concat.middleCols(h * dk, dk) =
            sha<T>(qp.middleCols(h * dk, dk), kp.middleCols(h * dk, dk), vp.middleCols(h * dk, dk), alpha, mask,
                   &probs[static_cast<std::size_t>(h)]);
    }
    Mat<T> out = concat * p.wo;
    if (cache != nullptr) {
        cache->q_in = q;
        cache->k_in = k;
        cache->v_in = v;
        cache->q = std::move(qp);
        cache->k = std::move(kp);
        cache->v = std::move(vp);
        cache->probs = std::move(probs);
        cache->concat = std::move(concat);
    }
    return out;
}

template <class T>
AttentionInputGrads<T> mha_backward(const Mat<T>& dout, const AttentionParams<T>& p, int n_heads, T alpha,
                                    const AttentionCache<T>& c, AttentionParams<T>& grads) {
    const auto d = p.wq.cols();
    const auto dk = d / n_heads;
    grads.wo.noalias() += c.concat.transpose() * dout;
    const Mat<T> dconcat = dout * p.wo.transpose();
    Mat<T> dqp(c.q.rows(), d);
    Mat<T> dkp(c.k.rows(), d);
    Mat<T> dvp(c.v.rows(), d);
    for (int h = 0; h < n_heads; ++h) {
        const auto& prob = c.probs[static_cast<std::size_t>(h)];
        const auto dhead = dconcat.middleCols(h * dk, dk);
        const Mat<T> dprob = dhead * c.v.middleCols(h * dk, dk).transpose();
        dvp.middleCols(h * dk, dk).noalias() = prob.transpose() * dhead;
        const Mat<T> row_dot = dprob.cwiseProduct(prob).rowwise().sum();
        Mat<T> dscore = prob.cwiseProduct((dprob.colwise() - row_dot.col(0)));
        dscore *= alpha;
        dqp.middleCols(h * dk, dk).noalias() = dscore * c.k.middleCols(h * dk, dk);
        dkp.middleCols(h * dk, dk).noalias() = dscore.transpose() * c.q.middleCols(h * dk, dk);
    }
    grads.wq.noalias() += c.q_in.transpose() * dqp;
    grads.wk.noalias() += c.k_in.transpose() * dkp;
    grads.wv.noalias() += c.v_in.transpose() * dvp;
    AttentionInputGrads<T> out;
    out.dq = dqp * p.wq.transpose();
    out.dk = dkp * p.wk.transpose();
    out.dv = dvp * p.wv.transpose();
    return out;
}

// ---------------------------------------------------------------------------

template <class T>
Mat<T> ffn(const Mat<T>& x, const FfnParams<T>& p, FfnCache<T>* cache) {
    Mat<T> hidden = affine<T>(x, p.w1, p.b1).cwiseMax(T(0));
    Mat<T> y = affine<T>(hidden, p.w2, p.b2);
    if (cache != nullptr) {
        cache->x = x;
        cache->hidden = std::move(hidden);
    }
    return y;
}

template <class T>
Mat<T> ffn_backward(const Mat<T>& dy, const FfnParams<T>& p, const FfnCache<T>& c, FfnParams<T>& grads) {
    Mat<T> dhidden = affine_backward<T>(c.hidden, p.w2, dy, grads.w2, grads.b2);
    dhidden = (c.hidden.array() > T(0)).select(dhidden, T(0));
    return affine_backward<T>(c.x, p.w1, dhidden, grads.w1, grads.b1);
}

template <class T>
Mat<T> DropoutSource::mask(Eigen::Index rows, Eigen::Index cols) {
    if (rate_ <= 0.0) {
        return {};
    }
    std::bernoulli_distribution keep(1.0 - rate_);
    const T scale = static_cast<T>(1.0 / (1.0 - rate_));
    Mat<T> m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        m.data()[i] = keep(rng_) ? scale : T(0);
    }
    return m;
}

#define SKETCHFORMER_INSTANTIATE_LAYERS(T)                                                                     \
    template Mat<T> positional_encoding<T>(int, int);                                                          \
    template Mat<T> affine<T>(const Mat<T>&, const Mat<T>&, const Mat<T>&);                                    \
    template Mat<T> affine_backward<T>(const Mat<T>&, const Mat<T>&, const Mat<T>&, Mat<T>&, Mat<T>&);         \
    template Mat<T> layer_norm<T>(const Mat<T>&, const Mat<T>&, const Mat<T>&, LayerNormCache<T>*);            \
    template Mat<T> layer_norm_backward<T>(const Mat<T>&, const Mat<T>&, const LayerNormCache<T>&, Mat<T>&,    \
                                           Mat<T>&);                                                           \
    template Mat<T> masked_softmax<T>(const Mat<T>&, const AttentionMask&);                                    \
    template Mat<T> sha<T>(const Mat<T>&, const Mat<T>&, const Mat<T>&, T, const AttentionMask&, Mat<T>*);     \
    template Mat<T> mha<T>(const Mat<T>&, const Mat<T>&, const Mat<T>&, const AttentionParams<T>&, int, T,     \
                           const AttentionMask&, AttentionCache<T>*);                                          \
    template AttentionInputGrads<T> mha_backward<T>(const Mat<T>&, const AttentionParams<T>&, int, T,          \
                                                    const AttentionCache<T>&, AttentionParams<T>&);            \
    template Mat<T> ffn<T>(const Mat<T>&, const FfnParams<T>&, FfnCache<T>*);                                  \
    template Mat<T> ffn_backward<T>(const Mat<T>&, const FfnParams<T>&, const FfnCache<T>&, FfnParams<T>&);    \
    template Mat<T> DropoutSource::mask<T>(Eigen::Index, Eigen::Index);

SKETCHFORMER_INSTANTIATE_LAYERS(float)
SKETCHFORMER_INSTANTIATE_LAYERS(double)

#undef SKETCHFORMER_INSTANTIATE_LAYERS

} // namespace sketchformer
