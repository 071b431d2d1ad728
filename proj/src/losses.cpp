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

#include "sketchformer/losses.hpp"

#include <cmath>

#include "sketchformer/error.hpp"
#include "sketchformer/tokenizer.hpp"

namespace sketchformer {

template <class T>
Mat<T> softmax_rows(const Mat<T>& logits) {
    Mat<T> out(logits.rows(), logits.cols());
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        const T top = logits.row(r).maxCoeff();
        out.row(r) = (logits.row(r).array() - top).exp();
        out.row(r) /= out.row(r).sum();
    }
    return out;
}

namespace {

// log-sum-exp of one row, shifted for stability
template <class T>
T log_sum_exp(const Eigen::Ref<const Eigen::Matrix<T, 1, Eigen::Dynamic>>& row) {
    const T top = row.maxCoeff();
    return top + std::log((row.array() - top).exp().sum());
}

template <class T>
int argmax(const Eigen::Ref<const Eigen::Matrix<T, 1, Eigen::Dynamic>>& row) {
    Eigen::Index best = 0;
    row.maxCoeff(&best);
    return static_cast<int>(best);
}

int pen_class(const Stroke5Row& r) {
    if (r.p3 > 0.5) {
        return 2;
    }
    return r.p2 > 0.5 ? 1 : 0;
}

} // namespace

template <class T>
TokenLoss<T> token_cross_entropy(const Mat<T>& logits, std::span<const int> targets) {
    require(static_cast<std::size_t>(logits.rows()) == targets.size(), ErrorCode::InvalidArgument,
            "logit rows and targets are not aligned");
    TokenLoss<T> out;
    out.grad = Mat<T>::Zero(logits.rows(), logits.cols());
    for (std::size_t i = 0; i < targets.size(); ++i) {
        if (targets[i] != token::kPad) {
            ++out.counted;
        }
    }
    require(out.counted > 0, ErrorCode::InvalidArgument, "every target position is PAD");
    const T inv = T(1) / static_cast<T>(out.counted);
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const int t = targets[i];
        if (t == token::kPad) {
            continue;
        }
        require(t >= 0 && t < logits.cols(), ErrorCode::InvalidArgument, "target token outside the vocabulary");
        const auto r = static_cast<Eigen::Index>(i);
        const T lse = log_sum_exp<T>(logits.row(r));
        out.loss += (lse - logits(r, t)) * inv;
        out.grad.row(r) = (logits.row(r).array() - lse).exp() * inv;
        out.grad(r, t) -= inv;
        if (argmax<T>(logits.row(r)) == t) {
            ++out.correct;
        }
    }
    return out;
}

template <class T>
ContinuousLoss<T> continuous_loss(const Mat<T>& outputs, std::span<const Stroke5Row> targets) {
    require(outputs.cols() == 5, ErrorCode::InvalidArgument, "continuous outputs must have 5 columns");
    Stroke5Seq seq{std::vector<Stroke5Row>(targets.begin(), targets.end())};
    const auto n = static_cast<Eigen::Index>(seq.content_length());
    require(n > 0 && outputs.rows() >= n, ErrorCode::InvalidArgument, "outputs shorter than the target sequence");
    ContinuousLoss<T> out;
    out.grad = Mat<T>::Zero(outputs.rows(), 5);
    out.counted = static_cast<int>(n);
    const T inv = T(1) / static_cast<T>(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& r = targets[static_cast<std::size_t>(i)];
        const T ex = outputs(i, 0) - static_cast<T>(r.dx);
        const T ey = outputs(i, 1) - static_cast<T>(r.dy);
        out.offset += (ex * ex + ey * ey) * inv;
        out.grad(i, 0) = 2 * ex * inv;
        out.grad(i, 1) = 2 * ey * inv;

        const int cls = pen_class(r);
        const Eigen::Matrix<T, 1, Eigen::Dynamic> pen = outputs.block(i, 2, 1, 3);
        const T lse = log_sum_exp<T>(pen);
        out.pen += (lse - pen(cls)) * inv;
        out.grad.block(i, 2, 1, 3) = (pen.array() - lse).exp() * inv;
        out.grad(i, 2 + cls) -= inv;
        if (argmax<T>(pen) == cls) {
            ++out.pen_correct;
        }
    }
    out.total = out.offset + out.pen;
    return out;
}

template <class T>
ClassLoss<T> class_cross_entropy(const Mat<T>& logits, int label) {
    require(logits.rows() == 1, ErrorCode::InvalidArgument, "class logits must be a single row");
    require(label >= 0 && label < logits.cols(), ErrorCode::InvalidArgument,
            "label " + std::to_string(label) + " outside [0, " + std::to_string(logits.cols()) + ")");
    ClassLoss<T> out;
    const T lse = log_sum_exp<T>(logits.row(0));
    out.loss = lse - logits(0, label);
    out.grad = (logits.array() - lse).exp();
    out.grad(0, label) -= 1;
    out.predicted = argmax<T>(logits.row(0));
    return out;
}

#define SF_INSTANTIATE(T)                                                                            \
    template Mat<T> softmax_rows<T>(const Mat<T>&);                                                  \
    template TokenLoss<T> token_cross_entropy<T>(const Mat<T>&, std::span<const int>);               \
    template ContinuousLoss<T> continuous_loss<T>(const Mat<T>&, std::span<const Stroke5Row>);       \
    template ClassLoss<T> class_cross_entropy<T>(const Mat<T>&, int);
SF_INSTANTIATE(float)
SF_INSTANTIATE(double)
#undef SF_INSTANTIATE

} // namespace sketchformer
