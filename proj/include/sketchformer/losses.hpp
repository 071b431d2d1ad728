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

#include <span>
#include <vector>

#include "sketchformer/sketch.hpp"
#include "sketchformer/tensor.hpp"

namespace sketchformer {

template <class T>
struct TokenLoss {
    T loss = 0;
    Mat<T> grad;     // d loss / d logits
    int counted = 0; // non-PAD targets
    int correct = 0; // argmax hits among them
};

/// Mean cross-entropy over non-PAD targets (EOS included). Throws when every
/// target is PAD.
template <class T>
TokenLoss<T> token_cross_entropy(const Mat<T>& logits, std::span<const int> targets);

template <class T>
struct ContinuousLoss {
    T offset = 0; // mean squared L2 offset error per position
    T pen = 0;    // mean 3-way pen cross-entropy
    T total = 0;  // offset + pen
    Mat<T> grad;
    int counted = 0;
    int pen_correct = 0;
};

/// Rows of `outputs` are (dx, dy, pen logits x3). Target rows after the
/// end-of-sketch row are padding and ignored.
template <class T>
ContinuousLoss<T> continuous_loss(const Mat<T>& outputs, std::span<const Stroke5Row> targets);

template <class T>
struct ClassLoss {
    T loss = 0;
    Mat<T> grad; // 1 x n_classes
    int predicted = 0;
};

template <class T>
ClassLoss<T> class_cross_entropy(const Mat<T>& logits, int label);

/// Row-wise softmax.
template <class T>
Mat<T> softmax_rows(const Mat<T>& logits);

} // namespace sketchformer
