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

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sketchformer/sketch.hpp"
#include "sketchformer/tensor.hpp"

namespace sketchformer {

class TensorArchive;

// Four 3x3 "same" convolutions with ReLU; the first three are followed by
// 2x2 max pooling, the last by global average pooling. A linear classifier
// sits on top for pretraining.
inline constexpr int kRasterSide = 64;
inline constexpr std::array<int, 4> kRasterChannels = {8, 16, 32, 64};
inline constexpr int kRasterFeatureDim = kRasterChannels.back();

template <class T>
struct RasterParams {
    std::array<Mat<T>, 4> conv_w; // (9 * c_in) x c_out
    std::array<Mat<T>, 4> conv_b; // 1 x c_out
    Mat<T> cls_w, cls_b;          // feature x classes

    template <class F>
    void visit(F&& f) {
        for (std::size_t i = 0; i < 4; ++i) {
            f("conv" + std::to_string(i) + ".w", conv_w[i]);
            f("conv" + std::to_string(i) + ".b", conv_b[i]);
        }
        f(std::string("cls.w"), cls_w);
        f(std::string("cls.b"), cls_b);
    }
    template <class F>
    void visit(F&& f) const {
        const_cast<RasterParams*>(this)->visit([&](const std::string& n, Mat<T>& m) { f(n, static_cast<const Mat<T>&>(m)); });
    }
    RasterParams zeros_like() const;
};

template <class T>
RasterParams<T> init_raster_params(int n_classes, std::uint64_t seed);

template <class T>
struct ConvCache {
    int side = 0; // input side
    Mat<T> cols;  // im2col of the input
    Mat<T> act;   // post-ReLU output before pooling
    std::vector<int> pool_arg; // argmax source row per pooled row/channel
};

template <class T>
struct RasterPass {
    std::array<ConvCache<T>, 4> layers;
    Mat<T> feature; // 1 x kRasterFeatureDim
    Mat<T> logits;  // 1 x classes
};

/// Image as a (side * side) x 1 matrix, row-major pixels.
template <class T>
Mat<T> image_matrix(const RasterImage& image);

template <class T>
RasterPass<T> raster_forward(const RasterParams<T>& params, const Mat<T>& image, bool record);

/// Accumulates gradients from d feature and d logits (either may be empty).
template <class T>
void raster_backward(const RasterParams<T>& params, const RasterPass<T>& pass, const Mat<T>& d_feature,
                     const Mat<T>& d_logits, RasterParams<T>& grads);

struct RasterTrainConfig {
    int steps = 600;
    int batch_size = 16;
    double learning_rate = 2e-3;
    std::uint64_t seed = 7;
};

struct RasterTrainReport {
    double final_loss = 0;
    double train_accuracy = 0;
};

/// The frozen stand-in for the pretrained image network P(.).
class RasterEncoder {
public:
    RasterEncoder() = default;
    explicit RasterEncoder(RasterParams<float> params) : params_(std::move(params)) {}

    const RasterParams<float>& params() const { return params_; }
    int n_classes() const { return static_cast<int>(params_.cls_w.cols()); }

    /// Rasterizes at the encoder's resolution.
    static RasterImage render(const Sketch& sketch);
    MatF features(const RasterImage& image) const;
    int predict(const RasterImage& image) const;

    RasterTrainReport pretrain(std::span<const RasterImage> images, std::span<const int> labels,
                               const RasterTrainConfig& config);

    void write(TensorArchive& archive, const std::string& prefix) const;
    static RasterEncoder read(const TensorArchive& archive, const std::string& prefix);

    friend bool operator==(const RasterEncoder& a, const RasterEncoder& b);

private:
    RasterParams<float> params_;
};

} // namespace sketchformer
