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

#include "sketchformer/raster_encoder.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "sketchformer/container.hpp"
#include "sketchformer/error.hpp"
#include "sketchformer/losses.hpp"
#include "sketchformer/random.hpp"

namespace sketchformer {

namespace {

// Rows of the input are pixels (row-major over a side x side map), columns
// channels. The im2col row for pixel p lists its 3x3 neighbourhood, channel
// fastest, with zeros beyond the border.
template <class T>
Mat<T> im2col(const Mat<T>& x, int side) {
    const auto c = x.cols();
    Mat<T> cols = Mat<T>::Zero(static_cast<Eigen::Index>(side) * side, 9 * c);
    for (int r = 0; r < side; ++r) {
        for (int q = 0; q < side; ++q) {
            const Eigen::Index row = static_cast<Eigen::Index>(r) * side + q;
            for (int k = 0; k < 9; ++k) {
                const int rr = r + k / 3 - 1, qq = q + k % 3 - 1;
                if (rr < 0 || rr >= side || qq < 0 || qq >= side) {
                    continue;
                }
                cols.block(row, k * c, 1, c) = x.row(static_cast<Eigen::Index>(rr) * side + qq);
            }
        }
    }
    return cols;
}

template <class T>
Mat<T> col2im(const Mat<T>& dcols, int side, Eigen::Index c) {
    Mat<T> dx = Mat<T>::Zero(static_cast<Eigen::Index>(side) * side, c);
    for (int r = 0; r < side; ++r) {
        for (int q = 0; q < side; ++q) {
            const Eigen::Index row = static_cast<Eigen::Index>(r) * side + q;
            for (int k = 0; k < 9; ++k) {
                const int rr = r + k / 3 - 1, qq = q + k % 3 - 1;
                if (rr < 0 || rr >= side || qq < 0 || qq >= side) {
                    continue;
                }
                dx.row(static_cast<Eigen::Index>(rr) * side + qq) += dcols.block(row, k * c, 1, c);
            }
        }
    }
    return dx;
}

template <class T>
Mat<T> max_pool(const Mat<T>& x, int side, std::vector<int>* arg) {
    const int half = side / 2;
    const auto c = x.cols();
    Mat<T> out(static_cast<Eigen::Index>(half) * half, c);
    if (arg != nullptr) {
        arg->assign(static_cast<std::size_t>(out.size()), 0);
    }
    for (int r = 0; r < half; ++r) {
        for (int q = 0; q < half; ++q) {
            const Eigen::Index o = static_cast<Eigen::Index>(r) * half + q;
            for (Eigen::Index ch = 0; ch < c; ++ch) {
                int best = (2 * r) * side + 2 * q;
                for (int k = 1; k < 4; ++k) {
                    const int src = (2 * r + k / 2) * side + 2 * q + k % 2;
                    if (x(src, ch) > x(best, ch)) {
                        best = src;
                    }
                }
                out(o, ch) = x(best, ch);
                if (arg != nullptr) {
                    (*arg)[static_cast<std::size_t>(o * c + ch)] = best;
                }
            }
        }
    }
    return out;
}

} // namespace

template <class T>
RasterParams<T> RasterParams<T>::zeros_like() const {
    RasterParams<T> out = *this;
    out.visit([](const std::string&, Mat<T>& m) { m.setZero(); });
    return out;
}

template <class T>
RasterParams<T> init_raster_params(int n_classes, std::uint64_t seed) {
    require(n_classes >= 1, ErrorCode::Config, "raster encoder needs at least one class");
    RasterParams<T> p;
    std::mt19937_64 rng(seed);
    int c_in = 1;
    for (std::size_t i = 0; i < 4; ++i) {
        const int c_out = kRasterChannels[i];
        // He-uniform for the ReLU stack
        std::uniform_real_distribution<double> u(-std::sqrt(6.0 / (9.0 * c_in)), std::sqrt(6.0 / (9.0 * c_in)));
        p.conv_w[i].resize(9 * c_in, c_out);
        for (Eigen::Index k = 0; k < p.conv_w[i].size(); ++k) {
            p.conv_w[i].data()[k] = static_cast<T>(static_cast<float>(u(rng)));
        }
        p.conv_b[i] = Mat<T>::Zero(1, c_out);
        c_in = c_out;
    }
    std::uniform_real_distribution<double> u(-std::sqrt(6.0 / (c_in + n_classes)), std::sqrt(6.0 / (c_in + n_classes)));
    p.cls_w.resize(c_in, n_classes);
    for (Eigen::Index k = 0; k < p.cls_w.size(); ++k) {
        p.cls_w.data()[k] = static_cast<T>(static_cast<float>(u(rng)));
    }
    p.cls_b = Mat<T>::Zero(1, n_classes);
    return p;
}

template <class T>
Mat<T> image_matrix(const RasterImage& image) {
    require(image.width == kRasterSide && image.height == kRasterSide, ErrorCode::InvalidArgument,
            "raster encoder expects " + std::to_string(kRasterSide) + "x" + std::to_string(kRasterSide) +
                " images, got " + std::to_string(image.width) + "x" + std::to_string(image.height));
    Mat<T> x(static_cast<Eigen::Index>(image.pixels.size()), 1);
    for (std::size_t i = 0; i < image.pixels.size(); ++i) {
        x(static_cast<Eigen::Index>(i), 0) = static_cast<T>(image.pixels[i]);
    }
    return x;
}

template <class T>
RasterPass<T> raster_forward(const RasterParams<T>& p, const Mat<T>& image, bool record) {
    RasterPass<T> pass;
    Mat<T> x = image;
    int side = kRasterSide;
    for (std::size_t i = 0; i < 4; ++i) {
        Mat<T> cols = im2col<T>(x, side);
        Mat<T> act = cols * p.conv_w[i];
        act.rowwise() += p.conv_b[i].row(0);
        act = act.cwiseMax(T(0));
        auto& c = pass.layers[i];
        if (i < 3) {
            x = max_pool<T>(act, side, record ? &c.pool_arg : nullptr);
        } else {
            pass.feature = act.colwise().mean();
        }
        if (record) {
            c.side = side;
            c.cols = std::move(cols);
            c.act = std::move(act);
        }
        side /= 2;
    }
    pass.logits = pass.feature * p.cls_w;
    pass.logits += p.cls_b;
    return pass;
}

template <class T>
void raster_backward(const RasterParams<T>& p, const RasterPass<T>& pass, const Mat<T>& d_feature,
                     const Mat<T>& d_logits, RasterParams<T>& g) {
    require(pass.layers[0].cols.size() > 0, ErrorCode::Usage, "raster backward needs a recorded pass");
    Mat<T> df = Mat<T>::Zero(1, kRasterFeatureDim);
    if (d_feature.size() > 0) {
        df += d_feature;
    }
    if (d_logits.size() > 0) {
        g.cls_w.noalias() += pass.feature.transpose() * d_logits;
        g.cls_b += d_logits;
        df.noalias() += d_logits * p.cls_w.transpose();
    }
    Mat<T> dx; // gradient w.r.t. the current layer's pooled output
    for (std::size_t i = 4; i-- > 0;) {
        const auto& c = pass.layers[i];
        const Eigen::Index pixels = static_cast<Eigen::Index>(c.side) * c.side;
        Mat<T> dact;
        if (i == 3) {
            dact = df.replicate(pixels, 1) / static_cast<T>(pixels);
        } else {
            dact = Mat<T>::Zero(c.act.rows(), c.act.cols());
            const auto ch = c.act.cols();
            for (Eigen::Index o = 0; o < dx.rows(); ++o) {
                for (Eigen::Index k = 0; k < ch; ++k) {
                    dact(c.pool_arg[static_cast<std::size_t>(o * ch + k)], k) += dx(o, k);
                }
            }
        }
        dact = dact.cwiseProduct((c.act.array() > T(0)).template cast<T>().matrix());
        g.conv_w[i].noalias() += c.cols.transpose() * dact;
        g.conv_b[i] += dact.colwise().sum();
        if (i > 0) {
            const Mat<T> dcols = dact * p.conv_w[i].transpose();
            dx = col2im<T>(dcols, c.side, p.conv_w[i].rows() / 9);
        }
    }
}

#define SF_INSTANTIATE(T)                                                                                 \
    template struct RasterParams<T>;                                                                      \
    template RasterParams<T> init_raster_params<T>(int, std::uint64_t);                                   \
    template Mat<T> image_matrix<T>(const RasterImage&);                                                  \
    template RasterPass<T> raster_forward<T>(const RasterParams<T>&, const Mat<T>&, bool);                \
    template void raster_backward<T>(const RasterParams<T>&, const RasterPass<T>&, const Mat<T>&,         \
                                     const Mat<T>&, RasterParams<T>&);
SF_INSTANTIATE(float)
SF_INSTANTIATE(double)
#undef SF_INSTANTIATE

// ---------------------------------------------------------------------------

RasterImage RasterEncoder::render(const Sketch& sketch) { return rasterize(sketch, kRasterSide, 1); }

MatF RasterEncoder::features(const RasterImage& image) const {
    return raster_forward<float>(params_, image_matrix<float>(image), false).feature;
}

int RasterEncoder::predict(const RasterImage& image) const {
    const auto pass = raster_forward<float>(params_, image_matrix<float>(image), false);
    Eigen::Index best = 0;
    pass.logits.row(0).maxCoeff(&best);
    return static_cast<int>(best);
}

RasterTrainReport RasterEncoder::pretrain(std::span<const RasterImage> images, std::span<const int> labels,
                                          const RasterTrainConfig& config) {
    require(images.size() == labels.size() && !images.empty(), ErrorCode::InvalidArgument,
            "raster pretraining needs one label per image");
    std::vector<MatF> inputs;
    inputs.reserve(images.size());
    for (const auto& im : images) {
        inputs.push_back(image_matrix<float>(im));
    }
    RasterParams<float> m = params_.zeros_like(), v = params_.zeros_like();
    std::mt19937_64 rng(config.seed);
    std::uniform_int_distribution<std::size_t> pick(0, images.size() - 1);
    RasterTrainReport report;
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    for (int step = 1; step <= config.steps; ++step) {
        RasterParams<float> g = params_.zeros_like();
        double loss = 0;
        const float scale = 1.0f / static_cast<float>(config.batch_size);
        for (int b = 0; b < config.batch_size; ++b) {
            const std::size_t i = pick(rng);
            const auto pass = raster_forward<float>(params_, inputs[i], true);
            const auto c = class_cross_entropy<float>(pass.logits, labels[i]);
            loss += c.loss / config.batch_size;
            raster_backward<float>(params_, pass, MatF(), MatF(c.grad * scale), g);
        }
        require(std::isfinite(loss), ErrorCode::NonFinite,
                "non-finite raster pretraining loss at step " + std::to_string(step));
        report.final_loss = loss;
        const double c1 = 1 - std::pow(b1, step), c2 = 1 - std::pow(b2, step);
        const float lr = static_cast<float>(config.learning_rate * std::sqrt(c2) / c1);
        std::vector<MatF*> pp, pm, pv, pg;
        params_.visit([&](const std::string&, MatF& x) { pp.push_back(&x); });
        m.visit([&](const std::string&, MatF& x) { pm.push_back(&x); });
        v.visit([&](const std::string&, MatF& x) { pv.push_back(&x); });
        g.visit([&](const std::string&, MatF& x) { pg.push_back(&x); });
        for (std::size_t k = 0; k < pp.size(); ++k) {
            *pm[k] = 0.9f * *pm[k] + 0.1f * *pg[k];
            *pv[k] = static_cast<float>(b2) * *pv[k] + static_cast<float>(1 - b2) * pg[k]->cwiseProduct(*pg[k]);
            pp[k]->array() -= lr * pm[k]->array() / (pv[k]->array().sqrt() + static_cast<float>(eps));
        }
    }
    std::size_t hits = 0;
    for (std::size_t i = 0; i < images.size(); ++i) {
        hits += predict(images[i]) == labels[i];
    }
    report.train_accuracy = static_cast<double>(hits) / static_cast<double>(images.size());
    return report;
}

void RasterEncoder::write(TensorArchive& a, const std::string& prefix) const {
    params_.visit([&](const std::string& name, const MatF& m) { a.add_tensor(prefix + name, m); });
}

RasterEncoder RasterEncoder::read(const TensorArchive& a, const std::string& prefix) {
    RasterParams<float> p;
    p.visit([&](const std::string& name, MatF& m) { m = a.tensor(prefix + name); });
    int c_in = 1;
    for (std::size_t i = 0; i < 4; ++i) {
        require(p.conv_w[i].rows() == 9 * c_in && p.conv_w[i].cols() == kRasterChannels[i], ErrorCode::Config,
                "raster encoder tensor conv" + std::to_string(i) + " has the wrong shape");
        c_in = kRasterChannels[i];
    }
    require(p.cls_w.rows() == kRasterFeatureDim, ErrorCode::Config, "raster classifier has the wrong shape");
    return RasterEncoder(std::move(p));
}

bool operator==(const RasterEncoder& a, const RasterEncoder& b) {
    std::vector<const MatF*> x, y;
    a.params_.visit([&](const std::string&, const MatF& m) { x.push_back(&m); });
    b.params_.visit([&](const std::string&, const MatF& m) { y.push_back(&m); });
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i]->rows() != y[i]->rows() || x[i]->cols() != y[i]->cols() || *x[i] != *y[i]) {
            return false;
        }
    }
    return true;
}

} // namespace sketchformer
