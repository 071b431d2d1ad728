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

#include "sketchformer/crossmodal.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "sketchformer/container.hpp"
#include "sketchformer/error.hpp"
#include "sketchformer/layers.hpp"
#include "sketchformer/losses.hpp"
#include "sketchformer/random.hpp"

namespace sketchformer {

namespace {

template <class T>
struct LayerRefs {
    std::array<const Mat<T>*, 4> w;
    std::array<const Mat<T>*, 4> b;
};

template <class T>
LayerRefs<T> layers_of(const JointHeads<T>& h, Branch branch) {
    if (branch == Branch::Vector) {
        return {{&h.v1_w, &h.v2_w, &h.s1_w, &h.s2_w}, {&h.v1_b, &h.v2_b, &h.s1_b, &h.s2_b}};
    }
    return {{&h.r1_w, &h.r2_w, &h.s1_w, &h.s2_w}, {&h.r1_b, &h.r2_b, &h.s1_b, &h.s2_b}};
}

template <class T>
std::array<std::pair<Mat<T>*, Mat<T>*>, 4> grads_of(JointHeads<T>& g, Branch branch) {
    if (branch == Branch::Vector) {
        return {{{&g.v1_w, &g.v1_b}, {&g.v2_w, &g.v2_b}, {&g.s1_w, &g.s1_b}, {&g.s2_w, &g.s2_b}}};
    }
    return {{{&g.r1_w, &g.r1_b}, {&g.r2_w, &g.r2_b}, {&g.s1_w, &g.s1_b}, {&g.s2_w, &g.s2_b}}};
}

template <class T>
void xavier(Mat<T>& m, int rows, int cols, std::mt19937_64& rng) {
    const double limit = std::sqrt(6.0 / (rows + cols));
    std::uniform_real_distribution<double> u(-limit, limit);
    m.resize(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        m.data()[i] = static_cast<T>(static_cast<float>(u(rng)));
    }
}

// Indices grouped by label, in corpus order.
std::map<int, std::vector<std::size_t>> by_label(const JointCorpus& c) {
    std::map<int, std::vector<std::size_t>> out;
    for (std::size_t i = 0; i < c.size(); ++i) {
        out[c.labels[i]].push_back(i);
    }
    return out;
}

template <class U>
const U& pick(const std::vector<U>& v, std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> d(0, v.size() - 1);
    return v[d(rng)];
}

} // namespace

template <class T>
JointHeads<T> JointHeads<T>::zeros_like() const {
    JointHeads<T> out = *this;
    out.visit([](const std::string&, Mat<T>& m) { m.setZero(); });
    return out;
}

template <class T>
JointHeads<T> init_joint_heads(int vector_dim, int raster_dim, int n_classes, std::uint64_t seed) {
    require(vector_dim > 0 && raster_dim > 0 && n_classes >= 1, ErrorCode::Config, "invalid joint head shape");
    std::mt19937_64 rng(seed);
    JointHeads<T> h;
    const int d = kJointDim;
    xavier(h.v1_w, vector_dim, d, rng);
    xavier(h.v2_w, d, d, rng);
    xavier(h.r1_w, raster_dim, d, rng);
    xavier(h.r2_w, d, d, rng);
    xavier(h.s1_w, d, d, rng);
    xavier(h.s2_w, d, d, rng);
    xavier(h.cls_w, d, n_classes, rng);
    for (Mat<T>* b : {&h.v1_b, &h.v2_b, &h.r1_b, &h.r2_b, &h.s1_b, &h.s2_b}) {
        *b = Mat<T>::Zero(1, d);
    }
    h.cls_b = Mat<T>::Zero(1, n_classes);
    return h;
}

template <class T>
HeadPass<T> head_forward(const JointHeads<T>& heads, Branch branch, const Mat<T>& feature) {
    const auto l = layers_of(heads, branch);
    require(feature.rows() == 1 && feature.cols() == l.w[0]->rows(), ErrorCode::InvalidArgument,
            "joint head input has the wrong width");
    HeadPass<T> p;
    p.input = feature;
    Mat<T> x = feature;
    for (std::size_t i = 0; i < 4; ++i) {
        Mat<T> y = affine<T>(x, *l.w[i], *l.b[i]);
        if (i < 3) {
            y = y.cwiseMax(T(0));
            p.hidden[i] = y;
        }
        x = std::move(y);
    }
    p.out = x;
    p.norm = x.norm();
    require(p.norm > T(0) && std::isfinite(static_cast<double>(p.norm)), ErrorCode::NonFinite,
            "joint embedding has zero or non-finite norm");
    p.u = x / p.norm;
    return p;
}

template <class T>
Mat<T> head_backward(const JointHeads<T>& heads, Branch branch, const HeadPass<T>& pass, const Mat<T>& d_u,
                     JointHeads<T>& grads) {
    const auto l = layers_of(heads, branch);
    auto g = grads_of(grads, branch);
    // u = out / |out|
    Mat<T> dx = (d_u - pass.u * pass.u.cwiseProduct(d_u).sum()) / pass.norm;
    for (std::size_t i = 4; i-- > 0;) {
        if (i < 3) {
            dx = dx.cwiseProduct((pass.hidden[i].array() > T(0)).template cast<T>().matrix());
        }
        const Mat<T>& in = i == 0 ? pass.input : pass.hidden[i - 1];
        dx = affine_backward<T>(in, *l.w[i], dx, *g[i].first, *g[i].second);
    }
    return dx;
}

template <class T>
TripletValue<T> triplet_loss(const Mat<T>& a, const Mat<T>& p, const Mat<T>& n, T margin) {
    require(a.size() == p.size() && a.size() == n.size(), ErrorCode::InvalidArgument,
            "triplet vectors differ in dimension");
    require(margin >= T(0), ErrorCode::InvalidArgument, "margin must be non-negative");
    TripletValue<T> v;
    const Mat<T> ap = a - p, an = a - n;
    v.d_pos = ap.norm();
    v.d_neg = an.norm();
    v.loss = std::max(T(0), v.d_pos - v.d_neg + margin);
    v.g_anchor = Mat<T>::Zero(a.rows(), a.cols());
    v.g_positive = v.g_anchor;
    v.g_negative = v.g_anchor;
    if (v.loss > T(0)) {
        if (v.d_pos > T(0)) {
            v.g_anchor += ap / v.d_pos;
            v.g_positive -= ap / v.d_pos;
        }
        if (v.d_neg > T(0)) {
            v.g_anchor -= an / v.d_neg;
            v.g_negative += an / v.d_neg;
        }
    }
    return v;
}

#define SF_INSTANTIATE(T)                                                                                     \
    template struct JointHeads<T>;                                                                            \
    template JointHeads<T> init_joint_heads<T>(int, int, int, std::uint64_t);                                 \
    template HeadPass<T> head_forward<T>(const JointHeads<T>&, Branch, const Mat<T>&);                        \
    template Mat<T> head_backward<T>(const JointHeads<T>&, Branch, const HeadPass<T>&, const Mat<T>&,          \
                                     JointHeads<T>&);                                                         \
    template TripletValue<T> triplet_loss<T>(const Mat<T>&, const Mat<T>&, const Mat<T>&, T);
SF_INSTANTIATE(float)
SF_INSTANTIATE(double)
#undef SF_INSTANTIATE

// ---------------------------------------------------------------------------

TripletBatch sample_triplets(const JointCorpus& corpus, int phase, std::size_t batch_size, std::mt19937_64& rng) {
    require(phase == 1 || phase == 2, ErrorCode::InvalidArgument, "phase must be 1 or 2");
    require(corpus.labels.size() == corpus.size(), ErrorCode::InvalidArgument, "corpus labels and ids differ");
    const auto groups = by_label(corpus);
    std::vector<int> labels;
    for (const auto& [label, members] : groups) {
        labels.push_back(label);
    }
    std::vector<int> eligible; // categories usable as the anchor's category
    if (phase == 1) {
        require(groups.size() >= 2, ErrorCode::InvalidArgument, "phase 1 needs at least 2 categories");
        eligible = labels;
    } else {
        for (const auto& [label, members] : groups) {
            if (members.size() >= 2) {
                eligible.push_back(label);
            }
        }
        require(!eligible.empty(), ErrorCode::InvalidArgument, "phase 2 needs a category with at least 2 instances");
    }
    TripletBatch batch;
    batch.phase = phase;
    for (std::size_t b = 0; b < batch_size; ++b) {
        const int label = pick(eligible, rng);
        const auto& members = groups.at(label);
        Triplet t;
        t.anchor = pick(members, rng);
        if (phase == 1) {
            t.positive = pick(members, rng);
            int other = label;
            while (other == label) {
                other = pick(labels, rng);
            }
            t.negative = pick(groups.at(other), rng);
        } else {
            t.positive = t.anchor;
            t.negative = t.anchor;
            while (t.negative == t.anchor) {
                t.negative = pick(members, rng);
            }
        }
        batch.items.push_back(t);
    }
    return batch;
}

std::string triplet_batch_problem(const JointCorpus& corpus, const TripletBatch& batch) {
    for (std::size_t i = 0; i < batch.items.size(); ++i) {
        const auto& t = batch.items[i];
        const int a = corpus.labels[t.anchor], p = corpus.labels[t.positive], n = corpus.labels[t.negative];
        const std::string where = "triplet " + std::to_string(i) + ": ";
        if (batch.phase == 1) {
            if (a != p) {
                return where + "positive is from another category";
            }
            if (a == n) {
                return where + "negative shares the anchor's category";
            }
        } else {
            if (t.positive != t.anchor) {
                return where + "positive is not the anchor's own instance";
            }
            if (a != n || t.negative == t.anchor) {
                return where + "negative is not another instance of the anchor's category";
            }
        }
    }
    return {};
}

std::vector<JointStep> train_joint(JointHeads<float>& heads, const JointCorpus& corpus, const JointConfig& config,
                                   EncoderTuning* tuning, const PhaseCallback& on_phase_end) {
    require(config.batch_size > 0 && config.phase1_steps >= 0 && config.phase2_steps >= 0, ErrorCode::Config,
            "invalid joint training schedule");
    const bool tune = config.fine_tune_encoder && tuning != nullptr && tuning->model != nullptr;
    if (tune) {
        require(tuning->examples.size() == corpus.size() && tuning->optimizer != nullptr, ErrorCode::Config,
                "encoder fine-tuning needs one example per corpus row and an optimizer");
    }
    std::vector<JointStep> log;
    JointHeads<float> m = heads.zeros_like(), v = heads.zeros_like();
    std::mt19937_64 rng(config.seed);
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    int t = 0;
    for (int phase = 1; phase <= 2; ++phase) {
        const int steps = phase == 1 ? config.phase1_steps : config.phase2_steps;
        const float margin = static_cast<float>(phase == 1 ? config.margin1 : config.margin2);
        for (int s = 0; s < steps; ++s) {
            ++t;
            const TripletBatch batch = sample_triplets(corpus, phase, static_cast<std::size_t>(config.batch_size), rng);
            const std::string problem = triplet_batch_problem(corpus, batch);
            require(problem.empty(), ErrorCode::Internal, "triplet sampler broke its contract: " + problem);
            JointHeads<float> g = heads.zeros_like();
            ModelParams<float> eg;
            if (tune) {
                eg = tuning->model->params().zeros_like();
            }
            const float scale = 1.0f / static_cast<float>(batch.items.size());
            JointStep rec;
            rec.phase = phase;
            rec.step = s + 1;
            for (const Triplet& tr : batch.items) {
                ForwardPass<float> epass;
                MatF za;
                if (tune) {
                    epass = tuning->model->forward_encoder(tuning->examples[tr.anchor].input);
                    za = epass.z;
                } else {
                    za = corpus.vector_features.row(static_cast<Eigen::Index>(tr.anchor));
                }
                const auto pa = head_forward<float>(heads, Branch::Vector, za);
                const auto pp = head_forward<float>(heads, Branch::Raster,
                                                    MatF(corpus.raster_features.row(static_cast<Eigen::Index>(tr.positive))));
                const auto pn = head_forward<float>(heads, Branch::Raster,
                                                    MatF(corpus.raster_features.row(static_cast<Eigen::Index>(tr.negative))));
                const auto tl = triplet_loss<float>(pa.u, pp.u, pn.u, margin);
                rec.triplet += tl.loss * scale;
                rec.active_fraction += (tl.loss > 0) * scale;
                MatF ga = tl.g_anchor * scale, gp = tl.g_positive * scale, gn = tl.g_negative * scale;
                const std::array<std::pair<const HeadPass<float>*, std::size_t>, 3> members = {
                    {{&pa, tr.anchor}, {&pp, tr.positive}, {&pn, tr.negative}}};
                std::array<MatF*, 3> grads_u = {&ga, &gp, &gn};
                for (std::size_t k = 0; k < 3; ++k) {
                    if (config.cls_weight <= 0) {
                        break;
                    }
                    const MatF logits = affine<float>(members[k].first->u, heads.cls_w, heads.cls_b);
                    const auto cl = class_cross_entropy<float>(logits, corpus.labels[members[k].second]);
                    const float w = static_cast<float>(config.cls_weight) * scale;
                    rec.classification += cl.loss * scale / 3.0;
                    *grads_u[k] += affine_backward<float>(members[k].first->u, heads.cls_w, MatF(cl.grad * w), g.cls_w,
                                                          g.cls_b);
                }
                const MatF dz = head_backward<float>(heads, Branch::Vector, pa, ga, g);
                head_backward<float>(heads, Branch::Raster, pp, gp, g);
                head_backward<float>(heads, Branch::Raster, pn, gn, g);
                if (tune) {
                    tuning->model->backward(epass, MatF(), MatF(), &dz, eg);
                }
            }
            require(std::isfinite(rec.triplet) && std::isfinite(rec.classification), ErrorCode::NonFinite,
                    "non-finite joint loss in phase " + std::to_string(phase) + " step " + std::to_string(s + 1));
            const double c1 = 1 - std::pow(b1, t), c2 = 1 - std::pow(b2, t);
            const float lr = static_cast<float>(config.learning_rate * std::sqrt(c2) / c1);
            std::vector<MatF*> pp, pm, pv, pg;
            heads.visit([&](const std::string&, MatF& x) { pp.push_back(&x); });
            m.visit([&](const std::string&, MatF& x) { pm.push_back(&x); });
            v.visit([&](const std::string&, MatF& x) { pv.push_back(&x); });
            g.visit([&](const std::string&, MatF& x) { pg.push_back(&x); });
            for (std::size_t k = 0; k < pp.size(); ++k) {
                *pm[k] = static_cast<float>(b1) * *pm[k] + static_cast<float>(1 - b1) * *pg[k];
                *pv[k] = static_cast<float>(b2) * *pv[k] + static_cast<float>(1 - b2) * pg[k]->cwiseProduct(*pg[k]);
                pp[k]->array() -= lr * pm[k]->array() / (pv[k]->array().sqrt() + static_cast<float>(eps));
            }
            if (tune) {
                // Plain Adam on E with the same rate, sharing the training optimizer's moments.
                OptimizerState& o = *tuning->optimizer;
                o.step += 1;
                const double e1 = 1 - std::pow(b1, static_cast<double>(o.step));
                const double e2 = 1 - std::pow(b2, static_cast<double>(o.step));
                const float elr = static_cast<float>(config.learning_rate * std::sqrt(e2) / e1);
                std::vector<MatF*> ep, em, ev;
                std::vector<const MatF*> egp;
                tuning->model->params().visit([&](const std::string&, MatF& x) { ep.push_back(&x); });
                o.m.visit([&](const std::string&, MatF& x) { em.push_back(&x); });
                o.v.visit([&](const std::string&, MatF& x) { ev.push_back(&x); });
                eg.visit([&](const std::string&, const MatF& x) { egp.push_back(&x); });
                for (std::size_t k = 0; k < ep.size(); ++k) {
                    if (ep[k]->size() == 0) {
                        continue;
                    }
                    *em[k] = static_cast<float>(b1) * *em[k] + static_cast<float>(1 - b1) * *egp[k];
                    *ev[k] = static_cast<float>(b2) * *ev[k] + static_cast<float>(1 - b2) * egp[k]->cwiseProduct(*egp[k]);
                    ep[k]->array() -= elr * em[k]->array() / (ev[k]->array().sqrt() + static_cast<float>(eps));
                }
            }
            log.push_back(rec);
        }
        if (on_phase_end) {
            on_phase_end(phase, heads);
        }
    }
    return log;
}

MatF embed_rows(const JointHeads<float>& heads, Branch branch, const MatF& features) {
    MatF out(features.rows(), kJointDim);
    for (Eigen::Index i = 0; i < features.rows(); ++i) {
        out.row(i) = head_forward<float>(heads, branch, MatF(features.row(i))).u;
    }
    return out;
}

double triplet_satisfaction(const JointHeads<float>& heads, const JointCorpus& corpus, std::size_t count,
                            std::uint64_t seed) {
    const MatF uv = embed_rows(heads, Branch::Vector, corpus.vector_features);
    const MatF ur = embed_rows(heads, Branch::Raster, corpus.raster_features);
    std::mt19937_64 rng(seed);
    const TripletBatch batch = sample_triplets(corpus, 1, count, rng);
    std::size_t ok = 0;
    for (const Triplet& t : batch.items) {
        const auto a = static_cast<Eigen::Index>(t.anchor);
        const double dp = (uv.row(a) - ur.row(static_cast<Eigen::Index>(t.positive))).cast<double>().norm();
        const double dn = (uv.row(a) - ur.row(static_cast<Eigen::Index>(t.negative))).cast<double>().norm();
        ok += dp < dn;
    }
    return static_cast<double>(ok) / static_cast<double>(count);
}

double own_instance_mean_rank(const JointHeads<float>& heads, const JointCorpus& corpus) {
    const MatF uv = embed_rows(heads, Branch::Vector, corpus.vector_features);
    const EmbeddingIndex index(embed_rows(heads, Branch::Raster, corpus.raster_features), corpus.ids, Metric::Euclidean);
    double sum = 0;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const auto ranked = index.knn(MatF(uv.row(static_cast<Eigen::Index>(i))), corpus.size());
        for (std::size_t r = 0; r < ranked.size(); ++r) {
            if (ranked[r].id == corpus.ids[i]) {
                sum += static_cast<double>(r + 1);
                break;
            }
        }
    }
    return sum / static_cast<double>(corpus.size());
}

double category_map(const JointHeads<float>& heads, const JointCorpus& corpus) {
    const MatF uv = embed_rows(heads, Branch::Vector, corpus.vector_features);
    const EmbeddingIndex index(embed_rows(heads, Branch::Raster, corpus.raster_features), corpus.ids, Metric::Euclidean,
                               corpus.labels);
    std::map<std::string, int> label_of;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        label_of[corpus.ids[i]] = corpus.labels[i];
    }
    std::vector<std::vector<bool>> rankings;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const auto ranked = index.knn(MatF(uv.row(static_cast<Eigen::Index>(i))), corpus.size());
        std::vector<bool> rel;
        for (const auto& r : ranked) {
            rel.push_back(label_of[r.id] == corpus.labels[i]);
        }
        rankings.push_back(std::move(rel));
    }
    return mean_average_precision(rankings);
}

std::vector<Ranked> sbir_query(const JointHeads<float>& heads, const MatF& z, const EmbeddingIndex& image_index,
                               std::size_t k) {
    require(image_index.size() > 0, ErrorCode::InvalidArgument, "the image index is empty");
    return image_index.knn(head_forward<float>(heads, Branch::Vector, z).u, k);
}

void JointModel::save(const std::filesystem::path& path) const {
    TensorArchive a;
    a.set("format", std::string("sketchformer-joint"));
    a.set("joint.phase1_steps", config.phase1_steps);
    a.set("joint.phase2_steps", config.phase2_steps);
    a.set("joint.batch_size", config.batch_size);
    a.set("joint.margin1", config.margin1);
    a.set("joint.margin2", config.margin2);
    a.set("joint.cls_weight", config.cls_weight);
    a.set("joint.learning_rate", config.learning_rate);
    a.set("joint.seed", config.seed);
    a.set("joint.fine_tune_encoder", static_cast<int>(config.fine_tune_encoder));
    a.set("joint.encoder_digest", encoder_digest);
    heads.visit([&](const std::string& name, const MatF& m) { a.add_tensor("heads." + name, m); });
    raster.write(a, "raster.");
    a.save(path);
}

JointModel JointModel::load(const std::filesystem::path& path) {
    const TensorArchive a = TensorArchive::load(path);
    require(a.find("format").value_or("") == "sketchformer-joint", ErrorCode::Config,
            path.string() + " is not a joint-embedding checkpoint");
    JointModel j;
    j.config.phase1_steps = static_cast<int>(a.get_int("joint.phase1_steps"));
    j.config.phase2_steps = static_cast<int>(a.get_int("joint.phase2_steps"));
    j.config.batch_size = static_cast<int>(a.get_int("joint.batch_size"));
    j.config.margin1 = a.get_double("joint.margin1");
    j.config.margin2 = a.get_double("joint.margin2");
    j.config.cls_weight = a.get_double("joint.cls_weight");
    j.config.learning_rate = a.get_double("joint.learning_rate");
    j.config.seed = a.get_uint("joint.seed");
    j.config.fine_tune_encoder = a.get_int("joint.fine_tune_encoder") != 0;
    j.encoder_digest = a.get("joint.encoder_digest");
    j.heads.visit([&](const std::string& name, MatF& m) { m = a.tensor("heads." + name); });
    j.raster = RasterEncoder::read(a, "raster.");
    return j;
}

} // namespace sketchformer
