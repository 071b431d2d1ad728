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

#include "sketchformer/engine.hpp"

#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include "sketchformer/container.hpp"
#include "sketchformer/error.hpp"
#include "sketchformer/random.hpp"
#include "sketchformer/tokenizer.hpp"

namespace sketchformer {

Engine::Engine(Checkpoint checkpoint, std::string digest)
    : checkpoint_(std::move(checkpoint)),
      model_(checkpoint_.train.model, checkpoint_.params),
      digest_(std::move(digest)) {
    require(checkpoint_.codec.input_mode() == checkpoint_.train.model.mode, ErrorCode::Config,
            "checkpoint tokenizer and model mode disagree");
    require(checkpoint_.train.model.mode == InputMode::Continuous ||
                checkpoint_.codec.vocab_size() == checkpoint_.train.model.vocab_size,
            ErrorCode::Config, "checkpoint tokenizer vocabulary does not match the model");
}

Engine Engine::load(const std::filesystem::path& path) {
    require(std::filesystem::exists(path), ErrorCode::Io, "checkpoint not found: " + path.string());
    return Engine(load_checkpoint(path), file_digest(path));
}

SequenceInput Engine::prepare(const Sketch& sketch) const {
    const Sketch simple = simplify_sketch(sketch, checkpoint_.meta.rdp_epsilon);
    return codec().encode(simple, static_cast<std::size_t>(model_.config().max_len));
}

MatF Engine::embed(const Sketch& sketch) const { return model_.encode(prepare(sketch)).z; }

Sketch Engine::generate(const MatF& z, Point origin) const {
    const SequenceInput gen = model_.autoregress(z, model_.config().max_len);
    Sketch out = codec().decode(gen, origin);
    return out;
}

Sketch Engine::reconstruct(const Sketch& sketch) const {
    Sketch out = generate(embed(sketch), sketch_origin(sketch));
    out.label = sketch.label;
    return out;
}

std::vector<Sketch> Engine::interpolate(const Sketch& a, const Sketch& b, int steps) const {
    const MatF za = embed(a), zb = embed(b);
    const Point oa = sketch_origin(a), ob = sketch_origin(b);
    std::vector<Sketch> frames;
    for (double t : interpolation_grid(steps)) {
        const Point o = t == 0.0 ? oa : t == 1.0 ? ob : Point{oa.x + t * (ob.x - oa.x), oa.y + t * (ob.y - oa.y)};
        frames.push_back(generate(slerp(za, zb, t), o));
    }
    return frames;
}

Classification Engine::classify_embedding(const MatF& z) const { return sketchformer::classify(model_.class_logits(z)); }

Classification Engine::classify(const Sketch& sketch) const { return classify_embedding(embed(sketch)); }

Sketch Engine::perturb(const Sketch& sketch, double sigma, std::uint64_t seed) const {
    std::mt19937_64 rng(seed);
    return generate(sketchformer::perturb(embed(sketch), sigma, rng), sketch_origin(sketch));
}

EmbeddingIndex Engine::build_index(const Dataset& dataset, Split split, Metric metric) const {
    std::vector<std::string> ids;
    std::vector<int> labels;
    std::vector<MatF> rows;
    for (std::size_t i : dataset.indices(split)) {
        const auto& item = dataset.items[i];
        SequenceInput in;
        try {
            in = codec().encode(item.seq, item.origin, static_cast<std::size_t>(model_.config().max_len));
        } catch (const Error& e) {
            if (e.code() == ErrorCode::Truncation) {
                continue;
            }
            throw;
        }
        rows.push_back(model_.encode(in).z);
        ids.push_back(item.id);
        labels.push_back(item.label);
    }
    MatF m(static_cast<Eigen::Index>(rows.size()), model_.config().d_model);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        m.row(static_cast<Eigen::Index>(i)) = rows[i];
    }
    return EmbeddingIndex(std::move(m), std::move(ids), metric, std::move(labels));
}

ClassifyEval eval_classify(const Engine& engine, const Dataset& dataset, Split split) {
    ClassifyEval r;
    std::size_t hits = 0;
    for (std::size_t i : dataset.indices(split)) {
        const auto& item = dataset.items[i];
        SequenceInput in;
        try {
            in = engine.codec().encode(item.seq, item.origin, static_cast<std::size_t>(engine.model().config().max_len));
        } catch (const Error& e) {
            if (e.code() == ErrorCode::Truncation) {
                ++r.skipped;
                continue;
            }
            throw;
        }
        hits += engine.classify_embedding(engine.model().encode(in).z).label == item.label;
        ++r.items;
    }
    r.accuracy = r.items > 0 ? static_cast<double>(hits) / static_cast<double>(r.items) : 0.0;
    return r;
}

RetrievalEval eval_retrieval(const Engine& engine, const Dataset& dataset, Split split, std::size_t k, Metric metric) {
    const EmbeddingIndex index = engine.build_index(dataset, split, metric);
    require(index.size() >= 2, ErrorCode::InvalidArgument, "retrieval evaluation needs at least 2 items");
    require(k >= 1, ErrorCode::InvalidArgument, "k must be positive");
    std::map<std::string, int> label_of;
    for (std::size_t i = 0; i < index.size(); ++i) {
        label_of[index.ids()[i]] = index.labels()[i];
    }
    RetrievalEval r;
    r.precision_at.assign(k, 0.0);
    std::vector<std::vector<bool>> rankings;
    for (std::size_t q = 0; q < index.size(); ++q) {
        const MatF query = index.vectors().row(static_cast<Eigen::Index>(q));
        const auto ranked = index.knn(query, index.size());
        std::vector<bool> rel;
        for (const auto& item : ranked) {
            if (item.id == index.ids()[q]) {
                continue;
            }
            rel.push_back(label_of[item.id] == index.labels()[q]);
        }
        for (std::size_t j = 1; j <= k; ++j) {
            std::size_t hits = 0;
            for (std::size_t t = 0; t < std::min(j, rel.size()); ++t) {
                hits += rel[t];
            }
            r.precision_at[j - 1] += static_cast<double>(hits) / static_cast<double>(j);
        }
        rankings.push_back(std::move(rel));
    }
    r.queries = rankings.size();
    r.mean_ap = mean_average_precision(rankings);
    for (double& p : r.precision_at) {
        p /= static_cast<double>(r.queries);
    }
    return r;
}

namespace {

std::vector<Point> flatten(const Sketch& s) {
    std::vector<Point> out;
    for (const auto& stroke : s.strokes) {
        out.insert(out.end(), stroke.begin(), stroke.end());
    }
    return out;
}

void accumulate(QuantizationRow& row, const std::vector<Point>& truth, const std::vector<Point>& decoded,
                double& sum, double& endpoint_sum, std::size_t& sketches) {
    require(truth.size() == decoded.size(), ErrorCode::Internal, "round trip changed the point count");
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const double e = std::hypot(truth[i].x - decoded[i].x, truth[i].y - decoded[i].y);
        sum += e;
        row.max_error = std::max(row.max_error, e);
    }
    row.points += truth.size();
    endpoint_sum += std::hypot(truth.back().x - decoded.back().x, truth.back().y - decoded.back().y);
    ++sketches;
}

} // namespace

std::vector<QuantizationRow> quantization_report(const Dataset& dataset, Split split,
                                                 const QuantizationOptions& options) {
    const auto eval_ids = dataset.indices(split);
    require(!eval_ids.empty(), ErrorCode::InvalidArgument, "no sketches in the evaluated split");
    std::vector<QuantizationRow> rows;
    for (int n : options.grid_sizes) {
        QuantizationRow row;
        row.scheme = "grid";
        row.parameter = n;
        GridSpec grid;
        grid.n = n;
        double sum = 0, endpoint = 0;
        std::size_t sketches = 0;
        for (std::size_t i : eval_ids) {
            const Sketch s = dataset.items[i].sketch();
            const auto t = grid_encode(s, grid, 2 * s.point_count() + 2 * s.strokes.size() + 2);
            accumulate(row, flatten(s), flatten(grid_decode(t, grid)), sum, endpoint, sketches);
        }
        row.mean_error = sum / static_cast<double>(row.points);
        row.mean_endpoint_error = endpoint / static_cast<double>(sketches);
        rows.push_back(row);
    }
    std::vector<Stroke3Seq> corpus;
    for (std::size_t i : dataset.indices(Split::Train)) {
        corpus.push_back(dataset.items[i].seq);
    }
    require(!corpus.empty() || options.dict_sizes.empty(), ErrorCode::InvalidArgument,
            "dictionary fitting needs a training split");
    for (int k : options.dict_sizes) {
        const Codebook cb = fit_codebook(corpus, k, options.sample_size, options.lift_fraction, options.seed,
                                         dataset.meta.offset_scale)
                                .codebook;
        QuantizationRow row;
        row.scheme = "dict";
        row.parameter = k;
        double sum = 0, endpoint = 0;
        std::size_t sketches = 0;
        for (std::size_t i : eval_ids) {
            const auto& item = dataset.items[i];
            const auto t = dict_encode(item.seq, cb, 2 * item.seq.size() + 2);
            const Sketch decoded = from_stroke3(dict_decode(t, cb), item.origin);
            accumulate(row, flatten(item.sketch()), flatten(decoded), sum, endpoint, sketches);
        }
        row.mean_error = sum / static_cast<double>(row.points);
        row.mean_endpoint_error = endpoint / static_cast<double>(sketches);
        rows.push_back(row);
    }
    return rows;
}

std::string quantization_csv(const std::vector<QuantizationRow>& rows) {
    std::ostringstream out;
    out.precision(9);
    out << "scheme,parameter,mean_error,max_error,mean_endpoint_error,points\n";
    for (const auto& r : rows) {
        out << r.scheme << ',' << r.parameter << ',' << r.mean_error << ',' << r.max_error << ','
            << r.mean_endpoint_error << ',' << r.points << '\n';
    }
    return out.str();
}

} // namespace sketchformer

namespace sketchformer {

JointCorpus make_joint_corpus(const Engine& engine, const RasterEncoder& raster, const Dataset& dataset, Split split) {
    JointCorpus c;
    std::vector<MatF> e_rows, p_rows;
    for (std::size_t i : dataset.indices(split)) {
        const auto& item = dataset.items[i];
        SequenceInput in;
        try {
            in = engine.codec().encode(item.seq, item.origin, static_cast<std::size_t>(engine.model().config().max_len));
        } catch (const Error& e) {
            if (e.code() == ErrorCode::Truncation) {
                continue;
            }
            throw;
        }
        e_rows.push_back(engine.model().encode(in).z);
        p_rows.push_back(raster.features(RasterEncoder::render(item.sketch())));
        c.ids.push_back(item.id);
        c.labels.push_back(item.label);
    }
    require(!c.ids.empty(), ErrorCode::InvalidArgument, "no usable sketches for the joint corpus");
    c.vector_features.resize(static_cast<Eigen::Index>(e_rows.size()), e_rows.front().cols());
    c.raster_features.resize(static_cast<Eigen::Index>(p_rows.size()), p_rows.front().cols());
    for (std::size_t i = 0; i < e_rows.size(); ++i) {
        c.vector_features.row(static_cast<Eigen::Index>(i)) = e_rows[i];
        c.raster_features.row(static_cast<Eigen::Index>(i)) = p_rows[i];
    }
    return c;
}

JointPhaseMetrics joint_metrics(const JointHeads<float>& heads, const JointCorpus& held_out, std::uint64_t seed) {
    JointPhaseMetrics m;
    m.triplet_satisfaction = triplet_satisfaction(heads, held_out, 1000, seed);
    m.own_instance_rank = own_instance_mean_rank(heads, held_out);
    m.category_map = category_map(heads, held_out);
    return m;
}

JointReport build_joint_model(const Engine& engine, const Dataset& dataset, const JointConfig& config,
                              const RasterTrainConfig& raster_config, JointModel& out) {
    JointReport report;
    const int n_classes = static_cast<int>(std::max<std::size_t>(dataset.meta.class_names.size(), 1));
    std::vector<RasterImage> images;
    std::vector<int> labels;
    for (std::size_t i : dataset.indices(Split::Train)) {
        images.push_back(RasterEncoder::render(dataset.items[i].sketch()));
        labels.push_back(dataset.items[i].label);
    }
    RasterEncoder raster(init_raster_params<float>(n_classes, mix_seed({config.seed, 0x5241u})));
    report.raster_train_accuracy = raster.pretrain(images, labels, raster_config).train_accuracy;
    std::size_t hits = 0, total = 0;
    for (std::size_t i : dataset.indices(Split::Test)) {
        hits += raster.predict(RasterEncoder::render(dataset.items[i].sketch())) == dataset.items[i].label;
        ++total;
    }
    report.raster_test_accuracy = total > 0 ? static_cast<double>(hits) / static_cast<double>(total) : 0.0;

    const JointCorpus train = make_joint_corpus(engine, raster, dataset, Split::Train);
    const JointCorpus test = make_joint_corpus(engine, raster, dataset, Split::Test);
    const ModelParams<float> e_before = engine.model().params();
    const RasterEncoder p_before = raster;

    JointHeads<float> heads = init_joint_heads<float>(static_cast<int>(train.vector_features.cols()),
                                                      kRasterFeatureDim, n_classes, config.seed);
    JointConfig frozen = config;
    frozen.fine_tune_encoder = false; // the engine's model is shared and read-only
    report.steps = train_joint(heads, train, frozen, nullptr, [&](int phase, const JointHeads<float>& h) {
        (phase == 1 ? report.after_phase1 : report.after_phase2) = joint_metrics(h, test, config.seed + 1);
    });

    bool same = true;
    std::vector<const MatF*> a, b;
    e_before.visit([&](const std::string&, const MatF& m) { a.push_back(&m); });
    engine.model().params().visit([&](const std::string&, const MatF& m) { b.push_back(&m); });
    for (std::size_t i = 0; i < a.size(); ++i) {
        same = same && a[i]->rows() == b[i]->rows() && a[i]->cols() == b[i]->cols() && *a[i] == *b[i];
    }
    report.encoder_frozen = same;
    report.raster_frozen = raster == p_before;

    out.heads = std::move(heads);
    out.raster = std::move(raster);
    out.config = frozen;
    out.encoder_digest = engine.digest();
    return report;
}

EmbeddingIndex joint_image_index(const JointModel& joint, const Dataset& dataset, Split split) {
    std::vector<std::string> ids;
    std::vector<int> labels;
    const auto idx = dataset.indices(split);
    MatF u(static_cast<Eigen::Index>(idx.size()), kJointDim);
    Eigen::Index row = 0;
    for (std::size_t i : idx) {
        const auto& item = dataset.items[i];
        const MatF p = joint.raster.features(RasterEncoder::render(item.sketch()));
        u.row(row++) = head_forward<float>(joint.heads, Branch::Raster, p).u;
        ids.push_back(item.id);
        labels.push_back(item.label);
    }
    return EmbeddingIndex(std::move(u), std::move(ids), Metric::Euclidean, std::move(labels));
}

} // namespace sketchformer
