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

#include "sketchformer/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "sketchformer/container.hpp"
#include "sketchformer/error.hpp"
#include "sketchformer/losses.hpp"
#include "sketchformer/random.hpp"
#include "sketchformer/tokenizer.hpp"

namespace sketchformer {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

long long parse_int(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    long long out = 0;
    try {
        out = std::stoll(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    require(used == v.size() && !v.empty(), ErrorCode::Config, key + ": expected an integer, got '" + v + "'");
    return out;
}

double parse_real(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    double out = 0;
    try {
        out = std::stod(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    require(used == v.size() && !v.empty() && std::isfinite(out), ErrorCode::Config,
            key + ": expected a number, got '" + v + "'");
    return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "1" || v == "true" || v == "yes") {
        return true;
    }
    if (v == "0" || v == "false" || v == "no") {
        return false;
    }
    fail(ErrorCode::Config, key + ": expected a boolean, got '" + v + "'");
}

std::string real_text(double v) {
    std::ostringstream out;
    out << std::setprecision(17) << v;
    return out.str();
}

// Flat iteration over matching tensors of several ModelParams.
template <class F>
void zip_params(ModelParams<float>& a, ModelParams<float>& b, ModelParams<float>& c, const ModelParams<float>& g,
                F&& f) {
    std::vector<MatF*> pa, pb, pc;
    std::vector<const MatF*> pg;
    a.visit([&](const std::string&, MatF& m) { pa.push_back(&m); });
    b.visit([&](const std::string&, MatF& m) { pb.push_back(&m); });
    c.visit([&](const std::string&, MatF& m) { pc.push_back(&m); });
    g.visit([&](const std::string&, const MatF& m) { pg.push_back(&m); });
    for (std::size_t i = 0; i < pa.size(); ++i) {
        f(*pa[i], *pb[i], *pc[i], *pg[i]);
    }
}

} // namespace

// ---------------------------------------------------------------------------

void TrainConfig::set(const std::string& key, const std::string& value) {
    const std::string v = trim(value);
    if (key == "scheme") {
        scheme = codec_kind_from_name(v);
        model.mode = scheme == CodecKind::Continuous ? InputMode::Continuous : InputMode::Tokenized;
    } else if (key == "grid_n") {
        grid_n = static_cast<int>(parse_int(key, v));
    } else if (key == "codebook") {
        codebook = v;
    } else if (key == "d_model") {
        model.d_model = static_cast<int>(parse_int(key, v));
    } else if (key == "n_layers") {
        model.n_layers = static_cast<int>(parse_int(key, v));
    } else if (key == "n_heads") {
        model.n_heads = static_cast<int>(parse_int(key, v));
    } else if (key == "d_ff") {
        model.d_ff = static_cast<int>(parse_int(key, v));
    } else if (key == "max_len") {
        model.max_len = static_cast<int>(parse_int(key, v));
    } else if (key == "dropout") {
        model.dropout = parse_real(key, v);
    } else if (key == "attention_scale") {
        model.attention_scale = parse_real(key, v);
    } else if (key == "expand") {
        model.expand = expand_mode_from_name(v);
    } else if (key == "batch_size") {
        batch_size = static_cast<int>(parse_int(key, v));
    } else if (key == "steps") {
        steps = static_cast<int>(parse_int(key, v));
    } else if (key == "lambda_cls") {
        lambda_cls = parse_real(key, v);
    } else if (key == "learning_rate") {
        learning_rate = parse_real(key, v);
    } else if (key == "warmup") {
        warmup = static_cast<int>(parse_int(key, v));
    } else if (key == "clip_norm") {
        clip_norm = parse_real(key, v);
    } else if (key == "seed") {
        seed = static_cast<std::uint64_t>(parse_int(key, v));
    } else if (key == "shuffle_strokes") {
        shuffle_strokes = parse_bool(key, v);
    } else if (key == "log_every") {
        log_every = static_cast<int>(parse_int(key, v));
    } else {
        fail(ErrorCode::Config, "unknown training config key '" + key + "'");
    }
}

void TrainConfig::validate() const {
    require(batch_size > 0, ErrorCode::Config, "batch_size must be positive");
    require(steps >= 0, ErrorCode::Config, "steps must be non-negative");
    require(lambda_cls >= 0, ErrorCode::Config, "lambda_cls must be non-negative");
    require(learning_rate >= 0, ErrorCode::Config, "learning_rate must be non-negative");
    require(warmup > 0, ErrorCode::Config, "warmup must be positive");
    require(clip_norm >= 0, ErrorCode::Config, "clip_norm must be non-negative");
    require(log_every > 0, ErrorCode::Config, "log_every must be positive");
    require(scheme != CodecKind::Grid || grid_n >= 2, ErrorCode::Config, "grid_n must be at least 2");
    require((scheme == CodecKind::Continuous) == (model.mode == InputMode::Continuous), ErrorCode::Config,
            "scheme and model mode disagree");
    // Vocabulary and class count are filled in from the data later.
    ModelConfig shape = model;
    shape.vocab_size = std::max(shape.vocab_size, token::kFirstContent + 1);
    shape.n_classes = std::max(shape.n_classes, 1);
    shape.validate();
}

std::string TrainConfig::to_text() const {
    std::ostringstream out;
    out << "scheme=" << codec_kind_name(scheme) << '\n';
    out << "grid_n=" << grid_n << '\n';
    out << "codebook=" << codebook << '\n';
    out << "d_model=" << model.d_model << '\n';
    out << "n_layers=" << model.n_layers << '\n';
    out << "n_heads=" << model.n_heads << '\n';
    out << "d_ff=" << model.d_ff << '\n';
    out << "max_len=" << model.max_len << '\n';
    out << "dropout=" << real_text(model.dropout) << '\n';
    out << "attention_scale=" << real_text(model.attention_scale) << '\n';
    out << "expand=" << expand_mode_name(model.expand) << '\n';
    out << "batch_size=" << batch_size << '\n';
    out << "steps=" << steps << '\n';
    out << "lambda_cls=" << real_text(lambda_cls) << '\n';
    out << "learning_rate=" << real_text(learning_rate) << '\n';
    out << "warmup=" << warmup << '\n';
    out << "clip_norm=" << real_text(clip_norm) << '\n';
    out << "seed=" << seed << '\n';
    out << "shuffle_strokes=" << (shuffle_strokes ? "true" : "false") << '\n';
    out << "log_every=" << log_every << '\n';
    return out.str();
}

TrainConfig TrainConfig::parse(const std::string& text) {
    TrainConfig c;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line.erase(hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        require(eq != std::string::npos, ErrorCode::Config,
                "config line " + std::to_string(line_no) + ": expected key=value");
        c.set(trim(line.substr(0, eq)), line.substr(eq + 1));
    }
    c.validate();
    return c;
}

TrainConfig TrainConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorCode::Io, "cannot read config " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return parse(text.str());
}

void TrainConfig::write(TensorArchive& a) const {
    std::istringstream in(to_text());
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        a.set("train." + line.substr(0, eq), line.substr(eq + 1));
    }
}

TrainConfig TrainConfig::read(const TensorArchive& a) {
    std::string text;
    for (const auto& [k, v] : a.meta()) {
        if (k.rfind("train.", 0) == 0) {
            text += k.substr(6) + "=" + v + "\n";
        }
    }
    require(!text.empty(), ErrorCode::Config, "archive carries no training configuration");
    return parse(text);
}

double learning_rate_at(const TrainConfig& config, std::int64_t step) {
    const double s = static_cast<double>(std::max<std::int64_t>(step, 1));
    const double w = static_cast<double>(config.warmup);
    return config.learning_rate * std::min(s / w, std::sqrt(w / s));
}

// ---------------------------------------------------------------------------

Stroke3Seq shuffle_strokes(const Stroke3Seq& seq, std::mt19937_64& rng, Point* origin) {
    // Absolute points, grouped per stroke.
    std::vector<std::vector<Point>> strokes(1);
    Point at = origin != nullptr ? *origin : Point{};
    for (const auto& p : seq.points) {
        at.x += p.dx;
        at.y += p.dy;
        strokes.back().push_back(at);
        if (p.lift != 0) {
            strokes.emplace_back();
        }
    }
    if (strokes.back().empty()) {
        strokes.pop_back();
    }
    if (strokes.size() < 2) {
        return seq;
    }
    std::shuffle(strokes.begin(), strokes.end(), rng);
    Stroke3Seq out;
    const Point start = strokes.front().front();
    Point prev = start;
    for (std::size_t s = 0; s < strokes.size(); ++s) {
        for (std::size_t i = 0; i < strokes[s].size(); ++i) {
            const Point& p = strokes[s][i];
            out.points.push_back({p.x - prev.x, p.y - prev.y, i + 1 == strokes[s].size() ? 1 : 0});
            prev = p;
        }
    }
    // Without a terminating lift the source's last stroke was still open.
    if (!seq.points.empty() && seq.points.back().lift == 0) {
        out.points.back().lift = 0;
    }
    if (origin != nullptr) {
        *origin = start;
    }
    return out;
}

ExampleSet prepare_examples(const Dataset& dataset, Split split, const SketchCodec& codec, int max_len, bool shuffle,
                            std::uint64_t seed) {
    ExampleSet out;
    const InputMode mode = codec.input_mode();
    for (std::size_t idx : dataset.indices(split)) {
        const DatasetItem& item = dataset.items[idx];
        Stroke3Seq seq = item.seq;
        Point origin = item.origin;
        if (shuffle) {
            std::mt19937_64 rng(mix_seed({seed, idx, 0x5348u}));
            seq = shuffle_strokes(seq, rng, &origin);
        }
        Example ex;
        try {
            ex.input = codec.encode(seq, origin, static_cast<std::size_t>(max_len));
        } catch (const Error& e) {
            if (e.code() == ErrorCode::Truncation) {
                out.skipped.push_back(item.id);
                continue;
            }
            throw;
        }
        ex.forcing = make_teacher_forcing(ex.input, mode);
        ex.label = item.label;
        ex.id = item.id;
        ex.origin = origin;
        out.examples.push_back(std::move(ex));
    }
    return out;
}

// ---------------------------------------------------------------------------

OptimizerState OptimizerState::zeros_for(const ModelParams<float>& params) {
    OptimizerState s;
    s.m = params.zeros_like();
    s.v = params.zeros_like();
    return s;
}

bool operator==(const OptimizerState& a, const OptimizerState& b) {
    if (a.step != b.step) {
        return false;
    }
    std::vector<const MatF*> x, y;
    auto collect = [](const ModelParams<float>& p, std::vector<const MatF*>& out) {
        p.visit([&](const std::string&, const MatF& m) { out.push_back(&m); });
    };
    collect(a.m, x);
    collect(a.v, x);
    collect(b.m, y);
    collect(b.v, y);
    if (x.size() != y.size()) {
        return false;
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i]->rows() != y[i]->rows() || x[i]->cols() != y[i]->cols() || *x[i] != *y[i]) {
            return false;
        }
    }
    return true;
}

std::string LossReport::to_json() const {
    std::ostringstream out;
    out << std::setprecision(9);
    out << "{\"step\":" << step << ",\"recon_loss\":" << recon_loss << ",\"class_loss\":" << class_loss
        << ",\"total\":" << total << ",\"token_accuracy\":" << token_accuracy << ",\"offset_mse\":" << offset_mse
        << ",\"pen_accuracy\":" << pen_accuracy << ",\"class_accuracy\":" << class_accuracy
        << ",\"learning_rate\":" << learning_rate << ",\"grad_norm\":" << grad_norm << ",\"seconds\":" << seconds
        << "}";
    return out.str();
}

std::vector<std::size_t> batch_indices(std::size_t n_examples, int batch_size, std::uint64_t seed,
                                       std::int64_t step) {
    require(n_examples > 0, ErrorCode::InvalidArgument, "no training examples");
    std::vector<std::size_t> out;
    const auto b = static_cast<std::uint64_t>(batch_size);
    std::uint64_t pos = static_cast<std::uint64_t>(step) * b;
    std::uint64_t epoch = ~0ULL;
    std::vector<std::size_t> perm;
    for (std::uint64_t i = 0; i < b; ++i, ++pos) {
        const std::uint64_t e = pos / n_examples;
        if (e != epoch) {
            epoch = e;
            perm.resize(n_examples);
            std::iota(perm.begin(), perm.end(), std::size_t{0});
            std::mt19937_64 rng(mix_seed({seed, e, 0xBA7Cu}));
            std::shuffle(perm.begin(), perm.end(), rng);
        }
        out.push_back(perm[pos % n_examples]);
    }
    return out;
}

LossReport train_step(Transformer<float>& model, OptimizerState& optimizer, const TrainConfig& config,
                      std::span<const Example> examples, std::span<const std::size_t> batch) {
    require(!batch.empty(), ErrorCode::InvalidArgument, "empty batch");
    const auto start = std::chrono::steady_clock::now();
    const ModelConfig& mc = model.config();
    const InputMode mode = mc.mode;
    ModelParams<float> grads = model.params().zeros_like();
    const float scale = 1.0f / static_cast<float>(batch.size());
    const std::int64_t step = optimizer.step + 1;

    LossReport report;
    report.step = step;
    double tokens = 0, token_hits = 0, rows = 0, pen_hits = 0, class_hits = 0;
    auto ids = [&] {
        std::string s;
        for (std::size_t i : batch) {
            s += (s.empty() ? "" : ",") + examples[i].id;
        }
        return s;
    };
    for (std::size_t slot = 0; slot < batch.size(); ++slot) {
        const Example& ex = examples[batch[slot]];
        ForwardOptions fo;
        fo.training = true;
        fo.dropout_seed = mix_seed({config.seed, static_cast<std::uint64_t>(step), slot});
        const ForwardPass<float> pass = model.forward(ex.input, ex.forcing.decoder_input, fo);
        MatF d_out;
        double recon = 0;
        if (mode == InputMode::Tokenized) {
            auto l = token_cross_entropy<float>(pass.outputs, ex.forcing.target_tokens);
            recon = l.loss;
            d_out = l.grad * scale;
            tokens += l.counted;
            token_hits += l.correct;
        } else {
            auto l = continuous_loss<float>(pass.outputs, ex.forcing.target_rows);
            recon = l.total;
            d_out = l.grad * scale;
            report.offset_mse += l.offset / static_cast<double>(batch.size());
            rows += l.counted;
            pen_hits += l.pen_correct;
        }
        MatF d_cls;
        double cls = 0;
        if (ex.label >= 0 && ex.label < mc.n_classes && config.lambda_cls > 0) {
            auto c = class_cross_entropy<float>(pass.class_logits, ex.label);
            cls = c.loss;
            d_cls = c.grad * static_cast<float>(config.lambda_cls) * scale;
            class_hits += c.predicted == ex.label;
        }
        require(std::isfinite(recon) && std::isfinite(cls), ErrorCode::NonFinite,
                "non-finite loss at step " + std::to_string(step) + " on item " + ex.id + " (batch " + ids() + ")");
        report.recon_loss += recon / static_cast<double>(batch.size());
        report.class_loss += cls / static_cast<double>(batch.size());
        model.backward(pass, d_out, d_cls, nullptr, grads);
    }
    report.total = report.recon_loss + config.lambda_cls * report.class_loss;
    report.token_accuracy = tokens > 0 ? token_hits / tokens : 0;
    report.pen_accuracy = rows > 0 ? pen_hits / rows : 0;
    report.class_accuracy = class_hits / static_cast<double>(batch.size());

    double sq = 0;
    grads.visit([&](const std::string&, const MatF& g) { sq += g.cast<double>().squaredNorm(); });
    report.grad_norm = std::sqrt(sq);
    require(std::isfinite(report.grad_norm), ErrorCode::NonFinite,
            "non-finite gradient at step " + std::to_string(step) + " (batch " + ids() + ")");
    if (config.clip_norm > 0 && report.grad_norm > config.clip_norm) {
        const float c = static_cast<float>(config.clip_norm / report.grad_norm);
        grads.visit([c](const std::string&, MatF& g) { g *= c; });
    }

    // Adam with the schedule's rate; beta and epsilon follow the base
    // Transformer recipe.
    constexpr double b1 = 0.9, b2 = 0.98, eps = 1e-9;
    const double lr = learning_rate_at(config, step);
    report.learning_rate = lr;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
    const float step_size = static_cast<float>(lr * std::sqrt(c2) / c1);
    const float e = static_cast<float>(eps * std::sqrt(c2));
    zip_params(model.params(), optimizer.m, optimizer.v, grads, [&](MatF& p, MatF& m, MatF& v, const MatF& g) {
        if (p.size() == 0) {
            return;
        }
        m = static_cast<float>(b1) * m + static_cast<float>(1 - b1) * g;
        v = static_cast<float>(b2) * v + static_cast<float>(1 - b2) * g.cwiseProduct(g);
        if (lr != 0.0) {
            p.array() -= step_size * m.array() / (v.array().sqrt() + e);
        }
    });
    optimizer.step = step;
    report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

void train(Transformer<float>& model, OptimizerState& optimizer, const TrainConfig& config,
           std::span<const Example> examples, const StepCallback& on_step) {
    while (optimizer.step < config.steps) {
        const auto batch = batch_indices(examples.size(), config.batch_size, config.seed, optimizer.step);
        const LossReport r = train_step(model, optimizer, config, examples, batch);
        if (on_step) {
            on_step(r);
        }
    }
}

EvalReport evaluate(const Transformer<float>& model, std::span<const Example> examples, bool autoregressive) {
    EvalReport r;
    const ModelConfig& mc = model.config();
    double tokens = 0, hits = 0, rows = 0, pen_hits = 0, cls_items = 0, cls_hits = 0, exact = 0;
    for (const Example& ex : examples) {
        const ForwardPass<float> pass = model.forward(ex.input, ex.forcing.decoder_input);
        if (mc.mode == InputMode::Tokenized) {
            auto l = token_cross_entropy<float>(pass.outputs, ex.forcing.target_tokens);
            r.recon_loss += l.loss;
            tokens += l.counted;
            hits += l.correct;
        } else {
            auto l = continuous_loss<float>(pass.outputs, ex.forcing.target_rows);
            r.recon_loss += l.total;
            r.offset_mse += l.offset;
            rows += l.counted;
            pen_hits += l.pen_correct;
        }
        if (ex.label >= 0 && ex.label < mc.n_classes) {
            Eigen::Index best = 0;
            pass.class_logits.row(0).maxCoeff(&best);
            cls_items += 1;
            cls_hits += best == ex.label;
        }
        if (autoregressive && mc.mode == InputMode::Tokenized) {
            const SequenceInput gen = model.autoregress(pass.z, mc.max_len);
            exact += gen.tokens == ex.input.tokens;
        }
        ++r.items;
    }
    if (r.items > 0) {
        const double n = static_cast<double>(r.items);
        r.recon_loss /= n;
        r.offset_mse /= n;
        r.exact_reproduction = exact / n;
    }
    r.token_accuracy = tokens > 0 ? hits / tokens : 0;
    r.pen_accuracy = rows > 0 ? pen_hits / rows : 0;
    r.class_accuracy = cls_items > 0 ? cls_hits / cls_items : 0;
    return r;
}

// ---------------------------------------------------------------------------

void write_dataset_meta(const DatasetMeta& meta, TensorArchive& a) {
    a.set("data.rdp_epsilon", meta.rdp_epsilon);
    a.set("data.offset_scale", meta.offset_scale);
    a.set("data.train_size", static_cast<std::int64_t>(meta.train_size));
    a.set("data.test_size", static_cast<std::int64_t>(meta.test_size));
    a.set("data.class_count", static_cast<std::int64_t>(meta.class_names.size()));
    for (std::size_t i = 0; i < meta.class_names.size(); ++i) {
        a.set("data.class." + std::to_string(i), meta.class_names[i]);
    }
}

DatasetMeta read_dataset_meta(const TensorArchive& a) {
    DatasetMeta m;
    m.rdp_epsilon = a.get_double("data.rdp_epsilon");
    m.offset_scale = a.get_double("data.offset_scale");
    m.train_size = static_cast<std::uint32_t>(a.get_int("data.train_size"));
    m.test_size = static_cast<std::uint32_t>(a.get_int("data.test_size"));
    const auto n = a.get_int("data.class_count");
    for (std::int64_t i = 0; i < n; ++i) {
        m.class_names.push_back(a.get("data.class." + std::to_string(i)));
    }
    return m;
}

TensorArchive checkpoint_archive(const Checkpoint& c) {
    TensorArchive a;
    a.set("format", std::string("sketchformer-checkpoint"));
    c.train.model.write(a);
    c.train.write(a);
    c.codec.write(a);
    write_dataset_meta(c.meta, a);
    a.set("optimizer.step", static_cast<std::int64_t>(c.optimizer.step));
    write_params(c.params, a, "param.");
    write_params(c.optimizer.m, a, "adam.m.");
    write_params(c.optimizer.v, a, "adam.v.");
    return a;
}

Checkpoint checkpoint_from_archive(const TensorArchive& a) {
    require(a.find("format").value_or("") == "sketchformer-checkpoint", ErrorCode::Config,
            "archive is not a model checkpoint");
    Checkpoint c;
    c.train = TrainConfig::read(a);
    c.train.model = ModelConfig::read(a);
    c.codec = SketchCodec::read(a);
    c.meta = read_dataset_meta(a);
    c.params = read_params(c.train.model, a, "param.");
    c.optimizer.m = read_params(c.train.model, a, "adam.m.");
    c.optimizer.v = read_params(c.train.model, a, "adam.v.");
    c.optimizer.step = a.get_int("optimizer.step");
    return c;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
    checkpoint_archive(checkpoint).save(path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    return checkpoint_from_archive(TensorArchive::load(path));
}

SketchCodec make_codec(const TrainConfig& config, const DatasetMeta& meta, const Codebook* codebook) {
    SketchCodec codec;
    codec.kind = config.scheme;
    codec.offset_scale = meta.offset_scale;
    if (config.scheme == CodecKind::Grid) {
        codec.grid.n = config.grid_n;
    } else if (config.scheme == CodecKind::Dict) {
        if (codebook) {
            codec.codebook = *codebook;
        } else {
            require(!config.codebook.empty(), ErrorCode::Config, "dict scheme needs a codebook");
            codec.codebook = load_codebook(config.codebook);
        }
    }
    return codec;
}

Checkpoint new_checkpoint(TrainConfig config, SketchCodec codec, DatasetMeta meta) {
    config.model.mode = codec.input_mode();
    config.model.vocab_size = codec.vocab_size();
    config.model.n_classes = std::max<int>(1, static_cast<int>(meta.class_names.size()));
    config.validate();
    Checkpoint ck;
    ck.params = init_params<float>(config.model, config.seed);
    ck.optimizer = OptimizerState::zeros_for(ck.params);
    ck.train = std::move(config);
    ck.codec = std::move(codec);
    ck.meta = std::move(meta);
    return ck;
}

RunSummary run_training(Checkpoint& checkpoint, const Dataset& dataset, const StepCallback& on_step) {
    const TrainConfig& cfg = checkpoint.train;
    cfg.validate();
    ExampleSet set = prepare_examples(dataset, Split::Train, checkpoint.codec, cfg.model.max_len,
                                      cfg.shuffle_strokes, cfg.seed);
    require(!set.examples.empty(), ErrorCode::InvalidArgument, "no training examples fit max_len");
    Transformer<float> model(cfg.model, checkpoint.params);
    RunSummary summary;
    summary.examples = set.examples.size();
    summary.skipped = set.skipped.size();
    train(model, checkpoint.optimizer, cfg, set.examples, [&](const LossReport& r) {
        summary.last = r;
        if (on_step) {
            on_step(r);
        }
    });
    checkpoint.params = model.params();
    return summary;
}

} // namespace sketchformer
