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


// extern "C" surface over the core. Every entry point funnels through
// guarded(), which turns exceptions into status codes and remembers the
// message for sf_last_error().

#include "sketchformer/sketchformer.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "sketchformer/container.hpp"
#include "sketchformer/crossmodal.hpp"
#include "sketchformer/dataset.hpp"
#include "sketchformer/engine.hpp"
#include "sketchformer/error.hpp"
#include "sketchformer/tokenizer.hpp"
#include "sketchformer/training.hpp"

using json = nlohmann::json;
namespace sf = sketchformer;

struct sf_dataset {
    sf::Dataset value;
};
struct sf_codebook {
    sf::Codebook value;
};
struct sf_model {
    sf::Engine engine;
};
struct sf_index {
    sf::EmbeddingIndex value;
};
struct sf_joint {
    sf::JointModel value;
};

namespace {

thread_local std::string g_last_error;

template <class F>
sf_status guarded(F&& body) {
    try {
        body();
        g_last_error.clear();
        return SF_OK;
    } catch (const sf::Error& e) {
        g_last_error = e.what();
        return static_cast<sf_status>(e.code());
    } catch (const json::exception& e) {
        g_last_error = std::string("malformed JSON: ") + e.what();
        return SF_ERR_PARSE;
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
        return SF_ERR_INTERNAL;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return SF_ERR_INTERNAL;
    }
}

void need(const void* p, const char* what) {
    sf::require(p != nullptr, sf::ErrorCode::InvalidArgument, std::string(what) + " must not be null");
}

char* dup(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) {
        throw std::bad_alloc();
    }
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

void give(char** out, const std::string& s) {
    if (out) {
        *out = dup(s);
    }
}

json parse_body(const char* text) {
    need(text, "request");
    json j = json::parse(text, nullptr, false);
    sf::require(!j.is_discarded(), sf::ErrorCode::Parse, "request body is not valid JSON");
    sf::require(j.is_object(), sf::ErrorCode::Parse, "request body must be a JSON object");
    return j;
}

const json& field(const json& j, const char* name) {
    auto it = j.find(name);
    sf::require(it != j.end(), sf::ErrorCode::InvalidArgument, std::string("missing field '") + name + "'");
    return *it;
}

sf::Sketch sketch_field(const json& j, const char* name) {
    const json& v = field(j, name);
    try {
        sf::Sketch s = sf::parse_quickdraw(v.dump());
        s.validate();
        return s;
    } catch (const sf::Error& e) {
        throw sf::Error(e.code(), std::string("field '") + name + "': " + e.what());
    }
}

double number_field(const json& j, const char* name) {
    const json& v = field(j, name);
    sf::require(v.is_number(), sf::ErrorCode::InvalidArgument, std::string("field '") + name + "' must be a number");
    return v.get<double>();
}

template <class T>
T optional_number(const json& j, const char* name, T fallback) {
    auto it = j.find(name);
    if (it == j.end() || it->is_null()) {
        return fallback;
    }
    sf::require(it->is_number(), sf::ErrorCode::InvalidArgument, std::string("field '") + name + "' must be a number");
    if constexpr (std::is_integral_v<T>) {
        sf::require(it->is_number_integer(), sf::ErrorCode::InvalidArgument,
                    std::string("field '") + name + "' must be an integer");
    }
    return it->get<T>();
}

int positive_int(const json& j, const char* name, int fallback, int max) {
    const auto v = optional_number<long long>(j, name, fallback);
    sf::require(v >= 1 && v <= max, sf::ErrorCode::InvalidArgument,
                std::string("field '") + name + "' must be between 1 and " + std::to_string(max));
    return static_cast<int>(v);
}

json strokes_json(const sf::Sketch& s) { return json::parse(sf::strokes_to_json(s)); }

json row_json(const sf::MatF& z) {
    json out = json::array();
    for (Eigen::Index i = 0; i < z.cols(); ++i) {
        out.push_back(static_cast<double>(z(0, i)));
    }
    return out;
}

sf::MatF embedding_field(const json& j, const char* name, int dim) {
    const json& v = field(j, name);
    sf::require(v.is_array() && static_cast<int>(v.size()) == dim, sf::ErrorCode::InvalidArgument,
                std::string("field '") + name + "' must be an array of " + std::to_string(dim) + " numbers");
    sf::MatF z(1, dim);
    for (int i = 0; i < dim; ++i) {
        sf::require(v[i].is_number(), sf::ErrorCode::InvalidArgument,
                    std::string("field '") + name + "' must contain only numbers");
        z(0, i) = v[i].get<float>();
        sf::require(std::isfinite(z(0, i)), sf::ErrorCode::InvalidArgument,
                    std::string("field '") + name + "' must be finite");
    }
    return z;
}

sf::Point point_field(const json& j, const char* name, sf::Point fallback) {
    auto it = j.find(name);
    if (it == j.end() || it->is_null()) {
        return fallback;
    }
    sf::require(it->is_array() && it->size() == 2 && (*it)[0].is_number() && (*it)[1].is_number(),
                sf::ErrorCode::InvalidArgument, std::string("field '") + name + "' must be [x, y]");
    return {(*it)[0].get<double>(), (*it)[1].get<double>()};
}

json ranked_json(const std::vector<sf::Ranked>& hits) {
    json out = json::array();
    for (const auto& h : hits) {
        out.push_back({{"id", h.id}, {"score", h.score}});
    }
    return out;
}

sf::Split split_from(const char* name) {
    const std::string s = name ? name : "test";
    if (s == "train") {
        return sf::Split::Train;
    }
    sf::require(s == "test", sf::ErrorCode::InvalidArgument, "split must be 'train' or 'test'");
    return sf::Split::Test;
}

sf::Metric metric_from(const char* name) { return sf::metric_from_name(name ? name : "cosine"); }

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream in(s);
    std::string part;
    while (std::getline(in, part, ',')) {
        if (!part.empty()) {
            out.push_back(part);
        }
    }
    return out;
}

sf::SketchCodec tokenizer_for(const char* scheme, const sf_codebook* codebook, int grid_n) {
    need(scheme, "scheme");
    sf::SketchCodec codec;
    codec.kind = sf::codec_kind_from_name(scheme);
    if (codec.kind == sf::CodecKind::Dict) {
        sf::require(codebook != nullptr, sf::ErrorCode::Usage, "the dict scheme needs a codebook");
        codec.codebook = codebook->value;
    } else if (codec.kind == sf::CodecKind::Grid) {
        sf::require(grid_n >= 2, sf::ErrorCode::InvalidArgument, "grid_n must be at least 2");
        codec.grid.n = grid_n;
    }
    return codec;
}

json metrics_json(const sf::JointPhaseMetrics& m) {
    return {{"triplet_satisfaction", m.triplet_satisfaction},
            {"own_instance_rank", m.own_instance_rank},
            {"category_map", m.category_map}};
}

} // namespace

extern "C" {

const char* sf_version(void) { return "0.1.0"; }

const char* sf_status_name(sf_status status) {
    if (status == SF_OK) {
        return "ok";
    }
    if (status < SF_ERR_INVALID_ARGUMENT || status > SF_ERR_INTERNAL) {
        return "unknown";
    }
    return sf::error_code_name(static_cast<sf::ErrorCode>(status));
}

const char* sf_last_error(void) { return g_last_error.c_str(); }

void sf_string_free(char* s) { std::free(s); }

sf_status sf_file_digest(const char* path, char** out_hex) {
    return guarded([&] {
        need(path, "path");
        need(out_hex, "out_hex");
        *out_hex = dup(sf::file_digest(path));
    });
}

// ---- datasets -------------------------------------------------------------

sf_status sf_dataset_synth(const char* classes_csv, uint32_t train_per_class, uint32_t test_per_class, uint64_t seed,
                           double rdp_epsilon, sf_dataset** out) {
    return guarded([&] {
        need(out, "out");
        std::vector<sf::ShapeClass> classes;
        for (const auto& name : split_csv(classes_csv ? classes_csv : "")) {
            classes.push_back(sf::shape_class_from_name(name));
        }
        if (classes.empty()) {
            for (int i = 0; i < sf::kShapeClassCount; ++i) {
                classes.push_back(static_cast<sf::ShapeClass>(i));
            }
        }
        *out = new sf_dataset{sf::build_synthetic(classes, train_per_class, test_per_class, seed, rdp_epsilon)};
    });
}

sf_status sf_dataset_ingest(const char* ndjson_path, double rdp_epsilon, double test_fraction, uint64_t seed,
                            sf_dataset** out) {
    return guarded([&] {
        need(ndjson_path, "ndjson_path");
        need(out, "out");
        std::ifstream in(ndjson_path);
        sf::require(static_cast<bool>(in), sf::ErrorCode::Io, std::string("cannot open ") + ndjson_path);
        *out = new sf_dataset{sf::ingest_quickdraw(in, rdp_epsilon, test_fraction, seed)};
    });
}

sf_status sf_dataset_load(const char* path, sf_dataset** out) {
    return guarded([&] {
        need(path, "path");
        need(out, "out");
        *out = new sf_dataset{sf::load_dataset(path)};
    });
}

sf_status sf_dataset_save(const sf_dataset* dataset, const char* path) {
    return guarded([&] {
        need(dataset, "dataset");
        need(path, "path");
        sf::save_dataset(dataset->value, path);
    });
}

void sf_dataset_free(sf_dataset* dataset) { delete dataset; }

sf_status sf_dataset_info(const sf_dataset* dataset, char** out_json) {
    return guarded([&] {
        need(dataset, "dataset");
        need(out_json, "out_json");
        const auto& ds = dataset->value;
        json j = {{"items", ds.items.size()},
                  {"train", ds.indices(sf::Split::Train).size()},
                  {"test", ds.indices(sf::Split::Test).size()},
                  {"classes", ds.meta.class_names},
                  {"rdp_epsilon", ds.meta.rdp_epsilon},
                  {"offset_scale", ds.meta.offset_scale}};
        *out_json = dup(j.dump());
    });
}

sf_status sf_dataset_sketch(const sf_dataset* dataset, const char* id, char** out_json) {
    return guarded([&] {
        need(dataset, "dataset");
        need(id, "id");
        need(out_json, "out_json");
        const auto& ds = dataset->value;
        const sf::ClassTable classes(ds.meta.class_names);
        *out_json = dup(sf::sketch_to_quickdraw(ds.items[ds.find_id(id)].sketch(), &classes));
    });
}

// ---- tokenizers -----------------------------------------------------------

sf_status sf_codebook_fit(const sf_dataset* dataset, int k, uint64_t sample_size, double lift_fraction, uint64_t seed,
                          sf_codebook** out, char** out_report_json) {
    return guarded([&] {
        need(dataset, "dataset");
        need(out, "out");
        std::vector<sf::Stroke3Seq> corpus;
        for (auto i : dataset->value.indices(sf::Split::Train)) {
            corpus.push_back(dataset->value.items[i].seq);
        }
        auto fit = sf::fit_codebook(corpus, k, sample_size, lift_fraction, seed, dataset->value.meta.offset_scale);
        json report = {{"k", k},
                       {"sample_size", sample_size},
                       {"iterations", fit.kmeans.iterations},
                       {"objective_history", fit.kmeans.objective_history}};
        auto* cb = new sf_codebook{std::move(fit.codebook)};
        try {
            give(out_report_json, report.dump());
        } catch (...) {
            delete cb;
            throw;
        }
        *out = cb;
    });
}

sf_status sf_codebook_load(const char* path, sf_codebook** out) {
    return guarded([&] {
        need(path, "path");
        need(out, "out");
        *out = new sf_codebook{sf::load_codebook(path)};
    });
}

sf_status sf_codebook_save(const sf_codebook* codebook, const char* path) {
    return guarded([&] {
        need(codebook, "codebook");
        need(path, "path");
        sf::save_codebook(codebook->value, path);
    });
}

void sf_codebook_free(sf_codebook* codebook) { delete codebook; }

sf_status sf_tokenize(const char* scheme, const sf_codebook* codebook, int grid_n, int max_len,
                      const char* sketch_json, char** out_json) {
    return guarded([&] {
        need(sketch_json, "sketch_json");
        need(out_json, "out_json");
        sf::require(max_len >= 2, sf::ErrorCode::InvalidArgument, "max_len must be at least 2");
        const sf::SketchCodec codec = tokenizer_for(scheme, codebook, grid_n);
        sf::Sketch sketch = sf::parse_quickdraw(sketch_json);
        sketch.validate();
        const sf::SequenceInput in = codec.encode(sketch, static_cast<std::size_t>(max_len));
        const sf::Point o = sf::sketch_origin(sketch);
        json j = {{"scheme", sf::codec_kind_name(codec.kind)}, {"origin", {o.x, o.y}}};
        if (codec.kind == sf::CodecKind::Continuous) {
            json rows = json::array();
            for (const auto& r : in.rows) {
                rows.push_back({r.dx, r.dy, r.p1, r.p2, r.p3});
            }
            j["rows"] = std::move(rows);
        } else {
            j["vocab_size"] = codec.vocab_size();
            j["tokens"] = in.tokens;
        }
        *out_json = dup(j.dump());
    });
}

sf_status sf_detokenize(const sf_codebook* codebook, int grid_n, const char* tokens_json, char** out_json) {
    return guarded([&] {
        need(out_json, "out_json");
        const json j = parse_body(tokens_json);
        const std::string scheme = field(j, "scheme").get<std::string>();
        const sf::SketchCodec codec = tokenizer_for(scheme.c_str(), codebook, grid_n);
        const sf::Point origin = point_field(j, "origin", {0, 0});
        sf::SequenceInput in;
        if (codec.kind == sf::CodecKind::Continuous) {
            for (const auto& r : field(j, "rows")) {
                sf::require(r.is_array() && r.size() == 5, sf::ErrorCode::InvalidArgument,
                            "field 'rows' must hold [dx, dy, p1, p2, p3] rows");
                in.rows.push_back({r[0].get<double>(), r[1].get<double>(), r[2].get<double>(), r[3].get<double>(),
                                   r[4].get<double>()});
            }
        } else {
            in.tokens = field(j, "tokens").get<std::vector<int>>();
            for (int t : in.tokens) {
                sf::require(t >= 0 && t < codec.vocab_size(), sf::ErrorCode::Decode,
                            "token " + std::to_string(t) + " is outside the vocabulary");
            }
        }
        *out_json = dup(json{{"strokes", strokes_json(codec.decode(in, origin))}}.dump());
    });
}

sf_status sf_quantization_report(const sf_dataset* dataset, const char* options_json, char** out_csv) {
    return guarded([&] {
        need(dataset, "dataset");
        need(out_csv, "out_csv");
        sf::QuantizationOptions opt;
        sf::Split split = sf::Split::Test;
        if (options_json && *options_json) {
            const json j = parse_body(options_json);
            if (j.contains("grid_sizes")) {
                opt.grid_sizes = j["grid_sizes"].get<std::vector<int>>();
            }
            if (j.contains("dict_sizes")) {
                opt.dict_sizes = j["dict_sizes"].get<std::vector<int>>();
            }
            opt.sample_size = optional_number<std::size_t>(j, "sample_size", opt.sample_size);
            opt.lift_fraction = optional_number<double>(j, "lift_fraction", opt.lift_fraction);
            opt.seed = optional_number<std::uint64_t>(j, "seed", opt.seed);
            if (j.contains("split")) {
                split = split_from(j["split"].get<std::string>().c_str());
            }
        }
        *out_csv = dup(sf::quantization_csv(sf::quantization_report(dataset->value, split, opt)));
    });
}

// ---- training -------------------------------------------------------------

sf_status sf_train(const sf_dataset* dataset, const char* config_text, const sf_codebook* codebook,
                   const char* resume_path, const char* checkpoint_path, sf_log_fn log, void* user,
                   char** out_summary_json) {
    return guarded([&] {
        need(dataset, "dataset");
        need(checkpoint_path, "checkpoint_path");
        const std::string text = config_text ? config_text : "";
        sf::Checkpoint ck;
        if (resume_path && *resume_path) {
            ck = sf::load_checkpoint(resume_path);
            // Overrides only touch schedule keys; shape changes are refused.
            sf::TrainConfig merged = sf::TrainConfig::parse(ck.train.to_text() + "\n" + text);
            merged.model.mode = ck.train.model.mode;
            merged.model.vocab_size = ck.train.model.vocab_size;
            merged.model.n_classes = ck.train.model.n_classes;
            sf::require(merged.model == ck.train.model && merged.scheme == ck.train.scheme, sf::ErrorCode::Config,
                        "resume cannot change the model shape or scheme");
            ck.train = merged;
        } else {
            const sf::TrainConfig cfg = sf::TrainConfig::parse(text);
            const sf::Codebook* cb = codebook ? &codebook->value : nullptr;
            ck = sf::new_checkpoint(cfg, sf::make_codec(cfg, dataset->value.meta, cb), dataset->value.meta);
        }
        const int every = std::max(1, ck.train.log_every);
        const auto summary = sf::run_training(ck, dataset->value, [&](const sf::LossReport& r) {
            if (log && (r.step % every == 0 || r.step == ck.train.steps)) {
                log(r.to_json().c_str(), user);
            }
        });
        sf::save_checkpoint(ck, checkpoint_path);
        json j = {{"steps", ck.optimizer.step},
                  {"examples", summary.examples},
                  {"skipped", summary.skipped},
                  {"checkpoint", checkpoint_path},
                  {"last", json::parse(summary.last.to_json())}};
        give(out_summary_json, j.dump());
    });
}

// ---- inference ------------------------------------------------------------

sf_status sf_model_load(const char* checkpoint_path, sf_model** out) {
    return guarded([&] {
        need(checkpoint_path, "checkpoint_path");
        need(out, "out");
        *out = new sf_model{sf::Engine::load(checkpoint_path)};
    });
}

void sf_model_free(sf_model* model) { delete model; }

sf_status sf_model_info(const sf_model* model, char** out_json) {
    return guarded([&] {
        need(model, "model");
        need(out_json, "out_json");
        const auto& ck = model->engine.checkpoint();
        const auto& mc = ck.train.model;
        json j = {{"digest", model->engine.digest()},
                  {"scheme", sf::codec_kind_name(ck.codec.kind)},
                  {"mode", mc.mode == sf::InputMode::Tokenized ? "tokenized" : "continuous"},
                  {"vocab_size", mc.vocab_size},
                  {"d_model", mc.d_model},
                  {"n_layers", mc.n_layers},
                  {"n_heads", mc.n_heads},
                  {"max_len", mc.max_len},
                  {"steps", ck.optimizer.step},
                  {"classes", ck.meta.class_names}};
        *out_json = dup(j.dump());
    });
}

sf_status sf_model_encode(const sf_model* model, const char* request_json, char** out_json) {
    return guarded([&] {
        need(model, "model");
        need(out_json, "out_json");
        const json j = parse_body(request_json);
        *out_json = dup(json{{"embedding", row_json(model->engine.embed(sketch_field(j, "strokes")))}}.dump());
    });
}

sf_status sf_model_decode(const sf_model* model, const char* request_json, char** out_json) {
    return guarded([&] {
        need(model, "model");
        need(out_json, "out_json");
        const json j = parse_body(request_json);
        const sf::MatF z = embedding_field(j, "embedding", model->engine.model().config().d_model);
        const sf::Point origin = point_field(j, "origin", {127.5, 127.5});
        *out_json = dup(json{{"strokes", strokes_json(model->engine.generate(z, origin))}}.dump());
    });
}

sf_status sf_model_reconstruct(const sf_model* model, const char* request_json, char** out_json) {
    return guarded([&] {
        need(model, "model");
        need(out_json, "out_json");
        const json j = parse_body(request_json);
        *out_json = dup(json{{"strokes", strokes_json(model->engine.reconstruct(sketch_field(j, "strokes")))}}.dump());
    });
}

sf_status sf_model_interpolate(const sf_model* model, const char* request_json, char** out_json) {
    return guarded([&] {
        need(model, "model");
        need(out_json, "out_json");
        const json j = parse_body(request_json);
        const sf::Sketch a = sketch_field(j, "a");
        const sf::Sketch b = sketch_field(j, "b");
        const int steps = positive_int(j, "steps", 10, 256);
        sf::require(steps >= 2, sf::ErrorCode::InvalidArgument, "field 'steps' must be at least 2");
        json frames = json::array();
        for (const auto& s : model->engine.interpolate(a, b, steps)) {
            frames.push_back(strokes_json(s));
        }
        *out_json = dup(json{{"t", sf::interpolation_grid(steps)}, {"frames", std::move(frames)}}.dump());
    });
}

sf_status sf_model_classify(const sf_model* model, const char* request_json, char** out_json) {
    return guarded([&] {
        need(model, "model");
        need(out_json, "out_json");
        const json j = parse_body(request_json);
        const sf::Classification c = model->engine.classify(sketch_field(j, "strokes"));
        const auto& names = model->engine.class_names();
        json out = {{"class", c.label}, {"probabilities", c.probabilities}};
        out["label"] = c.label < static_cast<int>(names.size()) ? json(names[c.label]) : json(nullptr);
        *out_json = dup(out.dump());
    });
}

sf_status sf_model_perturb(const sf_model* model, const char* request_json, char** out_json) {
    return guarded([&] {
        need(model, "model");
        need(out_json, "out_json");
        const json j = parse_body(request_json);
        const sf::Sketch s = sketch_field(j, "strokes");
        const double sigma = number_field(j, "sigma");
        sf::require(std::isfinite(sigma) && sigma >= 0, sf::ErrorCode::InvalidArgument,
                    "field 'sigma' must be a finite non-negative number");
        const auto seed = optional_number<std::uint64_t>(j, "seed", 0);
        *out_json = dup(json{{"strokes", strokes_json(model->engine.perturb(s, sigma, seed))}}.dump());
    });
}

sf_status sf_model_retrieve(const sf_model* model, const sf_index* index, const char* request_json, char** out_json) {
    return guarded([&] {
        need(model, "model");
        need(index, "index");
        need(out_json, "out_json");
        const json j = parse_body(request_json);
        const sf::Sketch s = sketch_field(j, "strokes");
        const int k = positive_int(j, "k", 10, 1000000);
        sf::require(index->value.vectors().cols() == model->engine.model().config().d_model, sf::ErrorCode::Config,
                    "index dimension does not match the model");
        const auto hits = index->value.knn(model->engine.embed(s), static_cast<std::size_t>(k));
        *out_json = dup(json{{"results", ranked_json(hits)}}.dump());
    });
}

sf_status sf_model_embed_dataset(const sf_model* model, const sf_dataset* dataset, const char* split,
                                 const char* metric, sf_index** out) {
    return guarded([&] {
        need(model, "model");
        need(dataset, "dataset");
        need(out, "out");
        *out = new sf_index{model->engine.build_index(dataset->value, split_from(split), metric_from(metric))};
    });
}

sf_status sf_model_eval_classify(const sf_model* model, const sf_dataset* dataset, const char* split,
                                 char** out_json) {
    return guarded([&] {
        need(model, "model");
        need(dataset, "dataset");
        need(out_json, "out_json");
        const auto r = sf::eval_classify(model->engine, dataset->value, split_from(split));
        *out_json = dup(json{{"items", r.items}, {"skipped", r.skipped}, {"accuracy", r.accuracy}}.dump());
    });
}

sf_status sf_model_eval_retrieval(const sf_model* model, const sf_dataset* dataset, const char* split, int k,
                                  const char* metric, char** out_json) {
    return guarded([&] {
        need(model, "model");
        need(dataset, "dataset");
        need(out_json, "out_json");
        sf::require(k >= 1, sf::ErrorCode::InvalidArgument, "k must be positive");
        const auto r = sf::eval_retrieval(model->engine, dataset->value, split_from(split),
                                          static_cast<std::size_t>(k), metric_from(metric));
        *out_json =
            dup(json{{"queries", r.queries}, {"mean_ap", r.mean_ap}, {"precision_at", r.precision_at}}.dump());
    });
}

sf_status sf_index_load(const char* path, sf_index** out) {
    return guarded([&] {
        need(path, "path");
        need(out, "out");
        *out = new sf_index{sf::EmbeddingIndex::load(path)};
    });
}

sf_status sf_index_save(const sf_index* index, const char* path) {
    return guarded([&] {
        need(index, "index");
        need(path, "path");
        index->value.save(path);
    });
}

void sf_index_free(sf_index* index) { delete index; }

sf_status sf_index_info(const sf_index* index, char** out_json) {
    return guarded([&] {
        need(index, "index");
        need(out_json, "out_json");
        json j = {{"size", index->value.size()},
                  {"dim", index->value.vectors().cols()},
                  {"metric", sf::metric_name(index->value.metric())}};
        *out_json = dup(j.dump());
    });
}

// ---- cross-modal ----------------------------------------------------------

sf_status sf_joint_train(const sf_model* model, const sf_dataset* dataset, const char* config_json,
                         const char* joint_path, char** out_report_json) {
    return guarded([&] {
        need(model, "model");
        need(dataset, "dataset");
        need(joint_path, "joint_path");
        sf::JointConfig cfg;
        sf::RasterTrainConfig raster;
        if (config_json && *config_json) {
            const json j = parse_body(config_json);
            cfg.phase1_steps = optional_number<int>(j, "phase1_steps", cfg.phase1_steps);
            cfg.phase2_steps = optional_number<int>(j, "phase2_steps", cfg.phase2_steps);
            cfg.batch_size = optional_number<int>(j, "batch_size", cfg.batch_size);
            cfg.margin1 = optional_number<double>(j, "margin1", cfg.margin1);
            cfg.margin2 = optional_number<double>(j, "margin2", cfg.margin2);
            cfg.cls_weight = optional_number<double>(j, "cls_weight", cfg.cls_weight);
            cfg.learning_rate = optional_number<double>(j, "learning_rate", cfg.learning_rate);
            cfg.seed = optional_number<std::uint64_t>(j, "seed", cfg.seed);
            raster.steps = optional_number<int>(j, "raster_steps", raster.steps);
        }
        sf::JointModel joint;
        const auto r = sf::build_joint_model(model->engine, dataset->value, cfg, raster, joint);
        joint.save(joint_path);
        json report = {{"raster_train_accuracy", r.raster_train_accuracy},
                       {"raster_test_accuracy", r.raster_test_accuracy},
                       {"after_phase1", metrics_json(r.after_phase1)},
                       {"after_phase2", metrics_json(r.after_phase2)},
                       {"encoder_frozen", r.encoder_frozen},
                       {"raster_frozen", r.raster_frozen},
                       {"steps", r.steps.size()}};
        if (!r.steps.empty()) {
            report["final_triplet_loss"] = r.steps.back().triplet;
        }
        give(out_report_json, report.dump());
    });
}

sf_status sf_joint_load(const char* path, sf_joint** out) {
    return guarded([&] {
        need(path, "path");
        need(out, "out");
        *out = new sf_joint{sf::JointModel::load(path)};
    });
}

void sf_joint_free(sf_joint* joint) { delete joint; }

sf_status sf_joint_embed_images(const sf_joint* joint, const sf_dataset* dataset, const char* split, sf_index** out) {
    return guarded([&] {
        need(joint, "joint");
        need(dataset, "dataset");
        need(out, "out");
        *out = new sf_index{sf::joint_image_index(joint->value, dataset->value, split_from(split))};
    });
}

sf_status sf_joint_retrieve(const sf_joint* joint, const sf_model* model, const sf_index* images,
                            const char* request_json, char** out_json) {
    return guarded([&] {
        need(joint, "joint");
        need(model, "model");
        need(images, "images");
        need(out_json, "out_json");
        sf::require(joint->value.encoder_digest.empty() || joint->value.encoder_digest == model->engine.digest(),
                    sf::ErrorCode::Config, "joint model was trained on a different checkpoint");
        const json j = parse_body(request_json);
        const sf::Sketch s = sketch_field(j, "strokes");
        const int k = positive_int(j, "k", 10, 1000000);
        const auto hits =
            sf::sbir_query(joint->value.heads, model->engine.embed(s), images->value, static_cast<std::size_t>(k));
        *out_json = dup(json{{"results", ranked_json(hits)}}.dump());
    });
}

} // extern "C"
