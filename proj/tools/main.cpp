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


// sketchformer command-line driver. Every subcommand goes through the C API;
// failures print one line `error code=<name> message="..."` to stderr and exit
// with the status number.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "service.hpp"
#include "sketchformer/sketchformer.h"

namespace {

using json = nlohmann::json;

struct Failure {
    sf_status status;
    std::string message;
};

void check(sf_status st) {
    if (st != SF_OK) {
        throw Failure{st, sf_last_error()};
    }
}

[[noreturn]] void usage(const std::string& message) { throw Failure{SF_ERR_USAGE, message}; }

std::string take(char* s) {
    std::string out = s ? s : "";
    sf_string_free(s);
    return out;
}

// Relative data paths that do not exist fall back to $SKETCHFORMER_DATA.
std::string data_path(const std::string& path) {
    namespace fs = std::filesystem;
    const char* root = std::getenv("SKETCHFORMER_DATA");
    if (root && !path.empty() && fs::path(path).is_relative() && !fs::exists(path)) {
        return (fs::path(root) / path).string();
    }
    return path;
}

std::string read_text(const std::string& path) {
    if (path == "-") {
        return {std::istreambuf_iterator<char>(std::cin), {}};
    }
    std::ifstream in(data_path(path), std::ios::binary);
    if (!in) {
        throw Failure{SF_ERR_IO, "cannot open " + path};
    }
    return {std::istreambuf_iterator<char>(in), {}};
}

void write_output(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        if (!text.empty() && text.back() != '\n') {
            std::cout << '\n';
        }
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!(out << text)) {
        throw Failure{SF_ERR_IO, "cannot write " + path};
    }
}

template <class T, void (*Free)(T*)>
struct Handle {
    T* p = nullptr;
    Handle() = default;
    Handle(const Handle&) = delete;
    Handle& operator=(const Handle&) = delete;
    ~Handle() { Free(p); }
    T** out() { return &p; }
};

using Dataset = Handle<sf_dataset, sf_dataset_free>;
using Codebook = Handle<sf_codebook, sf_codebook_free>;
using Model = Handle<sf_model, sf_model_free>;
using Index = Handle<sf_index, sf_index_free>;
using Joint = Handle<sf_joint, sf_joint_free>;

void load_dataset(Dataset& ds, const std::string& path) { check(sf_dataset_load(data_path(path).c_str(), ds.out())); }
void load_model(Model& m, const std::string& path) { check(sf_model_load(path.c_str(), m.out())); }

// A sketch comes from a file (QuickDraw record, bare stroke list, or
// {"strokes": ...}) or from a dataset item.
struct SketchSource {
    std::string file;
    std::string data;
    std::string id;

    void add(CLI::App* app) {
        app->add_option("--sketch", file, "Sketch file (QuickDraw record or stroke list; - for stdin)");
        app->add_option("--data", data, "Dataset cache to take --id from");
        app->add_option("--id", id, "Sketch id within --data");
    }

    json strokes() const {
        std::string text;
        if (!file.empty()) {
            text = read_text(file);
        } else if (!data.empty() && !id.empty()) {
            Dataset ds;
            load_dataset(ds, data);
            char* out = nullptr;
            check(sf_dataset_sketch(ds.p, id.c_str(), &out));
            text = take(out);
        } else {
            usage("give --sketch, or --data with --id");
        }
        json j = json::parse(text, nullptr, false);
        if (j.is_discarded()) {
            throw Failure{SF_ERR_PARSE, "sketch input is not valid JSON"};
        }
        if (j.is_object() && j.contains("drawing")) {
            return j["drawing"];
        }
        if (j.is_object() && j.contains("strokes")) {
            return j["strokes"];
        }
        return j;
    }
};

std::string sketch_request(const SketchSource& src, json extra = json::object()) {
    extra["strokes"] = src.strokes();
    return extra.dump();
}

std::string model_call(const std::string& checkpoint, sf_status (*fn)(const sf_model*, const char*, char**),
                       const std::string& request) {
    Model m;
    load_model(m, checkpoint);
    char* out = nullptr;
    check(fn(m.p, request.c_str(), &out));
    return take(out);
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\\') {
            out += '\\';
            out += c;
        } else if (c == '\n') {
            out += "\\n";
        } else {
            out += c;
        }
    }
    return out;
}

void log_line(const char* line, void*) { std::cerr << line << '\n'; }

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sketchformer: transformer embeddings for vector sketches"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for every subcommand");

    std::string out_path;
    std::string data;
    std::string checkpoint;
    std::string split = "test";
    std::uint64_t seed = 1;

    // synth
    auto* synth = app.add_subcommand("synth", "Generate the synthetic shape corpus");
    std::string classes;
    std::uint32_t train_n = 500, test_n = 100;
    double rdp = 2.0;
    synth->add_option("--classes", classes, "Comma-separated subset of circle,square,triangle,zigzag,star");
    synth->add_option("--train-per-class", train_n, "Training sketches per class")->capture_default_str();
    synth->add_option("--test-per-class", test_n, "Test sketches per class")->capture_default_str();
    synth->add_option("--rdp", rdp, "RDP simplification epsilon")->capture_default_str();
    synth->add_option("--seed", seed, "Random seed")->capture_default_str();
    synth->add_option("--out", out_path, "Dataset cache to write")->required();

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Convert QuickDraw ndjson into a dataset cache");
    std::string input;
    double test_fraction = 0.1;
    ingest->add_option("--input", input, "Newline-delimited QuickDraw records")->required();
    ingest->add_option("--rdp", rdp, "RDP simplification epsilon")->capture_default_str();
    ingest->add_option("--test-fraction", test_fraction, "Fraction of records held out")->capture_default_str();
    ingest->add_option("--seed", seed, "Random seed")->capture_default_str();
    ingest->add_option("--out", out_path, "Dataset cache to write")->required();

    // fit-dict
    auto* fit = app.add_subcommand("fit-dict", "Fit the K-means stroke dictionary");
    int k = 1000;
    std::uint64_t sample = 100000;
    double lift = 0.2;
    fit->add_option("--data", data, "Dataset cache")->required();
    fit->add_option("--k", k, "Dictionary size")->capture_default_str();
    fit->add_option("--sample", sample, "Movements sampled for clustering")->capture_default_str();
    fit->add_option("--lift-fraction", lift, "Share of the sample taken after pen lifts")->capture_default_str();
    fit->add_option("--seed", seed, "Random seed")->capture_default_str();
    fit->add_option("--out", out_path, "Codebook file to write")->required();

    // train
    auto* train = app.add_subcommand("train", "Train the autoencoder and write a checkpoint");
    std::string config_file, codebook_path, resume, mode;
    std::vector<std::string> overrides;
    std::optional<int> steps;
    bool shuffle = false;
    std::optional<std::uint64_t> train_seed;
    train->add_option("--data", data, "Dataset cache")->required();
    train->add_option("--config", config_file, "key=value training config");
    train->add_option("--mode", mode, "Input scheme: dict, grid or continuous")
        ->check(CLI::IsMember({"dict", "grid", "continuous"}));
    train->add_option("--codebook", codebook_path, "Codebook for the dict scheme");
    train->add_option("--steps", steps, "Total optimizer steps");
    train->add_option("--seed", train_seed, "Random seed");
    train->add_flag("--shuffle-strokes", shuffle, "Permute stroke order in every training sketch");
    train->add_option("--set", overrides, "Extra key=value config assignments");
    train->add_option("--resume", resume, "Continue from this checkpoint");
    train->add_option("--out", out_path, "Checkpoint to write")->required();

    // encode / decode (tokenizer)
    auto* encode = app.add_subcommand("encode", "Tokenize a sketch");
    auto* decode = app.add_subcommand("decode", "Turn tokens from `encode` back into a sketch");
    std::string scheme = "dict";
    int grid_n = 100, max_len = 200;
    SketchSource encode_src;
    encode->add_option("--scheme", scheme, "dict, grid or continuous")
        ->check(CLI::IsMember({"dict", "grid", "continuous"}))
        ->capture_default_str();
    encode->add_option("--codebook", codebook_path, "Codebook for the dict scheme");
    encode->add_option("--grid-n", grid_n, "Grid cells per side")->capture_default_str();
    encode->add_option("--max-len", max_len, "Maximum sequence length")->capture_default_str();
    encode_src.add(encode);
    std::string tokens_file;
    decode->add_option("--tokens", tokens_file, "Output of `encode` (- for stdin)")->required();
    decode->add_option("--codebook", codebook_path, "Codebook for the dict scheme");
    decode->add_option("--grid-n", grid_n, "Grid cells per side")->capture_default_str();

    // model commands
    auto* embed = app.add_subcommand("embed", "Embed one sketch, or dump a split's embeddings");
    SketchSource embed_src;
    std::string metric = "cosine";
    embed->add_option("--checkpoint", checkpoint, "Model checkpoint")->required();
    embed_src.add(embed);
    embed->add_option("--split", split, "Split to dump when no --id/--sketch is given")->capture_default_str();
    embed->add_option("--metric", metric, "Index metric: cosine or euclidean")->capture_default_str();
    embed->add_option("--out", out_path, "Embedding dump to write (split mode)");

    auto* reconstruct = app.add_subcommand("reconstruct", "Encode and greedily decode a sketch");
    SketchSource recon_src;
    reconstruct->add_option("--checkpoint", checkpoint, "Model checkpoint")->required();
    recon_src.add(reconstruct);

    auto* classify = app.add_subcommand("classify", "Predict the category of a sketch");
    SketchSource cls_src;
    classify->add_option("--checkpoint", checkpoint, "Model checkpoint")->required();
    cls_src.add(classify);

    auto* interp = app.add_subcommand("interpolate", "Slerp between two dataset sketches");
    std::string id_a, id_b;
    int interp_steps = 10;
    interp->add_option("--checkpoint", checkpoint, "Model checkpoint")->required();
    interp->add_option("--data", data, "Dataset cache")->required();
    interp->add_option("--a", id_a, "First sketch id")->required();
    interp->add_option("--b", id_b, "Second sketch id")->required();
    interp->add_option("--steps", interp_steps, "Frames including both endpoints")->capture_default_str();

    auto* perturb = app.add_subcommand("perturb", "Decode a noisy copy of a sketch's embedding");
    SketchSource perturb_src;
    double sigma = 0.1;
    perturb->add_option("--checkpoint", checkpoint, "Model checkpoint")->required();
    perturb_src.add(perturb);
    perturb->add_option("--sigma", sigma, "Noise standard deviation")->capture_default_str();
    perturb->add_option("--seed", seed, "Random seed")->capture_default_str();

    auto* quant = app.add_subcommand("quantization-report", "Round-trip error of grid and dict tokenizers");
    std::vector<int> grid_sizes = {10, 20, 30, 40, 50, 60, 70, 80, 90, 100};
    std::vector<int> dict_sizes = {500, 1000};
    quant->add_option("--data", data, "Dataset cache")->required();
    quant->add_option("--split", split, "Split to measure")->capture_default_str();
    quant->add_option("--grid-sizes", grid_sizes, "Grid sizes n")->delimiter(',')->capture_default_str();
    quant->add_option("--dict-sizes", dict_sizes, "Dictionary sizes K")->delimiter(',')->capture_default_str();
    quant->add_option("--sample", sample, "Movements sampled per dictionary fit")->capture_default_str();
    quant->add_option("--seed", seed, "Random seed")->capture_default_str();
    quant->add_option("--out", out_path, "CSV file (stdout when omitted)");

    auto* joint = app.add_subcommand("train-joint", "Train the sketch/image joint embedding heads");
    int phase1 = 400, phase2 = 200, raster_steps = 600;
    std::uint64_t joint_seed = 11;
    joint->add_option("--checkpoint", checkpoint, "Model checkpoint supplying E")->required();
    joint->add_option("--data", data, "Dataset cache")->required();
    joint->add_option("--phase1-steps", phase1, "Steps with margin 0.2")->capture_default_str();
    joint->add_option("--phase2-steps", phase2, "Steps with margin 0.05")->capture_default_str();
    joint->add_option("--raster-steps", raster_steps, "Raster encoder pretraining steps")->capture_default_str();
    joint->add_option("--seed", joint_seed, "Random seed")->capture_default_str();
    joint->add_option("--out", out_path, "Joint model to write")->required();

    auto* retrieve = app.add_subcommand("retrieve", "k nearest neighbours of a sketch");
    SketchSource query_src;
    std::string index_path, joint_path, images_path;
    int top_k = 10;
    retrieve->add_option("--checkpoint", checkpoint, "Model checkpoint")->required();
    query_src.add(retrieve);
    retrieve->add_option("--index", index_path, "Embedding dump to search");
    retrieve->add_option("--joint", joint_path, "Joint model; searches --index as raster embeddings");
    retrieve->add_option("--images", images_path, "With --joint: dataset whose --split is rasterized and searched");
    retrieve->add_option("--split", split, "Split for --images")->capture_default_str();
    retrieve->add_option("--k", top_k, "Results")->capture_default_str();

    auto* eval_cls = app.add_subcommand("eval-classify", "Held-out classification accuracy");
    eval_cls->add_option("--checkpoint", checkpoint, "Model checkpoint")->required();
    eval_cls->add_option("--data", data, "Dataset cache")->required();
    eval_cls->add_option("--split", split, "Split to evaluate")->capture_default_str();

    auto* eval_ret = app.add_subcommand("eval-retrieval", "Sketch-to-sketch mAP and precision@k");
    eval_ret->add_option("--checkpoint", checkpoint, "Model checkpoint")->required();
    eval_ret->add_option("--data", data, "Dataset cache")->required();
    eval_ret->add_option("--split", split, "Split to evaluate")->capture_default_str();
    eval_ret->add_option("--k", top_k, "Largest k for precision@k")->capture_default_str();
    eval_ret->add_option("--metric", metric, "cosine or euclidean")->capture_default_str();

    auto* serve = app.add_subcommand("serve", "Serve the JSON inference API");
    std::string host = "127.0.0.1", origin = "*";
    int port = 8080;
    std::size_t max_body = 1 << 20;
    serve->add_option("--checkpoint", checkpoint, "Model checkpoint")->required();
    serve->add_option("--index", index_path, "Embedding dump for /api/retrieve");
    serve->add_option("--host", host, "Listen address")->capture_default_str();
    serve->add_option("--port", port, "Listen port")->capture_default_str();
    serve->add_option("--max-body", max_body, "Largest accepted request body in bytes")->capture_default_str();
    serve->add_option("--cors-origin", origin, "Allowed browser origin")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error code=usage_error message=\"" << escape(e.what()) << "\"\n";
        return SF_ERR_USAGE;
    }

    try {
        if (*synth) {
            Dataset ds;
            check(sf_dataset_synth(classes.c_str(), train_n, test_n, seed, rdp, ds.out()));
            check(sf_dataset_save(ds.p, out_path.c_str()));
            char* info = nullptr;
            check(sf_dataset_info(ds.p, &info));
            write_output("-", take(info));
        } else if (*ingest) {
            Dataset ds;
            check(sf_dataset_ingest(data_path(input).c_str(), rdp, test_fraction, seed, ds.out()));
            check(sf_dataset_save(ds.p, out_path.c_str()));
            char* info = nullptr;
            check(sf_dataset_info(ds.p, &info));
            write_output("-", take(info));
        } else if (*fit) {
            Dataset ds;
            load_dataset(ds, data);
            Codebook cb;
            char* report = nullptr;
            check(sf_codebook_fit(ds.p, k, sample, lift, seed, cb.out(), &report));
            check(sf_codebook_save(cb.p, out_path.c_str()));
            write_output("-", take(report));
        } else if (*train) {
            std::string text = config_file.empty() ? "" : read_text(config_file);
            text += '\n';
            if (!mode.empty()) {
                text += "scheme=" + mode + '\n';
            }
            if (!codebook_path.empty()) {
                text += "codebook=" + codebook_path + '\n';
            }
            if (steps) {
                text += "steps=" + std::to_string(*steps) + '\n';
            }
            if (train_seed) {
                text += "seed=" + std::to_string(*train_seed) + '\n';
            }
            if (shuffle) {
                text += "shuffle_strokes=true\n";
            }
            for (const auto& o : overrides) {
                text += o + '\n';
            }
            Dataset ds;
            load_dataset(ds, data);
            char* summary = nullptr;
            check(sf_train(ds.p, text.c_str(), nullptr, resume.empty() ? nullptr : resume.c_str(), out_path.c_str(),
                           log_line, nullptr, &summary));
            write_output("-", take(summary));
        } else if (*encode) {
            Codebook cb;
            if (!codebook_path.empty()) {
                check(sf_codebook_load(data_path(codebook_path).c_str(), cb.out()));
            }
            const std::string sketch = encode_src.strokes().dump();
            char* out = nullptr;
            check(sf_tokenize(scheme.c_str(), cb.p, grid_n, max_len, sketch.c_str(), &out));
            write_output("-", take(out));
        } else if (*decode) {
            Codebook cb;
            if (!codebook_path.empty()) {
                check(sf_codebook_load(data_path(codebook_path).c_str(), cb.out()));
            }
            char* out = nullptr;
            check(sf_detokenize(cb.p, grid_n, read_text(tokens_file).c_str(), &out));
            write_output("-", take(out));
        } else if (*embed) {
            if (!embed_src.file.empty() || !embed_src.id.empty()) {
                write_output("-", model_call(checkpoint, sf_model_encode, sketch_request(embed_src)));
            } else {
                if (embed_src.data.empty() || out_path.empty()) {
                    usage("split mode needs --data and --out");
                }
                Model m;
                load_model(m, checkpoint);
                Dataset ds;
                load_dataset(ds, embed_src.data);
                Index idx;
                check(sf_model_embed_dataset(m.p, ds.p, split.c_str(), metric.c_str(), idx.out()));
                check(sf_index_save(idx.p, out_path.c_str()));
                char* info = nullptr;
                check(sf_index_info(idx.p, &info));
                write_output("-", take(info));
            }
        } else if (*reconstruct) {
            write_output("-", model_call(checkpoint, sf_model_reconstruct, sketch_request(recon_src)));
        } else if (*classify) {
            write_output("-", model_call(checkpoint, sf_model_classify, sketch_request(cls_src)));
        } else if (*interp) {
            SketchSource a{"", data, id_a}, b{"", data, id_b};
            const json req = {{"a", a.strokes()}, {"b", b.strokes()}, {"steps", interp_steps}};
            write_output("-", model_call(checkpoint, sf_model_interpolate, req.dump()));
        } else if (*perturb) {
            const std::string req = sketch_request(perturb_src, {{"sigma", sigma}, {"seed", seed}});
            write_output("-", model_call(checkpoint, sf_model_perturb, req));
        } else if (*quant) {
            Dataset ds;
            load_dataset(ds, data);
            const json opt = {{"grid_sizes", grid_sizes}, {"dict_sizes", dict_sizes}, {"sample_size", sample},
                              {"seed", seed},             {"split", split}};
            char* csv = nullptr;
            check(sf_quantization_report(ds.p, opt.dump().c_str(), &csv));
            write_output(out_path, take(csv));
        } else if (*joint) {
            Model m;
            load_model(m, checkpoint);
            Dataset ds;
            load_dataset(ds, data);
            const json cfg = {{"phase1_steps", phase1},
                              {"phase2_steps", phase2},
                              {"raster_steps", raster_steps},
                              {"seed", joint_seed}};
            char* report = nullptr;
            check(sf_joint_train(m.p, ds.p, cfg.dump().c_str(), out_path.c_str(), &report));
            write_output("-", take(report));
        } else if (*retrieve) {
            Model m;
            load_model(m, checkpoint);
            const std::string req = sketch_request(query_src, {{"k", top_k}});
            Index idx;
            char* out = nullptr;
            if (!joint_path.empty()) {
                Joint j;
                check(sf_joint_load(joint_path.c_str(), j.out()));
                if (!index_path.empty()) {
                    check(sf_index_load(index_path.c_str(), idx.out()));
                } else if (!images_path.empty()) {
                    Dataset ds;
                    load_dataset(ds, images_path);
                    check(sf_joint_embed_images(j.p, ds.p, split.c_str(), idx.out()));
                } else {
                    usage("--joint needs --index or --images");
                }
                check(sf_joint_retrieve(j.p, m.p, idx.p, req.c_str(), &out));
            } else {
                if (index_path.empty()) {
                    usage("retrieve needs --index (see `embed --out`)");
                }
                check(sf_index_load(index_path.c_str(), idx.out()));
                check(sf_model_retrieve(m.p, idx.p, req.c_str(), &out));
            }
            write_output("-", take(out));
        } else if (*eval_cls) {
            Model m;
            load_model(m, checkpoint);
            Dataset ds;
            load_dataset(ds, data);
            char* out = nullptr;
            check(sf_model_eval_classify(m.p, ds.p, split.c_str(), &out));
            write_output("-", take(out));
        } else if (*eval_ret) {
            Model m;
            load_model(m, checkpoint);
            Dataset ds;
            load_dataset(ds, data);
            char* out = nullptr;
            check(sf_model_eval_retrieval(m.p, ds.p, split.c_str(), top_k, metric.c_str(), &out));
            write_output("-", take(out));
        } else if (*serve) {
            Model m;
            load_model(m, checkpoint);
            Index idx;
            if (!index_path.empty()) {
                check(sf_index_load(index_path.c_str(), idx.out()));
            }
            sketchformer::service::State state{m.p, idx.p, max_body, origin};
            std::cerr << "listening on " << host << ':' << port << '\n';
            if (!sketchformer::service::run_server(state, host, port)) {
                throw Failure{SF_ERR_IO, "cannot listen on " + host + ":" + std::to_string(port)};
            }
        }
    } catch (const Failure& f) {
        std::cerr << "error code=" << sf_status_name(f.status) << " message=\"" << escape(f.message) << "\"\n";
        return static_cast<int>(f.status);
    } catch (const std::exception& e) {
        std::cerr << "error code=internal_error message=\"" << escape(e.what()) << "\"\n";
        return SF_ERR_INTERNAL;
    }
    return 0;
}
