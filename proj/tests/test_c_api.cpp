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


#include <doctest.h>

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "service.hpp"
#include "sketchformer/sketchformer.h"

using json = nlohmann::json;
namespace svc = sketchformer::service;

namespace {

std::string tmp(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("sketchformer_capi_" + name)).string();
}

std::string take(char* s) {
    std::string out = s ? s : "";
    sf_string_free(s);
    return out;
}

const char* kSquare = R"([[[20,120,120,20,20],[20,20,120,120,20]]])";

// One small trained model shared by the tests in this file.
struct Fixture {
    sf_dataset* ds = nullptr;
    sf_model* model = nullptr;
    std::string checkpoint = tmp("model.bin");
    std::vector<std::string> log;

    Fixture() {
        REQUIRE(sf_dataset_synth("circle,square", 8, 3, 1, 2.0, &ds) == SF_OK);
        const char* cfg = "scheme=grid\ngrid_n=20\nd_model=16\nn_layers=1\nn_heads=2\nd_ff=32\nmax_len=48\n"
                          "steps=10\nbatch_size=4\nwarmup=5\nlog_every=5\n";
        char* summary = nullptr;
        REQUIRE(sf_train(ds, cfg, nullptr, nullptr, checkpoint.c_str(),
                         [](const char* line, void* user) { static_cast<Fixture*>(user)->log.emplace_back(line); },
                         this, &summary) == SF_OK);
        REQUIRE(json::parse(take(summary))["steps"] == 10);
        REQUIRE(sf_model_load(checkpoint.c_str(), &model) == SF_OK);
    }
    ~Fixture() {
        sf_model_free(model);
        sf_dataset_free(ds);
        std::filesystem::remove(checkpoint);
    }
};

Fixture& fixture() {
    static Fixture f;
    return f;
}

std::string call(sf_status (*fn)(const sf_model*, const char*, char**), const std::string& req,
                 sf_status expect = SF_OK) {
    char* out = nullptr;
    const sf_status st = fn(fixture().model, req.c_str(), &out);
    CHECK_MESSAGE(st == expect, sf_last_error());
    return take(out);
}

} // namespace

TEST_CASE("status names and argument checks") {
    CHECK(std::string(sf_status_name(SF_OK)) == "ok");
    CHECK(std::string(sf_status_name(SF_ERR_TRUNCATION)) == "truncation_error");
    CHECK(std::string(sf_status_name(static_cast<sf_status>(77))) == "unknown");
    CHECK(sf_dataset_load(nullptr, nullptr) == SF_ERR_INVALID_ARGUMENT);
    CHECK(std::string(sf_last_error()).find("must not be null") != std::string::npos);
    sf_dataset* ds = nullptr;
    CHECK(sf_dataset_load(tmp("missing.bin").c_str(), &ds) == SF_ERR_IO);
    CHECK(ds == nullptr);
    sf_model* m = nullptr;
    CHECK(sf_model_load(tmp("missing.bin").c_str(), &m) == SF_ERR_IO);
    CHECK(sf_dataset_synth("hexagon", 1, 1, 1, 2.0, &ds) == SF_ERR_INVALID_ARGUMENT);
    sf_dataset_free(nullptr);
    sf_model_free(nullptr);
}

TEST_CASE("datasets round trip through the C API") {
    auto& f = fixture();
    char* info = nullptr;
    REQUIRE(sf_dataset_info(f.ds, &info) == SF_OK);
    const json j = json::parse(take(info));
    CHECK(j["train"] == 16);
    CHECK(j["test"] == 6);
    const std::string path = tmp("ds.bin");
    REQUIRE(sf_dataset_save(f.ds, path.c_str()) == SF_OK);
    sf_dataset* back = nullptr;
    REQUIRE(sf_dataset_load(path.c_str(), &back) == SF_OK);
    char* again = nullptr;
    REQUIRE(sf_dataset_info(back, &again) == SF_OK);
    CHECK(json::parse(take(again)) == j);
    char* item = nullptr;
    CHECK(sf_dataset_sketch(back, "nope", &item) == SF_ERR_INVALID_ARGUMENT);
    sf_dataset_free(back);
    std::filesystem::remove(path);
}

TEST_CASE("tokenize and detokenize invert each other") {
    char* tokens = nullptr;
    REQUIRE(sf_tokenize("grid", nullptr, 50, 64, kSquare, &tokens) == SF_OK);
    const std::string t = take(tokens);
    CHECK(json::parse(t)["tokens"][0] == 1);
    char* strokes = nullptr;
    REQUIRE(sf_detokenize(nullptr, 50, t.c_str(), &strokes) == SF_OK);
    const json back = json::parse(take(strokes))["strokes"];
    const json orig = json::parse(kSquare);
    for (int i = 0; i < 5; ++i) {
        CHECK(std::abs(back[0][0][i].get<double>() - orig[0][0][i].get<double>()) <= 255.0 / 50);
    }
    CHECK(sf_tokenize("dict", nullptr, 50, 64, kSquare, &tokens) == SF_ERR_USAGE);
    CHECK(sf_tokenize("grid", nullptr, 50, 3, kSquare, &tokens) == SF_ERR_TRUNCATION);
    CHECK(sf_tokenize("grid", nullptr, 50, 64, "[[[1,2],[3]]]", &tokens) == SF_ERR_PARSE);
}

TEST_CASE("training reports progress and rejects bad configs") {
    auto& f = fixture();
    CHECK(f.log.size() == 2);
    CHECK(json::parse(f.log.back())["step"] == 10);
    char* out = nullptr;
    CHECK(sf_train(f.ds, "bogus_key=1", nullptr, nullptr, tmp("x.bin").c_str(), nullptr, nullptr, &out) ==
          SF_ERR_CONFIG);
    CHECK(sf_train(f.ds, "scheme=dict", nullptr, nullptr, tmp("x.bin").c_str(), nullptr, nullptr, &out) ==
          SF_ERR_CONFIG);
    // Resume may extend the schedule but not reshape the network.
    CHECK(sf_train(f.ds, "d_model=32", nullptr, f.checkpoint.c_str(), tmp("x.bin").c_str(), nullptr, nullptr, &out) ==
          SF_ERR_CONFIG);
    REQUIRE(sf_train(f.ds, "steps=12", nullptr, f.checkpoint.c_str(), tmp("x.bin").c_str(), nullptr, nullptr, &out) ==
            SF_OK);
    CHECK(json::parse(take(out))["steps"] == 12);
    std::filesystem::remove(tmp("x.bin"));
}

TEST_CASE("model calls accept and return service bodies") {
    auto& f = fixture();
    const std::string req = json{{"strokes", json::parse(kSquare)}}.dump();
    const json emb = json::parse(call(sf_model_encode, req));
    CHECK(emb["embedding"].size() == 16);

    const json recon = json::parse(call(sf_model_reconstruct, req));
    CHECK(recon["strokes"].is_array());
    const json decoded = json::parse(call(sf_model_decode, json{{"embedding", emb["embedding"]}}.dump()));
    CHECK(decoded == recon); // grid scheme ignores the origin

    const json cls = json::parse(call(sf_model_classify, req));
    CHECK(cls["probabilities"].size() == 2);
    CHECK((cls["label"] == "circle" || cls["label"] == "square"));

    const json same = json::parse(call(sf_model_perturb, json{{"strokes", json::parse(kSquare)}, {"sigma", 0}}.dump()));
    CHECK(same == recon);

    const std::string circle = R"([[[60,90,60,30,60],[30,60,90,60,30]]])";
    const json frames = json::parse(
        call(sf_model_interpolate, json{{"a", json::parse(kSquare)}, {"b", json::parse(circle)}, {"steps", 2}}.dump()));
    REQUIRE(frames["frames"].size() == 2);
    CHECK(frames["frames"][0] == recon["strokes"]);
    CHECK(frames["frames"][1] ==
          json::parse(call(sf_model_reconstruct, json{{"strokes", json::parse(circle)}}.dump()))["strokes"]);

    char* out = nullptr;
    CHECK(sf_model_eval_classify(f.model, f.ds, "test", &out) == SF_OK);
    CHECK(json::parse(take(out))["items"] == 6);
    CHECK(sf_model_eval_retrieval(f.model, f.ds, "test", 3, "cosine", &out) == SF_OK);
    CHECK(json::parse(take(out))["queries"] == 6);
    CHECK(sf_model_eval_classify(f.model, f.ds, "validation", &out) == SF_ERR_INVALID_ARGUMENT);
}

TEST_CASE("model calls name the offending field") {
    call(sf_model_encode, "{}", SF_ERR_INVALID_ARGUMENT);
    CHECK(std::string(sf_last_error()).find("'strokes'") != std::string::npos);
    call(sf_model_encode, "not json", SF_ERR_PARSE);
    call(sf_model_encode, R"({"strokes": [[[1,2],[3]]]})", SF_ERR_PARSE);
    CHECK(std::string(sf_last_error()).find("'strokes'") != std::string::npos);
    call(sf_model_decode, R"({"embedding": [1, 2]})", SF_ERR_INVALID_ARGUMENT);
    call(sf_model_perturb, json{{"strokes", json::parse(kSquare)}, {"sigma", -1}}.dump(), SF_ERR_INVALID_ARGUMENT);
    call(sf_model_interpolate, json{{"a", json::parse(kSquare)}, {"b", json::parse(kSquare)}, {"steps", 1}}.dump(),
         SF_ERR_INVALID_ARGUMENT);
}

TEST_CASE("embedding dumps feed retrieval") {
    auto& f = fixture();
    sf_index* index = nullptr;
    REQUIRE(sf_model_embed_dataset(f.model, f.ds, "train", "cosine", &index) == SF_OK);
    const std::string path = tmp("index.bin");
    REQUIRE(sf_index_save(index, path.c_str()) == SF_OK);
    sf_index* back = nullptr;
    REQUIRE(sf_index_load(path.c_str(), &back) == SF_OK);
    const std::string req = json{{"strokes", json::parse(kSquare)}, {"k", 3}}.dump();
    char *a = nullptr, *b = nullptr;
    REQUIRE(sf_model_retrieve(f.model, index, req.c_str(), &a) == SF_OK);
    REQUIRE(sf_model_retrieve(f.model, back, req.c_str(), &b) == SF_OK);
    const std::string ra = take(a);
    CHECK(ra == take(b));
    CHECK(json::parse(ra)["results"].size() == 3);
    sf_index_free(index);
    sf_index_free(back);
    std::filesystem::remove(path);
}

TEST_CASE("service routes map to the C API and HTTP statuses") {
    auto& f = fixture();
    sf_index* index = nullptr;
    REQUIRE(sf_model_embed_dataset(f.model, f.ds, "train", "cosine", &index) == SF_OK);
    svc::State state{f.model, index, 4096, "*"};
    const std::string body = json{{"strokes", json::parse(kSquare)}}.dump();

    auto health = svc::handle_request(state, "GET", "/api/health", "");
    CHECK(health.status == 200);
    char* digest = nullptr;
    REQUIRE(sf_file_digest(f.checkpoint.c_str(), &digest) == SF_OK);
    CHECK(json::parse(health.body)["digest"] == take(digest));
    CHECK(json::parse(health.body)["status"] == "ok");
    CHECK(svc::handle_request(state, "GET", "/api/config", "").status == 200);

    const auto r = svc::handle_request(state, "POST", "/api/reconstruct", body);
    CHECK(r.status == 200);
    CHECK(r.body == call(sf_model_reconstruct, body));
    CHECK(svc::handle_request(state, "POST", "/api/classify", body).body == call(sf_model_classify, body));
    CHECK(svc::handle_request(state, "POST", "/api/encode", body).body == call(sf_model_encode, body));
    CHECK(svc::handle_request(state, "POST", "/api/retrieve", json{{"strokes", json::parse(kSquare)}, {"k", 2}}.dump())
              .status == 200);

    const auto bad = svc::handle_request(state, "POST", "/api/reconstruct", R"({"stroke": []})");
    CHECK(bad.status == 400);
    CHECK(json::parse(bad.body)["error"]["message"].get<std::string>().find("'strokes'") != std::string::npos);
    CHECK(svc::handle_request(state, "POST", "/api/reconstruct", "{").status == 400);
    CHECK(svc::handle_request(state, "POST", "/api/reconstruct", std::string(5000, ' ')).status == 413);

    json xs = json::array(), ys = json::array();
    for (int i = 0; i < 200; ++i) {
        xs.push_back(i % 2 ? 10 : 240);
        ys.push_back(i);
    }
    const auto longer = svc::handle_request(state, "POST", "/api/reconstruct", json{{"strokes", {{xs, ys}}}}.dump());
    CHECK(longer.status == 413);
    CHECK(json::parse(longer.body)["error"]["code"] == "truncation_error");

    CHECK(svc::handle_request(state, "POST", "/api/reconstruct", body, "text/plain").status == 415);
    CHECK(svc::handle_request(state, "POST", "/api/nothing", body).status == 404);
    CHECK(svc::handle_request(state, "DELETE", "/api/health", "").status == 405);
    CHECK(svc::handle_request(state, "OPTIONS", "/api/classify", "").status == 204);

    svc::State empty{nullptr, nullptr, 4096, "*"};
    CHECK(svc::handle_request(empty, "GET", "/api/health", "").status == 503);
    CHECK(svc::handle_request(empty, "POST", "/api/classify", body).status == 503);
    svc::State no_index{f.model, nullptr, 4096, "*"};
    CHECK(svc::handle_request(no_index, "POST", "/api/retrieve", body).status == 503);
    sf_index_free(index);
}
