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

#include "sketchformer/codec.hpp"

#include "sketchformer/container.hpp"
#include "sketchformer/error.hpp"

namespace sketchformer {

const char* codec_kind_name(CodecKind kind) {
    switch (kind) {
    case CodecKind::Continuous:
        return "continuous";
    case CodecKind::Dict:
        return "dict";
    case CodecKind::Grid:
        return "grid";
    }
    return "?";
}

CodecKind codec_kind_from_name(const std::string& name) {
    for (CodecKind k : {CodecKind::Continuous, CodecKind::Dict, CodecKind::Grid}) {
        if (name == codec_kind_name(k)) {
            return k;
        }
    }
    fail(ErrorCode::Config, "unknown tokenizer scheme '" + name + "' (expected continuous, dict or grid)");
}

int SketchCodec::vocab_size() const {
    switch (kind) {
    case CodecKind::Dict:
        return codebook.vocab_size();
    case CodecKind::Grid:
        return grid.vocab_size();
    case CodecKind::Continuous:
        break;
    }
    return 0;
}

SequenceInput SketchCodec::encode(const Stroke3Seq& seq, Point origin, std::size_t max_len) const {
    switch (kind) {
    case CodecKind::Dict: {
        auto t = dict_encode(seq, codebook, max_len);
        t.tokens.resize(t.content_length());
        return SequenceInput::from_tokens(std::move(t.tokens));
    }
    case CodecKind::Grid: {
        auto t = grid_encode(from_stroke3(seq, origin), grid, max_len);
        t.tokens.resize(t.content_length());
        return SequenceInput::from_tokens(std::move(t.tokens));
    }
    case CodecKind::Continuous: {
        DatasetMeta meta;
        meta.offset_scale = offset_scale;
        auto s = to_stroke5(normalize(seq, meta), max_len);
        s.rows.resize(s.content_length());
        return SequenceInput::from_rows(std::move(s.rows));
    }
    }
    fail(ErrorCode::Internal, "unhandled codec");
}

SequenceInput SketchCodec::encode(const Sketch& sketch, std::size_t max_len) const {
    return encode(to_stroke3(sketch), sketch_origin(sketch), max_len);
}

Sketch SketchCodec::decode(const SequenceInput& input, Point origin) const {
    if (kind == CodecKind::Continuous) {
        Stroke5Seq s{input.rows};
        if (s.content_length() == 0 || s.rows[s.content_length() - 1].p3 < 0.5) {
            s.rows.resize(s.content_length());
            s.rows.push_back(kStroke5Padding);
        }
        DatasetMeta meta;
        meta.offset_scale = offset_scale;
        return from_stroke3(denormalize(from_stroke5(s), meta), origin);
    }
    TokenSequence t;
    t.scheme = kind == CodecKind::Dict ? TokenScheme::Dict : TokenScheme::Grid;
    t.vocab_size = vocab_size();
    t.tokens = input.tokens;
    if (t.tokens.empty() || t.tokens.front() != token::kSos) {
        t.tokens.insert(t.tokens.begin(), token::kSos);
    }
    t.tokens.resize(t.content_length());
    if (t.tokens.back() != token::kEos) {
        t.tokens.push_back(token::kEos);
    }
    if (kind == CodecKind::Grid) {
        return grid_decode(t, grid);
    }
    return from_stroke3(dict_decode(t, codebook), origin);
}

void SketchCodec::write(TensorArchive& a) const {
    a.set("codec.kind", std::string(codec_kind_name(kind)));
    a.set("codec.offset_scale", offset_scale);
    if (kind == CodecKind::Grid) {
        a.set("codec.grid.n", grid.n);
        a.set("codec.grid.min_x", grid.min_x);
        a.set("codec.grid.min_y", grid.min_y);
        a.set("codec.grid.extent", grid.extent);
    }
    if (kind == CodecKind::Dict) {
        a.set("codec.dict.lift_fraction", codebook.lift_fraction);
        a.set("codec.dict.seed", codebook.seed);
        a.set("codec.dict.offset_scale", codebook.offset_scale);
        MatF c(codebook.size(), 2);
        for (int i = 0; i < codebook.size(); ++i) {
            c(i, 0) = codebook.centroids[static_cast<std::size_t>(i)][0];
            c(i, 1) = codebook.centroids[static_cast<std::size_t>(i)][1];
        }
        a.add_tensor("codec.centroids", c);
    }
}

SketchCodec SketchCodec::read(const TensorArchive& a) {
    SketchCodec c;
    c.kind = codec_kind_from_name(a.get("codec.kind"));
    c.offset_scale = a.get_double("codec.offset_scale");
    if (c.kind == CodecKind::Grid) {
        c.grid.n = static_cast<int>(a.get_int("codec.grid.n"));
        c.grid.min_x = a.get_double("codec.grid.min_x");
        c.grid.min_y = a.get_double("codec.grid.min_y");
        c.grid.extent = a.get_double("codec.grid.extent");
    }
    if (c.kind == CodecKind::Dict) {
        c.codebook.lift_fraction = a.get_double("codec.dict.lift_fraction");
        c.codebook.seed = a.get_uint("codec.dict.seed");
        c.codebook.offset_scale = a.get_double("codec.dict.offset_scale");
        const MatF m = a.tensor("codec.centroids");
        require(m.cols() == 2 && m.rows() >= 2, ErrorCode::Config, "codebook tensor has the wrong shape");
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            c.codebook.centroids.push_back({m(i, 0), m(i, 1)});
        }
    }
    return c;
}

} // namespace sketchformer
