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

#include <string>

#include "sketchformer/sketch.hpp"
#include "sketchformer/tokenizer.hpp"
#include "sketchformer/transformer.hpp"

namespace sketchformer {

class TensorArchive;

enum class CodecKind { Continuous, Dict, Grid };

const char* codec_kind_name(CodecKind kind);
CodecKind codec_kind_from_name(const std::string& name);

// Binds one of the three input schemes to the model's SequenceInput. Relative
// schemes (dict, continuous) need the sketch's first point to come back to
// absolute coordinates; the grid scheme ignores it.
struct SketchCodec {
    CodecKind kind = CodecKind::Dict;
    Codebook codebook;       // dict
    GridSpec grid;           // grid
    double offset_scale = 1; // continuous: offsets are divided by this

    InputMode input_mode() const { return kind == CodecKind::Continuous ? InputMode::Continuous : InputMode::Tokenized; }
    /// Token vocabulary, or 0 for the continuous scheme.
    int vocab_size() const;

    /// Full sequence through EOS / the end row, without padding.
    SequenceInput encode(const Stroke3Seq& seq, Point origin, std::size_t max_len) const;
    SequenceInput encode(const Sketch& sketch, std::size_t max_len) const;
    /// Lenient inverse: accepts generated sequences that stopped without a
    /// terminator.
    Sketch decode(const SequenceInput& input, Point origin) const;

    void write(TensorArchive& archive) const;
    static SketchCodec read(const TensorArchive& archive);
};

} // namespace sketchformer
