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

#ifndef SKETCHFORMER_SKETCHFORMER_H
#define SKETCHFORMER_SKETCHFORMER_H

/* C interface to the sketchformer library.
 *
 * Objects are opaque handles released with their *_free function. Every
 * call returns an sf_status; on failure sf_last_error() describes the problem
 * (per thread, valid until the next failing call). Strings returned through
 * char** out-parameters are owned by the caller and released with
 * sf_string_free.
 *
 * Sketches travel as JSON in the QuickDraw stroke-list form:
 * [[[x0, x1, ...], [y0, y1, ...]], ...]. Request and response documents of the
 * sf_model_* calls are exactly the bodies used by the HTTP service. */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(SF_BUILDING_LIBRARY)
#define SF_API __attribute__((visibility("default")))
#else
#define SF_API
#endif

typedef enum sf_status {
    SF_OK = 0,
    SF_ERR_INVALID_ARGUMENT = 1,
    SF_ERR_PARSE = 2,
    SF_ERR_IO = 3,
    SF_ERR_TRUNCATION = 4,
    SF_ERR_DECODE = 5,
    SF_ERR_USAGE = 6,
    SF_ERR_NUMERIC = 7,
    SF_ERR_CONFIG = 8,
    SF_ERR_INTERNAL = 9
} sf_status;

typedef struct sf_dataset sf_dataset;
typedef struct sf_codebook sf_codebook;
typedef struct sf_model sf_model;
typedef struct sf_index sf_index;
typedef struct sf_joint sf_joint;

/* Receives one newline-free JSON record per training step. */
typedef void (*sf_log_fn)(const char* json_line, void* user);

SF_API const char* sf_version(void);
SF_API const char* sf_status_name(sf_status status);
SF_API const char* sf_last_error(void);
SF_API void sf_string_free(char* s);
SF_API sf_status sf_file_digest(const char* path, char** out_hex);

/* ---- datasets ---------------------------------------------------------- */

/* classes_csv: comma-separated subset of circle,square,triangle,zigzag,star
 * (NULL or "" for all five). */
SF_API sf_status sf_dataset_synth(const char* classes_csv, uint32_t train_per_class, uint32_t test_per_class,
                                  uint64_t seed, double rdp_epsilon, sf_dataset** out);
/* Newline-delimited QuickDraw records. */
SF_API sf_status sf_dataset_ingest(const char* ndjson_path, double rdp_epsilon, double test_fraction, uint64_t seed,
                                   sf_dataset** out);
SF_API sf_status sf_dataset_load(const char* path, sf_dataset** out);
SF_API sf_status sf_dataset_save(const sf_dataset* dataset, const char* path);
SF_API void sf_dataset_free(sf_dataset* dataset);
/* {"items", "train", "test", "classes", "rdp_epsilon", "offset_scale"} */
SF_API sf_status sf_dataset_info(const sf_dataset* dataset, char** out_json);
/* One item as a QuickDraw record: {"key_id", "word", "drawing"}. */
SF_API sf_status sf_dataset_sketch(const sf_dataset* dataset, const char* id, char** out_json);

/* ---- tokenizers -------------------------------------------------------- */

SF_API sf_status sf_codebook_fit(const sf_dataset* dataset, int k, uint64_t sample_size, double lift_fraction,
                                 uint64_t seed, sf_codebook** out, char** out_report_json);
SF_API sf_status sf_codebook_load(const char* path, sf_codebook** out);
SF_API sf_status sf_codebook_save(const sf_codebook* codebook, const char* path);
SF_API void sf_codebook_free(sf_codebook* codebook);

/* scheme: "dict" (needs codebook), "grid" (grid_n cells per side) or
 * "continuous". Output: {"scheme", "vocab_size", "origin", "tokens"} or
 * {"scheme", "origin", "rows"} for the continuous scheme. */
SF_API sf_status sf_tokenize(const char* scheme, const sf_codebook* codebook, int grid_n, int max_len,
                             const char* sketch_json, char** out_json);
/* Inverse of sf_tokenize: takes its output document, returns {"strokes"}. */
SF_API sf_status sf_detokenize(const sf_codebook* codebook, int grid_n, const char* tokens_json, char** out_json);
/* options_json may be NULL: {"grid_sizes": [...], "dict_sizes": [...],
 * "sample_size", "lift_fraction", "seed", "split"}. Output is CSV. */
SF_API sf_status sf_quantization_report(const sf_dataset* dataset, const char* options_json, char** out_csv);

/* ---- training ---------------------------------------------------------- */

/* Trains on the dataset's training split and writes a checkpoint.
 * config_text holds key=value lines. With resume_path the run continues
 * from that checkpoint, and keys in config_text override its settings. */
SF_API sf_status sf_train(const sf_dataset* dataset, const char* config_text, const sf_codebook* codebook,
                          const char* resume_path, const char* checkpoint_path, sf_log_fn log, void* user,
                          char** out_summary_json);

/* ---- inference --------------------------------------------------------- */

SF_API sf_status sf_model_load(const char* checkpoint_path, sf_model** out);
SF_API void sf_model_free(sf_model* model);
/* {"digest", "mode", "scheme", "d_model", ...} */
SF_API sf_status sf_model_info(const sf_model* model, char** out_json);

/* {"strokes"} -> {"embedding"} */
SF_API sf_status sf_model_encode(const sf_model* model, const char* request_json, char** out_json);
/* {"embedding", "origin"?} -> {"strokes"} */
SF_API sf_status sf_model_decode(const sf_model* model, const char* request_json, char** out_json);
/* {"strokes"} -> {"strokes"} */
SF_API sf_status sf_model_reconstruct(const sf_model* model, const char* request_json, char** out_json);
/* {"a", "b", "steps"} -> {"frames"} */
SF_API sf_status sf_model_interpolate(const sf_model* model, const char* request_json, char** out_json);
/* {"strokes"} -> {"class", "label", "probabilities"} */
SF_API sf_status sf_model_classify(const sf_model* model, const char* request_json, char** out_json);
/* {"strokes", "sigma", "seed"?} -> {"strokes"} */
SF_API sf_status sf_model_perturb(const sf_model* model, const char* request_json, char** out_json);
/* {"strokes", "k"} -> {"results": [{"id", "score"}]} */
SF_API sf_status sf_model_retrieve(const sf_model* model, const sf_index* index, const char* request_json,
                                   char** out_json);

/* split: "train" or "test"; metric: "cosine" or "euclidean". */
SF_API sf_status sf_model_embed_dataset(const sf_model* model, const sf_dataset* dataset, const char* split,
                                        const char* metric, sf_index** out);
SF_API sf_status sf_model_eval_classify(const sf_model* model, const sf_dataset* dataset, const char* split,
                                        char** out_json);
SF_API sf_status sf_model_eval_retrieval(const sf_model* model, const sf_dataset* dataset, const char* split,
                                         int k, const char* metric, char** out_json);

SF_API sf_status sf_index_load(const char* path, sf_index** out);
SF_API sf_status sf_index_save(const sf_index* index, const char* path);
SF_API void sf_index_free(sf_index* index);
SF_API sf_status sf_index_info(const sf_index* index, char** out_json);

/* ---- cross-modal ------------------------------------------------------- */

/* config_json may be NULL: {"phase1_steps", "phase2_steps", "batch_size",
 * "margin1", "margin2", "cls_weight", "learning_rate", "seed",
 * "raster_steps"}. Writes the joint checkpoint; reports per-phase metrics. */
SF_API sf_status sf_joint_train(const sf_model* model, const sf_dataset* dataset, const char* config_json,
                                const char* joint_path, char** out_report_json);
SF_API sf_status sf_joint_load(const char* path, sf_joint** out);
SF_API void sf_joint_free(sf_joint* joint);
/* Raster-branch embeddings u_r of a split's rasterized sketches. */
SF_API sf_status sf_joint_embed_images(const sf_joint* joint, const sf_dataset* dataset, const char* split,
                                       sf_index** out);
/* {"strokes", "k"} -> {"results"}: u_v of the sketch against an image index. */
SF_API sf_status sf_joint_retrieve(const sf_joint* joint, const sf_model* model, const sf_index* images,
                                   const char* request_json, char** out_json);

#ifdef __cplusplus
}
#endif

#endif
