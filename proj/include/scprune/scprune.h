/* Copyright (c) 2026 The scprune Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License. */

#ifndef SCPRUNE_SCPRUNE_H_
#define SCPRUNE_SCPRUNE_H_

#include <stddef.h>
#include <stdint.h>

#if defined(SCPRUNE_BUILDING_LIBRARY)
#define SCP_API __attribute__((visibility("default")))
#else
#define SCP_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Every fallible call returns a status. On failure a human-readable message
 * is available from scp_last_error() on the same thread until the next call. */
typedef enum scp_status {
  SCP_OK = 0,
  SCP_ERR_SHAPE = 1,
  SCP_ERR_LOOKUP = 2,
  SCP_ERR_STRUCTURE = 3,
  SCP_ERR_PARAMETER = 4,
  SCP_ERR_INPUT = 5,
  SCP_ERR_FORMAT = 6,
  SCP_ERR_IO = 7,
  SCP_ERR_SINGULAR = 8,
  SCP_ERR_CONVERGENCE = 9,
  SCP_ERR_DEGENERATE = 10,
  SCP_ERR_INTERNAL = 99
} scp_status;

typedef struct scp_model scp_model;
typedef struct scp_tensor_list scp_tensor_list;

SCP_API const char* scp_version(void);
SCP_API const char* scp_last_error(void);
SCP_API const char* scp_status_name(scp_status status);
/* Nonzero for solver failures: singular systems, non-convergence, degenerate data. */
SCP_API int scp_status_is_numerical(scp_status status);

/* Strings returned through char** out-parameters are owned by the caller. */
SCP_API void scp_string_free(char* s);

SCP_API scp_status scp_model_load(const char* path, scp_model** out);
SCP_API scp_status scp_model_save(const scp_model* model, const char* path);
SCP_API void scp_model_free(scp_model* model);
SCP_API scp_status scp_model_costs(const scp_model* model, uint64_t* params, uint64_t* flops);
/* JSON: {"input_shape":[...],"layers":[{"name","kind","output_shape","params","flops"}...],
 *        "totals":{"params","flops"}} */
SCP_API scp_status scp_model_describe(const scp_model* model, char** out_json);

/* Loads every *.sctn tensor in `dir` in file-name order. A nonzero `limit`
 * keeps a seeded uniform subsample of that many files. */
SCP_API scp_status scp_tensors_load(const char* dir, size_t limit, uint64_t seed, scp_tensor_list** out);
SCP_API size_t scp_tensors_count(const scp_tensor_list* list);
SCP_API void scp_tensors_free(scp_tensor_list* list);

/* Top-k accuracy over the tensors in `data_dir`, labelled by the JSON object
 * in `labels_path` (file name -> class index). */
SCP_API scp_status scp_evaluate(const scp_model* model, const char* data_dir, const char* labels_path, size_t topk,
                                size_t threads, double* accuracy);

/* Optional accuracy evaluation attached to prune and compare runs; pass NULL
 * to skip it. */
typedef struct scp_eval_options {
  const char* data_dir;
  const char* labels_path;
  size_t topk;
} scp_eval_options;

/* Prunes `model` according to a strategy document. `config_json` may be NULL
 * for the default configuration. */
SCP_API scp_status scp_prune(const scp_model* model, const scp_tensor_list* calib, const char* strategy_json,
                             const char* config_json, const scp_eval_options* eval, scp_model** out_model,
                             char** out_report_json);

/* Single-layer comparison of channel selectors ("firstk", "random[:seed]",
 * "maxresponse", "kmeans[:seed]", "ssc") at each speed-up ratio. */
SCP_API scp_status scp_compare(const scp_model* model, const scp_tensor_list* calib, const char* lower_layer,
                               const double* ratios, size_t ratio_count, const char* const* selectors,
                               size_t selector_count, const char* config_json, const scp_eval_options* eval,
                               char** out_report_json);

#ifdef __cplusplus
}
#endif

#endif /* SCPRUNE_SCPRUNE_H_ */
