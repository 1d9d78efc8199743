#ifndef INTENTRAG_H
#define INTENTRAG_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(INTENTRAG_BUILDING)
#    define IRAG_API __declspec(dllexport)
#  else
#    define IRAG_API __declspec(dllimport)
#  endif
#else
#  define IRAG_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes double as process exit codes for the CLI. */
typedef enum irag_status {
    IRAG_OK = 0,
    IRAG_USAGE = 1,
    IRAG_DATA = 2,
    IRAG_PROVIDER = 3,
    IRAG_INTERNAL = 4
} irag_status;

/* Message of the last failed call on this thread; "" after a successful call. */
IRAG_API const char* irag_last_error(void);
/* Error code name (e.g. "ClassShortage") of the last failed call on this thread. */
IRAG_API const char* irag_last_error_code(void);
IRAG_API const char* irag_version(void);

/* ---- command options -------------------------------------------------------
 * A flat string map. Keys mirror the CLI flags without dashes ("k", "shots",
 * "placement", "provider", "run-dir", ...). Repeated inputs ("input", "run")
 * accumulate when set more than once. */
typedef struct irag_options irag_options;

IRAG_API irag_options* irag_options_new(void);
IRAG_API irag_status irag_options_set(irag_options* opts, const char* key, const char* value);
/* Merges a JSON object of string, number or boolean values; later sets override it. */
IRAG_API irag_status irag_options_load_file(irag_options* opts, const char* path);
IRAG_API void irag_options_free(irag_options* opts);

/* ---- command results ------------------------------------------------------ */
typedef struct irag_result irag_result;

/* Human readable one-paragraph summary. */
IRAG_API const char* irag_result_summary(const irag_result* result);
/* Main artifact written by the command (manifest, report, exemplar file, ...). */
IRAG_API const char* irag_result_path(const irag_result* result);
IRAG_API void irag_result_free(irag_result* result);

/* Each command writes *out on success (free with irag_result_free). */
IRAG_API irag_status irag_cmd_ingest(const irag_options* opts, irag_result** out);
IRAG_API irag_status irag_cmd_embed(const irag_options* opts, irag_result** out);
IRAG_API irag_status irag_cmd_sample(const irag_options* opts, irag_result** out);
IRAG_API irag_status irag_cmd_run_fewshot(const irag_options* opts, irag_result** out);
IRAG_API irag_status irag_cmd_run_rag(const irag_options* opts, irag_result** out);
IRAG_API irag_status irag_cmd_run_replay(const irag_options* opts, irag_result** out);
IRAG_API irag_status irag_cmd_evaluate(const irag_options* opts, irag_result** out);
IRAG_API irag_status irag_cmd_cost(const irag_options* opts, irag_result** out);
IRAG_API irag_status irag_cmd_augment(const irag_options* opts, irag_result** out);

/* ---- label space ---------------------------------------------------------- */
typedef struct irag_labelset irag_labelset;

IRAG_API irag_status irag_labelset_load(const char* path, irag_labelset** out);
IRAG_API size_t irag_labelset_size(const irag_labelset* labels);
IRAG_API const char* irag_labelset_name(const irag_labelset* labels, size_t index);
/* *label is the class index or -1 for Unknown. rule is one of the parse rule names. */
IRAG_API irag_status irag_parse_prediction(const irag_labelset* labels, const char* raw, int64_t* label,
                                           const char** rule);
IRAG_API void irag_labelset_free(irag_labelset* labels);

/* Writes the canonical form (NUL terminated) into buf; *needed gets the full length. */
IRAG_API irag_status irag_canonicalize(const char* label_text, char* buf, size_t buf_len, size_t* needed);

/* ---- embeddings and retrieval --------------------------------------------- */

/* Offline hashing encoder. out must hold dim floats. */
IRAG_API irag_status irag_test_embed(const char* text, size_t dim, float* out);

typedef struct irag_index irag_index;

/* rows is count x dim row-major; every row must have unit norm. */
IRAG_API irag_status irag_index_build(const float* rows, size_t count, size_t dim, irag_index** out);
/* ids and similarities must hold k entries; hits come back similarity descending. */
IRAG_API irag_status irag_index_top_k(const irag_index* index, const float* query, size_t k, size_t* ids,
                                      double* similarities);
IRAG_API void irag_index_free(irag_index* index);

#ifdef __cplusplus
}
#endif

#endif
