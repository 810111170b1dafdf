#ifndef MUSE_MUSE_H
#define MUSE_MUSE_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(MUSE_BUILDING_LIBRARY)
#    define MUSE_API __declspec(dllexport)
#  else
#    define MUSE_API __declspec(dllimport)
#  endif
#else
#  define MUSE_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum muse_status {
  MUSE_OK = 0,
  MUSE_ERR_ARGUMENT = 1,
  MUSE_ERR_IO = 2,
  MUSE_ERR_PARSE = 3,
  MUSE_ERR_NUMERIC = 4,
  MUSE_ERR_CONFIG = 5,
  MUSE_ERR_INTERNAL = 6
} muse_status;

/* Opaque run configuration: paths, preparation settings and model settings. */
typedef struct muse_config muse_config;

typedef struct muse_metrics {
  double map;
  double mrr;
  double p_at_1;
  double p_at_3;
  size_t n_evaluated;
  size_t n_skipped;
} muse_metrics;

typedef struct muse_train_summary {
  int best_epoch;
  double best_val_map;
  int epochs_run;
  size_t vocab_size;
} muse_train_summary;

MUSE_API const char* muse_version(void);

/* Short lowercase name ("ok", "argument", "io", ...). */
MUSE_API const char* muse_status_name(muse_status status);

/* Message of the last failed call on this thread; "" if none. */
MUSE_API const char* muse_last_error(void);

/* Frees strings returned through char** out-parameters. */
MUSE_API void muse_string_free(char* s);

MUSE_API muse_status muse_config_create(muse_config** out);
MUSE_API void muse_config_destroy(muse_config* config);
/* Unknown keys and malformed values fail with MUSE_ERR_CONFIG. */
MUSE_API muse_status muse_config_set(muse_config* config, const char* key, const char* value);
/* key = value lines, '#' comments. */
MUSE_API muse_status muse_config_load_file(muse_config* config, const char* path);
MUSE_API int muse_config_is_key(const char* key);
/* Effective value of a key as text; free with muse_string_free. */
MUSE_API muse_status muse_config_get(const muse_config* config, const char* key, char** value);

/* Pipeline commands. `summary` (optional) receives the split count table. */
MUSE_API muse_status muse_prepare(const muse_config* config, char** summary);
MUSE_API muse_status muse_train(const muse_config* config, muse_train_summary* out);
MUSE_API muse_status muse_evaluate(const muse_config* config, muse_metrics* out);
MUSE_API muse_status muse_rank(const muse_config* config, size_t* questions_ranked);

/* Stand-alone helpers. */
MUSE_API muse_status muse_derive_label(int pos_votes, int neg_votes, int* label);

/* `labels` holds every question's ranked labels back to back; `lengths[i]`
   is the number of labels of question i. */
MUSE_API muse_status muse_evaluate_ranking(const int* labels, const size_t* lengths,
                                           size_t num_questions, muse_metrics* out);

MUSE_API muse_status muse_significance_test(const double* a, const double* b, size_t n,
                                            int iterations, uint64_t seed, double* p_value);

/* BM25 of `query` against each of `docs`, statistics taken over `docs`. */
MUSE_API muse_status muse_bm25_scores(const char* query, const char* const* docs, size_t num_docs,
                                      double k1, double b, double* scores);

#ifdef __cplusplus
}
#endif

#endif
