#ifndef SIMFUSE_H
#define SIMFUSE_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

// Result code of every `simfuse_*` call.
typedef enum SimfuseStatus {
  SIMFUSE_STATUS_OK = 0,
  SIMFUSE_STATUS_NULL_POINTER = 1,
  SIMFUSE_STATUS_INVALID_UTF8 = 2,
  SIMFUSE_STATUS_INVALID_ARGUMENT = 3,
  SIMFUSE_STATUS_IO = 4,
  SIMFUSE_STATUS_FORMAT = 5,
  SIMFUSE_STATUS_EMPTY_SENTENCE = 6,
  SIMFUSE_STATUS_DIMENSION = 7,
  SIMFUSE_STATUS_CONFIG = 8,
  SIMFUSE_STATUS_DATA = 9,
  SIMFUSE_STATUS_PANIC = 10,
} SimfuseStatus;

// Loaded model bundle.
typedef struct SimfuseModel SimfuseModel;

// Scores of one sentence pair, each in `[0, 1]`.
typedef struct SimfuseScores {
  double jaccard;
  double w2vcnn;
  double tfidf;
  double fused;
  bool similar;
} SimfuseScores;

// Fusion weights for the (Jaccard, CNN, TF-IDF) scores.
typedef struct SimfuseWeights {
  double alpha;
  double beta;
  double gamma;
} SimfuseWeights;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Version string of the library, statically allocated.
const char *simfuse_version(void);

// Message describing the last failed call on this thread, or NULL when the
// last call succeeded. The pointer stays valid until the next `simfuse_*`
// call on the same thread.
const char *simfuse_last_error_message(void);

// Load the model bundle stored in directory `dir`.
//
// # Safety
// `dir` must be NULL or a NUL-terminated string; `out` must be NULL or
// point to writable storage for one pointer. On success `*out` owns a
// model that must be released with [`simfuse_model_free`].
enum SimfuseStatus simfuse_model_load(const char *dir, struct SimfuseModel **out);

// Release a model. NULL is ignored.
//
// # Safety
// `model` must be NULL or a pointer obtained from [`simfuse_model_load`]
// that has not been freed.
void simfuse_model_free(struct SimfuseModel *model);

// Score one sentence pair. Sentences are raw text, or `surface|POS|ROLE`
// tokens separated by spaces.
//
// # Safety
// `model` must be a live model; `a` and `b` NUL-terminated strings; `out`
// writable. NULL pointers are reported, not dereferenced.
enum SimfuseStatus simfuse_model_score(const struct SimfuseModel *model,
                                       const char *a,
                                       const char *b,
                                       struct SimfuseScores *out);

// Fusion weights stored in the model.
//
// # Safety
// `model` must be a live model and `out` writable, or NULL.
enum SimfuseStatus simfuse_model_weights(const struct SimfuseModel *model,
                                         struct SimfuseWeights *out);

// Softmax of three per-model metrics, in (Jaccard, CNN, TF-IDF) order.
//
// # Safety
// `out` must be writable or NULL.
enum SimfuseStatus simfuse_calibrate_weights(double metric_jaccard,
                                             double metric_w2vcnn,
                                             double metric_tfidf,
                                             struct SimfuseWeights *out);

// Weighted sum of three scores, clamped to `[0, 1]`.
//
// # Safety
// `weights` must be readable and `out` writable, or NULL.
enum SimfuseStatus simfuse_fuse_weighted(double jaccard,
                                         double w2vcnn,
                                         double tfidf,
                                         const struct SimfuseWeights *weights,
                                         double *out);

// True when `score` is at least as close to 1 as to 0.
bool simfuse_classify(double score);

// Role-weighted Jaccard similarity of two sentences.
//
// # Safety
// `a` and `b` must be NUL-terminated strings and `out` writable, or NULL.
enum SimfuseStatus simfuse_jaccard(const char *a, const char *b, double *out);

// Character-level Levenshtein distance.
//
// # Safety
// `a` and `b` must be NUL-terminated strings and `out` writable, or NULL.
enum SimfuseStatus simfuse_edit_distance(const char *a, const char *b, size_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SIMFUSE_H */
