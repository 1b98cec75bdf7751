/* C interface to the jule clustering library.
 *
 * Every call that can fail returns a jule_status; on failure jule_last_error()
 * describes the problem (thread-local, valid until the next failing call on the
 * same thread). Objects are opaque and released with their matching _free call.
 */
#ifndef JULE_H
#define JULE_H

#include <stddef.h>
#include <stdint.h>

#if defined(JULE_BUILDING_LIBRARY)
#define JULE_API __attribute__((visibility("default")))
#else
#define JULE_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum jule_status {
  JULE_OK = 0,
  JULE_ERR_ARGUMENT = 1,      /* null pointer or out-of-range argument */
  JULE_ERR_FORMAT = 2,        /* malformed input file */
  JULE_ERR_CONFIG = 3,        /* invalid or unsatisfiable parameters */
  JULE_ERR_DEGENERATE = 4,    /* all samples coincide */
  JULE_ERR_LOGIC = 5,         /* violated precondition */
  JULE_ERR_NORMALIZATION = 6, /* zero embedding before normalization */
  JULE_ERR_IO = 7,
  JULE_ERR_INTERNAL = 8
} jule_status;

typedef enum jule_affinity_mode {
  JULE_MODE_EXACT = 0,
  JULE_MODE_SIZE_WEIGHTED = 1,
  JULE_MODE_ALPHA = 2
} jule_affinity_mode;

typedef struct jule_dataset jule_dataset;
typedef struct jule_result jule_result;

/* Callback for progress lines; `line` is only valid during the call. */
typedef void (*jule_progress_fn)(const char* line, void* user);

typedef struct jule_params {
  size_t ks;
  double a;
  size_t kc;
  double lambda;
  double gamma;
  double margin;
  double eta;
  size_t target_nc;
  size_t epochs;
  size_t batch_size;
  /* Layer widths after the input layer. NULL/0 keeps the default {160}. */
  const size_t* dims;
  size_t dims_len;
  size_t per_anchor; /* 0 means kc */
  double base_lr;
  double momentum;
  double weight_decay;
  double lr_gamma;
  double lr_power;
  jule_affinity_mode mode;
  double alpha;
  int final_train;     /* nonzero: train once more after the last period */
  int normalize_input; /* nonzero: jule_cluster scales rows to unit norm first */
  uint64_t seed;
  unsigned threads;
  jule_progress_fn progress;
  void* progress_user;
} jule_params;

JULE_API const char* jule_version(void);
JULE_API const char* jule_last_error(void);
JULE_API const char* jule_status_name(jule_status status);

/* Fills every field with its default. */
JULE_API void jule_params_default(jule_params* params);

/* Datasets. URIs: idx:images[,labels], csv:path[:labelcol], blobs:k=..,n=..,d=..,seed=.. */
JULE_API jule_status jule_dataset_open(const char* uri, int csv_header, jule_dataset** out);
/* Copies n*d row-major values; labels may be NULL. */
JULE_API jule_status jule_dataset_from_array(const double* data, size_t n, size_t d, const int* labels,
                                             jule_dataset** out);
JULE_API void jule_dataset_free(jule_dataset* dataset);
JULE_API size_t jule_dataset_rows(const jule_dataset* dataset);
JULE_API size_t jule_dataset_cols(const jule_dataset* dataset);
JULE_API int jule_dataset_has_labels(const jule_dataset* dataset);
/* Copies rows*cols values / rows labels into caller buffers. */
JULE_API jule_status jule_dataset_features(const jule_dataset* dataset, double* out);
JULE_API jule_status jule_dataset_labels(const jule_dataset* dataset, int* out);

/* Plain agglomerative clustering on the input features. */
JULE_API jule_status jule_cluster(const jule_dataset* dataset, const jule_params* params, jule_result** out);
/* Joint clustering and representation learning. */
JULE_API jule_status jule_run(const jule_dataset* dataset, const jule_params* params, jule_result** out);
/* Re-clusters from scratch on the embedding of a finished jule_run result. */
JULE_API jule_status jule_rerun(const jule_result* joint, const jule_dataset* dataset, const jule_params* params,
                                jule_result** out);
/* Low-dimensional embedding trained on merges of the raw-input graph. */
JULE_API jule_status jule_visualize(const jule_dataset* dataset, const jule_params* params, size_t out_dim,
                                    jule_result** out);
JULE_API void jule_result_free(jule_result* result);

JULE_API size_t jule_result_samples(const jule_result* result);
JULE_API size_t jule_result_clusters(const jule_result* result);
JULE_API size_t jule_result_initial_clusters(const jule_result* result);
JULE_API size_t jule_result_merges(const jule_result* result);
/* Dense cluster labels 0..clusters-1, one per sample. */
JULE_API jule_status jule_result_labels(const jule_result* result, int* out);
/* Final features (embedding, or the clustered input); 0 when absent. */
JULE_API size_t jule_result_feature_dim(const jule_result* result);
JULE_API jule_status jule_result_features(const jule_result* result, double* out);
/* Trace JSON (merges, periods); release with jule_string_free. */
JULE_API jule_status jule_result_trace_json(const jule_result* result, int with_timings, char** out);
/* Writes the final net; JULE_ERR_LOGIC when the result has no net. */
JULE_API jule_status jule_result_save_checkpoint(const jule_result* result, const char* path);
JULE_API void jule_string_free(char* text);

JULE_API jule_status jule_nmi(const int* a, const int* b, size_t n, double* out);
JULE_API jule_status jule_accuracy(const int* pred, const int* truth, size_t n, double* out);
JULE_API jule_status jule_one_nn_error(const double* train, const int* train_labels, size_t n_train,
                                       const double* test, const int* test_labels, size_t n_test, size_t d,
                                       double* out);

#ifdef __cplusplus
}
#endif

#endif /* JULE_H */
