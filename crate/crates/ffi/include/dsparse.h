#ifndef DSPARSE_H
#define DSPARSE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DsCoeffLaw {
  DS_COEFF_LAW_RADEMACHER = 0,
  DS_COEFF_LAW_UNIFORM_SIGNED = 1,
} DsCoeffLaw;

typedef enum DsStatus {
  DS_STATUS_OK = 0,
  DS_STATUS_NULL_POINTER = 1,
  DS_STATUS_INVALID_ARGUMENT = 2,
  DS_STATUS_DIMENSION_MISMATCH = 3,
  DS_STATUS_NO_CONVERGENCE = 4,
  DS_STATUS_INCOMPLETE = 5,
  DS_STATUS_NON_FINITE = 6,
  DS_STATUS_GENERATION_FAILURE = 7,
  DS_STATUS_IO = 8,
  DS_STATUS_PARSE = 9,
  DS_STATUS_PANIC = 10,
} DsStatus;

typedef enum DsStructure {
  DS_STRUCTURE_BLOCK_DIAGONAL = 0,
  DS_STRUCTURE_RANDOM_SPARSE = 1,
  DS_STRUCTURE_IDENTITY = 2,
} DsStructure;

// Opaque dictionary handle.
typedef struct DsDictionary DsDictionary;

// Opaque sample set handle.
typedef struct DsSampleSet DsSampleSet;

// Generative model parameters.
typedef struct DsModelConfig {
  size_t n;
  size_t m;
  size_t k;
  size_t r;
  double sigma_eps;
  double coeff_min;
  double tau_floor;
  enum DsStructure structure;
  enum DsCoeffLaw coeff_law;
  uint64_t seed;
} DsModelConfig;

// Metrics from [`ds_evaluate`].
typedef struct DsEvalReport {
  double fro_error;
  double max_col_error;
  double spectral_ratio;
  double support_exact_frac;
  bool recovered;
  double threshold_used;
} DsEvalReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null. The pointer
// stays valid until the next failing call on the same thread.
const char *ds_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *ds_version(void);

// Fills `out` with the 64x64 block-diagonal benchmark model.
//
// # Safety
// `out` must be null or point to writable memory for one `DsModelConfig`.
enum DsStatus ds_model_config_benchmark(struct DsModelConfig *out);

// Generates the ground-truth dictionary described by `cfg`.
//
// # Safety
// `cfg` must point to a valid config and `out` to writable handle storage.
enum DsStatus ds_dictionary_generate(const struct DsModelConfig *cfg, struct DsDictionary **out);

// Wraps a row-major `n x m` buffer as a dictionary.
//
// # Safety
// `data` must point to `n * m` readable doubles.
enum DsStatus ds_dictionary_from_array(const double *data,
                                       size_t n,
                                       size_t m,
                                       struct DsDictionary **out);

// Number of rows, or 0 for a null handle.
//
// # Safety
// `dict` must be null or a live handle.
size_t ds_dictionary_rows(const struct DsDictionary *dict);

// Number of columns, or 0 for a null handle.
//
// # Safety
// `dict` must be null or a live handle.
size_t ds_dictionary_cols(const struct DsDictionary *dict);

// Copies the entries row-major into `buf`, which holds `len` doubles.
//
// # Safety
// `dict` must be a live handle and `buf` must have room for `len` doubles.
enum DsStatus ds_dictionary_copy(const struct DsDictionary *dict, double *buf, size_t len);

// Releases a dictionary; null is ignored.
//
// # Safety
// `dict` must be null or a handle not yet freed.
void ds_dictionary_free(struct DsDictionary *dict);

// Largest absolute inner product between distinct columns.
//
// # Safety
// `dict` must be a live handle and `out` writable.
enum DsStatus ds_mutual_coherence(const struct DsDictionary *dict, double *out);

// Draws `p` samples from `dict` under `cfg`, seeded by `seed`.
//
// # Safety
// Handles and `cfg` must be valid; `out` must be writable.
enum DsStatus ds_samples_draw(const struct DsDictionary *dict,
                              const struct DsModelConfig *cfg,
                              size_t p,
                              uint64_t seed,
                              struct DsSampleSet **out);

// Wraps a row-major `n x p` buffer (one sample per column).
//
// # Safety
// `data` must point to `n * p` readable doubles.
enum DsStatus ds_samples_from_array(const double *data,
                                    size_t n,
                                    size_t p,
                                    double sigma_eps,
                                    struct DsSampleSet **out);

// Number of samples, or 0 for a null handle.
//
// # Safety
// `samples` must be null or a live handle.
size_t ds_samples_len(const struct DsSampleSet *samples);

// Releases a sample set; null is ignored.
//
// # Safety
// `samples` must be null or a handle not yet freed.
void ds_samples_free(struct DsSampleSet *samples);

// Runs the truncated initialization with default settings.
//
// # Safety
// Handles and `cfg` must be valid; `out` must be writable.
enum DsStatus ds_initialize(const struct DsSampleSet *samples,
                            const struct DsModelConfig *cfg,
                            uint64_t seed,
                            struct DsDictionary **out);

// Initialization followed by projected descent over all samples.
//
// # Safety
// Handles and `cfg` must be valid; `out` must be writable.
enum DsStatus ds_learn(const struct DsSampleSet *samples,
                       const struct DsModelConfig *cfg,
                       uint64_t seed,
                       struct DsDictionary **out);

// Aligns `est` to `truth` and reports the recovery metrics.
//
// # Safety
// Handles must be live and `out` writable.
enum DsStatus ds_evaluate(const struct DsDictionary *truth,
                          const struct DsDictionary *est,
                          double threshold,
                          struct DsEvalReport *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DSPARSE_H */
