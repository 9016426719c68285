#ifndef FACETREC_H
#define FACETREC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>
#include <stdbool.h>

// Number of values written by [`fr_score_inventory`]: 5 domains then 10 facets.
#define FR_SCORE_COUNT 15

// Number of responses in one inventory.
#define FR_ITEM_COUNT 44

typedef enum FrStatus {
  FR_STATUS_OK = 0,
  FR_STATUS_NULL_POINTER = 1,
  FR_STATUS_INVALID_ARGUMENT = 2,
  FR_STATUS_VALIDATION = 3,
  FR_STATUS_CONFIG = 4,
  FR_STATUS_PARSE = 5,
  FR_STATUS_DATA = 6,
  FR_STATUS_TRAINING = 7,
  FR_STATUS_DIMENSION = 8,
  FR_STATUS_IO = 9,
  FR_STATUS_PANIC = 10,
} FrStatus;

typedef struct FrModel FrModel;

typedef struct FrScoringKey FrScoringKey;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *fr_version(void);

// Message of the last failure on this thread, or NULL if none. Owned by the
// library; valid until the next failing call on this thread.
const char *fr_last_error_message(void);

// Name of score column `index` (0..FR_SCORE_COUNT), or NULL when out of range.
const char *fr_score_name(size_t index);

// Creates a handle to the built-in BFI-44 scoring key.
//
// # Safety
// `out` must be NULL or valid for one pointer write.
enum FrStatus fr_scoring_key_default(struct FrScoringKey **out);

// Loads a scoring key from a TOML file.
//
// # Safety
// `path` must be a NUL-terminated string; `out` valid for one pointer write.
enum FrStatus fr_scoring_key_load(const char *path, struct FrScoringKey **out);

// # Safety
// `key` must be NULL or a handle from this library not yet freed.
void fr_scoring_key_free(struct FrScoringKey *key);

// Scores one inventory of `len` (= FR_ITEM_COUNT) responses into `out`,
// which must hold at least FR_SCORE_COUNT doubles.
//
// # Safety
// Pointers must be valid for the stated lengths.
enum FrStatus fr_score_inventory(const struct FrScoringKey *key,
                                 const int32_t *responses,
                                 size_t len,
                                 double *out,
                                 size_t out_len);

// Loads a model file written by `facetrec train`.
//
// # Safety
// `path` must be a NUL-terminated string; `out` valid for one pointer write.
enum FrStatus fr_model_load(const char *path, struct FrModel **out);

// Feature dimension the model expects, or 0 for a NULL handle.
//
// # Safety
// `model` must be NULL or a live handle.
size_t fr_model_dim(const struct FrModel *model);

// Predicts `n_rows` row-major feature rows of width `dim`. Writes 0/1 labels
// to `labels_out` and, when `scores_out` is not NULL, positive-class scores.
//
// # Safety
// `rows` must hold `n_rows * dim` doubles; outputs must hold `n_rows` values.
enum FrStatus fr_model_predict(const struct FrModel *model,
                               const double *rows,
                               size_t n_rows,
                               size_t dim,
                               uint8_t *labels_out,
                               double *scores_out);

// # Safety
// `model` must be NULL or a handle from this library not yet freed.
void fr_model_free(struct FrModel *model);

// Macro-F1 of two 0/1 label arrays (any nonzero byte counts as 1).
//
// # Safety
// `gold` and `predicted` must hold `len` bytes; `out` one double.
enum FrStatus fr_f1_macro(const uint8_t *gold, const uint8_t *predicted, size_t len, double *out);

// Runs the experiment described by a config file, like `facetrec run`.
// `out_dir` overrides the config's output directory when not NULL. When
// `report_csv` is not NULL it receives the report CSV, to be released with
// [`fr_string_free`].
//
// # Safety
// String arguments must be NULL or NUL-terminated; `report_csv` must be
// NULL or valid for one pointer write.
enum FrStatus fr_run_experiment(const char *config_path, const char *out_dir, char **report_csv);

// Releases a string returned by this library.
//
// # Safety
// `s` must be NULL or a string from this library not yet freed.
void fr_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FACETREC_H */
