#ifndef POSEKIT_H
#define POSEKIT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define PK_OK 0

// A required pointer argument was null.
#define PK_ERR_NULL -1

// A string argument was not valid UTF-8.
#define PK_ERR_UTF8 -2

// The library panicked; the handle involved should not be reused.
#define PK_ERR_PANIC -3

// Keypoints per person; keypoint buffers hold twice as many doubles (x, y).
#define PK_NUM_KEYPOINTS 14

// Length of a PDJ curve.
#define PK_NUM_THRESHOLDS 101

// A gray or RGB image with values in [0, 1].
typedef struct PkImage PkImage;

// A trained single-tree model.
typedef struct PkModel PkModel;

// A lower-constrained and an upper-constrained model used together.
typedef struct PkTwoTree PkTwoTree;

// Feature pyramid settings for inference. Cell size and orientation bins
// always come from the model.
typedef struct PkPyramidOptions {
  double scale_step;
  double base_scale;
  // 0 for every level that fits.
  uint32_t levels;
  uint32_t padding;
  uint32_t min_cells;
} PkPyramidOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version, a static nul-terminated string.
const char *pk_version(void);

// Message of the last failed call on this thread, or null after a success.
// Valid until the next call into the library on the same thread.
const char *pk_last_error_message(void);

// Default pyramid options.
struct PkPyramidOptions pk_pyramid_options_default(void);

// # Safety
// `path` must be a nul-terminated string and `out` a valid pointer.
int32_t pk_model_load(const char *path, struct PkModel **out);

// # Safety
// `model` must come from this library; `path` must be nul-terminated.
int32_t pk_model_save(const struct PkModel *model, const char *path);

// Number of parts of the model, 0 for a null handle.
//
// # Safety
// `model` must be null or come from this library.
size_t pk_model_num_parts(const struct PkModel *model);

// # Safety
// `model` must be null or come from `pk_model_load`, and not be used afterwards.
void pk_model_free(struct PkModel *model);

// Pairs copies of a lower-constrained and an upper-constrained model.
//
// # Safety
// Both models must come from this library and `out` must be valid.
int32_t pk_two_tree_new(const struct PkModel *lower,
                        const struct PkModel *upper,
                        struct PkTwoTree **out);

// # Safety
// `models` must be null or come from `pk_two_tree_new`, and not be used afterwards.
void pk_two_tree_free(struct PkTwoTree *models);

// # Safety
// `path` must be nul-terminated and `out` valid.
int32_t pk_image_load(const char *path, struct PkImage **out);

// Gray image from `width * height` row-major values in [0, 1].
//
// # Safety
// `pixels` must point at `width * height` doubles and `out` be valid.
int32_t pk_image_from_gray(size_t width, size_t height, const double *pixels, struct PkImage **out);

// # Safety
// `image` must be null or come from this library, and not be used afterwards.
void pk_image_free(struct PkImage *image);

// Best pose of a single model. Writes `2 * PK_NUM_KEYPOINTS` doubles
// (x0, y0, x1, y1, ...) in pixels and, if `out_score` is not null, the score.
// `opts` may be null for defaults.
//
// # Safety
// Handles must come from this library; `out_xy` must hold 28 doubles.
int32_t pk_estimate(const struct PkModel *model,
                    const struct PkImage *image,
                    const struct PkPyramidOptions *opts,
                    double *out_xy,
                    double *out_score);

// Two-tree estimate: legs from the lower tree, the rest from the upper tree
// clamped to them. With `upper_first` nonzero the roles are swapped.
//
// # Safety
// As for `pk_estimate`.
int32_t pk_two_tree_estimate(const struct PkTwoTree *models,
                             const struct PkImage *image,
                             const struct PkPyramidOptions *opts,
                             int32_t upper_first,
                             double *out_xy,
                             double *out_score);

// PDJ curve of one keypoint over `n` people. `pred` and `gt` hold
// `n * 2 * PK_NUM_KEYPOINTS` doubles laid out as in `pk_estimate`; NaN
// ground truth marks an unannotated joint. Writes `PK_NUM_THRESHOLDS` rates
// in percent and, if `out_avg` is not null, their mean.
//
// # Safety
// Buffers must have the stated lengths.
int32_t pk_pdj_curve(const double *pred,
                     const double *gt,
                     size_t n,
                     size_t keypoint,
                     double *out_rates,
                     double *out_avg);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* POSEKIT_H */
