#ifndef ASSEMBLIES_H
#define ASSEMBLIES_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result codes. Zero is success.
 */
typedef enum AsmStatus {
  ASM_STATUS_OK = 0,
  /*
   A required pointer argument was null.
   */
  ASM_STATUS_NULL_POINTER = 1,
  /*
   Parameters or configuration rejected.
   */
  ASM_STATUS_CONFIG = 2,
  /*
   A buffer or sample has the wrong length.
   */
  ASM_STATUS_DIMENSION = 3,
  /*
   The model has no assemblies yet, or was already trained.
   */
  ASM_STATUS_STATE = 4,
  /*
   Arguments outside a formula's domain.
   */
  ASM_STATUS_DOMAIN = 5,
  /*
   File could not be read, written or parsed.
   */
  ASM_STATUS_IO = 6,
  /*
   A computation produced a non-finite value.
   */
  ASM_STATUS_NUMERICAL = 7,
  /*
   An internal panic was caught.
   */
  ASM_STATUS_PANIC = 8,
  /*
   A string argument was not valid UTF-8.
   */
  ASM_STATUS_UTF8 = 9,
} AsmStatus;

/*
 Opaque model handle: one learning area, its sensory fiber and, once
 trained, one assembly per class.
 */
typedef struct AsmModel AsmModel;

/*
 Parameters of [`asm_bounds`]. Set `gamma` to NaN when no measured weight
 is available.
 */
typedef struct AsmBoundInputs {
  double n;
  double k;
  double p;
  double r;
  double q;
  double alpha;
  double gamma;
  double delta;
  double beta;
} AsmBoundInputs;

/*
 Closed-form bounds. Unavailable values are NaN; `rounds_to_recall_weight`
 is -1 when undefined.
 */
typedef struct AsmBounds {
  double beta0;
  double beta0_full;
  double support_bound;
  double recall_defect_bound;
  double gamma_recall_min;
  double gamma_multi_max;
  double classify_defect_bound;
  double classify_defect_bound_measured;
  double halfspace_margin_req;
  bool halfspace_margin_met;
  int64_t rounds_to_recall_weight;
} AsmBounds;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failed call on this thread, or an empty string.
 The pointer stays valid until the next call into this library on the
 same thread.
 */
const char *asm_last_error(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *asm_version(void);

/*
 Creates an untrained model with `n` neurons, cap size `k`, edge
 probability `p` and plasticity `beta`. `n_sensory` is the sensory input
 length; pass 0 to use `n`.

 # Safety
 `out` must be a valid pointer to writable storage for one handle.
 */
enum AsmStatus asm_model_new(size_t n,
                             size_t k,
                             double p,
                             double beta,
                             uint64_t seed,
                             size_t n_sensory,
                             struct AsmModel **out);

/*
 Releases a model. Null is accepted and ignored.

 # Safety
 `model` must be null or a handle from this library not yet freed.
 */
void asm_model_free(struct AsmModel *model);

/*
 Learning-area size `n`, or 0 for a null or unusable handle.

 # Safety
 `model` must be null or a live handle.
 */
size_t asm_model_n(const struct AsmModel *model);

/*
 Length of the sensory input vectors, or 0 for a null or unusable handle.

 # Safety
 `model` must be null or a live handle.
 */
size_t asm_model_n_sensory(const struct AsmModel *model);

/*
 Cap size `k`, or 0 for a null or unusable handle.

 # Safety
 `model` must be null or a live handle.
 */
size_t asm_model_k(const struct AsmModel *model);

/*
 Number of learned assemblies (0 before training).

 # Safety
 `model` must be null or a live handle.
 */
size_t asm_model_num_classes(const struct AsmModel *model);

/*
 Trains one assembly per class on caller-supplied samples.

 `samples` holds `classes * samples_per_class` vectors of length
 `asm_model_n_sensory`, class-major: sample `s` of class `c` starts at
 `(c * samples_per_class + s) * n_sensory`. A model can be trained once.

 # Safety
 `model` must be a live handle and `samples` must point to `samples_len`
 readable doubles.
 */
enum AsmStatus asm_model_train(struct AsmModel *model,
                               const double *samples,
                               size_t samples_len,
                               size_t classes,
                               size_t samples_per_class,
                               bool homeostasis);

/*
 Draws `classes` random stimulus classes (core size `k`, on-core firing
 probability `r`, off-core `q`) from the model seed and trains on them.

 # Safety
 `model` must be a live handle.
 */
enum AsmStatus asm_model_train_stimulus(struct AsmModel *model,
                                        size_t classes,
                                        double r,
                                        double q,
                                        size_t samples_per_class,
                                        bool homeostasis);

/*
 Classifies `x` by the assembly with the largest overlap with the evoked
 cap. `overlaps`, if not null, receives one count per class and must hold
 `overlaps_len >= asm_model_num_classes` entries.

 # Safety
 `model` must be a live handle, `x` must point to `x_len` doubles, `label`
 must be writable and `overlaps` null or writable for `overlaps_len` entries.
 */
enum AsmStatus asm_model_classify(const struct AsmModel *model,
                                  const double *x,
                                  size_t x_len,
                                  size_t *label,
                                  size_t *overlaps,
                                  size_t overlaps_len);

/*
 Writes the `k` neurons (ascending) that fire when `x` is presented from
 rest.

 # Safety
 `model` must be a live handle, `x` must point to `x_len` doubles and
 `cap` must be writable for `cap_len` entries.
 */
enum AsmStatus asm_model_response(const struct AsmModel *model,
                                  const double *x,
                                  size_t x_len,
                                  uint32_t *cap,
                                  size_t cap_len);

/*
 Copies the learned assembly of `label` (ascending neuron indices, `k` of
 them) into `out`.

 # Safety
 `model` must be a live handle and `out` writable for `out_len` entries.
 */
enum AsmStatus asm_model_assembly(const struct AsmModel *model,
                                  size_t label,
                                  uint32_t *out,
                                  size_t out_len);

/*
 Saves a trained model to `path`.

 # Safety
 `model` must be a live handle and `path` a NUL-terminated string.
 */
enum AsmStatus asm_model_save(const struct AsmModel *model, const char *path);

/*
 Loads a model written by [`asm_model_save`].

 # Safety
 `path` must be a NUL-terminated string and `out` writable.
 */
enum AsmStatus asm_model_load(const char *path, struct AsmModel **out);

/*
 Evaluates every bound at `inputs`.

 # Safety
 `inputs` must be readable and `out` writable.
 */
enum AsmStatus asm_bounds(const struct AsmBoundInputs *inputs, struct AsmBounds *out);

/*
 Runs the experiment described by a TOML config, writes its result files
 into `out_dir` (if not null) and stores the mean accuracy in
 `mean_accuracy` (if not null). For sweeps the mean is over every grid
 point; for MNIST runs it is the best test accuracy.

 # Safety
 `config_toml` must be a NUL-terminated string; `out_dir` null or
 NUL-terminated; `mean_accuracy` null or writable.
 */
enum AsmStatus asm_run_experiment(const char *config_toml,
                                  const char *out_dir,
                                  double *mean_accuracy);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ASSEMBLIES_H */
