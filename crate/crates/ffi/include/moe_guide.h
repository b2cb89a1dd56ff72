#ifndef MOE_GUIDE_H
#define MOE_GUIDE_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MgStatus {
  MG_OK = 0,
  MG_NULL_POINTER = 1,
  MG_INVALID_ARGUMENT = 2,
  MG_SHAPE_MISMATCH = 3,
  MG_IO = 4,
  MG_PARSE = 5,
  MG_NON_FINITE = 6,
  MG_INVALID_STATE = 7,
  MG_PANIC = 99,
} MgStatus;

typedef enum MgFalloff {
  MG_EXPONENTIAL = 0,
  MG_LINEAR = 1,
} MgFalloff;

typedef enum MgDecayMode {
  // `beta0 * decay^t`.
  MG_PER_STEP = 0,
  // `beta0 * exp(-decay * t)`.
  MG_EXPONENTIAL_RATE = 1,
} MgDecayMode;

// Opaque episodic novelty mask.
typedef struct MgMask MgMask;

// Opaque trained mixture.
typedef struct MgModel MgModel;

typedef struct MgMappingConfig {
  double l_min;
  double l_max;
  double steepness;
  double scale;
  enum MgFalloff falloff;
} MgMappingConfig;

typedef struct MgDecay {
  double beta0;
  double decay;
  enum MgDecayMode mode;
} MgDecay;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *mg_version(void);

// Message for the last failure on this thread ("" after a success). The
// pointer stays valid until the next call into this library on the thread.
const char *mg_last_error(void);

// Loads a model file written by `moe-guide train-moe`.
enum MgStatus mg_model_load(const char *path, struct MgModel **out);

void mg_model_free(struct MgModel *model);

// State dimension, or 0 for NULL.
size_t mg_model_state_dim(const struct MgModel *model);

// Number of experts, or 0 for NULL.
size_t mg_model_num_experts(const struct MgModel *model);

// Reconstruction loss of a raw state.
enum MgStatus mg_model_loss(const struct MgModel *model,
                            const double *state,
                            size_t len,
                            double *out);

// Normalized state's reconstruction (`state_dim` values) and gate weights
// (`num_experts` values). Either output may be NULL with capacity 0.
enum MgStatus mg_model_reconstruct(const struct MgModel *model,
                                   const double *state,
                                   size_t len,
                                   double *out_recon,
                                   size_t recon_cap,
                                   double *out_weights,
                                   size_t weights_cap);

// Defaults: l_min 0.01, l_max 0.1, steepness 20, scale 1, exponential.
struct MgMappingConfig mg_mapping_default(void);

// Maps a loss to a reward in `[0, scale]`.
enum MgStatus mg_map_loss(double loss, const struct MgMappingConfig *config, double *out);

// Bonus weight at step `t`.
enum MgStatus mg_beta_at(const struct MgDecay *decay, uint64_t t, double *out);

// Empty mask that rounds each coordinate to a multiple of `pitch`.
enum MgStatus mg_mask_new(double pitch, struct MgMask **out);

enum MgStatus mg_mask_reset(struct MgMask *mask);

// Number of states marked this episode, or 0 for NULL.
size_t mg_mask_len(const struct MgMask *mask);

void mg_mask_free(struct MgMask *mask);

// `beta_t * g(L(state))`. With a non-NULL mask, a state already marked
// this episode earns 0 and a new state is marked.
enum MgStatus mg_shaped_bonus(const struct MgModel *model,
                              const struct MgMappingConfig *config,
                              const struct MgDecay *decay,
                              struct MgMask *mask,
                              const double *state,
                              size_t len,
                              uint64_t t,
                              double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MOE_GUIDE_H */
