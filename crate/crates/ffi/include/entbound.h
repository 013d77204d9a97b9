#ifndef ENTBOUND_H
#define ENTBOUND_H

#include <stdbool.h>
#include <stddef.h>

/**
 * Result of every fallible call.
 */
typedef enum EbStatus {
  EB_STATUS_OK = 0,
  EB_STATUS_NULL_POINTER = 1,
  EB_STATUS_INVALID_ARGUMENT = 2,
  /**
   * An iterative solver failed to converge.
   */
  EB_STATUS_NOT_CONVERGED = 3,
  EB_STATUS_INVALID_STATE = 4,
  EB_STATUS_INTERNAL = 5,
  EB_STATUS_PANIC = 6,
} EbStatus;

/**
 * Definiteness of the cross-block coupling matrix.
 */
typedef enum EbDefiniteness {
  EB_DEFINITENESS_NEGATIVE_SEMIDEFINITE = 0,
  EB_DEFINITENESS_POSITIVE_SEMIDEFINITE = 1,
  EB_DEFINITENESS_INDEFINITE = 2,
} EbDefiniteness;

/**
 * Reference state of the overlap bound.
 */
typedef enum EbBranch {
  EB_BRANCH_FERRO = 0,
  EB_BRANCH_ANTIFERRO = 1,
} EbBranch;

/**
 * Spin chain: couplings and transverse field.
 */
typedef struct EbModel EbModel;

/**
 * Normalized pure state of a chain.
 */
typedef struct EbState EbState;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *eb_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *eb_version(void);

/**
 * Chain with couplings `amplitude / |i-j|^p` and field `field_b`.
 *
 * # Safety
 * `out` must be a valid pointer to a model handle slot.
 */
enum EbStatus eb_model_new_algebraic(size_t n_sites,
                                     double p,
                                     double amplitude,
                                     double field_b,
                                     struct EbModel **out);

/**
 * Chain with the row-major `n_sites x n_sites` coupling matrix `couplings`.
 *
 * # Safety
 * `couplings` must point to `n_sites * n_sites` doubles; `out` must be valid.
 */
enum EbStatus eb_model_new_explicit(size_t n_sites,
                                    const double *couplings,
                                    double field_b,
                                    struct EbModel **out);

/**
 * # Safety
 * `model` must be null or a handle from this library not yet freed.
 */
void eb_model_free(struct EbModel *model);

/**
 * Energy unit `J0` of the couplings.
 *
 * # Safety
 * `model` must be a live handle and `out` valid.
 */
enum EbStatus eb_model_j0(const struct EbModel *model, double *out);

/**
 * Definiteness of the couplings between mirrored halves.
 *
 * # Safety
 * `model` must be a live handle and `out` valid.
 */
enum EbStatus eb_cross_block_classify(const struct EbModel *model, enum EbDefiniteness *out);

/**
 * Ground state of the chain. `energy` and `degenerate` may be null.
 *
 * # Safety
 * `model` must be a live handle, `out` valid, and the optional pointers
 * null or valid.
 */
enum EbStatus eb_ground_state(const struct EbModel *model,
                              struct EbState **out,
                              double *energy,
                              bool *degenerate);

/**
 * State from `2^n_sites` amplitudes, normalized on input. `imag` may be null
 * for real amplitudes.
 *
 * # Safety
 * `real` (and `imag` when non-null) must point to `2^n_sites` doubles.
 */
enum EbStatus eb_state_from_amplitudes(size_t n_sites,
                                       const double *real,
                                       const double *imag,
                                       struct EbState **out);

/**
 * # Safety
 * `state` must be null or a handle from this library not yet freed.
 */
void eb_state_free(struct EbState *state);

/**
 * Log-negativity (base 2) of the half/half cut.
 *
 * # Safety
 * `state` must be a live handle and `out` valid.
 */
enum EbStatus eb_state_log_negativity(const struct EbState *state, double *out);

/**
 * Overlap lower bound in bits against the given reference.
 *
 * # Safety
 * `state` must be a live handle and `out` valid.
 */
enum EbStatus eb_state_bell_overlap(const struct EbState *state, enum EbBranch branch, double *out);

/**
 * Witness bound built from `model` and evaluated on `state`, optimized over
 * `w1` with at most `budget` probes. `w0` and `w1` may be null.
 *
 * # Safety
 * `model` and `state` must be live handles, `bound_bits` valid, and the
 * optional pointers null or valid.
 */
enum EbStatus eb_witness_optimize(const struct EbModel *model,
                                  const struct EbState *state,
                                  bool include_parity,
                                  enum EbBranch branch,
                                  size_t budget,
                                  double *bound_bits,
                                  double *w0,
                                  double *w1);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ENTBOUND_H */
