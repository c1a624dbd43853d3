#ifndef FERMI_H
#define FERMI_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FermiStatus {
  FERMI_STATUS_OK = 0,
  FERMI_STATUS_NULL_POINTER = 1,
  FERMI_STATUS_INVALID_ARGUMENT = 2,
  FERMI_STATUS_SOLVER_FAILURE = 3,
  FERMI_STATUS_NOT_HYPERBOLIC = 4,
  FERMI_STATUS_DIVERGED = 5,
  FERMI_STATUS_INTERNAL = 6,
} FermiStatus;

// Opaque set of stable-manifold samples.
typedef struct FermiManifold FermiManifold;

// Opaque racket: a two-harmonic trigonometric polynomial and gravity.
typedef struct FermiRacket FermiRacket;

typedef struct FermiCoefficients {
  double a1;
  double b1;
  double a2;
  double b2;
} FermiCoefficients;

typedef struct FermiState {
  double t;
  double v;
} FermiState;

typedef struct FermiCertificate {
  bool certified;
  double max_condition_residual;
  double max_integrality;
  double max_velocity_residual;
  double max_divdiff;
} FermiCertificate;

typedef struct FermiSpectrum {
  double trace;
  bool hyperbolic;
  // Zero unless hyperbolic.
  double lambda_s;
  double lambda_u;
} FermiSpectrum;

typedef struct FermiManifoldSample {
  double a;
  double t0;
  double v0;
  double theta_residual;
  double decay_ratio;
  bool accepted;
} FermiManifoldSample;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// The message of the last failed call on this thread, or null. The pointer
// stays valid until the next call into the library from the same thread.
const char *fermi_last_error(void);

// Creates the family member `p_s` for gravity `g`.
//
// # Safety
// `out_handle` must be valid for writes. The handle is released with [`fermi_racket_free`].
enum FermiStatus fermi_racket_family(double s, double g, struct FermiRacket **out_handle);

// Creates `a1 sin 2πt + b1 cos 2πt + a2 sin 4πt + b2 cos 4πt` for gravity `g`.
//
// # Safety
// `coefficients` must be readable and `out_handle` writable.
enum FermiStatus fermi_racket_new(const struct FermiCoefficients *coefficients,
                                  double g,
                                  struct FermiRacket **out_handle);

// # Safety
// `handle` must come from this library and not be used afterwards. Null is ignored.
void fermi_racket_free(struct FermiRacket *handle);

// # Safety
// `handle` must be a live racket and `out_coefficients` writable.
enum FermiStatus fermi_racket_coefficients(const struct FermiRacket *handle,
                                           struct FermiCoefficients *out_coefficients);

// Value (`order` 0) or derivative of order 1 to 3 of the racket at `t`.
//
// # Safety
// `handle` must be a live racket and `out_value` writable.
enum FermiStatus fermi_racket_eval(const struct FermiRacket *handle,
                                   double t,
                                   uint8_t order,
                                   double *out_value);

// Largest racket speed over a period.
//
// # Safety
// `handle` must be a live racket and `out_value` writable.
enum FermiStatus fermi_racket_max_speed(const struct FermiRacket *handle, double *out_value);

// Upper bound on the speed of `p_s`, divided by `g`.
//
// # Safety
// `out_value` must be writable.
enum FermiStatus fermi_derivative_bound(double s, double *out_value);

// Minimizes the speed bound over `[s_lo, s_hi]`.
//
// # Safety
// `out_s` and `out_value` must be writable.
enum FermiStatus fermi_minimize_bound(double s_lo,
                                      double s_hi,
                                      double tol,
                                      double *out_s,
                                      double *out_value);

// One impact forward in double precision.
//
// # Safety
// `handle` must be a live racket, `state` readable and `out_state` writable.
enum FermiStatus fermi_step_forward(const struct FermiRacket *handle,
                                    const struct FermiState *state,
                                    struct FermiState *out_state);

// The unique preimage of `state` in double precision.
//
// # Safety
// `handle` must be a live racket, `state` readable and `out_state` writable.
enum FermiStatus fermi_step_backward(const struct FermiRacket *handle,
                                     const struct FermiState *state,
                                     struct FermiState *out_state);

// Certifies the period-two unbounded orbit of `p_s` with offset `k` by
// following it for `horizon` impacts in extended precision.
//
// # Safety
// `out_certificate` must be writable.
enum FermiStatus fermi_certify(double s,
                               double g,
                               uint64_t k,
                               size_t horizon,
                               struct FermiCertificate *out_certificate);

// Trace and eigenvalues of the cycle matrix of the period-two orbit.
//
// # Safety
// `out_spectrum` must be writable.
enum FermiStatus fermi_cycle_spectrum(double s,
                                      double g,
                                      uint64_t k,
                                      struct FermiSpectrum *out_spectrum);

// Samples the stable manifold of the period-two orbit at `samples` odd
// parameters in `[-a_max, a_max]` and checks `cycles` cycles of each.
//
// # Safety
// `out_handle` must be writable. The handle is released with [`fermi_manifold_free`].
enum FermiStatus fermi_manifold_compute(double s,
                                        double g,
                                        uint64_t k,
                                        size_t samples,
                                        double a_max,
                                        size_t cycles,
                                        struct FermiManifold **out_handle);

// # Safety
// `handle` must be a live manifold; `out_len` and `out_lambda_s` writable.
enum FermiStatus fermi_manifold_info(const struct FermiManifold *handle,
                                     size_t *out_len,
                                     double *out_lambda_s);

// # Safety
// `handle` must be a live manifold and `out_sample` writable.
enum FermiStatus fermi_manifold_sample(const struct FermiManifold *handle,
                                       size_t index,
                                       struct FermiManifoldSample *out_sample);

// # Safety
// `handle` must come from this library and not be used afterwards. Null is ignored.
void fermi_manifold_free(struct FermiManifold *handle);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FERMI_H */
