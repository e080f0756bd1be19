#ifndef UFEST_H
#define UFEST_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every call.
typedef enum UfestStatus {
  UFEST_STATUS_OK = 0,
  UFEST_STATUS_NULL_POINTER = 1,
  UFEST_STATUS_INVALID_UTF8 = 2,
  UFEST_STATUS_INVALID_SPEC = 3,
  UFEST_STATUS_INVALID_ARGUMENT = 4,
  UFEST_STATUS_SHAPE = 5,
  UFEST_STATUS_NOT_UNITARY = 6,
  UFEST_STATUS_BUDGET_EXCEEDED = 7,
  UFEST_STATUS_NUMERICAL = 8,
  UFEST_STATUS_UNSUPPORTED = 9,
  UFEST_STATUS_PANIC = 10,
} UfestStatus;

// Estimation plan for one function spec. Opaque to C.
typedef struct UfestPlan UfestPlan;

// Summary of a plan.
typedef struct UfestPlanInfo {
  // Dimension of the unitary.
  size_t d;
  // Tensor-power truncation; each shot makes `2m` controlled-g queries.
  size_t m;
  size_t queries_per_shot;
  // Number of non-zero singular values sampled from.
  size_t coordinates;
  // ‖A‖₁.
  double trace_norm;
} UfestPlanInfo;

typedef struct UfestComplex {
  double re;
  double im;
} UfestComplex;

typedef struct UfestPacResult {
  struct UfestComplex estimate;
  double stderr;
  uint64_t shots;
  uint64_t total_queries;
} UfestPacResult;

// A Monte-Carlo mean with its standard error.
typedef struct UfestEstimate {
  struct UfestComplex mean;
  double stderr;
  size_t samples;
} UfestEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *ufest_version(void);

// Message of the last failed call on this thread (empty after a success).
// Valid until the next call on the same thread.
const char *ufest_last_error(void);

// Builds the estimation plan of a function spec. `*out` receives a handle
// to release with `ufest_plan_free`, or NULL on failure.
//
// # Safety
// `spec_json` must be NULL or a NUL-terminated string; `out` must be NULL
// or valid for writes.
enum UfestStatus ufest_plan_new(const char *spec_json, struct UfestPlan **out);

// As `ufest_plan_new`, keeping only the components of total degree at
// most `max_degree` (the zero plan if none survive).
//
// # Safety
// As `ufest_plan_new`.
enum UfestStatus ufest_plan_new_truncated(const char *spec_json,
                                          size_t max_degree,
                                          struct UfestPlan **out);

// Releases a plan. NULL is ignored.
//
// # Safety
// `plan` must be NULL or a live handle from `ufest_plan_new*`.
void ufest_plan_free(struct UfestPlan *plan);

// # Safety
// `plan` must be a live handle; `out` valid for writes.
enum UfestStatus ufest_plan_info(const struct UfestPlan *plan, struct UfestPlanInfo *out);

// Exact `f(g)` of the plan's function.
//
// # Safety
// `plan` must be a live handle, `g` must hold `d * d` entries, `out` valid
// for writes.
enum UfestStatus ufest_plan_eval(const struct UfestPlan *plan,
                                 const struct UfestComplex *g,
                                 size_t d,
                                 struct UfestComplex *out);

// Exact expectation of one shot given `g`, from the simulated circuit
// probabilities.
//
// # Safety
// As `ufest_plan_eval`.
enum UfestStatus ufest_plan_conditional_expectation(const struct UfestPlan *plan,
                                                    const struct UfestComplex *g,
                                                    size_t d,
                                                    struct UfestComplex *out);

// PAC estimate of `f(g)` to within `epsilon` with probability `1 - delta`.
// `shot_cap = 0` means the library default.
//
// # Safety
// As `ufest_plan_eval`.
enum UfestStatus ufest_plan_estimate(const struct UfestPlan *plan,
                                     const struct UfestComplex *g,
                                     size_t d,
                                     double epsilon,
                                     double delta,
                                     uint64_t seed,
                                     uint64_t shot_cap,
                                     struct UfestPacResult *out);

// Haar average of `|E[shot | g] - f(g)|²` over `n` samples.
//
// # Safety
// `plan` must be a live handle; `out` valid for writes.
enum UfestStatus ufest_plan_bias(const struct UfestPlan *plan,
                                 size_t n,
                                 uint64_t seed,
                                 struct UfestEstimate *out);

// `Rep_ε(f)` from the closed forms.
//
// # Safety
// `spec_json` must be a NUL-terminated string; `out` valid for writes.
enum UfestStatus ufest_rep_epsilon(const char *spec_json, double epsilon, size_t *out);

// Hoeffding shot count for a plan with trace norm `trace_norm`.
//
// # Safety
// `out` must be valid for writes.
enum UfestStatus ufest_pac_shots(double epsilon, double delta, double trace_norm, uint64_t *out);

// Writes a Haar-random element of U(d), row-major, to `out` (`d * d`
// entries).
//
// # Safety
// `out` must be valid for `d * d` writes.
enum UfestStatus ufest_sample_haar(size_t d,
                                   uint64_t seed,
                                   uint64_t stream,
                                   struct UfestComplex *out);

// Exact `∫ |g₁₁|^{2α} dg` over U(d).
//
// # Safety
// `out` must be valid for writes.
enum UfestStatus ufest_haar_moment(uint32_t alpha, size_t d, double *out);

// Monte-Carlo `∫ |g₁₁|^{2α} dg` from `n` Haar samples.
//
// # Safety
// `out` must be valid for writes.
enum UfestStatus ufest_mc_moment(uint32_t alpha,
                                 size_t d,
                                 size_t n,
                                 uint64_t seed,
                                 struct UfestEstimate *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* UFEST_H */
