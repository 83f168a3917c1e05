/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef INTERFERENCE_H
#define INTERFERENCE_H

#include <stddef.h>
#include <stdint.h>
#include <stdbool.h>

typedef enum ItfStatus {
  ITF_STATUS_OK = 0,
  ITF_STATUS_NULL_POINTER = 1,
  ITF_STATUS_INVALID_ARGUMENT = 2,
  // The requested method cannot handle this model and design.
  ITF_STATUS_INFEASIBLE = 3,
  // A Rust panic was caught at the boundary.
  ITF_STATUS_INTERNAL = 4,
} ItfStatus;

// Values accepted by the `method` argument of [`itf_estimands`].
typedef enum ItfMethod {
  ITF_METHOD_AUTO = 0,
  ITF_METHOD_EXACT = 1,
  ITF_METHOD_BINOMIAL = 2,
  ITF_METHOD_MONTE_CARLO = 3,
} ItfMethod;

// Opaque treatment design.
typedef struct ItfDesign ItfDesign;

// Opaque outcome model.
typedef struct ItfModel ItfModel;

typedef struct ItfEstimands {
  double ade;
  double aie;
  double aoe;
  // Meaningful only when `has_inf` is true.
  double inf;
  bool has_inf;
  double se_ade;
  double se_aie;
  double se_inf;
  uint64_t replications;
  // The method actually used, as an `ItfMethod` value.
  uint32_t method;
} ItfEstimands;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread, or an empty string.
// The pointer stays valid until the next call into this library from the
// same thread.
const char *itf_last_error(void);

// Library version as a static NUL-terminated string.
const char *itf_version(void);

// Linear-in-means model `Y_i = β1 + β2·w_i + β3·(treated share of
// neighbors)` on a circulant graph with `half_width` neighbors per side.
//
// # Safety
// `out` must be valid for a write.
enum ItfStatus itf_model_new_linear_in_means(size_t n,
                                             size_t half_width,
                                             double beta1,
                                             double beta2,
                                             double beta3,
                                             struct ItfModel **out);

// Figure-1 structural setting (1, 2 or 3) on a circulant graph.
//
// # Safety
// `out` must be valid for a write.
enum ItfStatus itf_model_new_fig1(uint8_t setting,
                                  size_t n,
                                  size_t half_width,
                                  struct ItfModel **out);

// `Y_i = (Σ_j w_j − nπ0)/√(nπ0(1−π0))` for every unit.
//
// # Safety
// `out` must be valid for a write.
enum ItfStatus itf_model_new_diverging(size_t n, double pi0, struct ItfModel **out);

// Saturated linear model `Y_i = α_i + β_i·w_i + Σ_j ν_ij·w_j`. `nu` is
// row-major `n × n` with a zero diagonal.
//
// # Safety
// `alpha` and `beta` must point to `n` values, `nu` to `n·n` values, and
// `out` must be valid for a write.
enum ItfStatus itf_model_new_saturated_linear(size_t n,
                                              const double *alpha,
                                              const double *beta,
                                              const double *nu,
                                              struct ItfModel **out);

// Number of units, or 0 for a null handle.
//
// # Safety
// `model` must be null or a live handle.
size_t itf_model_units(const struct ItfModel *model);

// # Safety
// `model` must be null or a handle not yet freed.
void itf_model_free(struct ItfModel *model);

// Bernoulli design with per-unit probabilities in (0, 1).
//
// # Safety
// `pi` must point to `n` values and `out` must be valid for a write.
enum ItfStatus itf_design_new_bernoulli(size_t n, const double *pi, struct ItfDesign **out);

// # Safety
// `out` must be valid for a write.
enum ItfStatus itf_design_new_bernoulli_constant(size_t n, double pi, struct ItfDesign **out);

// Two-stage design on contiguous clusters of size `m`: `ρ·n/m` clusters
// are treated, one unit in each.
//
// # Safety
// `out` must be valid for a write.
enum ItfStatus itf_design_new_two_stage(size_t n, size_t m, double rho, struct ItfDesign **out);

// # Safety
// `design` must be null or a handle not yet freed.
void itf_design_free(struct ItfDesign *design);

// ADE, AIE, AOE and INF of `model` under `design`. `method` is an
// `ItfMethod` value; `replications` and `seed` are used by Monte Carlo.
//
// # Safety
// `model` and `design` must be live handles and `out` valid for a write.
enum ItfStatus itf_estimands(const struct ItfModel *model,
                             const struct ItfDesign *design,
                             uint32_t method,
                             uint64_t replications,
                             uint64_t seed,
                             struct ItfEstimands *out);

// Horvitz–Thompson direct-effect estimate from one Bernoulli experiment.
// `w` holds 0/1 bytes.
//
// # Safety
// `w`, `y` and `pi` must point to `n` values and `out` must be valid for a
// write.
enum ItfStatus itf_ht_ade(size_t n,
                          const uint8_t *w,
                          const double *y,
                          const double *pi,
                          double *out);

// Horvitz–Thompson indirect-effect estimate. The analyst graph is given in
// compressed form: the neighbors of unit `j` (units whose treatment may
// affect `Y_j`) are `neighbors[offsets[j] .. offsets[j + 1]]`.
//
// # Safety
// `w`, `y` and `pi` must point to `n` values, `offsets` to `n + 1`
// values, `neighbors` to `offsets[n]` values, and `out` must be valid for
// a write.
enum ItfStatus itf_ht_aie(size_t n,
                          const uint8_t *w,
                          const double *y,
                          const double *pi,
                          const size_t *offsets,
                          const size_t *neighbors,
                          double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* INTERFERENCE_H */
