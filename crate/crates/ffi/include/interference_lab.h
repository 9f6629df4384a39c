#ifndef INTERFERENCE_LAB_H
#define INTERFERENCE_LAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible entry point.
 */
typedef enum IlStatus {
  IL_STATUS_OK = 0,
  IL_STATUS_INVALID_ARGUMENT = 1,
  IL_STATUS_INVALID_DESIGN = 2,
  IL_STATUS_CAPACITY = 3,
  IL_STATUS_UNSUPPORTED = 4,
  IL_STATUS_INCOMPLETE = 5,
  IL_STATUS_NUMERICALLY_AMBIGUOUS = 6,
  IL_STATUS_PARSE = 7,
  IL_STATUS_IO = 8,
  IL_STATUS_NULL_POINTER = 9,
  IL_STATUS_PANIC = 10,
} IlStatus;

typedef enum IlEstimator {
  IL_ESTIMATOR_DIFF_MEANS = 0,
  /**
   * Needs a k-local table; the neighborhoods come from its graph.
   */
  IL_ESTIMATOR_HORVITZ_THOMPSON = 1,
  IL_ESTIMATOR_ADDITIVE_UNBIASED = 2,
  IL_ESTIMATOR_PRIMARY_UNBIASED = 3,
  /**
   * Always returns the `constant` argument.
   */
  IL_ESTIMATOR_CONSTANT = 4,
} IlEstimator;

typedef enum IlEstimand {
  IL_ESTIMAND_ATE = 0,
  IL_ESTIMAND_PRIMARY_EFFECT = 1,
} IlEstimand;

/**
 * Opaque assignment design.
 */
typedef struct IlDesign IlDesign;

/**
 * Opaque undirected graph.
 */
typedef struct IlGraph IlGraph;

/**
 * Opaque potential-outcome table.
 */
typedef struct IlTable IlTable;

typedef struct IlMoments {
  double expectation;
  double variance;
  double mse;
  double estimand;
  double bias;
  uint64_t support_size;
} IlMoments;

typedef struct IlHtVariance {
  double v_a;
  double v_b;
  double cov;
  double total;
} IlHtVariance;

typedef struct IlFeasibility {
  bool feasible;
  double residual;
  uint64_t family_size;
  uint64_t unknowns;
  uint64_t rank;
  double condition;
} IlFeasibility;

typedef struct IlAdversary {
  double mse;
  double estimand;
  double bound;
  bool bound_holds;
} IlAdversary;

typedef struct IlMcEstimate {
  double mean;
  double stderr;
  uint64_t accepted;
  uint64_t rejected;
} IlMcEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failure on this thread, or NULL if none. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *il_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *il_version(void);

/**
 * # Safety
 * `out` must be valid for writes.
 */
enum IlStatus il_design_crd(size_t n, size_t n_a, struct IlDesign **out);

/**
 * # Safety
 * `out` must be valid for writes.
 */
enum IlStatus il_design_bd(size_t n, struct IlDesign **out);

/**
 * # Safety
 * `out` must be valid for writes.
 */
enum IlStatus il_design_cbd(size_t n, struct IlDesign **out);

/**
 * # Safety
 * `design` must be NULL or a handle from an `il_design_*` constructor.
 */
void il_design_free(struct IlDesign *design);

/**
 * Probability of the assignment whose bit `i` is set when unit `i` is on B.
 *
 * # Safety
 * `design` must be a live handle and `out` valid for writes.
 */
enum IlStatus il_design_pmf(const struct IlDesign *design, uint64_t bits, double *out);

/**
 * Draws one assignment; bit `i` of the result is set when unit `i` is on B.
 *
 * # Safety
 * `design` must be a live handle and `out_bits` valid for writes.
 */
enum IlStatus il_design_sample(const struct IlDesign *design, uint64_t seed, uint64_t *out_bits);

/**
 * Builds a graph from `edge_count` pairs stored flat in `edges`
 * (`edges[2k]`, `edges[2k+1]`).
 *
 * # Safety
 * `edges` must point to `2 * edge_count` readable values (or be NULL when
 * `edge_count` is 0) and `out` must be valid for writes.
 */
enum IlStatus il_graph_new(size_t n, const size_t *edges, size_t edge_count, struct IlGraph **out);

/**
 * Parses the text format: the node count on the first line, then one
 * `u v` edge per line.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` valid for writes.
 */
enum IlStatus il_graph_parse(const char *text, struct IlGraph **out);

/**
 * # Safety
 * `graph` must be NULL or a handle from `il_graph_new`/`il_graph_parse`.
 */
void il_graph_free(struct IlGraph *graph);

/**
 * Size of the closed `k`-step neighborhood of node `i`.
 *
 * # Safety
 * `graph` must be a live handle and `out` valid for writes.
 */
enum IlStatus il_graph_neighborhood_size(const struct IlGraph *graph,
                                         size_t k,
                                         size_t i,
                                         size_t *out);

/**
 * Table with `Y_i(A) = y_a[i]`, `Y_i(B) = y_b[i]` and no interference.
 *
 * # Safety
 * `y_a` and `y_b` must each point to `n` readable values; `out` must be
 * valid for writes.
 */
enum IlStatus il_table_no_interference(const double *y_a,
                                       const double *y_b,
                                       size_t n,
                                       struct IlTable **out);

/**
 * Random k-local table, uniform on `(lower, upper)` per unit and effective
 * treatment.
 *
 * # Safety
 * `graph` must be a live handle and `out` valid for writes.
 */
enum IlStatus il_table_random_k_local(const struct IlGraph *graph,
                                      size_t k,
                                      double lower,
                                      double upper,
                                      uint64_t seed,
                                      struct IlTable **out);

/**
 * Reads an arbitrary-interference table (`assignment,unit,outcome` CSV).
 *
 * # Safety
 * `csv` must be a NUL-terminated string and `out` valid for writes.
 */
enum IlStatus il_table_from_csv(const char *csv, struct IlTable **out);

/**
 * Reads a table in the per-unit JSON format.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` valid for writes.
 */
enum IlStatus il_table_from_json(const char *json, struct IlTable **out);

/**
 * # Safety
 * `table` must be NULL or a handle from an `il_table_*` constructor.
 */
void il_table_free(struct IlTable *table);

/**
 * # Safety
 * `table` must be a live handle and `out` valid for writes.
 */
enum IlStatus il_table_n(const struct IlTable *table, size_t *out);

/**
 * Exact moments of an estimator by enumerating the design's support.
 *
 * # Safety
 * `design` and `table` must be live handles and `out` valid for writes.
 */
enum IlStatus il_exact_moments(const struct IlDesign *design,
                               const struct IlTable *table,
                               enum IlEstimator estimator,
                               double constant,
                               enum IlEstimand estimand,
                               struct IlMoments *out);

/**
 * Closed-form Horvitz–Thompson variance under Bernoulli assignment.
 *
 * # Safety
 * `table` must be a live k-local table handle and `out` valid for writes.
 */
enum IlStatus il_ht_variance(const struct IlTable *table, struct IlHtVariance *out);

/**
 * Decides whether an unbiased estimator exists over the default witness
 * family built from `grid`.
 *
 * # Safety
 * `design` must be a live handle, `grid` must point to `grid_len` values and
 * `out` must be valid for writes.
 */
enum IlStatus il_feasibility(const struct IlDesign *design,
                             enum IlEstimand estimand,
                             const double *grid,
                             size_t grid_len,
                             struct IlFeasibility *out);

/**
 * Worst-case MSE over tables bounded in `(0, m)`, for the ATE.
 *
 * # Safety
 * `design` must be a live handle and `out` valid for writes.
 */
enum IlStatus il_mse_adversary(const struct IlDesign *design,
                               enum IlEstimator estimator,
                               double constant,
                               double m,
                               struct IlAdversary *out);

/**
 * `E_G[2^{|N_i|}]`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum IlStatus il_er_moment_two_pow_nbhd(uint64_t n, double p, double *out);

/**
 * `E_G[2^{|N_i ∩ N_j|}]` for `i ≠ j`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum IlStatus il_er_moment_two_pow_shared(uint64_t n, double p, double *out);

/**
 * `P_G(N_i ∩ N_j = ∅)` for `i ≠ j`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum IlStatus il_er_prob_no_common(uint64_t n, double p, double *out);

/**
 * Finite-N upper bound `h_N(c, p)` on the expected HT variance.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum IlStatus il_er_h_bound(double c, uint64_t n, double p, double *out);

/**
 * Exact expected HT variance for a table whose outcomes all equal `c`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum IlStatus il_er_expected_variance_constant(double c, uint64_t n, double p, double *out);

/**
 * `E_G[E_i] = 2(1 + p)^{N−1}`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum IlStatus il_er_expected_effective_treatments(uint64_t n, double p, double *out);

/**
 * `E_G[F_i] = (1/2)(1 − p/2)^{N−1}`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum IlStatus il_er_expected_informative_fraction(uint64_t n, double p, double *out);

/**
 * Dense-regime lower bound `4 e^{(N−1)/√N} k² / N`.
 */
double il_er_dense_lower_bound(uint64_t n, double k);

/**
 * Monte Carlo estimate of the graph-averaged HT variance with 1-step
 * neighborhoods and outcomes uniform on `(lower, upper)`. Pass
 * `lower == upper` for a constant table.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum IlStatus il_er_mc_expected_variance(uint64_t n,
                                         double p,
                                         double lower,
                                         double upper,
                                         size_t reps,
                                         uint64_t seed,
                                         struct IlMcEstimate *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* INTERFERENCE_LAB_H */
