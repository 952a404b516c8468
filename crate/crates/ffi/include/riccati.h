#ifndef RICCATI_H
#define RICCATI_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  RICCATI_STATUS_OK = 0,
  RICCATI_STATUS_NULL_POINTER = 1,
  RICCATI_STATUS_INVALID_ARGUMENT = 2,
  RICCATI_STATUS_DIMENSION_MISMATCH = 3,
  RICCATI_STATUS_NON_FINITE = 4,
  RICCATI_STATUS_SINGULAR = 5,
  RICCATI_STATUS_NOT_CONVERGED = 6,
  RICCATI_STATUS_STEP_TOO_LARGE = 7,
  RICCATI_STATUS_SOLVER_FAILURE = 8,
  RICCATI_STATUS_BUFFER_TOO_SMALL = 9,
  RICCATI_STATUS_PANIC = 10,
} RiccatiStatus;

// Stabilizing ARE solution.
typedef struct RiccatiAreSolution RiccatiAreSolution;

// Problem data `(A, B, C, M, X0)` and a default horizon.
typedef struct RiccatiProblem RiccatiProblem;

// Solution samples on a uniform time grid.
typedef struct RiccatiTrajectory RiccatiTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message of this thread into `buf` (NUL-terminated,
// truncated to `len`) and returns the full message length.
//
// # Safety
// `buf` must be null or valid for `len` bytes.
size_t riccati_last_error(char *buf, size_t len);

// Builds `M^T X' M = A^T X M + M^T X A - M^T X B B^T X M + C^T C` with
// `A, M` of order `n`, `B` of size `n x m` and `C` of size `p x n`.
// `mass` and `x0` may be null for `M = I` and `X0 = 0`; `x0` is
// symmetrized.
//
// # Safety
// Non-null arrays must hold the stated number of doubles.
RiccatiStatus riccati_problem_new(size_t n,
                                  size_t m,
                                  size_t p,
                                  const double *a,
                                  const double *b,
                                  const double *c,
                                  const double *mass,
                                  const double *x0,
                                  double horizon,
                                  RiccatiProblem **out);

// Generates a named benchmark (`tridiag`, `tridiag-mass`, `conv-diff`,
// `scalar-tanh`, `scalar-stable`, `diag-rank1`).
//
// # Safety
// `name` must be a NUL-terminated string.
RiccatiStatus riccati_problem_benchmark(const char *name, size_t size, RiccatiProblem **out);

// State dimension, or 0 for a null handle.
//
// # Safety
// `problem` must be null or a live handle.
size_t riccati_problem_order(const RiccatiProblem *problem);

// Default final time, or 0 for a null handle.
//
// # Safety
// `problem` must be null or a live handle.
double riccati_problem_horizon(const RiccatiProblem *problem);

// # Safety
// `problem` must be null or a handle not yet freed.
void riccati_problem_free(RiccatiProblem *problem);

// Solves the algebraic Riccati equation by Newton-Kleinman iteration.
//
// # Safety
// `problem` must be a live handle.
RiccatiStatus riccati_are_solve(const RiccatiProblem *problem,
                                double tol,
                                size_t max_iters,
                                RiccatiAreSolution **out);

// Absolute and relative residual of the computed ARE solution.
//
// # Safety
// `sol` must be a live handle; `abs` and `rel` may be null.
RiccatiStatus riccati_are_residual(const RiccatiAreSolution *sol, double *abs, double *rel);

// Numerical rank of the solution, or 0 for a null handle.
//
// # Safety
// `sol` must be null or a live handle.
size_t riccati_are_rank(const RiccatiAreSolution *sol);

// Copies `X_inf` (order `n`, row-major) into `buf`.
//
// # Safety
// `buf` must be valid for `len` doubles.
RiccatiStatus riccati_are_copy_x(const RiccatiAreSolution *sol, double *buf, size_t len);

// # Safety
// `sol` must be null or a handle not yet freed.
void riccati_are_free(RiccatiAreSolution *sol);

// Galerkin solution from `X(0) = 0` on `[0, tf]` with step `h`, using the
// trial space of `are` truncated at `truncation_tol`.
//
// # Safety
// `problem` and `are` must be live handles.
RiccatiStatus riccati_galerkin_solve(const RiccatiProblem *problem,
                                     const RiccatiAreSolution *are,
                                     double h,
                                     double tf,
                                     double truncation_tol,
                                     double tol_exp,
                                     RiccatiTrajectory **out);

// Full-order modified Davison-Maki solution on `[0, tf]` with step `h`.
//
// # Safety
// `problem` must be a live handle.
RiccatiStatus riccati_moddm_solve(const RiccatiProblem *problem,
                                  double h,
                                  double tf,
                                  double tol_exp,
                                  RiccatiTrajectory **out);

// Number of stored time points, or 0 for a null handle.
//
// # Safety
// `traj` must be null or a live handle.
size_t riccati_trajectory_len(const RiccatiTrajectory *traj);

// State dimension, or 0 for a null handle.
//
// # Safety
// `traj` must be null or a live handle.
size_t riccati_trajectory_order(const RiccatiTrajectory *traj);

// # Safety
// `traj` must be a live handle and `t` writable.
RiccatiStatus riccati_trajectory_time(const RiccatiTrajectory *traj, size_t k, double *t);

// Copies `X(t_k)` row-major into `buf`.
//
// # Safety
// `traj` must be a live handle and `buf` valid for `len` doubles.
RiccatiStatus riccati_trajectory_copy_state(const RiccatiTrajectory *traj,
                                            size_t k,
                                            double *buf,
                                            size_t len);

// # Safety
// `traj` must be null or a handle not yet freed.
void riccati_trajectory_free(RiccatiTrajectory *traj);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RICCATI_H */
