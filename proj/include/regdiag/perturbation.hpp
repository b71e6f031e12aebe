#pragma once

#include "regdiag/kkt.hpp"

#include <cstdint>

namespace regdiag {

struct PerturbationDraw {
  Vec a;  // constraint shifts, componentwise in [0, nu]
  Vec b;  // objective linear term, componentwise in [0, nu]
  double nu = 0.0;
  uint64_t seed = 0;
};

/// Deterministic uniform draw on [0,nu]^k x [0,nu]^m via SplitMix64 seeded
/// with `seed`; components are drawn a first, then b, in index order.
PerturbationDraw draw_perturbation(double nu, uint64_t seed, int k, int m);

/// Returns the problem with g~ = g + <y,b> and h~_i = h_i + a_i. Derivative
/// records update exactly; a zero draw reproduces the input bitwise.
ParametricProblem apply_perturbation(const ParametricProblem& problem,
                                     const PerturbationDraw& draw);

enum class Condition { LICQ, SCSC, SOSC };
const char* to_string(Condition c);

struct FailureSetEstimate {
  Condition condition = Condition::LICQ;
  int x_grid_res = 0;
  double x_lo = 0.0, x_hi = 0.0;
  std::vector<int> failing_cells;                    // grid indices, sorted
  double fraction = 0.0;                             // |failing| / grid
  std::vector<std::pair<double, double>> intervals;  // merged maximal runs
};

/// Estimates the x-set where the condition fails, on a uniform grid over the
/// (1-D) x-domain. Failures are detected structurally: exact intersection
/// and root-coincidence solves for LICQ, the signed complementarity gap
/// lambda_i + h_i along tracked minimizers for SCSC, and exact vanishing of
/// the cone curvature at minimizer candidates for SOSC.
FailureSetEstimate failure_set_estimate(const ParametricProblem& problem,
                                        Condition condition, int x_grid_res,
                                        const Tol& tol = default_tol());

struct TrialRecord {
  PerturbationDraw draw;
  double fraction = 0.0;
  std::vector<std::pair<double, double>> intervals;
  int failing_cells = 0;
};

struct PrevalenceReport {
  Condition condition;
  double nu = 0.0;
  int trials = 0;
  uint64_t seed = 0;
  int x_grid_res = 0;
  std::vector<TrialRecord> per_trial;
  double median_fraction = 0.0;
  double max_fraction = 0.0;
  int trials_beyond_point_width = 0;  // failing set wider than 2 grid cells
};

/// Seeded Monte Carlo prevalence experiment: trial t applies
/// draw_perturbation(nu, seed + t) and runs failure_set_estimate. Trials run
/// in parallel (REGDIAG_THREADS caps workers); reduction is in trial order.
PrevalenceReport prevalence_experiment(const ParametricProblem& problem,
                                       Condition condition, double nu, int trials,
                                       uint64_t seed, int x_grid_res,
                                       const Tol& tol = default_tol());

/// Worker cap from REGDIAG_THREADS (default: hardware concurrency, max 8).
int worker_count();

}  // namespace regdiag
