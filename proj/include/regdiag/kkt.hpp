#pragma once

#include "regdiag/problem.hpp"

#include <optional>

namespace regdiag {

/// Primal-dual point of the lower-level problem at fixed x. `lambda` is the
/// full k-vector, exactly zero off the active set.
struct KKTPoint {
  Vec x;
  Vec y;
  Vec lambda;
  IndexSet active;
  double residual = kInf;
};

/// Exact stationarity + complementarity + sign residual
///   r = ||grad_y g + sum_i lambda_i grad_y h_i||
///     + sum |lambda_i h_i| + sum |min(0, lambda_i)| + sum |min(0, -h_i)|.
double kkt_residual(const ParametricProblem& problem, const Vec& x, const Vec& y,
                    const Vec& lambda);

/// Active set at tolerance `act`: feasible indices with |h_i| <= act.
/// Throws InfeasibleError if max h_i > act.
IndexSet active_set(const ParametricProblem& problem, const Vec& x, const Vec& y,
                    double act);

enum class SolveStatus { Converged, Rejected, NoConverge, SingularJacobian };

struct ReducedSolve {
  SolveStatus status = SolveStatus::NoConverge;
  KKTPoint point;        // populated for Converged and Rejected
  int violated = -1;     // index of the failed sign/feasibility check (Rejected)
  bool negative_multiplier = false;  // what kind of violation `violated` is
  int iterations = 0;
  double residual = kInf;
  double min_sigma_jac = kInf;
};

/// Damped Newton on the reduced KKT system
///   Psi(y, lambda_J) = (grad_y g + jac_y h_J^T lambda_J ; h_J) = 0,
/// then sign/feasibility validation of the solution.
ReducedSolve solve_reduced_kkt(const ParametricProblem& problem, const Vec& x,
                               const IndexSet& j, const Vec& y0, const Vec& lam0,
                               const Tol& tol = default_tol());

struct EnumerationSummary {
  int attempts = 0;
  int converged = 0;
  int rejected = 0;
  int no_converge = 0;
  int singular = 0;
};

struct Enumeration {
  std::vector<KKTPoint> points;  // canonical order: lexicographic in (J, y)
  EnumerationSummary summary;
};

/// Active-set enumeration over all J with |J| <= m, Newton from a seed grid
/// over y_box. Duplicates within dedup tolerance keep the smaller residual.
Enumeration enumerate_kkt_points(const ParametricProblem& problem, const Vec& x,
                                 int seeds_per_axis = 7,
                                 const Tol& tol = default_tol());

/// Warm variant: `extra_seeds` are tried (with their own active sets) before
/// the coarse grid; used by parameter sweeps.
Enumeration enumerate_kkt_points_seeded(const ParametricProblem& problem,
                                        const Vec& x,
                                        const std::vector<KKTPoint>& extra_seeds,
                                        int seeds_per_axis,
                                        const Tol& tol = default_tol());

enum class Verdict { STRICT_LOCAL_MIN, NOT_LOCAL_MIN, UNDETERMINED };

struct KKTClassification {
  Verdict verdict = Verdict::UNDETERMINED;
  double evidence = 0.0;  // SOSC modulus, or the witnessed descent value
};

/// Second-order classification with a feasible-sampling fallback at
/// zero-multiplier corners where curvature is inconclusive.
KKTClassification classify_kkt(const ParametricProblem& problem,
                               const KKTPoint& kkt, const Tol& tol = default_tol());

const char* to_string(Verdict verdict);

}  // namespace regdiag
