#pragma once

#include "regdiag/kkt.hpp"

#include <variant>

namespace regdiag {

enum class SensitivityMethod { REDUCED, COMPLEMENTARITY };

struct SensitivityResult {
  Mat dy_dx;               // m x n
  Mat dlambda_dx;          // k x n, zero rows for inactive constraints
  SensitivityMethod method = SensitivityMethod::REDUCED;
  double sigma_min = 0.0;  // of the solved system matrix
  double det = 0.0;        // of the solved (square) system matrix
};

struct SingularSystem {
  double sigma_min = 0.0;
};

using SensitivityOutcome = std::variant<SensitivityResult, SingularSystem>;

/// Reduced active-set sensitivity: solve M+ [dy; dlam_J] = -N+ where
///   M+ = [[Hess_yy L, G_J^T], [G_J, 0]],  N+ = [[Hess_xy L^T], [jac_x h_J]].
/// The active set defaults to the geometric one at the activity tolerance.
SensitivityOutcome hypergradient_reduced(const ParametricProblem& problem,
                                         const KKTPoint& kkt,
                                         const Tol& tol = default_tol());
SensitivityOutcome hypergradient_reduced_for(const ParametricProblem& problem,
                                             const KKTPoint& kkt, const IndexSet& j,
                                             const Tol& tol = default_tol());

/// At a point with zero-multiplier active constraints the derivative may be
/// one-sided; every candidate active set (positive-multiplier core plus any
/// subset of the degenerate indices) is solved and reported.
std::vector<std::pair<IndexSet, SensitivityOutcome>> hypergradient_reduced_candidates(
    const ParametricProblem& problem, const KKTPoint& kkt,
    const Tol& tol = default_tol());

/// Full complementarity-system sensitivity: solve grad_v G dv = -grad_x G with
///   grad_v G = [[Hess_yy L, jac_y h^T], [diag(lambda) jac_y h, diag(h)]].
SensitivityOutcome hypergradient_complementarity(const ParametricProblem& problem,
                                                 const KKTPoint& kkt,
                                                 const Tol& tol = default_tol());

struct ConditioningSample {
  double x = 0.0;
  double sigma_min_reduced = 0.0;
  double sigma_min_comp = 0.0;
  double det_comp = 0.0;
  bool reduced_singular = false;
  bool comp_singular = false;
};

struct Branch;  // continuation.hpp

/// Per-sample conditioning of both sensitivity systems along a branch.
std::vector<ConditioningSample> conditioning_profile(const ParametricProblem& problem,
                                                     const Branch& branch,
                                                     const Tol& tol = default_tol());

/// Max over smooth branch samples of ||dy/dx - central FD of the
/// corrector-resolved minimizer||; samples within 10*fd_step of an event or
/// of the branch ends are excluded.
double validate_against_fd(const ParametricProblem& problem, const Branch& branch,
                           double fd_step, const Tol& tol = default_tol());

}  // namespace regdiag
