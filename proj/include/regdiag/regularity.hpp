#pragma once

#include "regdiag/kkt.hpp"

namespace regdiag {

/// Margins and verdicts for the three regularity conditions at a point.
/// licq_margin uses the +inf sentinel when the active set is empty; the
/// sosc modulus uses it when the critical cone is trivial.
struct RegularityReport {
  double licq_margin = kInf;
  double scsc_margin = kInf;
  double sosc_modulus = kInf;
  double kkt_sigma_min = kInf;
  bool licq = true;
  bool scsc = true;
  bool sosc = true;
};

struct MarginVerdict {
  double margin = kInf;
  bool verdict = true;
};

/// sigma_min of the active constraint gradient rows at (x, y); +inf sentinel
/// for an empty active set, verdict false whenever |J| > m.
MarginVerdict check_licq(const ParametricProblem& problem, const Vec& x,
                         const Vec& y, const Tol& tol = default_tol());

/// min(min over active lambda_i, min over inactive -h_i) for the point's
/// own active set.
MarginVerdict check_scsc(const ParametricProblem& problem, const KKTPoint& kkt,
                         const Tol& tol = default_tol());

/// Minimum of d^T Hess_yy L d over unit d in the critical cone. Equality rows
/// come from active constraints with lambda_i > reg; zero-multiplier active
/// constraints contribute cone faces which are enumerated exactly.
MarginVerdict check_sosc(const ParametricProblem& problem, const KKTPoint& kkt,
                         const Tol& tol = default_tol());

/// sigma_min of the bordered matrix [[Hess_yy L, G_J^T], [G_J, 0]] with the
/// active set recomputed at the activity tolerance.
double kkt_matrix_sigma_min(const ParametricProblem& problem, const KKTPoint& kkt,
                            const Tol& tol = default_tol());

/// Same matrix assembled for an explicit active set (used by continuation).
double kkt_matrix_sigma_min_for(const ParametricProblem& problem, const Vec& x,
                                const Vec& y, const Vec& lambda, const IndexSet& j);

RegularityReport full_report(const ParametricProblem& problem, const KKTPoint& kkt,
                             const Tol& tol = default_tol());

struct GradientMarginScan {
  double rho = 0.0;
  double sigma_star = kInf;
  Vec witness_y;
  IndexSet witness_active;
};

/// Infimum of sigma_min over near-active gradient families in the band
/// max h_i <= rho, |h_j| <= rho for j in J; combines a y-grid sweep with
/// exact |J| = m and |J| = m+1 intersection solves so tangencies and corner
/// collisions are not missed by the grid.
GradientMarginScan gradient_margin_scan(const ParametricProblem& problem,
                                        const Vec& x, double rho, int grid_res,
                                        const Tol& tol = default_tol());

namespace detail_sosc {
/// Cone modulus via face enumeration (exposed for the cone-subspace
/// consistency property test). Returns +inf for a trivial cone.
double cone_modulus(const Mat& hess, const Mat& eq_rows, const Mat& ineq_rows);
}  // namespace detail_sosc

}  // namespace regdiag
