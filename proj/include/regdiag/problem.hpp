#pragma once

#include "regdiag/types.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace regdiag {

/// One monomial c * prod x_i^powers[i] * prod y_j^powers[n+j].
struct PolyTerm {
  std::vector<int> powers;  // length n + m
  double coeff = 0.0;
};

/// Polynomial valid on [x_lo, x_hi] in the first x-coordinate.
struct PolyPiece {
  double x_lo = -kInf;
  double x_hi = kInf;
  std::vector<PolyTerm> terms;
};

enum class Smoothness { C0, C1, C2 };

/// Piecewise-polynomial scalar field in (x, y); pieces split along x_1.
/// Seam continuity up to the declared smoothness order is validated at load.
struct PiecewisePolyField {
  std::vector<PolyPiece> pieces;  // sorted by x_lo, contiguous
  Smoothness smoothness = Smoothness::C2;

  const PolyPiece& piece_at(double x1) const;
  double value(const Vec& x, const Vec& y, int n, int m) const;
  double dx1(const Vec& x, const Vec& y, int n, int m, int order) const;
};

/// All derivatives of the lower-level data at one (x, y).
struct EvalRecord {
  double g = 0.0;
  Vec grad_y_g;              // m
  Mat hess_yy_g;             // m x m
  Mat hess_xy_g;             // n x m
  Vec h;                     // k
  Mat jac_y_h;               // k x m
  Mat jac_x_h;               // k x n
  std::vector<Mat> hess_yy_h;  // k of m x m
  std::vector<Mat> hess_xy_h;  // k of n x m
};

struct Box {
  Vec lo, hi;
  bool contains(const Vec& p, double tol) const;
  Vec clamp(const Vec& p) const;
};

/// Parametric lower-level problem  min_y g(x,y)  s.t.  h_i(x,y) <= 0.
struct ParametricProblem {
  std::string name;
  std::string description;
  std::vector<std::string> tags;
  int n = 1;  // dim x
  int m = 1;  // dim y
  int k = 0;  // number of inequality constraints
  Box x_domain;
  Box y_box;  // search box for seeds, scans and grids (not a constraint)
  PiecewisePolyField g;
  std::vector<PiecewisePolyField> h;
  std::optional<double> slater_margin;

  EvalRecord eval(const Vec& x, const Vec& y) const;
  void eval_into(const Vec& x, const Vec& y, EvalRecord& rec) const;

  /// Constraint values only (no derivative blocks); for hot scans.
  void eval_h_into(const Vec& x, const Vec& y, Vec& h_out) const;

  /// Constraint values and y-Jacobian only; for grid labeling.
  void eval_h_jac_into(const Vec& x, const Vec& y, Vec& h_out, Mat& jac_out) const;
};

/// Full evaluation with domain clamping and finite-ness checks.
EvalRecord evaluate(const ParametricProblem& problem, const Vec& x, const Vec& y);

/// Worst relative discrepancy between analytic derivatives and central finite
/// differences over every first/second derivative block of EvalRecord.
double fd_check(const ParametricProblem& problem, const Vec& x, const Vec& y,
                double step);

/// Structural validation run at load/registration time: dimension checks,
/// Hessian symmetry spot checks, seam continuity, piece coverage of the
/// x-domain, and the grid Slater check when a margin is declared.
void validate_problem(const ParametricProblem& problem);

/// Grid search for a point with h_i <= -rho for all i; empty if none found.
std::optional<Vec> slater_witness(const ParametricProblem& problem, const Vec& x,
                                  double rho, int grid_per_axis = 41);

}  // namespace regdiag
