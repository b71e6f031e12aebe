#include "regdiag/regularity.hpp"

#include "regdiag/detail/newton.hpp"

#include <algorithm>
#include <cmath>

namespace regdiag {

MarginVerdict check_licq(const ParametricProblem& problem, const Vec& x,
                         const Vec& y, const Tol& tol) {
  const IndexSet j = active_set(problem, x, y, tol.act);
  MarginVerdict out;
  if (j.empty()) return out;  // vacuous: sentinel margin, verdict true
  if (static_cast<int>(j.size()) > problem.m) {
    out.margin = 0.0;
    out.verdict = false;
    return out;
  }
  const EvalRecord rec = problem.eval(problem.x_domain.clamp(x), y);
  Mat rows(j.size(), problem.m);
  for (size_t t = 0; t < j.size(); ++t) rows.row(t) = rec.jac_y_h.row(j[t]);
  out.margin = sigma_min_rows(rows);
  out.verdict = out.margin > tol.reg;
  return out;
}

MarginVerdict check_scsc(const ParametricProblem& problem, const KKTPoint& kkt,
                         const Tol& tol) {
  MarginVerdict out;
  Vec h(problem.k);
  problem.eval_h_into(problem.x_domain.clamp(kkt.x), kkt.y, h);
  for (int i = 0; i < problem.k; ++i) {
    const bool act = std::find(kkt.active.begin(), kkt.active.end(), i) != kkt.active.end();
    out.margin = std::min(out.margin, act ? kkt.lambda(i) : -h(i));
  }
  out.verdict = out.margin > tol.reg;
  return out;
}

namespace detail_sosc {

// Orthonormal null-space basis of the row space of `rows` (columns of the
// returned matrix); identity when there are no rows.
static Mat null_basis(const Mat& rows, int dim) {
  if (rows.rows() == 0) return Mat::Identity(dim, dim);
  Eigen::JacobiSVD<Mat> svd(rows, Eigen::ComputeFullV);
  const double tol = 1e-12 * std::max(1.0, svd.singularValues()(0));
  int rank = 0;
  for (int i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()(i) > tol) ++rank;
  return svd.matrixV().rightCols(dim - rank);
}

double cone_modulus(const Mat& hess, const Mat& eq_rows, const Mat& ineq_rows) {
  const int m = static_cast<int>(hess.rows());
  const int q = static_cast<int>(ineq_rows.rows());
  double best = kInf;
  // Faces: keep S of the zero-multiplier rows at equality; on each face span,
  // the cone minimum of the (even) quadratic is attained at the bottom
  // eigenvector, one of +-v passing the remaining inequality rows. Minima
  // violating them live on sub-faces, which are enumerated too.
  for (int mask = 0; mask < (1 << q); ++mask) {
    Mat rows(eq_rows.rows() + __builtin_popcount(mask), m);
    int r = 0;
    for (int t = 0; t < eq_rows.rows(); ++t) rows.row(r++) = eq_rows.row(t);
    for (int t = 0; t < q; ++t)
      if (mask & (1 << t)) rows.row(r++) = ineq_rows.row(t);
    const Mat basis = null_basis(rows, m);
    if (basis.cols() == 0) continue;
    const Mat reduced = basis.transpose() * hess * basis;
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (reduced + reduced.transpose()));
    const double eigmin = es.eigenvalues()(0);
    Vec d = basis * es.eigenvectors().col(0);
    d.normalize();
    bool feasible = true, feasible_neg = true;
    for (int t = 0; t < q; ++t) {
      if (mask & (1 << t)) continue;
      const double v = ineq_rows.row(t).dot(d);
      if (v > 1e-10) feasible = false;
      if (-v > 1e-10) feasible_neg = false;
    }
    if (feasible || feasible_neg) best = std::min(best, eigmin);
  }
  return best;
}

}  // namespace detail_sosc

MarginVerdict check_sosc(const ParametricProblem& problem, const KKTPoint& kkt,
                         const Tol& tol) {
  const Vec x = problem.x_domain.clamp(kkt.x);
  const EvalRecord rec = problem.eval(x, kkt.y);
  Mat hess = rec.hess_yy_g;
  for (int i = 0; i < problem.k; ++i) hess += kkt.lambda(i) * rec.hess_yy_h[i];

  // Recompute activity so weakly active constraints enter the cone.
  IndexSet j;
  for (int i = 0; i < problem.k; ++i)
    if (std::abs(rec.h(i)) <= tol.act) j.push_back(i);

  std::vector<int> eq, ineq;
  for (int i : j)
    (kkt.lambda(i) > tol.reg ? eq : ineq).push_back(i);
  Mat eq_rows(eq.size(), problem.m), ineq_rows(ineq.size(), problem.m);
  for (size_t t = 0; t < eq.size(); ++t) eq_rows.row(t) = rec.jac_y_h.row(eq[t]);
  for (size_t t = 0; t < ineq.size(); ++t) ineq_rows.row(t) = rec.jac_y_h.row(ineq[t]);

  MarginVerdict out;
  out.margin = detail_sosc::cone_modulus(hess, eq_rows, ineq_rows);
  out.verdict = out.margin > tol.reg;
  return out;
}

double kkt_matrix_sigma_min_for(const ParametricProblem& problem, const Vec& x,
                                const Vec& y, const Vec& lambda, const IndexSet& j) {
  const EvalRecord rec = problem.eval(problem.x_domain.clamp(x), y);
  Mat hess = rec.hess_yy_g;
  for (int i = 0; i < problem.k; ++i) hess += lambda(i) * rec.hess_yy_h[i];
  const int a = static_cast<int>(j.size());
  Mat kktm = Mat::Zero(problem.m + a, problem.m + a);
  kktm.topLeftCorner(problem.m, problem.m) = hess;
  for (int t = 0; t < a; ++t) {
    kktm.block(0, problem.m + t, problem.m, 1) = rec.jac_y_h.row(j[t]).transpose();
    kktm.block(problem.m + t, 0, 1, problem.m) = rec.jac_y_h.row(j[t]);
  }
  Eigen::JacobiSVD<Mat> svd(kktm);
  return svd.singularValues()(svd.singularValues().size() - 1);
}

double kkt_matrix_sigma_min(const ParametricProblem& problem, const KKTPoint& kkt,
                            const Tol& tol) {
  const IndexSet j = active_set(problem, kkt.x, kkt.y, tol.act);
  return kkt_matrix_sigma_min_for(problem, kkt.x, kkt.y, kkt.lambda, j);
}

RegularityReport full_report(const ParametricProblem& problem, const KKTPoint& kkt,
                             const Tol& tol) {
  RegularityReport rep;
  const MarginVerdict licq = check_licq(problem, kkt.x, kkt.y, tol);
  const MarginVerdict scsc = check_scsc(problem, kkt, tol);
  const MarginVerdict sosc = check_sosc(problem, kkt, tol);
  rep.licq_margin = licq.margin;
  rep.licq = licq.verdict;
  rep.scsc_margin = scsc.margin;
  rep.scsc = scsc.verdict;
  rep.sosc_modulus = sosc.margin;
  rep.sosc = sosc.verdict;
  rep.kkt_sigma_min = kkt_matrix_sigma_min(problem, kkt, tol);
  return rep;
}

namespace {

// Solve h_J = 0 (|J| rows over m unknowns) by damped Gauss-Newton from a
// seed; returns the point when the residual reaches `res_tol`.
std::optional<Vec> solve_tuple(const ParametricProblem& problem, const Vec& x,
                               const IndexSet& j, const Vec& y0, double res_tol) {
  Vec z = y0;
  EvalRecord rec;
  auto fun = [&](const Vec& zz, Vec& f, Mat& jac) {
    problem.eval_into(x, zz, rec);
    f.resize(j.size());
    jac.resize(j.size(), problem.m);
    for (size_t t = 0; t < j.size(); ++t) {
      f(t) = rec.h(j[t]);
      jac.row(t) = rec.jac_y_h.row(j[t]);
    }
  };
  const auto rep =
      detail::gauss_newton(fun, z, static_cast<int>(j.size()), res_tol, 60, 20);
  if (rep.status != detail::NewtonStatus::Converged) return std::nullopt;
  if (!problem.y_box.contains(z, 0.5)) return std::nullopt;
  return z;
}

}  // namespace

GradientMarginScan gradient_margin_scan(const ParametricProblem& problem,
                                        const Vec& x, double rho, int grid_res,
                                        const Tol& tol) {
  if (!(rho > 0)) throw DomainError("gradient_margin_scan: rho must be positive");
  if (problem.k == 0) throw EmptyBandError(problem.name + ": no constraints to scan");
  GradientMarginScan out;
  out.rho = rho;

  auto offer = [&](const Vec& y, const IndexSet& j, double sigma) {
    if (sigma < out.sigma_star ||
        (sigma == out.sigma_star && out.witness_y.size() == 0)) {
      out.sigma_star = sigma;
      out.witness_y = y;
      out.witness_active = j;
    }
  };

  auto banded_sigma = [&](const Vec& y) -> bool {
    const EvalRecord rec = problem.eval(problem.x_domain.clamp(x), y);
    if (rec.h.maxCoeff() > rho) return false;
    IndexSet j;
    for (int i = 0; i < problem.k; ++i)
      if (std::abs(rec.h(i)) <= rho) j.push_back(i);
    if (j.empty()) return false;
    Mat rows(j.size(), problem.m);
    for (size_t t = 0; t < j.size(); ++t) rows.row(t) = rec.jac_y_h.row(j[t]);
    offer(y, j, sigma_min_rows(rows));
    return true;
  };

  // Grid sweep over the y-box.
  bool any_in_band = false;
  Vec y(problem.m);
  std::vector<int> idx(problem.m, 0);
  while (true) {
    for (int d = 0; d < problem.m; ++d)
      y(d) = problem.y_box.lo(d) +
             (problem.y_box.hi(d) - problem.y_box.lo(d)) * idx[d] / (grid_res - 1);
    any_in_band = banded_sigma(y) || any_in_band;
    int d = 0;
    while (d < problem.m && ++idx[d] == grid_res) idx[d++] = 0;
    if (d == problem.m) break;
  }

  // Exact |J| = m and |J| = m+1 intersections: tangencies and corner
  // collisions sit between grid points, so polish them directly.
  std::vector<IndexSet> tuples;
  const int total = 1 << problem.k;
  for (int mask = 0; mask < total; ++mask) {
    IndexSet j;
    for (int i = 0; i < problem.k; ++i)
      if (mask & (1 << i)) j.push_back(i);
    const int sz = static_cast<int>(j.size());
    if (sz == problem.m || sz == problem.m + 1) tuples.push_back(j);
  }
  const int seeds = 5;
  Vec y0(problem.m);
  for (const IndexSet& j : tuples) {
    std::vector<int> sidx(problem.m, 0);
    while (true) {
      for (int d = 0; d < problem.m; ++d)
        y0(d) = problem.y_box.lo(d) +
                (problem.y_box.hi(d) - problem.y_box.lo(d)) * sidx[d] / (seeds - 1);
      const double res_tol = static_cast<int>(j.size()) > problem.m ? 1e-9 : tol.act;
      if (auto z = solve_tuple(problem, x, j, y0, res_tol)) {
        const EvalRecord rec = problem.eval(problem.x_domain.clamp(x), *z);
        if (rec.h.maxCoeff() <= rho) {
          any_in_band = true;
          IndexSet banded;
          for (int i = 0; i < problem.k; ++i)
            if (std::abs(rec.h(i)) <= rho) banded.push_back(i);
          Mat rows(banded.size(), problem.m);
          for (size_t t = 0; t < banded.size(); ++t)
            rows.row(t) = rec.jac_y_h.row(banded[t]);
          offer(*z, banded, sigma_min_rows(rows));
        }
      }
      int d = 0;
      while (d < problem.m && ++sidx[d] == seeds) sidx[d++] = 0;
      if (d == problem.m) break;
    }
  }

  if (!any_in_band)
    throw EmptyBandError(problem.name + ": no scanned point lies in the activity band");
  return out;
}

}  // namespace regdiag
