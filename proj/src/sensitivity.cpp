#include "regdiag/sensitivity.hpp"

#include "regdiag/continuation.hpp"

#include <algorithm>
#include <cmath>

namespace regdiag {

namespace {

struct Blocks {
  Mat hess_yy_l;  // m x m
  Mat hess_xy_l;  // n x m
  EvalRecord rec;
};

Blocks lagrangian_blocks(const ParametricProblem& problem, const KKTPoint& kkt) {
  Blocks b;
  b.rec = problem.eval(problem.x_domain.clamp(kkt.x), kkt.y);
  b.hess_yy_l = b.rec.hess_yy_g;
  b.hess_xy_l = b.rec.hess_xy_g;
  for (int i = 0; i < problem.k; ++i) {
    b.hess_yy_l += kkt.lambda(i) * b.rec.hess_yy_h[i];
    b.hess_xy_l += kkt.lambda(i) * b.rec.hess_xy_h[i];
  }
  return b;
}

}  // namespace

SensitivityOutcome hypergradient_reduced_for(const ParametricProblem& problem,
                                             const KKTPoint& kkt, const IndexSet& j,
                                             const Tol& tol) {
  const Blocks b = lagrangian_blocks(problem, kkt);
  const int m = problem.m, n = problem.n;
  const int a = static_cast<int>(j.size());
  Mat mplus = Mat::Zero(m + a, m + a);
  mplus.topLeftCorner(m, m) = b.hess_yy_l;
  for (int t = 0; t < a; ++t) {
    mplus.block(0, m + t, m, 1) = b.rec.jac_y_h.row(j[t]).transpose();
    mplus.block(m + t, 0, 1, m) = b.rec.jac_y_h.row(j[t]);
  }
  Mat nplus(m + a, n);
  nplus.topRows(m) = b.hess_xy_l.transpose();
  for (int t = 0; t < a; ++t) nplus.row(m + t) = b.rec.jac_x_h.row(j[t]);

  Eigen::JacobiSVD<Mat> svd(mplus, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double sigma = svd.singularValues()(m + a - 1);
  if (sigma <= tol.sing) return SingularSystem{sigma};

  SensitivityResult res;
  res.method = SensitivityMethod::REDUCED;
  res.sigma_min = sigma;
  res.det = Eigen::FullPivLU<Mat>(mplus).determinant();
  const Mat z = svd.solve(-nplus);
  res.dy_dx = z.topRows(m);
  res.dlambda_dx = Mat::Zero(problem.k, n);
  for (int t = 0; t < a; ++t) res.dlambda_dx.row(j[t]) = z.row(m + t);
  return res;
}

SensitivityOutcome hypergradient_reduced(const ParametricProblem& problem,
                                         const KKTPoint& kkt, const Tol& tol) {
  IndexSet j;
  try {
    j = active_set(problem, kkt.x, kkt.y, tol.act);
  } catch (const InfeasibleError&) {
    j = kkt.active;
  }
  return hypergradient_reduced_for(problem, kkt, j, tol);
}

std::vector<std::pair<IndexSet, SensitivityOutcome>> hypergradient_reduced_candidates(
    const ParametricProblem& problem, const KKTPoint& kkt, const Tol& tol) {
  IndexSet j;
  try {
    j = active_set(problem, kkt.x, kkt.y, tol.act);
  } catch (const InfeasibleError&) {
    j = kkt.active;
  }
  IndexSet core, degenerate;
  for (int i : j)
    (kkt.lambda(i) > tol.reg ? core : degenerate).push_back(i);
  std::vector<std::pair<IndexSet, SensitivityOutcome>> out;
  const int q = static_cast<int>(degenerate.size());
  for (int mask = 0; mask < (1 << q); ++mask) {
    IndexSet cand = core;
    for (int t = 0; t < q; ++t)
      if (mask & (1 << t)) cand.push_back(degenerate[t]);
    std::sort(cand.begin(), cand.end());
    out.emplace_back(cand, hypergradient_reduced_for(problem, kkt, cand, tol));
  }
  return out;
}

SensitivityOutcome hypergradient_complementarity(const ParametricProblem& problem,
                                                 const KKTPoint& kkt, const Tol& tol) {
  const Blocks b = lagrangian_blocks(problem, kkt);
  const int m = problem.m, n = problem.n, k = problem.k;
  Mat gv = Mat::Zero(m + k, m + k);
  gv.topLeftCorner(m, m) = b.hess_yy_l;
  gv.topRightCorner(m, k) = b.rec.jac_y_h.transpose();
  for (int i = 0; i < k; ++i) {
    gv.block(m + i, 0, 1, m) = kkt.lambda(i) * b.rec.jac_y_h.row(i);
    gv(m + i, m + i) = b.rec.h(i);
  }
  Mat gx(m + k, n);
  gx.topRows(m) = b.hess_xy_l.transpose();
  for (int i = 0; i < k; ++i) gx.row(m + i) = kkt.lambda(i) * b.rec.jac_x_h.row(i);

  Eigen::JacobiSVD<Mat> svd(gv, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double sigma = svd.singularValues()(m + k - 1);
  if (sigma <= tol.sing) return SingularSystem{sigma};

  SensitivityResult res;
  res.method = SensitivityMethod::COMPLEMENTARITY;
  res.sigma_min = sigma;
  res.det = Eigen::FullPivLU<Mat>(gv).determinant();
  const Mat dv = svd.solve(-gx);
  res.dy_dx = dv.topRows(m);
  res.dlambda_dx = dv.bottomRows(k);
  return res;
}

std::vector<ConditioningSample> conditioning_profile(const ParametricProblem& problem,
                                                     const Branch& branch,
                                                     const Tol& tol) {
  std::vector<ConditioningSample> out;
  for (const BranchSample& s : branch.samples) {
    ConditioningSample c;
    c.x = s.x;
    const auto red = hypergradient_reduced_for(problem, s.point, s.point.active, tol);
    if (const auto* r = std::get_if<SensitivityResult>(&red)) {
      c.sigma_min_reduced = r->sigma_min;
    } else {
      c.sigma_min_reduced = std::get<SingularSystem>(red).sigma_min;
      c.reduced_singular = true;
    }
    const auto comp = hypergradient_complementarity(problem, s.point, tol);
    if (const auto* r = std::get_if<SensitivityResult>(&comp)) {
      c.sigma_min_comp = r->sigma_min;
      c.det_comp = r->det;
    } else {
      c.sigma_min_comp = std::get<SingularSystem>(comp).sigma_min;
      c.det_comp = 0.0;
      c.comp_singular = true;
    }
    out.push_back(c);
  }
  return out;
}

double validate_against_fd(const ParametricProblem& problem, const Branch& branch,
                           double fd_step, const Tol& tol) {
  if (!(fd_step > 0)) throw DomainError("validate_against_fd: fd_step must be > 0");
  double worst = 0.0;
  const double guard = 10.0 * fd_step;
  const double x_lo = std::min(branch.samples.front().x, branch.samples.back().x);
  const double x_hi = std::max(branch.samples.front().x, branch.samples.back().x);

  for (const BranchSample& s : branch.samples) {
    if (s.x - fd_step < x_lo || s.x + fd_step > x_hi) continue;
    if (s.x - fd_step < problem.x_domain.lo(0) || s.x + fd_step > problem.x_domain.hi(0))
      continue;
    bool near_event = false;
    for (const Event& ev : branch.events)
      near_event = near_event || std::abs(s.x - ev.x_star) < guard;
    near_event = near_event || std::abs(s.x - branch.termination_x) < guard;
    if (near_event) continue;

    const auto sens = hypergradient_reduced_for(problem, s.point, s.point.active, tol);
    const auto* res = std::get_if<SensitivityResult>(&sens);
    if (!res) continue;

    Vec lam(s.point.active.size());
    for (size_t t = 0; t < s.point.active.size(); ++t)
      lam(t) = s.point.lambda(s.point.active[t]);
    Vec xq(problem.n);
    xq.setZero();
    auto resolve = [&](double xs) -> std::optional<Vec> {
      xq(0) = xs;
      const ReducedSolve rs =
          solve_reduced_kkt(problem, xq, s.point.active, s.point.y, lam, tol);
      if (rs.status != SolveStatus::Converged) return std::nullopt;
      return rs.point.y;
    };
    const auto yp = resolve(s.x + fd_step);
    const auto ym = resolve(s.x - fd_step);
    if (!yp || !ym) continue;
    const Vec fd = (*yp - *ym) / (2 * fd_step);
    worst = std::max(worst, (res->dy_dx.col(0) - fd).norm());
  }
  return worst;
}

}  // namespace regdiag
