#include "regdiag/kkt.hpp"

#include "regdiag/detail/newton.hpp"

#include <algorithm>
#include <cmath>

namespace regdiag {

double kkt_residual(const ParametricProblem& problem, const Vec& x, const Vec& y,
                    const Vec& lambda) {
  const EvalRecord rec = evaluate(problem, x, y);
  Vec stat = rec.grad_y_g;
  for (int i = 0; i < problem.k; ++i)
    stat += lambda(i) * rec.jac_y_h.row(i).transpose();
  double r = stat.norm();
  for (int i = 0; i < problem.k; ++i) {
    r += std::abs(lambda(i) * rec.h(i));
    r += std::abs(std::min(0.0, lambda(i)));
    r += std::abs(std::min(0.0, -rec.h(i)));
  }
  if (!std::isfinite(r)) throw NonFiniteError(problem.name + ": non-finite residual");
  return r;
}

IndexSet active_set(const ParametricProblem& problem, const Vec& x, const Vec& y,
                    double act) {
  Vec h(problem.k);
  problem.eval_h_into(x, y, h);
  if (problem.k > 0 && h.maxCoeff() > act)
    throw InfeasibleError(problem.name + ": point infeasible beyond activity tolerance");
  IndexSet j;
  for (int i = 0; i < problem.k; ++i)
    if (std::abs(h(i)) <= act) j.push_back(i);
  return j;
}

ReducedSolve solve_reduced_kkt(const ParametricProblem& problem, const Vec& x,
                               const IndexSet& j, const Vec& y0, const Vec& lam0,
                               const Tol& tol) {
  const int m = problem.m;
  const int a = static_cast<int>(j.size());
  ReducedSolve out;
  if (a > m) return out;  // more equality rows than the primal can support
  if (!y0.allFinite() || !lam0.allFinite()) return out;

  Vec z(m + a);
  z.head(m) = y0;
  z.tail(a) = lam0;

  EvalRecord rec;
  auto fun = [&](const Vec& zz, Vec& f, Mat& jac) {
    problem.eval_into(x, zz.head(m), rec);
    Vec stat = rec.grad_y_g;
    Mat hess = rec.hess_yy_g;
    for (int t = 0; t < a; ++t) {
      stat += zz(m + t) * rec.jac_y_h.row(j[t]).transpose();
      hess += zz(m + t) * rec.hess_yy_h[j[t]];
    }
    f.resize(m + a);
    f.head(m) = stat;
    for (int t = 0; t < a; ++t) f(m + t) = rec.h(j[t]);
    jac.setZero(m + a, m + a);
    jac.topLeftCorner(m, m) = hess;
    for (int t = 0; t < a; ++t) {
      jac.block(0, m + t, m, 1) = rec.jac_y_h.row(j[t]).transpose();
      jac.block(m + t, 0, 1, m) = rec.jac_y_h.row(j[t]);
    }
  };

  const auto rep = detail::newton_square(fun, z, tol.newton, tol.max_newton,
                                         tol.max_halvings, 1e-12);
  out.iterations = rep.iterations;
  out.residual = rep.residual_norm;
  out.min_sigma_jac = rep.min_sigma_jac;
  if (rep.status == detail::NewtonStatus::SingularJacobian) {
    out.status = SolveStatus::SingularJacobian;
    return out;
  }
  if (rep.status != detail::NewtonStatus::Converged) return out;

  KKTPoint pt;
  pt.x = x;
  pt.y = z.head(m);
  pt.lambda = Vec::Zero(problem.k);
  for (int t = 0; t < a; ++t) pt.lambda(j[t]) = z(m + t);
  pt.active = j;
  out.point = pt;

  // Sign and feasibility validation.
  for (int t = 0; t < a; ++t)
    if (z(m + t) < -tol.act) {
      out.status = SolveStatus::Rejected;
      out.violated = j[t];
      out.negative_multiplier = true;
      return out;
    }
  Vec h(problem.k);
  problem.eval_h_into(x, pt.y, h);
  for (int i = 0; i < problem.k; ++i) {
    if (std::find(j.begin(), j.end(), i) != j.end()) continue;
    if (h(i) > tol.act) {
      out.status = SolveStatus::Rejected;
      out.violated = i;
      out.negative_multiplier = false;
      return out;
    }
  }
  out.point.residual = kkt_residual(problem, x, pt.y, pt.lambda);
  out.status = SolveStatus::Converged;
  return out;
}

namespace {

void subsets_up_to(int k, int max_size, std::vector<IndexSet>& out) {
  out.clear();
  const int total = 1 << k;
  for (int mask = 0; mask < total; ++mask) {
    IndexSet j;
    for (int i = 0; i < k; ++i)
      if (mask & (1 << i)) j.push_back(i);
    if (static_cast<int>(j.size()) <= max_size) out.push_back(j);
  }
  std::sort(out.begin(), out.end());
}

bool same_point(const KKTPoint& p, const KKTPoint& q, double tol) {
  return (p.y - q.y).norm() + (p.lambda - q.lambda).norm() <= tol;
}

}  // namespace

Enumeration enumerate_kkt_points_seeded(const ParametricProblem& problem,
                                        const Vec& x,
                                        const std::vector<KKTPoint>& extra_seeds,
                                        int seeds_per_axis, const Tol& tol) {
  Enumeration out;
  std::vector<IndexSet> patterns;
  subsets_up_to(problem.k, problem.m, patterns);

  auto consider = [&](const ReducedSolve& rs) {
    out.summary.attempts++;
    switch (rs.status) {
      case SolveStatus::Converged:
        break;
      case SolveStatus::Rejected:
        out.summary.rejected++;
        return;
      case SolveStatus::NoConverge:
        out.summary.no_converge++;
        return;
      case SolveStatus::SingularJacobian:
        out.summary.singular++;
        return;
    }
    out.summary.converged++;
    for (KKTPoint& existing : out.points) {
      if (same_point(existing, rs.point, tol.dedup)) {
        if (rs.point.residual < existing.residual) existing = rs.point;
        return;
      }
    }
    out.points.push_back(rs.point);
  };

  for (const KKTPoint& seed : extra_seeds) {
    Vec lam0(seed.active.size());
    for (size_t t = 0; t < seed.active.size(); ++t) lam0(t) = seed.lambda(seed.active[t]);
    consider(solve_reduced_kkt(problem, x, seed.active, seed.y, lam0, tol));
  }

  if (seeds_per_axis > 0) {
    std::vector<Vec> seeds;
    Vec y(problem.m);
    std::vector<int> idx(problem.m, 0);
    while (true) {
      for (int d = 0; d < problem.m; ++d)
        y(d) = seeds_per_axis == 1
                   ? 0.5 * (problem.y_box.lo(d) + problem.y_box.hi(d))
                   : problem.y_box.lo(d) + (problem.y_box.hi(d) - problem.y_box.lo(d)) *
                                               idx[d] / (seeds_per_axis - 1);
      seeds.push_back(y);
      int d = 0;
      while (d < problem.m && ++idx[d] == seeds_per_axis) idx[d++] = 0;
      if (d == problem.m) break;
    }
    for (const IndexSet& j : patterns) {
      const Vec lam0 = Vec::Ones(j.size());
      for (const Vec& y0 : seeds) consider(solve_reduced_kkt(problem, x, j, y0, lam0, tol));
    }
  }

  std::sort(out.points.begin(), out.points.end(),
            [](const KKTPoint& p, const KKTPoint& q) {
              if (p.active != q.active) return p.active < q.active;
              for (int d = 0; d < p.y.size(); ++d)
                if (p.y(d) != q.y(d)) return p.y(d) < q.y(d);
              return false;
            });
  return out;
}

Enumeration enumerate_kkt_points(const ParametricProblem& problem, const Vec& x,
                                 int seeds_per_axis, const Tol& tol) {
  return enumerate_kkt_points_seeded(problem, x, {}, seeds_per_axis, tol);
}

const char* to_string(Verdict verdict) {
  switch (verdict) {
    case Verdict::STRICT_LOCAL_MIN: return "STRICT_LOCAL_MIN";
    case Verdict::NOT_LOCAL_MIN: return "NOT_LOCAL_MIN";
    case Verdict::UNDETERMINED: return "UNDETERMINED";
  }
  return "?";
}

}  // namespace regdiag
