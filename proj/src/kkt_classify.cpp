#include "regdiag/kkt.hpp"
#include "regdiag/regularity.hpp"

#include "regdiag/detail/newton.hpp"

#include <cmath>

namespace regdiag {

namespace {

// Deterministic unit directions for the feasible probe.
std::vector<Vec> probe_directions(int m, int count) {
  std::vector<Vec> dirs;
  if (m == 1) {
    dirs.push_back(Vec::Constant(1, 1.0));
    dirs.push_back(Vec::Constant(1, -1.0));
    return dirs;
  }
  if (m == 2) {
    for (int i = 0; i < count; ++i) {
      const double a = 2.0 * M_PI * i / count;
      Vec d(2);
      d << std::cos(a), std::sin(a);
      dirs.push_back(d);
    }
    return dirs;
  }
  detail::SplitMix64 rng(0x5eedu);
  for (int i = 0; i < count; ++i) {
    Vec d(m);
    for (int j = 0; j < m; ++j) d(j) = 2.0 * rng.uniform() - 1.0;
    if (d.norm() < 1e-6) d.setOnes();
    d.normalize();
    dirs.push_back(d);
  }
  return dirs;
}

}  // namespace

KKTClassification classify_kkt(const ParametricProblem& problem,
                               const KKTPoint& kkt, const Tol& tol) {
  KKTClassification out;
  const MarginVerdict sosc = check_sosc(problem, kkt, tol);
  out.evidence = sosc.margin;
  if (sosc.margin > tol.classify) {
    out.verdict = Verdict::STRICT_LOCAL_MIN;
    return out;
  }
  if (sosc.margin < -tol.classify) {
    out.verdict = Verdict::NOT_LOCAL_MIN;
    return out;
  }

  // Inconclusive curvature (zero-multiplier corner or flat direction):
  // probe feasible points in a small ball for a strict decrease.
  const Vec x = problem.x_domain.clamp(kkt.x);
  const double g0 = problem.eval(x, kkt.y).g;
  const double r = tol.probe_r;
  Vec h(problem.k);
  for (const Vec& d : probe_directions(problem.m, tol.probe_dirs)) {
    const Vec y = kkt.y + r * d;
    problem.eval_h_into(x, y, h);
    if (problem.k > 0 && h.maxCoeff() > tol.act) continue;
    const double g = problem.g.value(x, y, problem.n, problem.m);
    if (g < g0 - tol.classify * r * r) {
      out.verdict = Verdict::NOT_LOCAL_MIN;
      out.evidence = g - g0;
      return out;
    }
  }
  out.verdict = Verdict::UNDETERMINED;
  return out;
}

}  // namespace regdiag
