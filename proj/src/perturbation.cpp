#include "regdiag/perturbation.hpp"

#include "regdiag/detail/newton.hpp"
#include "regdiag/regularity.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <thread>

namespace regdiag {

PerturbationDraw draw_perturbation(double nu, uint64_t seed, int k, int m) {
  if (!(nu > 0)) throw DomainError("draw_perturbation: nu must be > 0");
  PerturbationDraw d;
  d.nu = nu;
  d.seed = seed;
  d.a.resize(k);
  d.b.resize(m);
  detail::SplitMix64 rng(seed);
  for (int i = 0; i < k; ++i) d.a(i) = nu * rng.uniform();
  for (int j = 0; j < m; ++j) d.b(j) = nu * rng.uniform();
  return d;
}

ParametricProblem apply_perturbation(const ParametricProblem& problem,
                                     const PerturbationDraw& draw) {
  if (draw.a.size() != problem.k || draw.b.size() != problem.m)
    throw DomainError("apply_perturbation: draw dimensions do not match problem");
  ParametricProblem p = problem;
  // <y, b> added to every piece of g; zero components are skipped so a zero
  // draw leaves evaluation order (and bits) unchanged.
  for (PolyPiece& piece : p.g.pieces)
    for (int j = 0; j < problem.m; ++j) {
      if (draw.b(j) == 0.0) continue;
      PolyTerm t;
      t.powers.assign(problem.n + problem.m, 0);
      t.powers[problem.n + j] = 1;
      t.coeff = draw.b(j);
      piece.terms.push_back(t);
    }
  for (int i = 0; i < problem.k; ++i) {
    if (draw.a(i) == 0.0) continue;
    for (PolyPiece& piece : p.h[i].pieces) {
      PolyTerm t;
      t.powers.assign(problem.n + problem.m, 0);
      t.coeff = draw.a(i);
      piece.terms.push_back(t);
    }
  }
  if (problem.slater_margin) {
    const double rem = *problem.slater_margin - draw.nu;
    if (rem > 0)
      p.slater_margin = rem;
    else
      p.slater_margin.reset();
  }
  return p;
}

const char* to_string(Condition c) {
  switch (c) {
    case Condition::LICQ: return "LICQ";
    case Condition::SCSC: return "SCSC";
    case Condition::SOSC: return "SOSC";
  }
  return "?";
}

namespace {

void finalize(FailureSetEstimate& est) {
  std::sort(est.failing_cells.begin(), est.failing_cells.end());
  est.failing_cells.erase(
      std::unique(est.failing_cells.begin(), est.failing_cells.end()),
      est.failing_cells.end());
  est.fraction = est.x_grid_res > 0
                     ? static_cast<double>(est.failing_cells.size()) / est.x_grid_res
                     : 0.0;
  const double dx = (est.x_hi - est.x_lo) / (est.x_grid_res - 1);
  est.intervals.clear();
  for (size_t s = 0; s < est.failing_cells.size();) {
    size_t e = s;
    while (e + 1 < est.failing_cells.size() &&
           est.failing_cells[e + 1] == est.failing_cells[e] + 1)
      ++e;
    est.intervals.emplace_back(est.x_lo + dx * est.failing_cells[s],
                               est.x_lo + dx * est.failing_cells[e]);
    s = e + 1;
  }
}

// --- LICQ detector -------------------------------------------------------

// All roots of the univariate polynomial h_i(x, .) inside the y-box, by
// dense scan plus bisection refinement.
std::vector<double> constraint_roots_1d(const ParametricProblem& problem,
                                        const Vec& x, int ci) {
  const int scan = 801;
  const double lo = problem.y_box.lo(0), hi = problem.y_box.hi(0);
  std::vector<double> roots;
  Vec y(1);
  auto f = [&](double yy) {
    y(0) = yy;
    return problem.h[ci].value(x, y, problem.n, problem.m);
  };
  double prev_y = lo, prev_v = f(lo);
  for (int s = 1; s < scan; ++s) {
    const double cur_y = lo + (hi - lo) * s / (scan - 1);
    const double cur_v = f(cur_y);
    if (prev_v == 0.0) roots.push_back(prev_y);
    if ((prev_v < 0 && cur_v > 0) || (prev_v > 0 && cur_v < 0)) {
      double a = prev_y, b = cur_y, fa = prev_v;
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (a + b);
        const double fm = f(mid);
        if ((fa < 0) == (fm < 0)) {
          a = mid;
          fa = fm;
        } else {
          b = mid;
        }
      }
      roots.push_back(0.5 * (a + b));
    }
    prev_y = cur_y;
    prev_v = cur_v;
  }
  if (prev_v == 0.0) roots.push_back(prev_y);
  std::sort(roots.begin(), roots.end());
  return roots;
}

void licq_failures_1d(const ParametricProblem& problem, FailureSetEstimate& est,
                      const Tol& tol) {
  const int res = est.x_grid_res;
  const double dx = (est.x_hi - est.x_lo) / (res - 1);
  const int k = problem.k;
  // gap[i][j] at the previous grid x: h_j evaluated at the boundary root of
  // h_i; LICQ fails where a gap hits zero.
  std::vector<std::vector<std::vector<double>>> prev_gaps;  // [i] -> roots -> k gaps
  std::vector<std::vector<double>> prev_roots;
  Vec x(problem.n), y(1), h(k);
  x.setZero();

  for (int c = 0; c < res; ++c) {
    x(0) = est.x_lo + dx * c;
    std::vector<std::vector<double>> roots(k);
    std::vector<std::vector<std::vector<double>>> gaps(k);
    for (int i = 0; i < k; ++i) {
      roots[i] = constraint_roots_1d(problem, x, i);
      for (double r : roots[i]) {
        y(0) = r;
        problem.eval_h_into(x, y, h);
        gaps[i].push_back(std::vector<double>(h.data(), h.data() + k));
        // Single-constraint gradient degeneracy at a feasible boundary point.
        const EvalRecord rec = problem.eval(x, y);
        if (h.maxCoeff() <= tol.act && std::abs(rec.jac_y_h(i, 0)) < tol.reg)
          est.failing_cells.push_back(c);
      }
    }
    for (int i = 0; i < k; ++i)
      for (size_t ri = 0; ri < roots[i].size(); ++ri)
        for (int jc = 0; jc < k; ++jc) {
          if (jc == i) continue;
          const double gap = gaps[i][ri][jc];
          // Feasibility of the coincidence point with respect to the rest.
          bool feasible_rest = true;
          for (int l = 0; l < k; ++l)
            if (l != i && l != jc && gaps[i][ri][l] > tol.act) feasible_rest = false;
          if (!feasible_rest) continue;
          if (std::abs(gap) <= 1e-12) est.failing_cells.push_back(c);
          if (c > 0 && prev_roots[i].size() == roots[i].size()) {
            const double pgap = prev_gaps[i][ri][jc];
            if ((pgap < 0 && gap > 0) || (pgap > 0 && gap < 0)) {
              est.failing_cells.push_back(c - 1);
              est.failing_cells.push_back(c);
            }
          }
        }
    prev_roots = std::move(roots);
    prev_gaps = std::move(gaps);
  }
}

// Exact near-intersection solves for general m: |J| = m tuples with
// sigma-deficient gradients and |J| = m+1 tuples with a feasible common zero.
void licq_failures_tuples(const ParametricProblem& problem, FailureSetEstimate& est,
                          const Tol& tol) {
  const int res = est.x_grid_res;
  const double dx = (est.x_hi - est.x_lo) / (res - 1);
  Vec x(problem.n);
  x.setZero();
  for (int c = 0; c < res; ++c) {
    x(0) = est.x_lo + dx * c;
    const GradientMarginScan scan = [&] {
      try {
        return gradient_margin_scan(problem, x, 0.05, 41, tol);
      } catch (const EmptyBandError&) {
        return GradientMarginScan{};
      }
    }();
    if (scan.witness_y.size() > 0) {
      // Keep only exact-coincidence verdicts: the witness must be feasible
      // and its banded gradients deficient at the tight tolerance.
      Vec h(problem.k);
      problem.eval_h_into(x, scan.witness_y, h);
      IndexSet tight;
      for (int i = 0; i < problem.k; ++i)
        if (std::abs(h(i)) <= tol.act) tight.push_back(i);
      if (h.maxCoeff() <= tol.act && !tight.empty()) {
        const EvalRecord rec = problem.eval(x, scan.witness_y);
        Mat rows(tight.size(), problem.m);
        for (size_t t = 0; t < tight.size(); ++t)
          rows.row(t) = rec.jac_y_h.row(tight[t]);
        if (sigma_min_rows(rows) < tol.reg) est.failing_cells.push_back(c);
      }
    }
  }
}

// --- SCSC / SOSC sweep ----------------------------------------------------

struct TrackedPoint {
  KKTPoint point;
  Verdict verdict = Verdict::UNDETERMINED;
};

// Continue each tracked point one grid step; re-enumerate periodically to
// pick up newborn KKT points.
class MinimizerSweep {
 public:
  MinimizerSweep(const ParametricProblem& problem, const Tol& tol)
      : problem_(problem), tol_(tol) {}

  const std::vector<TrackedPoint>& advance(const Vec& x, bool checkpoint) {
    std::vector<KKTPoint> seeds;
    for (const TrackedPoint& t : tracked_) seeds.push_back(t.point);
    std::vector<KKTPoint> next;
    if (checkpoint || tracked_.empty()) {
      const Enumeration en = enumerate_kkt_points_seeded(problem_, x, seeds, 5, tol_);
      next = en.points;
    } else {
      for (const KKTPoint& s : seeds) {
        if (auto p = continue_point(x, s)) next.push_back(*p);
      }
      dedup(next);
    }
    tracked_.clear();
    for (KKTPoint& p : next) {
      TrackedPoint t;
      t.verdict = classify_kkt(problem_, p, tol_).verdict;
      t.point = std::move(p);
      tracked_.push_back(std::move(t));
    }
    return tracked_;
  }

 private:
  std::optional<KKTPoint> continue_point(const Vec& x, const KKTPoint& s) const {
    Vec lam(s.active.size());
    for (size_t t = 0; t < s.active.size(); ++t) lam(t) = s.lambda(s.active[t]);
    ReducedSolve rs = solve_reduced_kkt(problem_, x, s.active, s.y, lam, tol_);
    if (rs.status == SolveStatus::Converged) return rs.point;
    if (rs.status == SolveStatus::Rejected) {
      std::vector<IndexSet> candidates;
      if (rs.negative_multiplier) {
        IndexSet dropped;
        for (int i : s.active)
          if (i != rs.violated) dropped.push_back(i);
        candidates.push_back(dropped);
      } else {
        IndexSet added = s.active;
        added.push_back(rs.violated);
        std::sort(added.begin(), added.end());
        candidates.push_back(added);
        for (int drop : s.active) {
          IndexSet ex;
          for (int i : added)
            if (i != drop) ex.push_back(i);
          candidates.push_back(ex);
        }
      }
      for (const IndexSet& cand : candidates) {
        if (static_cast<int>(cand.size()) > problem_.m) continue;
        Vec lam0(cand.size());
        for (size_t t = 0; t < cand.size(); ++t) lam0(t) = rs.point.lambda(cand[t]);
        const ReducedSolve sw =
            solve_reduced_kkt(problem_, x, cand, rs.point.y, lam0, tol_);
        if (sw.status == SolveStatus::Converged) return sw.point;
      }
    }
    return std::nullopt;
  }

  void dedup(std::vector<KKTPoint>& pts) const {
    std::vector<KKTPoint> out;
    for (KKTPoint& p : pts) {
      bool dup = false;
      for (const KKTPoint& q : out)
        dup = dup || ((p.y - q.y).norm() + (p.lambda - q.lambda).norm() <= tol_.dedup);
      if (!dup) out.push_back(std::move(p));
    }
    pts = std::move(out);
  }

  const ParametricProblem& problem_;
  const Tol& tol_;
  std::vector<TrackedPoint> tracked_;
};

constexpr int kCheckpointStride = 25;
constexpr double kGapZero = 1e-12;    // exact complementarity-gap vanishing
constexpr double kCurvZero = 1e-18;   // exact cone-curvature vanishing

void scsc_failures(const ParametricProblem& problem, FailureSetEstimate& est,
                   const Tol& tol) {
  const int res = est.x_grid_res;
  const double dx = (est.x_hi - est.x_lo) / (res - 1);
  MinimizerSweep sweep(problem, tol);
  Vec x(problem.n), h(problem.k);
  x.setZero();
  // Per-minimizer signed complementarity gaps at the previous grid x, keyed
  // by primal position for pairing.
  std::vector<std::pair<Vec, Vec>> prev;  // (y, gap vector)
  for (int c = 0; c < res; ++c) {
    x(0) = est.x_lo + dx * c;
    const auto& tracked = sweep.advance(x, c % kCheckpointStride == 0);
    std::vector<std::pair<Vec, Vec>> cur;
    for (const TrackedPoint& t : tracked) {
      if (t.verdict == Verdict::NOT_LOCAL_MIN) continue;
      problem.eval_h_into(x, t.point.y, h);
      Vec gap = t.point.lambda + h;
      for (int i = 0; i < problem.k; ++i)
        if (std::abs(gap(i)) <= kGapZero) est.failing_cells.push_back(c);
      cur.emplace_back(t.point.y, gap);
    }
    for (const auto& [y, gap] : cur) {
      // Pair with the nearest previous minimizer.
      const std::pair<Vec, Vec>* best = nullptr;
      double best_d = 0.25;
      for (const auto& p : prev) {
        const double d = (p.first - y).norm();
        if (d < best_d) {
          best_d = d;
          best = &p;
        }
      }
      if (!best) continue;
      for (int i = 0; i < problem.k; ++i) {
        const double a = best->second(i), b = gap(i);
        if ((a < -kGapZero && b > kGapZero) || (a > kGapZero && b < -kGapZero)) {
          est.failing_cells.push_back(c - 1);
          est.failing_cells.push_back(c);
        }
      }
    }
    prev = std::move(cur);
  }
}

void sosc_failures(const ParametricProblem& problem, FailureSetEstimate& est,
                   const Tol& tol) {
  const int res = est.x_grid_res;
  const double dx = (est.x_hi - est.x_lo) / (res - 1);
  MinimizerSweep sweep(problem, tol);
  Vec x(problem.n);
  x.setZero();
  for (int c = 0; c < res; ++c) {
    x(0) = est.x_lo + dx * c;
    for (const TrackedPoint& t : sweep.advance(x, c % kCheckpointStride == 0)) {
      if (t.verdict == Verdict::NOT_LOCAL_MIN) continue;
      const double modulus = check_sosc(problem, t.point, tol).margin;
      if (modulus <= kCurvZero) est.failing_cells.push_back(c);
    }
  }
}

}  // namespace

FailureSetEstimate failure_set_estimate(const ParametricProblem& problem,
                                        Condition condition, int x_grid_res,
                                        const Tol& tol) {
  if (problem.n != 1)
    throw DomainError("failure_set_estimate: 1-D x grids only (n = 1)");
  if (x_grid_res < 2) throw DomainError("failure_set_estimate: grid too small");
  FailureSetEstimate est;
  est.condition = condition;
  est.x_grid_res = x_grid_res;
  est.x_lo = problem.x_domain.lo(0);
  est.x_hi = problem.x_domain.hi(0);
  switch (condition) {
    case Condition::LICQ:
      if (problem.m == 1)
        licq_failures_1d(problem, est, tol);
      else
        licq_failures_tuples(problem, est, tol);
      break;
    case Condition::SCSC:
      scsc_failures(problem, est, tol);
      break;
    case Condition::SOSC:
      sosc_failures(problem, est, tol);
      break;
  }
  finalize(est);
  return est;
}

int worker_count() {
  int cap = 8;
  if (const char* env = std::getenv("REGDIAG_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) cap = std::min(v, 64);
  }
  const int hw = static_cast<int>(std::thread::hardware_concurrency());
  return std::max(1, std::min(cap, hw > 0 ? hw : 1));
}

PrevalenceReport prevalence_experiment(const ParametricProblem& problem,
                                       Condition condition, double nu, int trials,
                                       uint64_t seed, int x_grid_res, const Tol& tol) {
  if (trials < 1) throw DomainError("prevalence_experiment: trials must be >= 1");
  if (problem.slater_margin && nu >= *problem.slater_margin)
    throw DomainError("prevalence_experiment: nu must stay below the Slater margin");
  PrevalenceReport rep;
  rep.condition = condition;
  rep.nu = nu;
  rep.trials = trials;
  rep.seed = seed;
  rep.x_grid_res = x_grid_res;
  rep.per_trial.resize(trials);

  auto run_trial = [&](int t) {
    TrialRecord rec;
    rec.draw = draw_perturbation(nu, seed + static_cast<uint64_t>(t), problem.k,
                                 problem.m);
    const ParametricProblem perturbed = apply_perturbation(problem, rec.draw);
    const FailureSetEstimate est =
        failure_set_estimate(perturbed, condition, x_grid_res, tol);
    rec.fraction = est.fraction;
    rec.intervals = est.intervals;
    rec.failing_cells = static_cast<int>(est.failing_cells.size());
    rep.per_trial[t] = std::move(rec);
  };

  const int workers = std::min(worker_count(), trials);
  if (workers <= 1) {
    for (int t = 0; t < trials; ++t) run_trial(t);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (int t = next.fetch_add(1); t < trials; t = next.fetch_add(1))
          run_trial(t);
      });
    for (std::thread& th : pool) th.join();
  }

  std::vector<double> fractions;
  for (const TrialRecord& rec : rep.per_trial) {
    fractions.push_back(rec.fraction);
    rep.max_fraction = std::max(rep.max_fraction, rec.fraction);
    if (rec.failing_cells > 2) rep.trials_beyond_point_width++;
  }
  std::sort(fractions.begin(), fractions.end());
  rep.median_fraction = fractions[fractions.size() / 2];
  return rep;
}

}  // namespace regdiag
