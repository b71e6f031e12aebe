#include "regdiag/continuation.hpp"

#include "regdiag/detail/newton.hpp"
#include "regdiag/sensitivity.hpp"

#include <algorithm>
#include <cmath>

namespace regdiag {

namespace {

struct Stepper {
  const ParametricProblem& problem;
  const Tol& tol;
  const TraceOptions& opts;
  double dir;

  Vec make_x(double xs) const {
    Vec x(problem.n);
    x.setZero();
    x(0) = xs;
    return x;
  }

  ReducedSolve correct(double xs, const IndexSet& j, const Vec& y_seed,
                       const Vec& lam_seed) const {
    return solve_reduced_kkt(problem, make_x(xs), j, y_seed, lam_seed, tol);
  }

  // Tangent of the reduced system at a solved point; zero-order fallback
  // when the reduced matrix is singular.
  void predict(double xs, const IndexSet& j, const Vec& y, const Vec& lam_red,
               double dx, Vec& y_pred, Vec& lam_pred) const {
    y_pred = y;
    lam_pred = lam_red;
    KKTPoint pt;
    pt.x = make_x(xs);
    pt.y = y;
    pt.lambda = Vec::Zero(problem.k);
    for (size_t t = 0; t < j.size(); ++t) pt.lambda(j[t]) = lam_red(t);
    pt.active = j;
    const auto sens = hypergradient_reduced_for(problem, pt, j, tol);
    if (const auto* res = std::get_if<SensitivityResult>(&sens)) {
      y_pred += dx * res->dy_dx.col(0);
      for (size_t t = 0; t < j.size(); ++t)
        lam_pred(t) += dx * res->dlambda_dx(j[t], 0);
    }
  }
};

Vec reduced_lambda(const KKTPoint& p) {
  Vec lam(p.active.size());
  for (size_t t = 0; t < p.active.size(); ++t) lam(t) = p.lambda(p.active[t]);
  return lam;
}

}  // namespace

Branch trace_branch(const ParametricProblem& problem, double x_start, double x_end,
                    const KKTPoint& start, const TraceOptions& opts, const Tol& tol) {
  if (problem.n != 1)
    throw DomainError("trace_branch: 1-D x paths only (n = 1)");
  Branch branch;
  const double dom_lo = problem.x_domain.lo(0), dom_hi = problem.x_domain.hi(0);
  const bool clamped_end = x_end < dom_lo - 1e-9 || x_end > dom_hi + 1e-9;
  x_start = std::min(dom_hi, std::max(dom_lo, x_start));
  x_end = std::min(dom_hi, std::max(dom_lo, x_end));
  const double dir = x_end >= x_start ? 1.0 : -1.0;
  const double range = std::abs(x_end - x_start);

  Stepper st{problem, tol, opts, dir};

  // Forced sample points, ordered along the path.
  std::vector<double> forced = opts.sample_xs;
  forced.erase(std::remove_if(forced.begin(), forced.end(),
                              [&](double v) {
                                return (v - x_start) * dir < -1e-12 ||
                                       (v - x_end) * dir > 1e-12;
                              }),
               forced.end());
  std::sort(forced.begin(), forced.end(),
            [&](double a, double b) { return (a - b) * dir < 0; });
  size_t next_forced = 0;

  // Settle the start point.
  IndexSet j = start.active;
  ReducedSolve cur = st.correct(x_start, j, start.y, reduced_lambda(start));
  if (cur.status != SolveStatus::Converged)
    throw NoStartError(problem.name + ": start point does not solve the reduced system");
  if (opts.require_minimizer &&
      classify_kkt(problem, cur.point, tol).verdict != Verdict::STRICT_LOCAL_MIN)
    throw NoStartError(problem.name + ": start point is not a strict local minimizer");

  auto push_sample = [&](double xs, const KKTPoint& pt) {
    BranchSample s;
    s.x = xs;
    s.point = pt;
    s.report = full_report(problem, pt, tol);
    branch.samples.push_back(std::move(s));
  };
  push_sample(x_start, cur.point);

  double x = x_start;
  double dt = range > 0 ? range / opts.initial_step_div : 0.0;
  const double dt_cap = range / 20.0;
  const double dt_min = 1e-12;
  int clean = 0;
  double sigma_max_seen = branch.samples.back().report.kkt_sigma_min;

  auto event_report = [&](double xs, const IndexSet& jj, const Vec& y_seed,
                          const Vec& lam_seed) -> RegularityReport {
    const ReducedSolve rs = st.correct(xs, jj, y_seed, lam_seed);
    if (rs.status == SolveStatus::Converged || rs.status == SolveStatus::Rejected)
      return full_report(problem, rs.point, tol);
    return branch.samples.back().report;
  };

  // Bisect the last x where pred(x) holds, given pred(a) true, pred(b) false.
  auto bisect_last_true = [&](double a, double b, auto&& pred) {
    while (std::abs(b - a) > tol.event) {
      const double mid = 0.5 * (a + b);
      if (pred(mid))
        a = mid;
      else
        b = mid;
    }
    return std::pair<double, double>(a, b);
  };

  auto terminate = [&](Termination kind, double xs) {
    branch.termination = kind;
    branch.termination_x = xs;
  };

  while (true) {
    if (static_cast<int>(branch.samples.size()) >= opts.max_samples) {
      terminate(Termination::NO_CONVERGE, x);
      return branch;
    }
    if (std::abs(x - x_end) <= 1e-14 || range == 0.0) {
      if (clamped_end) {
        Event ev;
        ev.kind = EventKind::DOMAIN_BOUNDARY;
        ev.x_star = x_end;
        ev.diagnostics = branch.samples.back().report;
        branch.events.push_back(ev);
      }
      terminate(Termination::PATH_END, x);
      return branch;
    }

    double step = std::min(dt, std::abs(x_end - x));
    if (next_forced < forced.size())
      step = std::min(step, std::abs(forced[next_forced] - x));
    double target = x + dir * step;
    if (next_forced < forced.size() &&
        std::abs(target - forced[next_forced]) < 1e-14) {
      target = forced[next_forced];
      ++next_forced;
    }
    if (std::abs(target - x_end) < 1e-14) target = x_end;

    const Vec y_base = cur.point.y;
    const Vec lam_base = reduced_lambda(cur.point);
    Vec y_pred, lam_pred;
    st.predict(x, j, y_base, lam_base, target - x, y_pred, lam_pred);
    if ((y_pred - y_base).norm() > tol.step_cap && dt > dt_min) {
      dt = std::max(dt * 0.5, dt_min);
      continue;
    }

    ReducedSolve nxt = st.correct(target, j, y_pred, lam_pred);

    if (nxt.status == SolveStatus::Converged &&
        (nxt.point.y - y_base).norm() <= tol.step_cap) {
      // Accepted step.
      const RegularityReport prev_rep = branch.samples.back().report;
      cur = nxt;
      x = target;
      push_sample(x, cur.point);
      const RegularityReport& rep = branch.samples.back().report;
      sigma_max_seen = std::max(sigma_max_seen, rep.kkt_sigma_min);

      if (nxt.iterations <= 4) {
        if (++clean >= 3) {
          dt = std::min(dt * 2.0, dt_cap > 0 ? dt_cap : dt);
          clean = 0;
        }
      } else {
        clean = 0;
      }

      // Pitchfork monitor: cone curvature changed sign without any
      // active-set event; the tracked point stops being a minimizer.
      if (opts.require_minimizer && prev_rep.sosc_modulus > tol.classify &&
          rep.sosc_modulus < -tol.classify) {
        const double x_prev = branch.samples[branch.samples.size() - 2].x;
        Vec ys = y_base, ls = lam_base;
        auto modulus_pos = [&](double xm) {
          const ReducedSolve rs = st.correct(xm, j, ys, ls);
          if (rs.status != SolveStatus::Converged) return false;
          ys = rs.point.y;
          ls = reduced_lambda(rs.point);
          return check_sosc(problem, rs.point, tol).margin > 0.0;
        };
        const auto [a, b] = bisect_last_true(x_prev, x, modulus_pos);
        terminate(Termination::SADDLE_DEGENERATION, 0.5 * (a + b));
        return branch;
      }

      // Eager fold monitor.
      if (rep.kkt_sigma_min < tol.fold_sigma && sigma_max_seen > 10 * tol.fold_sigma) {
        Event ev;
        ev.kind = EventKind::FOLD;
        ev.x_star = x;
        ev.bracket_width = std::abs(x - branch.samples[branch.samples.size() - 2].x);
        ev.diagnostics = rep;
        branch.events.push_back(ev);
        terminate(Termination::FOLD, x);
        return branch;
      }
      continue;
    }

    if (nxt.status == SolveStatus::NoConverge ||
        nxt.status == SolveStatus::SingularJacobian) {
      if (dt > dt_min) {
        dt = std::max(dt * 0.5, dt_min);
        clean = 0;
        continue;
      }
      // Persistent failure at the minimal step: locate the solvability
      // boundary and decide between fold and giving up.
      Vec ys = y_base, ls = lam_base;
      auto solvable = [&](double xm) {
        const ReducedSolve rs = st.correct(xm, j, ys, ls);
        if (rs.status != SolveStatus::Converged) return false;
        ys = rs.point.y;
        ls = reduced_lambda(rs.point);
        return true;
      };
      const auto [a, b] = bisect_last_true(x, target, solvable);
      const ReducedSolve at_a = st.correct(a, j, ys, ls);
      const double sigma_here =
          at_a.status == SolveStatus::Converged
              ? kkt_matrix_sigma_min_for(problem, st.make_x(a), at_a.point.y,
                                         at_a.point.lambda, j)
              : 0.0;
      Event ev;
      ev.kind = EventKind::FOLD;
      ev.x_star = 0.5 * (a + b);
      ev.bracket_width = std::abs(b - a);
      if (at_a.status == SolveStatus::Converged)
        ev.diagnostics = full_report(problem, at_a.point, tol);
      if (sigma_here <= 0.05 * sigma_max_seen) {
        branch.events.push_back(ev);
        terminate(Termination::FOLD, ev.x_star);
      } else {
        terminate(Termination::NO_CONVERGE, ev.x_star);
      }
      return branch;
    }

    // Rejected: an inequality or multiplier sign crossed zero between x and
    // target. Localize, record the event, and swap the active set.
    const int vi = nxt.violated;
    const bool neg_lambda = nxt.negative_multiplier;

    Vec ys = y_base, ls = lam_base;
    KKTPoint boundary_point = cur.point;
    auto still_valid = [&](double xm) {
      const ReducedSolve rs = st.correct(xm, j, ys, ls);
      if (rs.status != SolveStatus::Converged) return false;
      ys = rs.point.y;
      ls = reduced_lambda(rs.point);
      boundary_point = rs.point;
      return true;
    };
    const auto [x_ok, x_bad] = bisect_last_true(x, target, still_valid);

    // Refine the raw zero crossing of the monitored quantity when it is
    // strictly signed on the valid side (sharper than the validity boundary).
    double x_star = x_ok;
    {
      Vec yq = y_base, lq = lam_base;
      auto quantity = [&](double xm) -> double {
        const ReducedSolve rs = st.correct(xm, j, yq, lq);
        if (rs.status == SolveStatus::Converged || rs.status == SolveStatus::Rejected) {
          yq = rs.point.y;
          lq = reduced_lambda(rs.point);
          if (neg_lambda) return rs.point.lambda(vi);
          Vec h(problem.k);
          problem.eval_h_into(st.make_x(xm), rs.point.y, h);
          return -h(vi);
        }
        return -1.0;  // unsolvable counts as crossed
      };
      if (quantity(x) > 0.0) {
        auto positive = [&](double xm) { return quantity(xm) > 0.0; };
        const auto [qa, qb] = bisect_last_true(x, target, positive);
        x_star = 0.5 * (qa + qb);
      }
    }

    Event ev;
    ev.kind = neg_lambda ? EventKind::SCSC_LOSS : EventKind::ACTIVATION;
    ev.index = vi;
    ev.x_star = x_star;
    ev.bracket_width = tol.event;
    ev.diagnostics = event_report(x_ok, j, ys, ls);
    branch.events.push_back(ev);

    // Candidate active sets, tried just past the event.
    std::vector<IndexSet> candidates;
    if (neg_lambda) {
      IndexSet dropped;
      for (int i : j)
        if (i != vi) dropped.push_back(i);
      candidates.push_back(dropped);
    } else {
      IndexSet added = j;
      added.push_back(vi);
      std::sort(added.begin(), added.end());
      candidates.push_back(added);
      for (int drop : j) {
        IndexSet exchanged;
        for (int i : added)
          if (i != drop) exchanged.push_back(i);
        candidates.push_back(exchanged);
      }
    }

    bool switched = false;
    for (const IndexSet& cand : candidates) {
      for (double xp : {x_star + dir * tol.event, x_bad}) {
        if ((xp - x_end) * dir > 0) xp = x_end;
        Vec lam0 = Vec::Ones(cand.size());
        for (size_t t = 0; t < cand.size(); ++t)
          lam0(t) = boundary_point.lambda.size() ? boundary_point.lambda(cand[t]) : 0.0;
        const ReducedSolve sw = st.correct(xp, cand, boundary_point.y, lam0);
        if (sw.status != SolveStatus::Converged) continue;
        if ((sw.point.y - boundary_point.y).norm() > tol.step_cap) continue;
        if (opts.require_minimizer) {
          const KKTClassification cls = classify_kkt(problem, sw.point, tol);
          if (cls.verdict == Verdict::NOT_LOCAL_MIN) {
            terminate(Termination::SADDLE_DEGENERATION, x_star);
            return branch;
          }
        }
        j = cand;
        cur = sw;
        x = xp;
        push_sample(x, cur.point);
        sigma_max_seen = std::max(sigma_max_seen, branch.samples.back().report.kkt_sigma_min);
        switched = true;
        break;
      }
      if (switched) break;
    }
    if (switched) {
      clean = 0;
      continue;
    }

    // No valid swap. Classify the boundary point itself: if the minimizer
    // has degenerated into a saddle the branch ends there; a vanishing KKT
    // matrix signals a fold instead.
    if (opts.require_minimizer &&
        classify_kkt(problem, boundary_point, tol).verdict == Verdict::NOT_LOCAL_MIN) {
      terminate(Termination::SADDLE_DEGENERATION, x_star);
      return branch;
    }
    const double sigma_here = kkt_matrix_sigma_min_for(
        problem, st.make_x(x_ok), boundary_point.y, boundary_point.lambda, j);
    if (sigma_here <= 0.05 * sigma_max_seen) {
      branch.events.back().kind = EventKind::FOLD;
      terminate(Termination::FOLD, x_star);
      return branch;
    }
    if (branch.samples.back().report.licq_margin <= tol.reg) {
      Event lev;
      lev.kind = EventKind::LICQ_DEGENERACY;
      lev.x_star = x_star;
      lev.bracket_width = tol.event;
      lev.diagnostics = branch.samples.back().report;
      branch.events.push_back(lev);
      terminate(Termination::LICQ_DEGENERACY, x_star);
      return branch;
    }
    terminate(Termination::NO_CONVERGE, x_star);
    return branch;
  }
}

std::vector<ActiveSetSpan> active_set_history(const Branch& branch) {
  std::vector<ActiveSetSpan> out;
  for (const BranchSample& s : branch.samples) {
    if (out.empty() || out.back().active != s.point.active) {
      out.push_back({s.x, s.x, s.point.active});
    } else {
      out.back().x_to = s.x;
    }
  }
  return out;
}

std::map<IndexSet, int> count_minimizers_per_stratum(const ParametricProblem& problem,
                                                     const Vec& x, int seeds_per_axis,
                                                     const Tol& tol) {
  std::map<IndexSet, int> out;
  const Enumeration en = enumerate_kkt_points(problem, x, seeds_per_axis, tol);
  for (const KKTPoint& p : en.points) {
    if (classify_kkt(problem, p, tol).verdict != Verdict::STRICT_LOCAL_MIN) continue;
    IndexSet j;
    try {
      j = active_set(problem, p.x, p.y, tol.act);
    } catch (const InfeasibleError&) {
      j = p.active;
    }
    out[j]++;
  }
  return out;
}

CountScreenResult minimizer_count_screen(const ParametricProblem& problem,
                                         const std::vector<double>& x_samples,
                                         int seeds_per_axis, const Tol& tol) {
  if (x_samples.size() < 2)
    throw DomainError("minimizer_count_screen: need at least two x samples");
  CountScreenResult out;
  std::vector<std::map<IndexSet, int>> counts;
  for (double xs : x_samples) {
    Vec x(problem.n);
    x.setZero();
    x(0) = xs;
    counts.push_back(count_minimizers_per_stratum(problem, x, seeds_per_axis, tol));
  }
  for (size_t i = 0; i < counts.size(); ++i)
    for (size_t l = i + 1; l < counts.size(); ++l) {
      if (counts[i] != counts[l]) {
        out.obstructed = true;
        out.witness_x1 = x_samples[i];
        out.witness_x2 = x_samples[l];
        for (const auto& [jj, c] : counts[i]) {
          auto it = counts[l].find(jj);
          if (it == counts[l].end() || it->second != c) {
            out.detail = "stratum " + index_set_to_string(jj) + " count " +
                         std::to_string(c) + " vs " +
                         std::to_string(it == counts[l].end() ? 0 : it->second);
            break;
          }
        }
        if (out.detail.empty()) out.detail = "stratum appears only at second x";
        return out;
      }
    }
  return out;
}

SoscProfile uniform_sosc_profile(const Branch& branch, const Tol& tol) {
  SoscProfile out;
  for (const BranchSample& s : branch.samples) {
    out.samples.emplace_back(s.x, s.report.sosc_modulus);
    out.infimum = std::min(out.infimum, s.report.sosc_modulus);
  }
  out.uniform = out.infimum > tol.reg;
  return out;
}

GrowthEstimate quadratic_growth_estimate(const ParametricProblem& problem,
                                         const KKTPoint& kkt, double delta,
                                         int n_samples, uint64_t seed, const Tol& tol) {
  if (!(delta > 0)) throw DomainError("quadratic_growth_estimate: delta must be > 0");
  const Vec x = problem.x_domain.clamp(kkt.x);
  const double g0 = problem.g.value(x, kkt.y, problem.n, problem.m);
  detail::SplitMix64 rng(seed);
  GrowthEstimate out;
  Vec y(problem.m), h(problem.k);
  for (int s = 0; s < n_samples; ++s) {
    double norm2 = 0.0;
    for (int d = 0; d < problem.m; ++d) {
      y(d) = delta * (2.0 * rng.uniform() - 1.0);
      norm2 += y(d) * y(d);
    }
    if (norm2 > delta * delta || norm2 < 1e-20) continue;  // ball rejection
    y += kkt.y;
    problem.eval_h_into(x, y, h);
    if (problem.k > 0 && h.maxCoeff() > tol.act) continue;
    out.feasible_samples++;
    const double ratio =
        (problem.g.value(x, y, problem.n, problem.m) - g0) / (y - kkt.y).squaredNorm();
    if (ratio < out.c_hat) {
      out.c_hat = ratio;
      out.witness_y = y;
    }
  }
  if (out.feasible_samples < 10)
    throw SamplingError(problem.name + ": fewer than 10 feasible growth samples");
  return out;
}

const char* to_string(EventKind kind) {
  switch (kind) {
    case EventKind::ACTIVATION: return "ACTIVATION";
    case EventKind::SCSC_LOSS: return "SCSC_LOSS";
    case EventKind::FOLD: return "FOLD";
    case EventKind::LICQ_DEGENERACY: return "LICQ_DEGENERACY";
    case EventKind::DOMAIN_BOUNDARY: return "DOMAIN_BOUNDARY";
  }
  return "?";
}

const char* to_string(Termination termination) {
  switch (termination) {
    case Termination::PATH_END: return "PATH_END";
    case Termination::FOLD: return "FOLD";
    case Termination::SADDLE_DEGENERATION: return "SADDLE_DEGENERATION";
    case Termination::LICQ_DEGENERACY: return "LICQ_DEGENERACY";
    case Termination::NO_CONVERGE: return "NO_CONVERGE";
  }
  return "?";
}

}  // namespace regdiag
