#include "regdiag/stratification.hpp"

#include "regdiag/detail/newton.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace regdiag {

namespace {

bool is_affine_in_y(const ParametricProblem& problem, const IndexSet& j,
                    const Vec& x) {
  Vec y = 0.5 * (problem.y_box.lo + problem.y_box.hi);
  const EvalRecord rec = problem.eval(x, y);
  for (int i : j)
    if (rec.hess_yy_h[i].cwiseAbs().maxCoeff() > 0) return false;
  return true;
}

}  // namespace

std::vector<VertexRecord> enumerate_vertices(const ParametricProblem& problem,
                                             const Vec& x, const Tol& tol) {
  if (problem.m > 3)
    throw DomainError("enumerate_vertices: supported for m <= 3 only");
  const Vec xc = problem.x_domain.clamp(x);
  const int m = problem.m;
  std::vector<VertexRecord> out;

  auto push_unique = [&](VertexRecord rec) {
    for (const VertexRecord& v : out)
      if (v.active == rec.active && (v.y - rec.y).norm() <= tol.dedup) return;
    out.push_back(std::move(rec));
  };

  std::vector<IndexSet> tuples;
  for (int mask = 0; mask < (1 << problem.k); ++mask) {
    IndexSet j;
    for (int i = 0; i < problem.k; ++i)
      if (mask & (1 << i)) j.push_back(i);
    if (static_cast<int>(j.size()) == m) tuples.push_back(j);
  }

  EvalRecord rec;
  for (const IndexSet& j : tuples) {
    if (is_affine_in_y(problem, j, xc)) {
      // Direct linear solve: rows A y = A y0 - h(y0).
      Vec y0 = 0.5 * (problem.y_box.lo + problem.y_box.hi);
      problem.eval_into(xc, y0, rec);
      Mat a(m, m);
      Vec b(m);
      for (int t = 0; t < m; ++t) {
        a.row(t) = rec.jac_y_h.row(j[t]);
        b(t) = a.row(t).dot(y0) - rec.h(j[t]);
      }
      Eigen::FullPivLU<Mat> lu(a);
      if (lu.rank() < m) {
        // Parallel or coincident affine surfaces: coincident ones are a
        // degenerate (non-isolated) intersection.
        const Vec y = lu.solve(b);
        if ((a * y - b).norm() <= 1e-9) {
          VertexRecord v;
          v.y = y;
          v.active = j;
          v.degenerate = true;
          problem.eval_h_into(xc, y, rec.h);
          v.feasible = rec.h.maxCoeff() <= tol.act;
          push_unique(std::move(v));
        }
        continue;
      }
      const Vec y = lu.solve(b);
      if (!problem.y_box.contains(y, 1e-9)) continue;
      VertexRecord v;
      v.y = y;
      v.active = j;
      problem.eval_h_into(xc, y, rec.h);
      v.feasible = rec.h.maxCoeff() <= tol.act;
      push_unique(std::move(v));
      continue;
    }

    // Nonlinear: Newton from grid seeds.
    const int seeds = 7;
    Vec y0(m);
    std::vector<int> idx(m, 0);
    while (true) {
      for (int d = 0; d < m; ++d)
        y0(d) = problem.y_box.lo(d) +
                (problem.y_box.hi(d) - problem.y_box.lo(d)) * idx[d] / (seeds - 1);
      Vec z = y0;
      auto fun = [&](const Vec& zz, Vec& f, Mat& jac) {
        problem.eval_into(xc, zz, rec);
        f.resize(m);
        jac.resize(m, m);
        for (int t = 0; t < m; ++t) {
          f(t) = rec.h(j[t]);
          jac.row(t) = rec.jac_y_h.row(j[t]);
        }
      };
      const auto rep = detail::gauss_newton(fun, z, m, 1e-9, 80, 20);
      if (rep.status == detail::NewtonStatus::Converged &&
          problem.y_box.contains(z, 1e-9)) {
        problem.eval_into(xc, z, rec);
        Mat rows(m, m);
        for (int t = 0; t < m; ++t) rows.row(t) = rec.jac_y_h.row(j[t]);
        VertexRecord v;
        v.y = z;
        v.active = j;
        v.degenerate = sigma_min_rows(rows) < 1e-8;
        v.feasible = rec.h.maxCoeff() <= tol.act;
        push_unique(std::move(v));
      }
      int d = 0;
      while (d < m && ++idx[d] == seeds) idx[d++] = 0;
      if (d == m) break;
    }
  }
  std::sort(out.begin(), out.end(), [](const VertexRecord& a, const VertexRecord& b) {
    if (a.active != b.active) return a.active < b.active;
    for (int d = 0; d < a.y.size(); ++d)
      if (a.y(d) != b.y(d)) return a.y(d) < b.y(d);
    return false;
  });
  return out;
}

Box feasible_bbox(const ParametricProblem& problem, const Vec& x, int coarse_res,
                  double inflate) {
  const Vec xc = problem.x_domain.clamp(x);
  Vec lo = Vec::Constant(problem.m, kInf), hi = Vec::Constant(problem.m, -kInf);
  Vec y(problem.m), h(problem.k);
  std::vector<int> idx(problem.m, 0);
  bool any = false;
  while (true) {
    for (int d = 0; d < problem.m; ++d)
      y(d) = problem.y_box.lo(d) +
             (problem.y_box.hi(d) - problem.y_box.lo(d)) * idx[d] / (coarse_res - 1);
    problem.eval_h_into(xc, y, h);
    if (problem.k == 0 || h.maxCoeff() <= 0.0) {
      any = true;
      lo = lo.cwiseMin(y);
      hi = hi.cwiseMax(y);
    }
    int d = 0;
    while (d < problem.m && ++idx[d] == coarse_res) idx[d++] = 0;
    if (d == problem.m) break;
  }
  if (!any)
    throw ResolutionError(problem.name + ": no feasible point found for bounding box");
  Box b;
  const Vec width = (hi - lo).cwiseMax(1e-3);
  b.lo = lo - inflate * width;
  b.hi = hi + inflate * width;
  return b;
}

namespace {

struct GridLabels {
  int res = 0;
  std::vector<uint8_t> feasible;   // res*res (or res for m=1)
  std::vector<int> pattern;        // bitmask of banded constraints
};

// Flood fill over 8-connected cells sharing a pattern; returns component count
// and throws ResolutionError on single-cell components.
int count_components_2d(const GridLabels& g, int want_pattern,
                        const std::string& what) {
  const int res = g.res;
  std::vector<int> comp(res * res, -1);
  int count = 0;
  std::vector<int> stack;
  for (int s = 0; s < res * res; ++s) {
    if (!g.feasible[s] || g.pattern[s] != want_pattern || comp[s] >= 0) continue;
    int size = 0;
    stack.push_back(s);
    comp[s] = count;
    while (!stack.empty()) {
      const int c = stack.back();
      stack.pop_back();
      ++size;
      const int cx = c % res, cy = c / res;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          if (!dx && !dy) continue;
          const int nx = cx + dx, ny = cy + dy;
          if (nx < 0 || ny < 0 || nx >= res || ny >= res) continue;
          const int t = ny * res + nx;
          if (g.feasible[t] && g.pattern[t] == want_pattern && comp[t] < 0) {
            comp[t] = count;
            stack.push_back(t);
          }
        }
    }
    if (size == 1)
      throw ResolutionError(what + ": single-cell component (grid under-resolved)");
    ++count;
  }
  return count;
}

StratSignature signature_2d(const ParametricProblem& problem, const Vec& x,
                            int grid_res, const Tol& tol) {
  const Vec xc = problem.x_domain.clamp(x);
  const Box bb = feasible_bbox(problem, xc);
  GridLabels g;
  g.res = grid_res;
  g.feasible.assign(grid_res * grid_res, 0);
  g.pattern.assign(grid_res * grid_res, 0);
  const double cell_diag = std::hypot((bb.hi(0) - bb.lo(0)) / (grid_res - 1),
                                      (bb.hi(1) - bb.lo(1)) / (grid_res - 1));
  EvalRecord rec;
  Vec y(2);
  std::vector<int> arc_patterns;
  for (int iy = 0; iy < grid_res; ++iy) {
    y(1) = bb.lo(1) + (bb.hi(1) - bb.lo(1)) * iy / (grid_res - 1);
    for (int ix = 0; ix < grid_res; ++ix) {
      y(0) = bb.lo(0) + (bb.hi(0) - bb.lo(0)) * ix / (grid_res - 1);
      problem.eval_into(xc, y, rec);
      bool feas = true;
      int pattern = 0;
      for (int i = 0; i < problem.k; ++i) {
        // Activity band scaled by resolution and the local gradient norm.
        const double band = 1.5 * cell_diag * std::max(1e-9, rec.jac_y_h.row(i).norm());
        if (rec.h(i) > band) {
          feas = false;
          break;
        }
        if (std::abs(rec.h(i)) <= band) pattern |= 1 << i;
      }
      if (!feas) continue;
      const int s = iy * grid_res + ix;
      g.feasible[s] = 1;
      g.pattern[s] = pattern;
    }
  }

  StratSignature sig;
  // Interior stratum.
  sig.face_count = count_components_2d(g, 0, problem.name + " interior");
  if (sig.face_count > 0) sig.per_pattern[IndexSet{}] = sig.face_count;

  // Codimension-1 strata: single-constraint patterns present in the grid.
  for (int i = 0; i < problem.k; ++i) {
    bool present = false;
    for (int s = 0; s < grid_res * grid_res && !present; ++s)
      present = g.feasible[s] && g.pattern[s] == (1 << i);
    if (!present) continue;
    const int c = count_components_2d(g, 1 << i, problem.name + " arc");
    if (c > 0) {
      sig.arc_count += c;
      sig.per_pattern[IndexSet{i}] = c;
    }
  }

  // 0-dimensional strata from the exact vertex enumeration.
  for (const VertexRecord& v : enumerate_vertices(problem, xc, tol)) {
    if (!v.feasible) continue;
    if (v.degenerate) {
      sig.degenerate_vertices++;
      continue;
    }
    sig.vertex_count++;
    sig.per_pattern[v.active]++;
  }
  return sig;
}

StratSignature signature_1d(const ParametricProblem& problem, const Vec& x,
                            int grid_res, const Tol& tol) {
  const Vec xc = problem.x_domain.clamp(x);
  StratSignature sig;
  Vec y(1), h(problem.k);
  std::vector<uint8_t> feas(grid_res, 0);
  for (int s = 0; s < grid_res; ++s) {
    y(0) = problem.y_box.lo(0) +
           (problem.y_box.hi(0) - problem.y_box.lo(0)) * s / (grid_res - 1);
    problem.eval_h_into(xc, y, h);
    feas[s] = problem.k == 0 || h.maxCoeff() <= 0.0;
  }
  const double cell = (problem.y_box.hi(0) - problem.y_box.lo(0)) / (grid_res - 1);
  // Feasible runs are the 1-D interior strata. A run endpoint that abuts an
  // infeasible cell sits on a constraint boundary: the constraint violated on
  // the infeasible side is the 0-D stratum's pattern. Endpoints on the scan
  // box edge are clipping artifacts, not strata.
  auto boundary_pattern = [&](int inside, int outside) -> int {
    y(0) = problem.y_box.lo(0) + cell * outside;
    problem.eval_h_into(xc, y, h);
    int best = -1;
    double best_h = 0.0;
    for (int i = 0; i < problem.k; ++i)
      if (h(i) > best_h) {
        best = i;
        best_h = h(i);
      }
    (void)inside;
    return best;
  };
  int s = 0;
  while (s < grid_res) {
    if (!feas[s]) {
      ++s;
      continue;
    }
    int e = s;
    while (e + 1 < grid_res && feas[e + 1]) ++e;
    if (e == s)
      throw ResolutionError(problem.name + ": single-cell feasible run");
    sig.face_count++;
    sig.per_pattern[IndexSet{}]++;
    if (s > 0) {
      const int i = boundary_pattern(s, s - 1);
      if (i >= 0) {
        sig.vertex_count++;
        sig.per_pattern[IndexSet{i}]++;
      }
    }
    if (e < grid_res - 1) {
      const int i = boundary_pattern(e, e + 1);
      if (i >= 0) {
        sig.vertex_count++;
        sig.per_pattern[IndexSet{i}]++;
      }
    }
    s = e + 1;
  }
  (void)tol;
  return sig;
}

}  // namespace

StratSignature strat_signature(const ParametricProblem& problem, const Vec& x,
                               int grid_res, const Tol& tol) {
  if (problem.m == 1) return signature_1d(problem, x, grid_res, tol);
  if (problem.m == 2) return signature_2d(problem, x, grid_res, tol);
  throw DomainError("strat_signature: implemented for m in {1, 2}");
}

SignatureComparison signature_equal(const StratSignature& s1,
                                    const StratSignature& s2) {
  SignatureComparison cmp;
  auto diff = [&](const char* what, int a, int b) {
    if (cmp.equal && a != b) {
      cmp.equal = false;
      std::ostringstream os;
      os << what << " " << a << " vs " << b;
      cmp.first_difference = os.str();
    }
  };
  diff("vertex_count", s1.vertex_count, s2.vertex_count);
  diff("arc_count", s1.arc_count, s2.arc_count);
  diff("face_count", s1.face_count, s2.face_count);
  if (cmp.equal && s1.per_pattern != s2.per_pattern) {
    // Reported for diagnostics only; pattern relabeling does not obstruct.
    for (const auto& [j, c] : s1.per_pattern) {
      auto it = s2.per_pattern.find(j);
      if (it == s2.per_pattern.end() || it->second != c) {
        cmp.first_difference = "per-pattern difference at " + index_set_to_string(j);
        break;
      }
    }
  }
  return cmp;
}

ScreenResult rigidity_screen(const ParametricProblem& problem,
                             const std::vector<double>& x_samples, int grid_res,
                             const Tol& tol) {
  if (x_samples.size() < 2)
    throw DomainError("rigidity_screen: need at least two x samples");
  std::vector<StratSignature> sigs;
  for (double xs : x_samples) {
    Vec x(problem.n);
    x.setZero();
    x(0) = xs;
    sigs.push_back(strat_signature(problem, x, grid_res, tol));
  }
  ScreenResult out;
  for (size_t i = 0; i < sigs.size(); ++i)
    for (size_t j = i + 1; j < sigs.size(); ++j) {
      const SignatureComparison cmp = signature_equal(sigs[i], sigs[j]);
      if (!cmp.equal) {
        out.obstructed = true;
        out.witness_x1 = x_samples[i];
        out.witness_x2 = x_samples[j];
        out.detail = cmp.first_difference;
        return out;
      }
    }
  return out;
}

}  // namespace regdiag
