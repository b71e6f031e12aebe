#include "regdiag/problem.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace regdiag {

Tol& default_tol() {
  static Tol tol;
  return tol;
}

double sigma_min_rows(const Mat& a) {
  if (a.rows() == 0) return kInf;
  if (a.rows() > a.cols()) return 0.0;  // row rank deficiency forced
  Eigen::JacobiSVD<Mat> svd(a);
  return svd.singularValues()(svd.singularValues().size() - 1);
}

std::string index_set_to_string(const IndexSet& j) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < j.size(); ++i) {
    if (i) os << ',';
    os << j[i] + 1;
  }
  os << ']';
  return os.str();
}

int index_set_bitmask(const IndexSet& j) {
  int mask = 0;
  for (int i : j) mask |= 1 << i;
  return mask;
}

bool Box::contains(const Vec& p, double tol) const {
  for (int i = 0; i < p.size(); ++i)
    if (p(i) < lo(i) - tol || p(i) > hi(i) + tol) return false;
  return true;
}

Vec Box::clamp(const Vec& p) const {
  Vec q = p;
  for (int i = 0; i < p.size(); ++i) q(i) = std::min(hi(i), std::max(lo(i), q(i)));
  return q;
}

const PolyPiece& PiecewisePolyField::piece_at(double x1) const {
  // Half-open pieces [lo, hi); the last piece owns its upper endpoint.
  for (size_t i = 0; i + 1 < pieces.size(); ++i)
    if (x1 < pieces[i].x_hi) return pieces[i];
  return pieces.back();
}

namespace {

double eval_monomial(const PolyTerm& t, const Vec& x, const Vec& y, int n) {
  double v = t.coeff;
  for (int i = 0; i < n; ++i)
    for (int p = 0; p < t.powers[i]; ++p) v *= x(i);
  const int m = static_cast<int>(t.powers.size()) - n;
  for (int j = 0; j < m; ++j)
    for (int p = 0; p < t.powers[n + j]; ++p) v *= y(j);
  return v;
}

// d^order / d var^order of a single monomial, var indexed into powers.
PolyTerm diff_term(PolyTerm t, int var, int order) {
  for (int o = 0; o < order; ++o) {
    if (t.powers[var] == 0) {
      t.coeff = 0.0;
      return t;
    }
    t.coeff *= t.powers[var];
    t.powers[var] -= 1;
  }
  return t;
}

struct FieldDerivatives {
  double value = 0.0;
  Vec grad_y;   // m
  Vec grad_x;   // n
  Mat hess_yy;  // m x m
  Mat hess_xy;  // n x m
};

void eval_field(const PiecewisePolyField& f, const Vec& x, const Vec& y, int n,
                int m, FieldDerivatives& out) {
  const PolyPiece& piece = f.piece_at(x(0));
  out.value = 0.0;
  out.grad_y.setZero(m);
  out.grad_x.setZero(n);
  out.hess_yy.setZero(m, m);
  out.hess_xy.setZero(n, m);
  for (const PolyTerm& t : piece.terms) {
    out.value += eval_monomial(t, x, y, n);
    for (int i = 0; i < n; ++i) {
      const PolyTerm di = diff_term(t, i, 1);
      if (di.coeff != 0.0) out.grad_x(i) += eval_monomial(di, x, y, n);
    }
    for (int j = 0; j < m; ++j) {
      const PolyTerm dj = diff_term(t, n + j, 1);
      if (dj.coeff == 0.0) continue;
      out.grad_y(j) += eval_monomial(dj, x, y, n);
      for (int l = j; l < m; ++l) {
        const PolyTerm djl = diff_term(dj, n + l, 1);
        if (djl.coeff != 0.0) {
          const double v = eval_monomial(djl, x, y, n);
          out.hess_yy(j, l) += v;
          if (l != j) out.hess_yy(l, j) += v;
        }
      }
      for (int i = 0; i < n; ++i) {
        const PolyTerm dji = diff_term(dj, i, 1);
        if (dji.coeff != 0.0) out.hess_xy(i, j) += eval_monomial(dji, x, y, n);
      }
    }
  }
}

}  // namespace

double PiecewisePolyField::value(const Vec& x, const Vec& y, int n, int m) const {
  (void)m;
  const PolyPiece& piece = piece_at(x(0));
  double v = 0.0;
  for (const PolyTerm& t : piece.terms) v += eval_monomial(t, x, y, n);
  return v;
}

double PiecewisePolyField::dx1(const Vec& x, const Vec& y, int n, int m,
                               int order) const {
  (void)m;
  const PolyPiece& piece = piece_at(x(0));
  double v = 0.0;
  for (const PolyTerm& t : piece.terms) {
    const PolyTerm dt = diff_term(t, 0, order);
    if (dt.coeff != 0.0) v += eval_monomial(dt, x, y, n);
  }
  return v;
}

void ParametricProblem::eval_into(const Vec& x, const Vec& y, EvalRecord& rec) const {
  FieldDerivatives fd;
  eval_field(g, x, y, n, m, fd);
  rec.g = fd.value;
  rec.grad_y_g = fd.grad_y;
  rec.hess_yy_g = fd.hess_yy;
  rec.hess_xy_g = fd.hess_xy;
  rec.h.resize(k);
  rec.jac_y_h.resize(k, m);
  rec.jac_x_h.resize(k, n);
  rec.hess_yy_h.resize(k);
  rec.hess_xy_h.resize(k);
  for (int i = 0; i < k; ++i) {
    eval_field(h[i], x, y, n, m, fd);
    rec.h(i) = fd.value;
    rec.jac_y_h.row(i) = fd.grad_y.transpose();
    rec.jac_x_h.row(i) = fd.grad_x.transpose();
    rec.hess_yy_h[i] = fd.hess_yy;
    rec.hess_xy_h[i] = fd.hess_xy;
  }
}

EvalRecord ParametricProblem::eval(const Vec& x, const Vec& y) const {
  EvalRecord rec;
  eval_into(x, y, rec);
  return rec;
}

void ParametricProblem::eval_h_into(const Vec& x, const Vec& y, Vec& h_out) const {
  h_out.resize(k);
  for (int i = 0; i < k; ++i) h_out(i) = h[i].value(x, y, n, m);
}

void ParametricProblem::eval_h_jac_into(const Vec& x, const Vec& y, Vec& h_out,
                                        Mat& jac_out) const {
  h_out.resize(k);
  jac_out.setZero(k, m);
  for (int i = 0; i < k; ++i) {
    const PolyPiece& piece = h[i].piece_at(x(0));
    double v = 0.0;
    for (const PolyTerm& t : piece.terms) {
      v += eval_monomial(t, x, y, n);
      for (int jdim = 0; jdim < m; ++jdim) {
        const PolyTerm dj = diff_term(t, n + jdim, 1);
        if (dj.coeff != 0.0) jac_out(i, jdim) += eval_monomial(dj, x, y, n);
      }
    }
    h_out(i) = v;
  }
}

EvalRecord evaluate(const ParametricProblem& problem, const Vec& x, const Vec& y) {
  if (x.size() != problem.n) throw DomainError(problem.name + ": x has wrong dimension");
  if (y.size() != problem.m) throw DomainError(problem.name + ": y has wrong dimension");
  if (!problem.x_domain.contains(x, 1e-9)) {
    std::ostringstream os;
    os << problem.name << ": x outside domain";
    throw DomainError(os.str());
  }
  if (!y.allFinite()) throw NonFiniteError(problem.name + ": y not finite");
  const Vec xc = problem.x_domain.clamp(x);
  EvalRecord rec = problem.eval(xc, y);
  bool finite = std::isfinite(rec.g) && rec.grad_y_g.allFinite() &&
                rec.hess_yy_g.allFinite() && rec.hess_xy_g.allFinite() &&
                rec.h.allFinite() && rec.jac_y_h.allFinite() && rec.jac_x_h.allFinite();
  for (const Mat& hm : rec.hess_yy_h) finite = finite && hm.allFinite();
  for (const Mat& hm : rec.hess_xy_h) finite = finite && hm.allFinite();
  if (!finite) throw NonFiniteError(problem.name + ": non-finite evaluation");
  return rec;
}

namespace {

double rel_err(double analytic, double fd) {
  const double scale = std::max(1.0, std::abs(analytic));
  return std::abs(analytic - fd) / scale;
}

}  // namespace

double fd_check(const ParametricProblem& problem, const Vec& x, const Vec& y,
                double step) {
  if (!(step > 0.0)) throw DomainError("fd_check: step must be positive");
  const int n = problem.n, m = problem.m, k = problem.k;
  const EvalRecord rec = problem.eval(x, y);
  double worst = 0.0;
  auto bump = [&](double analytic, double fd) {
    worst = std::max(worst, rel_err(analytic, fd));
    if (!std::isfinite(worst)) throw NonFiniteError("fd_check: non-finite difference");
  };

  // y-direction stencils: value -> gradients, analytic gradients -> Hessians.
  for (int j = 0; j < m; ++j) {
    Vec yp = y, ym = y;
    yp(j) += step;
    ym(j) -= step;
    const EvalRecord rp = problem.eval(x, yp);
    const EvalRecord rm = problem.eval(x, ym);
    bump(rec.grad_y_g(j), (rp.g - rm.g) / (2 * step));
    for (int i = 0; i < k; ++i) bump(rec.jac_y_h(i, j), (rp.h(i) - rm.h(i)) / (2 * step));
    for (int l = 0; l < m; ++l) {
      bump(rec.hess_yy_g(l, j), (rp.grad_y_g(l) - rm.grad_y_g(l)) / (2 * step));
      for (int i = 0; i < k; ++i)
        bump(rec.hess_yy_h[i](l, j), (rp.jac_y_h(i, l) - rm.jac_y_h(i, l)) / (2 * step));
    }
  }
  // x-direction stencils, kept inside the domain.
  for (int d = 0; d < n; ++d) {
    Vec xp = x, xm = x;
    xp(d) = std::min(x(d) + step, problem.x_domain.hi(d));
    xm(d) = std::max(x(d) - step, problem.x_domain.lo(d));
    const double width = xp(d) - xm(d);
    if (width <= 0) continue;
    const EvalRecord rp = problem.eval(xp, y);
    const EvalRecord rm = problem.eval(xm, y);
    for (int i = 0; i < k; ++i) bump(rec.jac_x_h(i, d), (rp.h(i) - rm.h(i)) / width);
    for (int j = 0; j < m; ++j) {
      bump(rec.hess_xy_g(d, j), (rp.grad_y_g(j) - rm.grad_y_g(j)) / width);
      for (int i = 0; i < k; ++i)
        bump(rec.hess_xy_h[i](d, j), (rp.jac_y_h(i, j) - rm.jac_y_h(i, j)) / width);
    }
  }
  return worst;
}

namespace {

void check_seams(const PiecewisePolyField& f, const std::string& where,
                 const ParametricProblem& p) {
  if (f.pieces.empty()) throw ParseError(where + ": field has no pieces");
  int orders = 0;
  if (f.smoothness == Smoothness::C1) orders = 1;
  if (f.smoothness == Smoothness::C2) orders = 2;
  const int samples = 5;
  for (size_t i = 0; i + 1 < f.pieces.size(); ++i) {
    const double b = f.pieces[i].x_hi;
    Vec x(p.n);
    x.setZero();
    x(0) = b;
    // Two-sided evaluation on a y-grid; pieces are indexed directly so both
    // sides of the seam are consulted at the same x.
    std::vector<Vec> ys;
    Vec y(p.m);
    std::function<void(int)> fill = [&](int dim) {
      if (dim == p.m) {
        ys.push_back(y);
        return;
      }
      for (int s = 0; s < samples; ++s) {
        y(dim) = p.y_box.lo(dim) +
                 (p.y_box.hi(dim) - p.y_box.lo(dim)) * s / (samples - 1);
        fill(dim + 1);
      }
    };
    fill(0);
    for (const Vec& yy : ys) {
      for (int order = 0; order <= orders; ++order) {
        PiecewisePolyField left, right;
        left.pieces = {f.pieces[i]};
        right.pieces = {f.pieces[i + 1]};
        const double vl = order == 0 ? left.value(x, yy, p.n, p.m)
                                     : left.dx1(x, yy, p.n, p.m, order);
        const double vr = order == 0 ? right.value(x, yy, p.n, p.m)
                                     : right.dx1(x, yy, p.n, p.m, order);
        if (std::abs(vl - vr) > 1e-9) {
          std::ostringstream os;
          os << where << ": seam jump " << std::abs(vl - vr) << " at x1=" << b
             << " (derivative order " << order << ")";
          throw SeamError(os.str());
        }
      }
    }
  }
}

}  // namespace

void validate_problem(const ParametricProblem& problem) {
  if (problem.n < 1 || problem.m < 1 || problem.k < 0)
    throw ParseError(problem.name + ": dimensions must satisfy n>=1, m>=1, k>=0");
  if (problem.x_domain.lo.size() != problem.n || problem.x_domain.hi.size() != problem.n)
    throw ParseError(problem.name + ": x_domain dimension mismatch");
  if (problem.y_box.lo.size() != problem.m || problem.y_box.hi.size() != problem.m)
    throw ParseError(problem.name + ": y_box dimension mismatch");
  if (static_cast<int>(problem.h.size()) != problem.k)
    throw ParseError(problem.name + ": expected k constraint fields");

  auto check_field = [&](const PiecewisePolyField& f, const std::string& where) {
    for (size_t i = 0; i < f.pieces.size(); ++i) {
      if (!(f.pieces[i].x_lo < f.pieces[i].x_hi))
        throw ParseError(where + ": piece has empty x-range");
      if (i > 0 && std::abs(f.pieces[i].x_lo - f.pieces[i - 1].x_hi) > 1e-12)
        throw ParseError(where + ": pieces are not contiguous");
      for (const PolyTerm& t : f.pieces[i].terms)
        if (static_cast<int>(t.powers.size()) != problem.n + problem.m)
          throw ParseError(where + ": term powers must have n+m entries");
    }
    if (f.pieces.front().x_lo > problem.x_domain.lo(0) + 1e-12 ||
        f.pieces.back().x_hi < problem.x_domain.hi(0) - 1e-12)
      throw ParseError(where + ": pieces do not cover the x-domain");
    check_seams(f, where, problem);
  };
  check_field(problem.g, problem.name + ".g");
  for (int i = 0; i < problem.k; ++i)
    check_field(problem.h[i], problem.name + ".h[" + std::to_string(i) + "]");

  // Hessian symmetry spot check (construction makes it exact).
  Vec x = 0.5 * (problem.x_domain.lo + problem.x_domain.hi);
  Vec y = 0.5 * (problem.y_box.lo + problem.y_box.hi);
  const EvalRecord rec = problem.eval(x, y);
  if ((rec.hess_yy_g - rec.hess_yy_g.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw ParseError(problem.name + ": asymmetric objective Hessian");
  for (int i = 0; i < problem.k; ++i)
    if ((rec.hess_yy_h[i] - rec.hess_yy_h[i].transpose()).cwiseAbs().maxCoeff() > 1e-12)
      throw ParseError(problem.name + ": asymmetric constraint Hessian");

  if (problem.slater_margin) {
    const double rho = *problem.slater_margin;
    if (!(rho > 0)) throw ParseError(problem.name + ": slater_margin must be > 0");
    const int nx = 33;
    for (int s = 0; s < nx; ++s) {
      Vec xs = problem.x_domain.lo +
               (problem.x_domain.hi - problem.x_domain.lo) * (nx == 1 ? 0.0 : double(s) / (nx - 1));
      if (!slater_witness(problem, xs, rho)) {
        std::ostringstream os;
        os << problem.name << ": grid Slater check failed at x1=" << xs(0)
           << " for declared margin " << rho;
        throw ParseError(os.str());
      }
    }
  }
}

std::optional<Vec> slater_witness(const ParametricProblem& problem, const Vec& x,
                                  double rho, int grid_per_axis) {
  Vec y(problem.m), h(problem.k);
  std::vector<int> idx(problem.m, 0);
  const int g = grid_per_axis;
  while (true) {
    for (int j = 0; j < problem.m; ++j)
      y(j) = problem.y_box.lo(j) +
             (problem.y_box.hi(j) - problem.y_box.lo(j)) * idx[j] / (g - 1);
    problem.eval_h_into(x, y, h);
    if (problem.k == 0 || h.maxCoeff() <= -rho) return y;
    int j = 0;
    while (j < problem.m && ++idx[j] == g) idx[j++] = 0;
    if (j == problem.m) return std::nullopt;
  }
}

}  // namespace regdiag
