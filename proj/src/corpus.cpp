#include "regdiag/problem_io.hpp"

#include <map>

namespace regdiag {

namespace {

// Small builder helpers; powers are (x1..xn, y1..ym).
PolyTerm term(double c, std::initializer_list<int> powers) {
  PolyTerm t;
  t.coeff = c;
  t.powers.assign(powers);
  return t;
}

PiecewisePolyField poly(double x_lo, double x_hi, std::vector<PolyTerm> terms) {
  PiecewisePolyField f;
  PolyPiece p;
  p.x_lo = x_lo;
  p.x_hi = x_hi;
  p.terms = std::move(terms);
  f.pieces.push_back(std::move(p));
  return f;
}

PiecewisePolyField pieces3(double a, double b, double c, double d,
                           std::vector<PolyTerm> t1, std::vector<PolyTerm> t2,
                           std::vector<PolyTerm> t3) {
  PiecewisePolyField f;
  f.pieces.push_back({a, b, std::move(t1)});
  f.pieces.push_back({b, c, std::move(t2)});
  f.pieces.push_back({c, d, std::move(t3)});
  return f;
}

Box box1(double lo, double hi) {
  Box b;
  b.lo = Vec::Constant(1, lo);
  b.hi = Vec::Constant(1, hi);
  return b;
}

Box box2(double lo1, double hi1, double lo2, double hi2) {
  Box b;
  b.lo.resize(2);
  b.hi.resize(2);
  b.lo << lo1, lo2;
  b.hi << hi1, hi2;
  return b;
}

// The C^2 plateau ramp used by the three perturbation problems:
// x^3 below 0, identically 0 on [0,1], (x-1)^3 above 1.

// y - phi(x) on [-0.5, 1.5]; powers are (x, y).
PiecewisePolyField y_minus_phi() {
  return pieces3(-0.5, 0.0, 1.0, 1.5,
                 {term(1, {0, 1}), term(-1, {3, 0})},
                 {term(1, {0, 1})},
                 {term(1, {0, 1}), term(-1, {3, 0}), term(3, {2, 0}),
                  term(-3, {1, 0}), term(1, {0, 0})});
}

// (y - phi(x))^2 on [-0.5, 1.5].
PiecewisePolyField y_minus_phi_squared() {
  return pieces3(
      -0.5, 0.0, 1.0, 1.5,
      {term(1, {0, 2}), term(-2, {3, 1}), term(1, {6, 0})},
      {term(1, {0, 2})},
      {term(1, {0, 2}),
       // -2(x-1)^3 y
       term(-2, {3, 1}), term(6, {2, 1}), term(-6, {1, 1}), term(2, {0, 1}),
       // (x-1)^6
       term(1, {6, 0}), term(-6, {5, 0}), term(15, {4, 0}), term(-20, {3, 0}),
       term(15, {2, 0}), term(-6, {1, 0}), term(1, {0, 0})});
}

// y1^2 + 2 y1 + y2^4 + phi(x)^2 y2^2 on [-0.5, 1.5]; powers (x, y1, y2).
PiecewisePolyField quartic_pinch_objective() {
  std::vector<PolyTerm> base = {term(1, {0, 2, 0}), term(2, {0, 1, 0}),
                                term(1, {0, 0, 4})};
  std::vector<PolyTerm> left = base, mid = base, right = base;
  left.push_back(term(1, {6, 0, 2}));
  // (x-1)^6 y2^2 expanded
  right.push_back(term(1, {6, 0, 2}));
  right.push_back(term(-6, {5, 0, 2}));
  right.push_back(term(15, {4, 0, 2}));
  right.push_back(term(-20, {3, 0, 2}));
  right.push_back(term(15, {2, 0, 2}));
  right.push_back(term(-6, {1, 0, 2}));
  right.push_back(term(1, {0, 0, 2}));
  return pieces3(-0.5, 0.0, 1.0, 1.5, left, mid, right);
}

ParametricProblem make_ce_licq_corner() {
  ParametricProblem p;
  p.name = "ce_licq_corner";
  p.description =
      "Planar box with a moving cut h5 = y1+y2+x; the cut sweeps through the "
      "(0,0) corner, switching the feasible set between a quadrilateral and a "
      "pentagon.";
  p.tags = {"expects=STRAT_CHANGE", "expects=LICQ_FAIL@x=0"};
  p.n = 1;
  p.m = 2;
  p.k = 5;
  p.x_domain = box1(-1, 1);
  p.y_box = box2(-2.6, 0.6, -2.6, 0.6);
  p.g = poly(-1, 1, {term(-1, {0, 1, 0}), term(-1, {0, 0, 1})});
  p.h = {poly(-1, 1, {term(1, {0, 1, 0})}),
         poly(-1, 1, {term(-1, {0, 1, 0}), term(-2, {0, 0, 0})}),
         poly(-1, 1, {term(1, {0, 0, 1})}),
         poly(-1, 1, {term(-1, {0, 0, 1}), term(-2, {0, 0, 0})}),
         poly(-1, 1, {term(1, {0, 1, 0}), term(1, {0, 0, 1}), term(1, {1, 0, 0})})};
  p.slater_margin = 0.5;
  return p;
}

ParametricProblem make_ce_licq_tangent() {
  ParametricProblem p;
  p.name = "ce_licq_tangent";
  p.description =
      "Unit circle against an x-scaled ellipse (polynomial form x^2 y1^2 + "
      "y2^2 <= x^2/2); the boundaries pass from disjoint to transversal "
      "through a tangency, changing the vertex census.";
  p.tags = {"expects=STRAT_CHANGE", "expects=TANGENCY@x=1.4142135"};
  p.n = 1;
  p.m = 2;
  p.k = 2;
  p.x_domain = box1(1, 2);
  p.y_box = box2(-1.3, 1.3, -1.3, 1.3);
  p.g = poly(1, 2, {term(1, {0, 2, 0}), term(1, {0, 0, 2})});
  p.h = {poly(1, 2, {term(1, {0, 2, 0}), term(1, {0, 0, 2}), term(-1, {0, 0, 0})}),
         poly(1, 2, {term(1, {2, 2, 0}), term(1, {0, 0, 2}), term(-0.5, {2, 0, 0})})};
  p.slater_margin = 0.2;
  return p;
}

ParametricProblem make_ce_scsc_disk() {
  ParametricProblem p;
  p.name = "ce_scsc_disk";
  p.description =
      "Strongly convex pull toward (x,0) over the unit disk; the minimizer "
      "migrates from the interior onto the boundary as x grows.";
  p.tags = {"expects=ACTIVATION@x=1"};
  p.n = 1;
  p.m = 2;
  p.k = 1;
  p.x_domain = box1(0, 2);
  p.y_box = box2(-1.3, 1.3, -1.3, 1.3);
  p.g = poly(0, 2, {term(1, {0, 2, 0}), term(-2, {1, 1, 0}), term(1, {2, 0, 0}),
                    term(1, {0, 0, 2})});
  p.h = {poly(0, 2, {term(1, {0, 2, 0}), term(1, {0, 0, 2}), term(-1, {0, 0, 0})})};
  p.slater_margin = 0.5;
  return p;
}

ParametricProblem make_ce_sosc_count() {
  ParametricProblem p;
  p.name = "ce_sosc_count";
  p.description =
      "Box-constrained quartic whose boundary stratum {y1=0} carries one "
      "local minimizer at x=0 and two (at y2=+-5) at x=1.";
  p.tags = {"expects=MIN_COUNT_CHANGE", "expects=PITCHFORK@x=0.1667"};
  p.n = 1;
  p.m = 2;
  p.k = 4;
  p.x_domain = box1(0, 1);
  p.y_box = box2(-1, 3, -7, 7);
  p.g = poly(0, 1, {term(1, {0, 2, 0}), term(2, {0, 1, 0}), term(1, {0, 0, 0}),
                    term(0.1, {1, 0, 4}), term(1, {0, 0, 2}), term(-6, {1, 0, 2})});
  p.h = {poly(0, 1, {term(-1, {0, 1, 0})}),
         poly(0, 1, {term(1, {0, 1, 0}), term(-2, {0, 0, 0})}),
         poly(0, 1, {term(1, {0, 0, 1}), term(-6, {0, 0, 0})}),
         poly(0, 1, {term(-1, {0, 0, 1}), term(-6, {0, 0, 0})})};
  p.slater_margin = 0.5;
  return p;
}

ParametricProblem make_ex_licq_prev() {
  ParametricProblem p;
  p.name = "ex_licq_prev";
  p.description =
      "Interval feasible set whose upper boundaries y<=0 and y<=phi(x) "
      "coincide on the plateau x in [0,1]; constant constraint shifts "
      "separate them except at one x.";
  p.tags = {"expects=LICQ_FAIL_INTERVAL=[0,1]"};
  p.n = 1;
  p.m = 1;
  p.k = 3;
  p.x_domain = box1(-0.5, 1.5);
  p.y_box = box1(-1.4, 0.4);
  p.g = poly(-0.5, 1.5, {term(1, {0, 2}), term(1, {0, 1}), term(0.25, {0, 0})});
  p.h = {poly(-0.5, 1.5, {term(1, {0, 1})}), y_minus_phi(),
         poly(-0.5, 1.5, {term(-1, {0, 1}), term(-1, {0, 0})})};
  p.slater_margin = 0.25;
  return p;
}

ParametricProblem make_ex_scsc_prev() {
  ParametricProblem p;
  p.name = "ex_scsc_prev";
  p.description =
      "Scalar quadratic tracking phi(x) over [-1,0]; the unconstrained "
      "minimizer rides the boundary y=0 across the plateau, so strict "
      "complementarity fails on all of [0,1].";
  p.tags = {"expects=SCSC_FAIL_INTERVAL=[0,1]"};
  p.n = 1;
  p.m = 1;
  p.k = 2;
  p.x_domain = box1(-0.5, 1.5);
  p.y_box = box1(-1.4, 0.4);
  p.g = y_minus_phi_squared();
  p.h = {poly(-0.5, 1.5, {term(1, {0, 1})}),
         poly(-0.5, 1.5, {term(-1, {0, 1}), term(-1, {0, 0})})};
  p.slater_margin = 0.25;
  return p;
}

ParametricProblem make_ex_sosc_prev() {
  ParametricProblem p;
  p.name = "ex_sosc_prev";
  p.description =
      "Quartic valley with curvature 2*phi(x)^2 along the critical cone at "
      "the minimizer (0,0); second-order sufficiency pinches to zero on the "
      "plateau x in [0,1].";
  p.tags = {"expects=SOSC_FAIL_INTERVAL=[0,1]"};
  p.n = 1;
  p.m = 2;
  p.k = 4;
  p.x_domain = box1(-0.5, 1.5);
  p.y_box = box2(-0.6, 1.6, -1.4, 1.4);
  p.g = quartic_pinch_objective();
  p.h = {poly(-0.5, 1.5, {term(-1, {0, 1, 0})}),
         poly(-0.5, 1.5, {term(1, {0, 1, 0}), term(-1, {0, 0, 0})}),
         poly(-0.5, 1.5, {term(1, {0, 0, 1}), term(-1, {0, 0, 0})}),
         poly(-0.5, 1.5, {term(-1, {0, 0, 1}), term(-1, {0, 0, 0})})};
  p.slater_margin = 0.25;
  return p;
}

ParametricProblem make_ex_mult_disc() {
  ParametricProblem p;
  p.name = "ex_mult_disc";
  p.description =
      "max y subject to y<=1 and y<=x; at x=1 both constraints are active "
      "with identical gradients and the multiplier jumps.";
  p.tags = {"expects=LICQ_FAIL@x=1", "expects=MULTIPLIER_JUMP@x=1"};
  p.n = 1;
  p.m = 1;
  p.k = 2;
  p.x_domain = box1(0, 2);
  p.y_box = box1(-2.5, 2.5);
  p.g = poly(0, 2, {term(-1, {0, 1})});
  p.h = {poly(0, 2, {term(1, {0, 1}), term(-1, {0, 0})}),
         poly(0, 2, {term(1, {0, 1}), term(-1, {1, 0})})};
  p.slater_margin = 0.5;
  return p;
}

ParametricProblem make_ex_scsc_kink() {
  ParametricProblem p;
  p.name = "ex_scsc_kink";
  p.description =
      "min y^2 subject to y<=x; the minimizer min(0,x) is continuous but "
      "kinked at x=0, where the active multiplier vanishes.";
  p.tags = {"expects=SCSC_LOSS@x=0"};
  p.n = 1;
  p.m = 1;
  p.k = 1;
  p.x_domain = box1(-1, 1);
  p.y_box = box1(-2.5, 2.5);
  p.g = poly(-1, 1, {term(1, {0, 2})});
  p.h = {poly(-1, 1, {term(1, {0, 1}), term(-1, {1, 0})})};
  p.slater_margin = 0.5;
  return p;
}

ParametricProblem make_ex_scsc_saddle() {
  ParametricProblem p;
  p.name = "ex_scsc_saddle";
  p.description =
      "Indefinite quadratic on a box; the boundary minimizer at (0,0) loses "
      "its multiplier at x=0 and degenerates into a saddle, ending the "
      "branch.";
  p.tags = {"expects=SADDLE_DEGENERATION@x=0"};
  p.n = 1;
  p.m = 2;
  p.k = 4;
  p.x_domain = box1(-1, 1);
  p.y_box = box2(-1.4, 1.4, -0.5, 1.5);
  p.g = poly(-1, 1, {term(0.5, {0, 2, 0}), term(-2, {0, 0, 2}), term(1, {1, 0, 1})});
  p.h = {poly(-1, 1, {term(-1, {0, 1, 0}), term(-1, {0, 0, 0})}),
         poly(-1, 1, {term(1, {0, 1, 0}), term(-1, {0, 0, 0})}),
         poly(-1, 1, {term(-1, {0, 0, 1})}),
         poly(-1, 1, {term(1, {0, 0, 1}), term(-1, {0, 0, 0})})};
  p.slater_margin = 0.25;
  return p;
}

ParametricProblem make_ex_sosc_fold() {
  ParametricProblem p;
  p.name = "ex_sosc_fold";
  p.description =
      "Cubic stratum objective l(y2) = y2^3/3 - x*y2 on {y1=0}; the "
      "minimizer and maximizer branches collide and annihilate at x=0 "
      "(saddle-node).";
  p.tags = {"expects=FOLD@x=0"};
  p.n = 1;
  p.m = 2;
  p.k = 4;
  p.x_domain = box1(-1, 1);
  p.y_box = box2(-0.6, 2.6, -2.0, 2.0);
  p.g = poly(-1, 1, {term(1, {0, 1, 0}), term(0.5, {0, 2, 0}),
                     term(1.0 / 3.0, {0, 0, 3}), term(-1, {1, 0, 1})});
  p.h = {poly(-1, 1, {term(-1, {0, 1, 0})}),
         poly(-1, 1, {term(1, {0, 1, 0}), term(-2, {0, 0, 0})}),
         poly(-1, 1, {term(-1, {0, 0, 1}), term(-1.5, {0, 0, 0})}),
         poly(-1, 1, {term(1, {0, 0, 1}), term(-1.5, {0, 0, 0})})};
  p.slater_margin = 0.5;
  return p;
}

const std::map<std::string, ParametricProblem (*)()>& registry() {
  static const std::map<std::string, ParametricProblem (*)()> reg = {
      {"ce_licq_corner", make_ce_licq_corner},
      {"ce_licq_tangent", make_ce_licq_tangent},
      {"ce_scsc_disk", make_ce_scsc_disk},
      {"ce_sosc_count", make_ce_sosc_count},
      {"ex_licq_prev", make_ex_licq_prev},
      {"ex_scsc_prev", make_ex_scsc_prev},
      {"ex_sosc_prev", make_ex_sosc_prev},
      {"ex_mult_disc", make_ex_mult_disc},
      {"ex_scsc_kink", make_ex_scsc_kink},
      {"ex_scsc_saddle", make_ex_scsc_saddle},
      {"ex_sosc_fold", make_ex_sosc_fold},
  };
  return reg;
}

}  // namespace

std::vector<CorpusEntry> list_corpus() {
  std::vector<CorpusEntry> out;
  for (const auto& [id, make] : registry()) {
    const ParametricProblem p = make();
    out.push_back({p.name, p.description, p.tags});
  }
  return out;
}

bool corpus_has(const std::string& id) { return registry().count(id) > 0; }

ParametricProblem corpus_problem(const std::string& id) {
  auto it = registry().find(id);
  if (it == registry().end()) throw ParseError("unknown corpus id '" + id + "'");
  ParametricProblem p = it->second();
  validate_problem(p);
  return p;
}

}  // namespace regdiag
