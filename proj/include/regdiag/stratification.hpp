#pragma once

#include "regdiag/problem.hpp"

#include <map>

namespace regdiag {

struct VertexRecord {
  Vec y;
  IndexSet active;     // |J| = m
  bool feasible = false;
  bool degenerate = false;  // rank-deficient intersection Jacobian
};

/// Solves h_J(x,y) = 0 for every J with |J| = m from grid seeds (direct for
/// affine constraints); feasibility and Jacobian nondegeneracy are flagged.
std::vector<VertexRecord> enumerate_vertices(const ParametricProblem& problem,
                                             const Vec& x,
                                             const Tol& tol = default_tol());

struct StratSignature {
  int vertex_count = 0;   // feasible nondegenerate |J| = m intersections
  int arc_count = 0;      // components of the codimension-1 strata
  int face_count = 0;     // components of the interior stratum
  int degenerate_vertices = 0;  // reported separately, excluded from counts
  std::map<IndexSet, int> per_pattern;
};

/// Numeric stratification census of the feasible set at x. m = 2 uses a
/// flood fill over a grid on the (5%-inflated) feasible bounding box with a
/// resolution-scaled activity band; m = 1 splits the feasible intervals.
StratSignature strat_signature(const ParametricProblem& problem, const Vec& x,
                               int grid_res = 401, const Tol& tol = default_tol());

struct SignatureComparison {
  bool equal = true;
  std::string first_difference;  // empty when equal
};

/// Structural equality of the per-dimension counts; the per-pattern map is
/// reported in `first_difference` diagnostics but does not affect equality.
SignatureComparison signature_equal(const StratSignature& s1,
                                    const StratSignature& s2);

struct ScreenResult {
  bool obstructed = false;
  double witness_x1 = 0.0, witness_x2 = 0.0;
  std::string detail;
};

/// Compares signatures across the given x samples; OBSTRUCTED with the first
/// witness pair certifies that every-x LICQ cannot hold.
ScreenResult rigidity_screen(const ParametricProblem& problem,
                             const std::vector<double>& x_samples,
                             int grid_res = 401, const Tol& tol = default_tol());

/// Axis-aligned bounding box of the feasible set at x (coarse grid scan),
/// inflated by the given fraction. Throws ResolutionError when no feasible
/// point is found.
Box feasible_bbox(const ParametricProblem& problem, const Vec& x,
                  int coarse_res = 101, double inflate = 0.05);

}  // namespace regdiag
