#pragma once

#include "regdiag/regularity.hpp"

#include <map>

namespace regdiag {

enum class EventKind { ACTIVATION, SCSC_LOSS, FOLD, LICQ_DEGENERACY, DOMAIN_BOUNDARY };
enum class Termination { PATH_END, FOLD, SADDLE_DEGENERATION, LICQ_DEGENERACY, NO_CONVERGE };

struct Event {
  EventKind kind;
  int index = -1;  // constraint index for ACTIVATION / SCSC_LOSS
  double x_star = 0.0;
  double bracket_width = 0.0;
  RegularityReport diagnostics;
};

struct BranchSample {
  double x = 0.0;
  KKTPoint point;
  RegularityReport report;
};

struct Branch {
  std::vector<BranchSample> samples;  // monotone in x along the path
  std::vector<Event> events;
  Termination termination = Termination::PATH_END;
  double termination_x = 0.0;
};

struct TraceOptions {
  /// Initial step = |x_end - x_start| / initial_step_div, doubled after 3
  /// clean corrector solves, halved on failure.
  int initial_step_div = 200;
  bool require_minimizer = true;   // start must classify STRICT_LOCAL_MIN
  std::vector<double> sample_xs;   // x values the stepper must land on
  int max_samples = 200000;
};

/// Predictor-corrector continuation of a local-minimizer branch along the
/// segment [x_start, x_end] (n = 1). Active-set changes and terminations are
/// localized by bisection to the event tolerance.
Branch trace_branch(const ParametricProblem& problem, double x_start, double x_end,
                    const KKTPoint& start, const TraceOptions& opts = {},
                    const Tol& tol = default_tol());

/// Compressed (x-interval, J) history of a branch.
struct ActiveSetSpan {
  double x_from, x_to;
  IndexSet active;
};
std::vector<ActiveSetSpan> active_set_history(const Branch& branch);

/// STRICT_LOCAL_MIN census grouped by the geometric active pattern at act tol.
std::map<IndexSet, int> count_minimizers_per_stratum(const ParametricProblem& problem,
                                                     const Vec& x,
                                                     int seeds_per_axis = 7,
                                                     const Tol& tol = default_tol());

struct CountScreenResult {
  bool obstructed = false;
  double witness_x1 = 0.0, witness_x2 = 0.0;
  std::string detail;
};

/// Compares per-stratum minimizer counts across x samples (contrapositive of
/// the stratum-count rigidity property).
CountScreenResult minimizer_count_screen(const ParametricProblem& problem,
                                         const std::vector<double>& x_samples,
                                         int seeds_per_axis = 7,
                                         const Tol& tol = default_tol());

struct SoscProfile {
  std::vector<std::pair<double, double>> samples;  // (x, sosc_modulus)
  double infimum = kInf;
  bool uniform = true;  // infimum > reg tolerance
};
SoscProfile uniform_sosc_profile(const Branch& branch, const Tol& tol = default_tol());

struct GrowthEstimate {
  double c_hat = kInf;
  Vec witness_y;
  int feasible_samples = 0;
};

/// Empirical quadratic-growth constant: min over feasible points in the
/// delta-ball of (g(y) - g(y*)) / ||y - y*||^2, by rejection sampling.
GrowthEstimate quadratic_growth_estimate(const ParametricProblem& problem,
                                         const KKTPoint& kkt, double delta,
                                         int n_samples, uint64_t seed = 0x9e3779b9ull,
                                         const Tol& tol = default_tol());

const char* to_string(EventKind kind);
const char* to_string(Termination termination);

}  // namespace regdiag
