#pragma once

#include <Eigen/Dense>

#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace regdiag {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Sorted, 0-based constraint index set. Printed 1-based in all reports.
using IndexSet = std::vector<int>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline const char* version() { return "0.1.0"; }

/// Numerical tolerances shared across the library. All checks read the
/// instance they are handed; `default_tol()` is the mutable process-wide
/// default (CLI overrides mutate it during single-threaded setup).
struct Tol {
  double act = 1e-8;         // activity band |h_i| <= act
  double newton = 1e-10;     // reduced-KKT residual target
  double dedup = 1e-6;       // point dedup distance in (y, lambda)
  double classify = 1e-7;    // classification margin
  double reg = 1e-6;         // regularity verdict margin
  double sing = 1e-9;        // refuse-to-solve singular value
  double event = 1e-6;       // event bracket width in x
  int max_newton = 50;
  int max_halvings = 20;
  double probe_r = 1e-3;     // classification probe radius
  int probe_dirs = 64;
  double step_cap = 0.5;     // max ||y_{t+1}-y_t|| along a branch
  double fold_sigma = 1e-7;  // KKT-matrix sigma_min fold trigger
};

Tol& default_tol();

struct DomainError : std::runtime_error {
  explicit DomainError(const std::string& m) : std::runtime_error(m) {}
};
struct NonFiniteError : std::runtime_error {
  explicit NonFiniteError(const std::string& m) : std::runtime_error(m) {}
};
struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& m) : std::runtime_error(m) {}
};
struct SeamError : std::runtime_error {
  explicit SeamError(const std::string& m) : std::runtime_error(m) {}
};
struct InfeasibleError : std::runtime_error {
  explicit InfeasibleError(const std::string& m) : std::runtime_error(m) {}
};
struct EmptyBandError : std::runtime_error {
  explicit EmptyBandError(const std::string& m) : std::runtime_error(m) {}
};
struct SamplingError : std::runtime_error {
  explicit SamplingError(const std::string& m) : std::runtime_error(m) {}
};
struct ResolutionError : std::runtime_error {
  explicit ResolutionError(const std::string& m) : std::runtime_error(m) {}
};
struct NoStartError : std::runtime_error {
  explicit NoStartError(const std::string& m) : std::runtime_error(m) {}
};

/// Smallest singular value of the row-stacked matrix A. Rows of A are
/// gradient rows; row independence requires rows(A) <= cols(A).
double sigma_min_rows(const Mat& a);

std::string index_set_to_string(const IndexSet& j);  // 1-based, "[1,3]"
int index_set_bitmask(const IndexSet& j);            // bit (i) for 1-based i+... bit i-1

}  // namespace regdiag
