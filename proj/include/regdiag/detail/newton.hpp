#pragma once

#include "regdiag/types.hpp"

#include <cmath>

namespace regdiag::detail {

enum class NewtonStatus { Converged, NoConverge, SingularJacobian };

struct NewtonReport {
  NewtonStatus status = NewtonStatus::NoConverge;
  int iterations = 0;
  double residual_norm = kInf;
  double min_sigma_jac = kInf;  // smallest Jacobian sigma_min seen at accepted iterates
};

/// Damped Newton on a square system F(z)=0. `fun(z, F, J)` fills residual and
/// Jacobian. Steps are halved until the residual norm decreases. After the
/// tolerance is met, iteration continues while the residual keeps shrinking,
/// so multiple roots are polished as far as double precision allows.
template <class Fun>
NewtonReport newton_square(const Fun& fun, Vec& z, double tol, int max_iter,
                           int max_halvings, double sing_tol = 1e-12) {
  const int d = static_cast<int>(z.size());
  Vec f(d), f_trial(d), z_trial(d), step(d);
  Mat jac(d, d);
  NewtonReport rep;

  fun(z, f, jac);
  double fnorm = f.norm();
  if (!std::isfinite(fnorm)) return rep;
  bool met_tol = fnorm <= tol;

  for (int it = 0; it < max_iter; ++it) {
    rep.iterations = it;
    if (fnorm == 0.0) break;

    Eigen::JacobiSVD<Mat> svd(jac, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const double smin = svd.singularValues()(d - 1);
    if (smin < sing_tol) {
      if (met_tol) break;  // converged before hitting the singularity
      rep.status = NewtonStatus::SingularJacobian;
      rep.residual_norm = fnorm;
      rep.min_sigma_jac = std::min(rep.min_sigma_jac, smin);
      return rep;
    }
    rep.min_sigma_jac = std::min(rep.min_sigma_jac, smin);

    step = svd.solve(-f);
    double scale = 1.0;
    bool accepted = false;
    for (int h = 0; h <= max_halvings; ++h) {
      z_trial = z + scale * step;
      Mat jac_trial(d, d);
      fun(z_trial, f_trial, jac_trial);
      const double trial_norm = f_trial.norm();
      if (std::isfinite(trial_norm) && trial_norm < fnorm) {
        z = z_trial;
        f = f_trial;
        jac = jac_trial;
        fnorm = trial_norm;
        accepted = true;
        break;
      }
      scale *= 0.5;
    }
    if (!accepted) break;  // stagnated; fnorm is the best we have
    if (fnorm <= tol) met_tol = true;
  }

  rep.residual_norm = fnorm;
  rep.status = met_tol ? NewtonStatus::Converged : NewtonStatus::NoConverge;
  return rep;
}

/// Damped Gauss-Newton for an overdetermined system F(z)=0 (least squares).
/// Returns Converged when the residual inf-norm drops below `tol`.
template <class Fun>
NewtonReport gauss_newton(const Fun& fun, Vec& z, int rows, double tol,
                          int max_iter, int max_halvings) {
  const int d = static_cast<int>(z.size());
  Vec f(rows), f_trial(rows), z_trial(d), step(d);
  Mat jac(rows, d);
  NewtonReport rep;

  fun(z, f, jac);
  double fnorm = f.norm();
  if (!std::isfinite(fnorm)) return rep;

  for (int it = 0; it < max_iter; ++it) {
    rep.iterations = it;
    if (fnorm == 0.0) break;
    Eigen::JacobiSVD<Mat> svd(jac, Eigen::ComputeThinU | Eigen::ComputeThinV);
    step = svd.solve(-f);
    if (!step.allFinite() || step.norm() < 1e-16) break;
    double scale = 1.0;
    bool accepted = false;
    for (int h = 0; h <= max_halvings; ++h) {
      z_trial = z + scale * step;
      Mat jac_trial(rows, d);
      fun(z_trial, f_trial, jac_trial);
      const double trial_norm = f_trial.norm();
      if (std::isfinite(trial_norm) && trial_norm < fnorm) {
        z = z_trial;
        f = f_trial;
        jac = jac_trial;
        fnorm = trial_norm;
        accepted = true;
        break;
      }
      scale *= 0.5;
    }
    if (!accepted) break;
  }

  rep.residual_norm = fnorm;
  Vec f_final(rows);
  Mat jac_final(rows, d);
  fun(z, f_final, jac_final);
  rep.status = (f_final.lpNorm<Eigen::Infinity>() <= tol)
                   ? NewtonStatus::Converged
                   : NewtonStatus::NoConverge;
  return rep;
}

/// SplitMix64: the counter-based generator used for every seeded draw in the
/// library. State advances by the golden-ratio increment; output is mixed.
struct SplitMix64 {
  uint64_t state;
  explicit SplitMix64(uint64_t seed) : state(seed) {}
  uint64_t next() {
    uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }
  /// Uniform double in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
};

}  // namespace regdiag::detail
