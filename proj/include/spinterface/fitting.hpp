#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace spinterface {

struct FitOptions {
  int max_evaluations = 100000;
  double simplex_tol = 1e-10;   // relative simplex diameter
  double objective_tol = 1e-12; // objective spread
};

struct FitResult {
  Eigen::VectorXd params;
  double residual_rms = 0.0;
  int iterations = 0;
  bool converged = false;
  Eigen::VectorXd param_uncertainty;  // 1-sigma from finite-difference curvature
  std::vector<std::string> flags;     // diagnostics, e.g. "tau_unidentifiable"

  bool has_flag(const std::string& f) const;
};

/// Deterministic Nelder-Mead simplex minimization. Throws std::runtime_error
/// if the objective returns a non-finite value during the search.
FitResult minimize(const std::function<double(const Eigen::VectorXd&)>& objective,
                   const Eigen::VectorXd& x0, const FitOptions& options = {});

enum class ExponentialKind { decay, recovery };

// decay: A exp(-t/tau) + C, params (A, tau, C)
// recovery: A - B exp(-t/tau), params (A, B, tau)
FitResult fit_exponential(const std::vector<double>& x, const std::vector<double>& y,
                          ExponentialKind kind);

// Sum of k unit-form Lorentzians plus baseline; params per peak are
// (center, fwhm, amplitude), then the baseline last.
FitResult fit_lorentzian_sum(const std::vector<double>& x, const std::vector<double>& y, int k);

// y = a x^b via closed-form log-log linear least squares; params (a, b).
FitResult fit_power_law(const std::vector<double>& x, const std::vector<double>& y);

// y = A cos(2 pi f t + phi) exp(-t/tau) + C, params (A, f, phi, tau, C);
// frequency initialized from a discrete Fourier transform peak.
FitResult fit_damped_cosine(const std::vector<double>& x, const std::vector<double>& y);

struct RidgePoint {
  double b_mt = 0.0;
  double f_ghz = 0.0;
};

// Least-squares fit of (D, E, g) to ODMR ridge points using the full
// eigensolve (field along the zfs axis), not the linear approximation.
FitResult extract_spin_params(const std::vector<RidgePoint>& points, bool fit_e = true);

}  // namespace spinterface
