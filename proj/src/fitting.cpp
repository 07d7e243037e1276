#include "spinterface/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "spinterface/spin_core.hpp"

namespace spinterface {

bool FitResult::has_flag(const std::string& f) const {
  return std::find(flags.begin(), flags.end(), f) != flags.end();
}

FitResult minimize(const std::function<double(const Eigen::VectorXd&)>& objective,
                   const Eigen::VectorXd& x0, const FitOptions& options) {
  const int n = static_cast<int>(x0.size());
  int evals = 0;
  auto eval = [&](const Eigen::VectorXd& x) {
    const double f = objective(x);
    ++evals;
    if (!std::isfinite(f)) {
      std::string msg = "minimize: objective returned non-finite value at (";
      for (int i = 0; i < x.size(); ++i)
        msg += std::to_string(x(i)) + (i + 1 < x.size() ? ", " : ")");
      throw std::runtime_error(msg);
    }
    return f;
  };

  // initial simplex: perturb each coordinate by 5% (or a small absolute step)
  std::vector<Eigen::VectorXd> simplex(n + 1, x0);
  std::vector<double> fvals(n + 1);
  for (int i = 0; i < n; ++i) {
    const double step = x0(i) != 0.0 ? 0.05 * std::abs(x0(i)) : 0.00025;
    simplex[i + 1](i) += step;
  }
  for (int i = 0; i <= n; ++i) fvals[i] = eval(simplex[i]);

  const double scale = std::max(1.0, x0.cwiseAbs().maxCoeff());
  int iterations = 0;
  bool converged = false;

  while (evals < options.max_evaluations) {
    ++iterations;
    std::vector<int> order(n + 1);
    for (int i = 0; i <= n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return fvals[a] < fvals[b]; });
    {
      std::vector<Eigen::VectorXd> s2(n + 1);
      std::vector<double> f2(n + 1);
      for (int i = 0; i <= n; ++i) {
        s2[i] = simplex[order[i]];
        f2[i] = fvals[order[i]];
      }
      simplex = std::move(s2);
      fvals = std::move(f2);
    }

    double diameter = 0.0;
    for (int i = 1; i <= n; ++i)
      diameter = std::max(diameter, (simplex[i] - simplex[0]).cwiseAbs().maxCoeff());
    if (diameter < options.simplex_tol * scale ||
        std::abs(fvals[n] - fvals[0]) < options.objective_tol) {
      converged = true;
      break;
    }

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) centroid += simplex[i];
    centroid /= n;

    const Eigen::VectorXd reflected = centroid + (centroid - simplex[n]);
    const double f_ref = eval(reflected);
    if (f_ref < fvals[0]) {
      const Eigen::VectorXd expanded = centroid + 2.0 * (centroid - simplex[n]);
      const double f_exp = eval(expanded);
      if (f_exp < f_ref) {
        simplex[n] = expanded;
        fvals[n] = f_exp;
      } else {
        simplex[n] = reflected;
        fvals[n] = f_ref;
      }
    } else if (f_ref < fvals[n - 1]) {
      simplex[n] = reflected;
      fvals[n] = f_ref;
    } else {
      const Eigen::VectorXd contracted =
          f_ref < fvals[n] ? centroid + 0.5 * (reflected - centroid)
                           : centroid + 0.5 * (simplex[n] - centroid);
      const double f_con = eval(contracted);
      if (f_con < std::min(f_ref, fvals[n])) {
        simplex[n] = contracted;
        fvals[n] = f_con;
      } else {
        for (int i = 1; i <= n; ++i) {
          simplex[i] = simplex[0] + 0.5 * (simplex[i] - simplex[0]);
          fvals[i] = eval(simplex[i]);
        }
      }
    }
  }

  int best = 0;
  for (int i = 1; i <= n; ++i)
    if (fvals[i] < fvals[best]) best = i;

  FitResult result;
  result.params = simplex[best];
  result.residual_rms = fvals[best];
  result.iterations = iterations;
  result.converged = converged;
  result.param_uncertainty = Eigen::VectorXd::Zero(n);
  return result;
}

namespace {

using Model = std::function<double(const Eigen::VectorXd&, double)>;

double sse(const Model& model, const Eigen::VectorXd& p, const std::vector<double>& x,
           const std::vector<double>& y) {
  double s = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    const double r = model(p, x[i]) - y[i];
    s += r * r;
  }
  return s;
}

// 1-sigma uncertainties from the finite-difference Hessian of the SSE at the
// optimum: cov = 2 s^2 H^{-1} with s^2 the residual variance.
void attach_uncertainties(FitResult& result, const Model& model, const std::vector<double>& x,
                          const std::vector<double>& y) {
  const int n = static_cast<int>(result.params.size());
  const int dof = static_cast<int>(x.size()) - n;
  result.residual_rms = std::sqrt(sse(model, result.params, x, y) / x.size());
  result.param_uncertainty = Eigen::VectorXd::Zero(n);
  if (dof <= 0) return;

  const double s2 = sse(model, result.params, x, y) / dof;
  Eigen::MatrixXd hessian(n, n);
  const double f0 = sse(model, result.params, x, y);
  Eigen::VectorXd h(n);
  for (int i = 0; i < n; ++i)
    h(i) = 1e-4 * std::max(1e-8, std::abs(result.params(i)));
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      Eigen::VectorXd pp = result.params, pm = result.params, mp = result.params,
                      mm = result.params;
      pp(i) += h(i); pp(j) += h(j);
      pm(i) += h(i); pm(j) -= h(j);
      mp(i) -= h(i); mp(j) += h(j);
      mm(i) -= h(i); mm(j) -= h(j);
      double v;
      if (i == j) {
        Eigen::VectorXd up = result.params, dn = result.params;
        up(i) += h(i);
        dn(i) -= h(i);
        v = (sse(model, up, x, y) - 2.0 * f0 + sse(model, dn, x, y)) / (h(i) * h(i));
      } else {
        v = (sse(model, pp, x, y) - sse(model, pm, x, y) - sse(model, mp, x, y) +
             sse(model, mm, x, y)) /
            (4.0 * h(i) * h(j));
      }
      hessian(i, j) = v;
      hessian(j, i) = v;
    }
  }
  const Eigen::MatrixXd cov = 2.0 * s2 * hessian.completeOrthogonalDecomposition().pseudoInverse();
  for (int i = 0; i < n; ++i)
    result.param_uncertainty(i) = cov(i, i) > 0.0 ? std::sqrt(cov(i, i)) : 0.0;
}

FitResult fit_model(const Model& model, const Eigen::VectorXd& p0, const std::vector<double>& x,
                    const std::vector<double>& y, const FitOptions& options = {}) {
  auto objective = [&](const Eigen::VectorXd& p) { return sse(model, p, x, y); };
  FitResult result = minimize(objective, p0, options);
  attach_uncertainties(result, model, x, y);
  return result;
}

void check_data(const std::vector<double>& x, const std::vector<double>& y, int n_params) {
  if (x.size() != y.size()) throw std::invalid_argument("fit: x/y length mismatch");
  if (static_cast<int>(x.size()) < n_params + 1)
    throw std::invalid_argument("fit: too few data points");
}

}  // namespace

FitResult fit_exponential(const std::vector<double>& x, const std::vector<double>& y,
                          ExponentialKind kind) {
  check_data(x, y, 3);
  const double span = x.back() - x.front();
  const double y0 = y.front();
  double y_tail = 0.0;
  const size_t tail = std::max<size_t>(1, y.size() / 10);
  for (size_t i = y.size() - tail; i < y.size(); ++i) y_tail += y[i];
  y_tail /= tail;

  Model model;
  Eigen::VectorXd p0(3);
  if (kind == ExponentialKind::decay) {
    model = [](const Eigen::VectorXd& p, double t) {
      return p(0) * std::exp(-t / std::abs(p(1))) + p(2);
    };
    p0 << y0 - y_tail, span / 3.0, y_tail;
  } else {
    model = [](const Eigen::VectorXd& p, double t) {
      return p(0) - p(1) * std::exp(-t / std::abs(p(2)));
    };
    p0 << y_tail, y_tail - y0, span / 3.0;
  }
  FitResult result = fit_model(model, p0, x, y);
  const int tau_index = kind == ExponentialKind::decay ? 1 : 2;
  result.params(tau_index) = std::abs(result.params(tau_index));

  const double amp = std::abs(result.params(kind == ExponentialKind::decay ? 0 : 1));
  const double y_scale = std::max({std::abs(y0), std::abs(y_tail), 1e-300});
  if (amp < 1e-9 * y_scale) {
    result.flags.push_back("tau_unidentifiable");
  } else if (span < 2.0 * result.params(tau_index)) {
    result.converged = false;
    result.flags.push_back("data_does_not_span_2tau");
  }
  return result;
}

FitResult fit_lorentzian_sum(const std::vector<double>& x, const std::vector<double>& y, int k) {
  if (k < 1) throw std::invalid_argument("fit_lorentzian_sum: k must be >= 1");
  check_data(x, y, 3 * k + 1);

  // initial centers from the k largest local maxima
  std::vector<std::pair<double, double>> maxima;  // (value, position)
  for (size_t i = 1; i + 1 < x.size(); ++i)
    if (y[i] > y[i - 1] && y[i] >= y[i + 1]) maxima.emplace_back(y[i], x[i]);
  std::stable_sort(maxima.begin(), maxima.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  if (static_cast<int>(maxima.size()) < k) {
    FitResult result;
    result.params = Eigen::VectorXd::Zero(3 * k + 1);
    result.converged = false;
    result.flags.push_back("fewer_local_maxima_than_peaks");
    return result;
  }

  const double baseline = *std::min_element(y.begin(), y.end());
  const double span = x.back() - x.front();
  Eigen::VectorXd p0(3 * k + 1);
  for (int j = 0; j < k; ++j) {
    p0(3 * j) = maxima[j].second;                 // center
    p0(3 * j + 1) = span / 20.0;                  // fwhm
    p0(3 * j + 2) = maxima[j].first - baseline;   // amplitude
  }
  p0(3 * k) = baseline;

  Model model = [k](const Eigen::VectorXd& p, double v) {
    double out = p(3 * k);
    for (int j = 0; j < k; ++j) {
      const double u = 2.0 * (v - p(3 * j)) / std::abs(p(3 * j + 1));
      out += p(3 * j + 2) / (1.0 + u * u);
    }
    return out;
  };
  FitResult result = fit_model(model, p0, x, y);
  for (int j = 0; j < k; ++j) result.params(3 * j + 1) = std::abs(result.params(3 * j + 1));
  return result;
}

FitResult fit_power_law(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("fit: x/y length mismatch");
  if (x.size() < 2) throw std::domain_error("fit_power_law: underdetermined");
  for (size_t i = 0; i < x.size(); ++i)
    if (!(x[i] > 0.0) || !(y[i] > 0.0))
      throw std::domain_error("fit_power_law: data must be strictly positive");

  const size_t n = x.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < n; ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double denom = n * sxx - sx * sx;
  if (std::abs(denom) < 1e-12 * std::max(1.0, n * sxx))
    throw std::domain_error("fit_power_law: degenerate abscissa");
  const double b = (n * sxy - sx * sy) / denom;
  const double log_a = (sy - b * sx) / n;

  FitResult result;
  result.params = Eigen::VectorXd(2);
  result.params << std::exp(log_a), b;
  result.converged = true;
  result.iterations = 1;

  double ss = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double r = log_a + b * std::log(x[i]) - std::log(y[i]);
    ss += r * r;
  }
  result.residual_rms = std::sqrt(ss / n);
  result.param_uncertainty = Eigen::VectorXd::Zero(2);
  if (n > 2) {
    const double s2 = ss / (n - 2);
    const double var_b = s2 * n / denom;
    const double var_log_a = s2 * sxx / denom;
    result.param_uncertainty << std::exp(log_a) * std::sqrt(var_log_a), std::sqrt(var_b);
  }
  return result;
}

FitResult fit_damped_cosine(const std::vector<double>& x, const std::vector<double>& y) {
  check_data(x, y, 5);
  const size_t n = x.size();
  const double span = x.back() - x.front();
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= n;

  // discrete Fourier scan on the sample grid for the starting frequency
  double best_f = 0.0, best_pow = 0.0;
  const int n_freq = static_cast<int>(n) / 2;
  for (int kf = 1; kf <= n_freq; ++kf) {
    const double f = kf / span;
    double re = 0.0, im = 0.0;
    for (size_t i = 0; i < n; ++i) {
      const double ph = 2.0 * std::numbers::pi * f * (x[i] - x.front());
      re += (y[i] - mean) * std::cos(ph);
      im += (y[i] - mean) * std::sin(ph);
    }
    const double p = re * re + im * im;
    if (p > best_pow) {
      best_pow = p;
      best_f = f;
    }
  }

  double amp0 = 0.0;
  for (size_t i = 0; i < n; ++i) amp0 = std::max(amp0, std::abs(y[i] - mean));

  FitResult result;
  const double y_scale = std::max(std::abs(mean), amp0);
  if (amp0 < 1e-9 * std::max(y_scale, 1e-300)) {
    result.params = Eigen::VectorXd::Zero(5);
    result.params(4) = mean;
    result.converged = true;
    result.flags.push_back("frequency_unidentifiable");
    result.param_uncertainty = Eigen::VectorXd::Zero(5);
    return result;
  }
  if (best_f * span < 2.0) {
    result.params = Eigen::VectorXd::Zero(5);
    result.converged = false;
    result.flags.push_back("fewer_than_two_periods");
    return result;
  }
  // within one scan-grid step of Nyquist: the frequency is not resolvable
  const double dx_min = (x.back() - x.front()) / (n - 1);
  if (best_f >= 0.5 / dx_min - 1.0 / span) {
    result.params = Eigen::VectorXd::Zero(5);
    result.converged = false;
    result.flags.push_back("undersampled");
    return result;
  }

  Model model = [](const Eigen::VectorXd& p, double t) {
    return p(0) * std::cos(2.0 * std::numbers::pi * p(1) * t + p(2)) *
               std::exp(-t / std::abs(p(3))) +
           p(4);
  };
  // try a few phase starts, keep the best
  FitResult best;
  double best_sse = std::numeric_limits<double>::infinity();
  for (double phi0 : {0.0, 0.5 * std::numbers::pi, std::numbers::pi, 1.5 * std::numbers::pi}) {
    Eigen::VectorXd p0(5);
    p0 << amp0, best_f, phi0, 2.0 * span, mean;
    FitResult r = fit_model(model, p0, x, y);
    const double s = sse(model, r.params, x, y);
    if (s < best_sse) {
      best_sse = s;
      best = r;
    }
  }
  best.params(3) = std::abs(best.params(3));
  if (best.params(1) < 0.0) {
    best.params(1) = -best.params(1);
    best.params(2) = -best.params(2);
  }
  return best;
}

FitResult extract_spin_params(const std::vector<RidgePoint>& points, bool fit_e) {
  if (points.size() < 3) throw std::invalid_argument("extract_spin_params: need >= 3 points");
  const double b_first = points.front().b_mt;
  bool all_same = std::all_of(points.begin(), points.end(), [&](const RidgePoint& p) {
    return std::abs(p.b_mt - b_first) < 1e-12;
  });
  if (all_same) throw std::invalid_argument("extract_spin_params: degenerate field geometry");

  auto model_freqs = [](double d, double e, double g, double b_mt) {
    SpinSystem sys;
    sys.zfs_d_ghz = d;
    sys.zfs_e_ghz = e;
    sys.g_factor = g;
    FieldPoint field;
    field.b0_tesla = Eigen::Vector3d(0, 0, b_mt * 1e-3);
    const EigenSystem es = eigensystem(build_hamiltonian(sys, field));
    return es;
  };

  auto objective = [&](const Eigen::VectorXd& p) {
    const double d = p(0), e = fit_e ? p(1) : 0.0, g = p(2);
    if (d < 0.0 || e < 0.0 || e > d / 3.0 || g <= 0.0) {
      double violation = std::max({-d, -e, e - d / 3.0, -g});
      return 1e12 * (1.0 + violation * violation);
    }
    double ss = 0.0;
    for (const RidgePoint& pt : points) {
      const EigenSystem es = model_freqs(d, e, g, pt.b_mt);
      double best = std::numeric_limits<double>::infinity();
      for (int i = 0; i < es.energies_ghz.size(); ++i)
        for (int j = i + 1; j < es.energies_ghz.size(); ++j)
          best = std::min(best,
                          std::abs(es.energies_ghz(j) - es.energies_ghz(i) - pt.f_ghz));
      ss += best * best;
    }
    return ss;
  };

  // D from the lowest-field point, g = 2 as starting guess
  double d0 = points.front().f_ghz;
  double b_min = points.front().b_mt;
  for (const RidgePoint& p : points)
    if (p.b_mt < b_min) {
      b_min = p.b_mt;
      d0 = p.f_ghz;
    }
  Eigen::VectorXd p0(3);
  p0 << d0, 0.0, 2.0;

  FitResult result = minimize(objective, p0, {});
  if (!fit_e) result.params(1) = 0.0;
  result.residual_rms = std::sqrt(objective(result.params) / points.size());

  // curvature-based uncertainties on the chi-square surface
  const int dof = static_cast<int>(points.size()) - (fit_e ? 3 : 2);
  result.param_uncertainty = Eigen::VectorXd::Zero(3);
  if (dof > 0) {
    const double s2 = objective(result.params) / dof;
    Eigen::VectorXd h(3);
    for (int i = 0; i < 3; ++i) h(i) = 1e-4 * std::max(1e-6, std::abs(result.params(i)));
    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(3, 3);
    const double f0 = objective(result.params);
    const std::vector<int> active = fit_e ? std::vector<int>{0, 1, 2} : std::vector<int>{0, 2};
    for (int i : active) {
      Eigen::VectorXd up = result.params, dn = result.params;
      up(i) += h(i);
      dn(i) -= h(i);
      hess(i, i) = (objective(up) - 2.0 * f0 + objective(dn)) / (h(i) * h(i));
      if (hess(i, i) > 0.0)
        result.param_uncertainty(i) = std::sqrt(2.0 * s2 / hess(i, i));
    }
  }
  return result;
}

}  // namespace spinterface
