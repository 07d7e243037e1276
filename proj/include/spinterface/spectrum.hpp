#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace spinterface {

using Metadata = std::vector<std::pair<std::string, std::string>>;

/// Unit-peak spectral line, optionally presented as its first derivative
/// (cw-ESR convention). fwhm is in the units of the spectrum axis.
struct LineShape {
  enum class Kind { lorentzian, gaussian };
  Kind kind = Kind::lorentzian;
  double fwhm = 1.0;
  bool derivative = false;

  double operator()(double x) const {
    const double g = fwhm;
    if (kind == Kind::lorentzian) {
      const double u = 2.0 * x / g;
      const double d = 1.0 + u * u;
      if (!derivative) return 1.0 / d;
      return -8.0 * x / (g * g) / (d * d);
    }
    const double a = 4.0 * std::log(2.0) / (g * g);
    const double v = std::exp(-a * x * x);
    if (!derivative) return v;
    return -2.0 * a * x * v;
  }
};

/// Sampled 1D spectrum. axis_unit tags the x axis ("GHz", "mT" or "nm").
struct Spectrum {
  std::vector<double> axis;
  std::vector<double> values;
  std::string axis_unit;
  Metadata metadata;
};

/// 2D ODMR contrast map over (field, microwave frequency).
struct OdmrMap {
  std::vector<double> field_mt;
  std::vector<double> freq_ghz;
  Eigen::MatrixXd contrast;  // rows: field, cols: frequency
  Metadata metadata;
};

}  // namespace spinterface
