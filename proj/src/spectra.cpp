#include "spinterface/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "spinterface/units.hpp"

namespace spinterface {

namespace {

Eigen::Vector3d perpendicular_to(const Eigen::Vector3d& axis) {
  return frame_from_axis(axis.normalized()).col(0);
}

std::vector<Transition> transitions_at(const SpinSystem& sys, const Eigen::Vector3d& b_axis,
                                       double b_mt, double temperature_k) {
  FieldPoint field;
  field.b0_tesla = b_axis.normalized() * (b_mt * 1e-3);
  field.b1_dir = perpendicular_to(b_axis);
  return transition_table(sys, field, temperature_k);
}

std::vector<Eigen::Vector3d> fibonacci_sphere(int n) {
  std::vector<Eigen::Vector3d> dirs;
  dirs.reserve(n);
  const double golden_angle = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - 2.0 * (i + 0.5) / n;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden_angle * i;
    dirs.emplace_back(r * std::cos(phi), r * std::sin(phi), z);
  }
  return dirs;
}

}  // namespace

OdmrMap odmr_map(const SpinSystem& sys, const OpticalModel& optical,
                 const Eigen::Vector3d& b_axis, const std::vector<double>& b_grid_mt,
                 const std::vector<double>& f_grid_ghz, const LineShape& line,
                 double temperature_k) {
  if (b_grid_mt.empty() || f_grid_ghz.empty())
    throw std::domain_error("odmr_map: empty grid");
  optical.validate();

  OdmrMap map;
  map.field_mt = b_grid_mt;
  map.freq_ghz = f_grid_ghz;
  map.contrast = Eigen::MatrixXd::Zero(static_cast<int>(b_grid_mt.size()),
                                       static_cast<int>(f_grid_ghz.size()));
  for (int ib = 0; ib < static_cast<int>(b_grid_mt.size()); ++ib) {
    const auto table = transitions_at(sys, b_axis, b_grid_mt[ib], temperature_k);
    for (int jf = 0; jf < static_cast<int>(f_grid_ghz.size()); ++jf) {
      double v = 0.0;
      for (const Transition& t : table)
        v += t.intensity * t.population_weight * line(f_grid_ghz[jf] - t.frequency_ghz);
      map.contrast(ib, jf) = v;
    }
  }
  return map;
}

std::vector<ResonanceField> resonance_fields(const SpinSystem& sys, double f_mw_ghz,
                                             const Eigen::Vector3d& b_axis, double b_max_mt,
                                             double temperature_k) {
  if (!(f_mw_ghz > 0.0)) throw std::domain_error("resonance_fields: f_mw must be positive");

  const int n_sample = 512;
  const int n_pairs = sys.dimension() * (sys.dimension() - 1) / 2;

  // Sample all branch frequencies on a coarse grid, then bisect sign changes.
  std::vector<std::vector<double>> freq(n_pairs, std::vector<double>(n_sample + 1));
  std::vector<double> bs(n_sample + 1);
  for (int i = 0; i <= n_sample; ++i) {
    bs[i] = b_max_mt * i / n_sample;
    const auto table = transitions_at(sys, b_axis, bs[i], temperature_k);
    for (int k = 0; k < n_pairs; ++k) freq[k][i] = table[k].frequency_ghz;
  }

  auto branch_freq = [&](int k, double b) {
    return transitions_at(sys, b_axis, b, temperature_k)[k].frequency_ghz;
  };

  std::vector<ResonanceField> out;
  for (int k = 0; k < n_pairs; ++k) {
    for (int i = 0; i < n_sample; ++i) {
      const double fa = freq[k][i] - f_mw_ghz;
      const double fb = freq[k][i + 1] - f_mw_ghz;
      if (fa == 0.0 && i > 0) continue;
      if (fa * fb > 0.0) continue;
      double lo = bs[i], hi = bs[i + 1], flo = fa;
      while (hi - lo > 1e-4) {
        const double mid = 0.5 * (lo + hi);
        const double fm = branch_freq(k, mid) - f_mw_ghz;
        if (flo * fm <= 0.0) {
          hi = mid;
        } else {
          lo = mid;
          flo = fm;
        }
      }
      const double b_res = 0.5 * (lo + hi);
      const auto table = transitions_at(sys, b_axis, b_res, temperature_k);
      out.push_back({b_res, table[k].intensity * table[k].population_weight});
    }
  }
  std::sort(out.begin(), out.end(),
            [](const ResonanceField& a, const ResonanceField& b) { return a.b_mt < b.b_mt; });
  return out;
}

Spectrum cw_esr_spectrum(const SpinSystem& sys, double f_mw_ghz,
                         const std::vector<double>& b_grid_mt, const LineShape& line,
                         double temperature_k, const Orientation& orientation) {
  if (b_grid_mt.empty()) throw std::domain_error("cw_esr_spectrum: empty field grid");

  std::vector<Eigen::Vector3d> axes;
  if (const auto* single = std::get_if<SingleOrientation>(&orientation)) {
    axes.push_back(single->axis.normalized());
  } else {
    const auto& powder = std::get<PowderAverage>(orientation);
    if (powder.n_orient < 1) throw std::domain_error("cw_esr_spectrum: n_orient must be >= 1");
    axes = fibonacci_sphere(powder.n_orient);
  }

  Spectrum spec;
  spec.axis = b_grid_mt;
  spec.axis_unit = "mT";
  spec.values.assign(b_grid_mt.size(), 0.0);
  const double b_max = b_grid_mt.back();

  for (const auto& axis : axes) {
    const auto resonances = resonance_fields(sys, f_mw_ghz, axis, b_max, temperature_k);
    for (const auto& res : resonances)
      for (size_t i = 0; i < b_grid_mt.size(); ++i)
        spec.values[i] += res.intensity * line(b_grid_mt[i] - res.b_mt);
  }
  const double norm = 1.0 / static_cast<double>(axes.size());
  for (double& v : spec.values) v *= norm;

  spec.metadata.emplace_back("f_mw_ghz", std::to_string(f_mw_ghz));
  return spec;
}

std::pair<Spectrum, Spectrum> zeeman_pl_spectrum(const SpinSystem& sys,
                                                 const OpticalModel& optical, double b_tesla,
                                                 const std::vector<double>& wavelength_grid_nm,
                                                 const LineShape& line) {
  if (b_tesla < 0.0) throw std::domain_error("zeeman_pl_spectrum: B must be >= 0");
  optical.validate();
  const double nu_zpl = constants::speed_of_light_nm_ghz / optical.zpl_wavelength_nm;
  const double fwhm_nm = line.fwhm * optical.zpl_wavelength_nm * optical.zpl_wavelength_nm /
                         constants::speed_of_light_nm_ghz;
  LineShape wl_line = line;
  wl_line.fwhm = fwhm_nm;

  auto emission = [&](double b) {
    FieldPoint field;
    field.b0_tesla = sys.zfs_axis * b;
    const EigenSystem es = eigensystem(build_hamiltonian(sys, field));
    Spectrum spec;
    spec.axis = wavelength_grid_nm;
    spec.axis_unit = "nm";
    spec.values.assign(wavelength_grid_nm.size(), 0.0);
    bool outside = false;
    const int n = static_cast<int>(es.energies_ghz.size());
    for (int i = 0; i < n; ++i) {
      // emission into sublevel i carries photon frequency nu_zpl - E_i;
      // per-sublevel branching is only defined for the S=1 three-level case
      const double lam = constants::speed_of_light_nm_ghz / (nu_zpl - es.energies_ghz(i));
      if (lam < wavelength_grid_nm.front() || lam > wavelength_grid_nm.back()) outside = true;
      const double branch = n == 3 ? optical.branching[static_cast<size_t>(i)] : 1.0 / n;
      const double w = branch * optical.debye_waller;
      for (size_t j = 0; j < wavelength_grid_nm.size(); ++j)
        spec.values[j] += w * wl_line(wavelength_grid_nm[j] - lam);
    }
    if (outside) spec.metadata.emplace_back("warning", "emission_line_outside_grid");
    return spec;
  };

  Spectrum at_b = emission(b_tesla);
  const Spectrum at_zero = emission(0.0);
  Spectrum diff = at_b;
  for (size_t j = 0; j < diff.values.size(); ++j) diff.values[j] -= at_zero.values[j];
  at_b.metadata.emplace_back("b_tesla", std::to_string(b_tesla));
  diff.metadata.emplace_back("differential_vs", "B=0");
  return {at_b, diff};
}

Spectrum ple_profile(const OpticalModel& optical, const std::vector<double>& detuning_grid_ghz) {
  if (detuning_grid_ghz.empty()) throw std::domain_error("ple_profile: empty grid");
  optical.validate();
  LineShape line{LineShape::Kind::gaussian, optical.inhomogeneous_fwhm_ghz, false};
  Spectrum spec;
  spec.axis = detuning_grid_ghz;
  spec.axis_unit = "GHz";
  spec.values.reserve(detuning_grid_ghz.size());
  for (double d : detuning_grid_ghz) spec.values.push_back(line(d));
  return spec;
}

Spectrum fluorescence_profile(const OpticalModel& optical,
                              const std::vector<double>& detuning_grid_ghz,
                              bool resonant_excitation) {
  optical.validate();
  // Resonant excitation selects a subensemble of homogeneous width; off-resonant
  // excitation shows the full inhomogeneous (Gaussian) ensemble.
  LineShape line = resonant_excitation
                       ? LineShape{LineShape::Kind::lorentzian, optical.homogeneous_fwhm_ghz, false}
                       : LineShape{LineShape::Kind::gaussian, optical.inhomogeneous_fwhm_ghz, false};
  Spectrum spec;
  spec.axis = detuning_grid_ghz;
  spec.axis_unit = "GHz";
  spec.values.reserve(detuning_grid_ghz.size());
  for (double d : detuning_grid_ghz) spec.values.push_back(line(d));
  return spec;
}

double polarization_response(double theta_deg) {
  const double c = std::cos(theta_deg * std::numbers::pi / 180.0);
  return c * c;
}

void OpticalModel::validate() const {
  double sum = 0.0;
  for (double b : branching) {
    if (b < 0.0) throw std::invalid_argument("branching entries must be >= 0");
    sum += b;
  }
  if (std::abs(sum - 1.0) > 1e-12) throw std::invalid_argument("branching must sum to 1");
  if (!(debye_waller > 0.0) || debye_waller > 1.0)
    throw std::invalid_argument("debye_waller must be in (0, 1]");
  if (homogeneous_fwhm_ghz > inhomogeneous_fwhm_ghz)
    throw std::invalid_argument("homogeneous_fwhm must not exceed inhomogeneous_fwhm");
  if (!(t_opt_us > 0.0)) throw std::invalid_argument("t_opt must be positive");
}

}  // namespace spinterface
