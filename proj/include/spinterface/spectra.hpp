#pragma once

#include <optional>
#include <utility>
#include <variant>
#include <vector>

#include "spinterface/optical_model.hpp"
#include "spinterface/spectrum.hpp"
#include "spinterface/spin_core.hpp"

namespace spinterface {

/// Orientation handling for cw-ESR: a single molecular orientation relative to
/// the field axis, or a deterministic powder average over n orientations.
struct SingleOrientation {
  Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();  // field direction in the molecular frame
};
struct PowderAverage {
  int n_orient = 2000;
};
using Orientation = std::variant<SingleOrientation, PowderAverage>;

struct ResonanceField {
  double b_mt = 0.0;
  double intensity = 0.0;  // transition intensity x population weight
};

/// ODMR contrast map: sum over transitions of intensity x population weight x
/// lineshape(f - f_transition(B)), field applied along b_axis.
OdmrMap odmr_map(const SpinSystem& sys, const OpticalModel& optical,
                 const Eigen::Vector3d& b_axis, const std::vector<double>& b_grid_mt,
                 const std::vector<double>& f_grid_ghz, const LineShape& line,
                 double temperature_k);

/// Fields in [0, b_max_mt] where some transition matches f_mw, found by
/// bracketing plus bisection on each transition branch (resolution 1e-4 mT).
std::vector<ResonanceField> resonance_fields(const SpinSystem& sys, double f_mw_ghz,
                                             const Eigen::Vector3d& b_axis, double b_max_mt,
                                             double temperature_k);

/// Field-swept cw-ESR spectrum at fixed microwave frequency; derivative
/// presentation comes from the LineShape flag.
Spectrum cw_esr_spectrum(const SpinSystem& sys, double f_mw_ghz,
                         const std::vector<double>& b_grid_mt, const LineShape& line,
                         double temperature_k, const Orientation& orientation);

/// PL spectrum at field B along the zfs axis and its differential against B=0.
/// line.fwhm is interpreted in GHz and converted to nm at the ZPL.
std::pair<Spectrum, Spectrum> zeeman_pl_spectrum(const SpinSystem& sys,
                                                 const OpticalModel& optical, double b_tesla,
                                                 const std::vector<double>& wavelength_grid_nm,
                                                 const LineShape& line);

/// Gaussian excitation profile of the inhomogeneous ensemble, unit peak.
Spectrum ple_profile(const OpticalModel& optical, const std::vector<double>& detuning_grid_ghz);

/// Emission profile versus detuning: the narrow resonant subensemble
/// (homogeneous width) or the full ensemble (inhomogeneous width).
Spectrum fluorescence_profile(const OpticalModel& optical,
                              const std::vector<double>& detuning_grid_ghz,
                              bool resonant_excitation);

/// cos^2 dependence of the PL on the laser polarization angle.
double polarization_response(double theta_deg);

}  // namespace spinterface
