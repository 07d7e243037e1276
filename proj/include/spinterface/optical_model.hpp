#pragma once

#include <Eigen/Dense>
#include <array>

namespace spinterface {

/// Optical interface of the qubit: ZPL, excited-state lifetime, linewidths
/// and decay branching into the three ground sublevels.
struct OpticalModel {
  double zpl_wavelength_nm = 1025.0;
  double t_opt_us = 3.3;                  // excited-state lifetime
  double inhomogeneous_fwhm_ghz = 150.0;  // ensemble ZPL width
  double homogeneous_fwhm_ghz = 1.0;      // subensemble width
  std::array<double, 3> branching = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  double debye_waller = 0.5;              // fraction emitted into the ZPL
  Eigen::Vector3d dipole_axis = Eigen::Vector3d::UnitZ();

  // Throws std::invalid_argument on violated invariants.
  void validate() const;
};

}  // namespace spinterface
