#pragma once

#include <Eigen/Dense>
#include <array>
#include <complex>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "spinterface/optical_model.hpp"
#include "spinterface/spectrum.hpp"
#include "spinterface/spin_core.hpp"

namespace spinterface {

namespace seqlang {
struct PulseSequence;
}

/// Optical pumping model over the four levels {|0>, |->, |+>, |S>}.
/// Ground sublevels are indexed in ascending energy order of the eigensystem.
struct PumpModel {
  SpinSystem sys;
  OpticalModel optical;
  double pump_rate_hz = 0.0;  // resonant excitation rate W of the bright sublevel
  int bright_index = 0;       // ground sublevel addressed by the laser
  double t1_ms = 0.22;        // ground-state spin-lattice relaxation
  double collection_efficiency = 1.0;

  void validate() const;
};

struct PopulationState {
  std::array<double, 4> p = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.0};  // (p0, p-, p+, pS)
};

/// Two-level coherent drive parameters for the addressed microwave transition.
struct CoherentParams {
  double rabi_frequency_mhz = 12.5;
  double detuning_mhz = 0.0;
  double t2_ns = 640.0;
  double mw_phase_rad = 0.0;

  void validate() const;
};

struct Trace {
  std::vector<double> time;    // seconds, or the swept quantity
  std::vector<double> signal;  // PL rate or population, arbitrary units
  Metadata metadata;
};

/// Population trace with one column per level.
struct PopulationTrace {
  std::vector<double> time_s;
  std::vector<std::array<double, 4>> populations;
};

// Population-conserving 4x4 rate matrix in 1/s: pump W on bright -> |S>,
// |S> decay at 1/t_opt split by branching, pairwise ground exchange at 1/(3 T1).
Eigen::Matrix4d build_rate_matrix(const PumpModel& model);

// Fixed-step RK4; throws std::domain_error if dt exceeds (shortest timescale)/50.
PopulationTrace integrate_populations(const Eigen::Matrix4d& rate_matrix,
                                      const PopulationState& p0, double duration_s, double dt_s);

// Null-space steady state with sum(p) = 1; throws if the null space is degenerate.
PopulationState steady_state(const Eigen::Matrix4d& rate_matrix);

struct HoleBurningResult {
  Trace pl_trace;
  double contrast = 0.0;      // (peak PL - final PL) / peak PL
  double polarization = 0.0;  // max ground-population imbalance at pulse end
  bool contrast_defined = true;
};

HoleBurningResult simulate_hole_burning(const PumpModel& model, double pulse_duration_ms);

/// Exact two-level Lindblad propagator for the addressed transition: Rabi drive
/// in the rotating frame with dephasing at 1/T2 and relaxation at 1/T1.
class TwoLevelPropagator {
 public:
  TwoLevelPropagator(const CoherentParams& params, double duration_s,
                     double t1_s = std::numeric_limits<double>::infinity(),
                     double amplitude = 1.0, double detuning_hz_override = 0.0,
                     bool use_override = false);

  // rho = [[p_bright, coherence], [conj, p_dark]]
  Eigen::Matrix2cd apply(const Eigen::Matrix2cd& rho) const;

 private:
  Eigen::Matrix4cd propagator_;
};

// Ideal instantaneous rotation by `angle` about the axis set by the drive phase.
Eigen::Matrix2cd ideal_rotation(double angle_rad, double phase_rad);

/// Experiment timeline segment for the hybrid rate/coherent stepper.
struct MwPulse {
  bool ideal = false;       // angle-form pulse: instantaneous rotation
  double angle_rad = 0.0;   // used when ideal
  double duration_s = 0.0;  // used when not ideal
  double frequency_ghz = -1.0;  // < 0: resonant drive with params.detuning applied
  double amplitude = 1.0;       // scales the calibrated Rabi frequency
  double phase_rad = 0.0;
};

struct Segment {
  enum class Kind { laser, wait, mw, measure } kind = Kind::wait;
  double duration_s = 0.0;  // laser/wait length or measure window
  double power = 1.0;       // relative laser power
  MwPulse mw;
};

/// Shared immutable inputs for one protocol execution.
struct ProtocolContext {
  PumpModel model;
  CoherentParams params;
  FieldPoint field;             // static field; b1 used for transition intensities
  double temperature_k = 5.0;
  double dt_factor = 100.0;     // RK4 step = shortest timescale / dt_factor
  double max_detuning_ghz = 2.0;  // beyond this, a drive addresses no transition
};

struct SegmentResult {
  Trace pl;                      // time-resolved PL over the whole timeline
  std::vector<double> measures;  // integrated PL per measure statement
};

// Execute a concrete segment timeline from the thermal ground state.
SegmentResult run_segments(const ProtocolContext& ctx, const std::vector<Segment>& segments);

// T1 recovery protocol: init pulse, variable wait, readout pulse; returns the
// integrated readout PL versus wait time.
Trace simulate_t1_recovery(const ProtocolContext& ctx, double init_duration_us,
                           double readout_duration_us, const std::vector<double>& wait_times_s);

// Rabi protocol: init, wait, variable-length drive, optical readout.
Trace simulate_rabi(const ProtocolContext& ctx, const std::vector<double>& durations_s);

// Hahn echo pi/2 - tau - pi - tau - pi/2 with ideal pulses; axis is tau.
Trace simulate_hahn_echo(const ProtocolContext& ctx, const std::vector<double>& tau_values_s);

// Pulsed ODMR: pi pulse of fixed duration swept in frequency; values are the
// PL contrast relative to the undriven baseline.
Spectrum simulate_pulsed_odmr(const ProtocolContext& ctx, const std::vector<double>& f_grid_ghz,
                              double pi_duration_s);

struct SequenceRun {
  std::vector<std::string> sweep_names;
  std::vector<std::vector<double>> sweep_points;  // one entry per expanded sequence
  std::vector<SegmentResult> results;
};

// Run a validated DSL sequence; swept sequences produce one result per point.
SequenceRun execute_sequence(const ProtocolContext& ctx, const seqlang::PulseSequence& seq);

// Seeded Gaussian noise injection for fit-robustness tests.
void add_gaussian_noise(Trace& trace, double sigma, unsigned long long seed);

}  // namespace spinterface
