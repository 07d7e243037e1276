#include "spinterface/dynamics.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <atomic>
#include <cmath>
#include <complex>
#include <cstdlib>
#include <mutex>
#include <numbers>
#include <random>
#include <stdexcept>
#include <thread>

#include "spinterface/seqlang.hpp"
#include "spinterface/units.hpp"

namespace spinterface {

using std::complex;
using namespace std::complex_literals;

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

void PumpModel::validate() const {
  sys.validate();
  optical.validate();
  if (pump_rate_hz < 0.0) throw std::invalid_argument("pump rate W must be >= 0");
  if (!(t1_ms > 0.0)) throw std::invalid_argument("T1 must be positive");
  if (bright_index < 0 || bright_index > 2)
    throw std::invalid_argument("bright_index must be in {0, 1, 2}");
}

void CoherentParams::validate() const {
  if (rabi_frequency_mhz < 0.0) throw std::invalid_argument("Rabi frequency must be >= 0");
  if (!(t2_ns > 0.0)) throw std::invalid_argument("T2 must be positive");
}

Eigen::Matrix4d build_rate_matrix(const PumpModel& model) {
  model.validate();
  Eigen::Matrix4d m = Eigen::Matrix4d::Zero();
  const double gamma = 1.0 / (model.optical.t_opt_us * 1e-6);
  const double w_exchange = 1.0 / (3.0 * model.t1_ms * 1e-3);

  // one-way pump bright -> |S| at rate W
  m(3, model.bright_index) += model.pump_rate_hz;

  // |S> decay split by branching
  for (int i = 0; i < 3; ++i) m(i, 3) += model.optical.branching[i] * gamma;

  // symmetric pairwise ground exchange; any deviation decays at exactly 1/T1
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (i != j) m(i, j) += w_exchange;

  // diagonal from the column sums so conservation is exact
  for (int j = 0; j < 4; ++j) m(j, j) = -(m.col(j).sum() - m(j, j));
  return m;
}

namespace {

double shortest_timescale(const Eigen::Matrix4d& m) {
  double max_rate = 0.0;
  for (int j = 0; j < 4; ++j) max_rate = std::max(max_rate, -m(j, j));
  return max_rate > 0.0 ? 1.0 / max_rate : std::numeric_limits<double>::infinity();
}

Eigen::Vector4d rk4_step(const Eigen::Matrix4d& m, const Eigen::Vector4d& p, double dt) {
  const Eigen::Vector4d k1 = m * p;
  const Eigen::Vector4d k2 = m * (p + 0.5 * dt * k1);
  const Eigen::Vector4d k3 = m * (p + 0.5 * dt * k2);
  const Eigen::Vector4d k4 = m * (p + dt * k3);
  return p + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace

PopulationTrace integrate_populations(const Eigen::Matrix4d& rate_matrix,
                                      const PopulationState& p0, double duration_s,
                                      double dt_s) {
  if (!(dt_s > 0.0)) throw std::domain_error("integrate_populations: dt must be positive");
  const double shortest = shortest_timescale(rate_matrix);
  if (dt_s > shortest / 50.0)
    throw std::domain_error("integrate_populations: dt exceeds shortest timescale / 50");

  const int n_steps = std::max(1, static_cast<int>(std::ceil(duration_s / dt_s - 1e-9)));
  const double dt = duration_s / n_steps;

  PopulationTrace trace;
  trace.time_s.reserve(n_steps + 1);
  trace.populations.reserve(n_steps + 1);
  Eigen::Vector4d p(p0.p[0], p0.p[1], p0.p[2], p0.p[3]);
  trace.time_s.push_back(0.0);
  trace.populations.push_back({p(0), p(1), p(2), p(3)});
  for (int i = 1; i <= n_steps; ++i) {
    p = rk4_step(rate_matrix, p, dt);
    trace.time_s.push_back(i * dt);
    trace.populations.push_back({p(0), p(1), p(2), p(3)});
  }
  return trace;
}

PopulationState steady_state(const Eigen::Matrix4d& rate_matrix) {
  const Eigen::JacobiSVD<Eigen::Matrix4d> svd(rate_matrix, Eigen::ComputeFullV);
  const Eigen::Vector4d sv = svd.singularValues();
  const double tol = 1e-12 * std::max(sv(0), 1.0);
  int nullity = 0;
  for (int i = 0; i < 4; ++i)
    if (sv(i) < tol) ++nullity;
  if (nullity != 1)
    throw std::runtime_error("steady_state: rate matrix null space is degenerate");

  Eigen::Vector4d p = svd.matrixV().col(3);
  if (p.sum() < 0.0) p = -p;
  p /= p.sum();
  for (int i = 0; i < 4; ++i)
    if (p(i) < -1e-12) throw std::runtime_error("steady_state: negative population");
  PopulationState out;
  for (int i = 0; i < 4; ++i) out.p[i] = std::max(0.0, p(i));
  return out;
}

// ---------------------------------------------------------------------------
// Two-level Lindblad propagator
// ---------------------------------------------------------------------------

TwoLevelPropagator::TwoLevelPropagator(const CoherentParams& params, double duration_s,
                                       double t1_s, double amplitude,
                                       double detuning_hz_override, bool use_override) {
  params.validate();
  const double f_rabi = params.rabi_frequency_mhz * 1e6 * amplitude;
  const double detuning = use_override ? detuning_hz_override : params.detuning_mhz * 1e6;
  const double t2 = params.t2_ns * 1e-9;
  const double gamma1 = std::isfinite(t1_s) ? 1.0 / t1_s : 0.0;
  // off-diagonal decay must total 1/T2: pure dephasing plus the T1 contribution
  const double gamma_phi = std::max(0.0, 1.0 / t2 - 0.5 * gamma1);

  const complex<double> drive =
      0.5 * f_rabi * std::exp(1i * params.mw_phase_rad);
  Eigen::Matrix2cd h;  // rotating frame, units Hz
  h << 0.5 * detuning, std::conj(drive), drive, -0.5 * detuning;
  h *= kTwoPi;

  const Eigen::Matrix2cd id = Eigen::Matrix2cd::Identity();
  auto kron = [](const Eigen::Matrix2cd& a, const Eigen::Matrix2cd& b) {
    Eigen::Matrix4cd out;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) out.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
    return out;
  };
  // column-major vec: vec(A rho B) = (B^T kron A) vec(rho)
  auto dissipator = [&](const Eigen::Matrix2cd& c, double rate) {
    const Eigen::Matrix2cd cdc = c.adjoint() * c;
    return rate * (kron(c.conjugate(), c) - 0.5 * kron(cdc.transpose(), id) -
                   0.5 * kron(id, cdc));
  };

  Eigen::Matrix2cd sz, sp, sm;
  sz << 1, 0, 0, -1;
  sp << 0, 1, 0, 0;  // |bright><dark|
  sm << 0, 0, 1, 0;
  Eigen::Matrix4cd liouville =
      -1i * (kron(id, h) - kron(h.transpose(), id)) + dissipator(sz, 0.5 * gamma_phi) +
      dissipator(sp, 0.5 * gamma1) + dissipator(sm, 0.5 * gamma1);
  propagator_ = (liouville * duration_s).exp();
}

Eigen::Matrix2cd TwoLevelPropagator::apply(const Eigen::Matrix2cd& rho) const {
  Eigen::Vector4cd v;
  v << rho(0, 0), rho(1, 0), rho(0, 1), rho(1, 1);
  v = propagator_ * v;
  Eigen::Matrix2cd out;
  out << v(0), v(2), v(1), v(3);
  // restore exact Hermiticity lost to rounding
  out = 0.5 * (out + out.adjoint().eval());
  return out;
}

Eigen::Matrix2cd ideal_rotation(double angle_rad, double phase_rad) {
  const double c = std::cos(0.5 * angle_rad);
  const double s = std::sin(0.5 * angle_rad);
  const complex<double> e = std::exp(1i * phase_rad);
  Eigen::Matrix2cd u;
  u << c, -1i * s * std::conj(e), -1i * s * e, c;
  return u;
}

// ---------------------------------------------------------------------------
// Hybrid rate/coherent segment stepper
// ---------------------------------------------------------------------------

namespace {

struct EngineState {
  Eigen::Vector4d p;                      // (p0, p-, p+, pS)
  complex<double> coherence = 0.0;        // addressed-pair off-diagonal
  int dark_index = 1;                     // partner of bright in the addressed pair
  double frame_detuning_hz = 0.0;         // rotating-frame detuning of the last drive
  bool frame_active = false;
};

class SegmentEngine {
 public:
  explicit SegmentEngine(const ProtocolContext& ctx) : ctx_(ctx) {
    ctx_.model.validate();
    ctx_.params.validate();
    const EigenSystem es = eigensystem(build_hamiltonian(ctx_.model.sys, ctx_.field));
    if (es.energies_ghz.size() != 3)
      throw std::invalid_argument("protocol engine requires an S=1 system");
    for (int i = 0; i < 3; ++i) level_energies_ghz_[i] = es.energies_ghz(i);

    rate_on_ = build_rate_matrix(ctx_.model);
    PumpModel dark = ctx_.model;
    dark.pump_rate_hz = 0.0;
    rate_off_ = build_rate_matrix(dark);
    dt_ = shortest_timescale(rate_on_) / ctx_.dt_factor;

    state_.p << 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.0;
    record(0.0);
  }

  SegmentResult run(const std::vector<Segment>& segments) {
    for (const Segment& seg : segments) {
      switch (seg.kind) {
        case Segment::Kind::laser: run_laser(seg); break;
        case Segment::Kind::wait: run_wait(seg.duration_s); break;
        case Segment::Kind::mw: run_mw(seg.mw); break;
        case Segment::Kind::measure: result_.measures.push_back(measure(seg.duration_s)); break;
      }
    }
    return std::move(result_);
  }

  const Eigen::Vector4d& populations() const { return state_.p; }

 private:
  ProtocolContext ctx_;
  Eigen::Matrix4d rate_on_, rate_off_;
  double dt_ = 0.0;
  double level_energies_ghz_[3] = {0, 0, 0};
  EngineState state_;
  double t_now_ = 0.0;
  SegmentResult result_;

  double pl_rate() const {
    return state_.p(3) / (ctx_.model.optical.t_opt_us * 1e-6) *
           ctx_.model.collection_efficiency;
  }

  void record(double t) {
    result_.pl.time.push_back(t);
    result_.pl.signal.push_back(pl_rate());
  }

  void evolve_rate(const Eigen::Matrix4d& base, double duration, double power) {
    if (duration <= 0.0) return;
    Eigen::Matrix4d m = base;
    if (power != 1.0 && &base == &rate_on_) {
      PumpModel scaled = ctx_.model;
      scaled.pump_rate_hz *= power;
      m = build_rate_matrix(scaled);
    }
    const int n_steps = std::max(1, static_cast<int>(std::ceil(duration / dt_ - 1e-9)));
    const double dt = duration / n_steps;
    for (int i = 0; i < n_steps; ++i) {
      state_.p = rk4_step(m, state_.p, dt);
      record(t_now_ + (i + 1) * dt);
    }
    t_now_ += duration;
  }

  void run_laser(const Segment& seg) {
    // optical cycling erases coherences involving the bright sublevel
    state_.coherence = 0.0;
    evolve_rate(rate_on_, seg.duration_s, seg.power);
  }

  void run_wait(double duration) {
    if (duration <= 0.0) return;
    // populations relax under the dark rate matrix; the addressed coherence
    // decays at 1/T2 and precesses at the frame detuning
    const double t2 = ctx_.params.t2_ns * 1e-9;
    state_.coherence *= std::exp(complex<double>(-duration / t2,
                                                 -kTwoPi * state_.frame_detuning_hz * duration));
    evolve_rate(rate_off_, duration, 1.0);
  }

  void run_mw(const MwPulse& pulse) {
    const int bright = ctx_.model.bright_index;
    int dark = state_.dark_index;
    double detuning_hz = ctx_.params.detuning_mhz * 1e6;
    if (pulse.frequency_ghz >= 0.0) {
      // address the nearest bright<->dark transition
      double best = std::numeric_limits<double>::infinity();
      for (int j = 0; j < 3; ++j) {
        if (j == bright) continue;
        const double f_t = std::abs(level_energies_ghz_[j] - level_energies_ghz_[bright]);
        const double d = std::abs(pulse.frequency_ghz - f_t);
        if (d < best) {
          best = d;
          dark = j;
          detuning_hz = (pulse.frequency_ghz - f_t) * 1e9;
        }
      }
      if (best > ctx_.max_detuning_ghz)
        throw std::invalid_argument("microwave pulse addresses no known transition");
    } else if (dark == bright) {
      dark = bright == 0 ? 1 : 0;
    }
    if (dark != state_.dark_index) state_.coherence = 0.0;
    state_.dark_index = dark;
    state_.frame_detuning_hz = detuning_hz;
    state_.frame_active = true;

    Eigen::Matrix2cd rho;
    rho << state_.p(bright), state_.coherence, std::conj(state_.coherence), state_.p(dark);

    if (pulse.ideal) {
      const Eigen::Matrix2cd u = ideal_rotation(pulse.angle_rad, pulse.phase_rad);
      rho = u * rho * u.adjoint();
    } else {
      CoherentParams p = ctx_.params;
      p.mw_phase_rad = pulse.phase_rad;
      const TwoLevelPropagator prop(p, pulse.duration_s, ctx_.model.t1_ms * 1e-3,
                                    pulse.amplitude, detuning_hz, true);
      rho = prop.apply(rho);
      t_now_ += pulse.duration_s;
      record(t_now_);
    }
    state_.p(bright) = rho(0, 0).real();
    state_.p(dark) = rho(1, 1).real();
    state_.coherence = rho(0, 1);
  }

  // retrospective: integrate PL over the trailing `window` of the timeline
  double measure(double window) const {
    const auto& t = result_.pl.time;
    const auto& s = result_.pl.signal;
    const double t_start = t_now_ - window;
    double integral = 0.0;
    for (size_t i = 1; i < t.size(); ++i) {
      const double a = std::max(t[i - 1], t_start);
      const double b = t[i];
      if (b <= t_start) continue;
      // trapezoid, linearly interpolated at the window edge
      const double dt_seg = t[i] - t[i - 1];
      double sa = s[i - 1];
      if (a > t[i - 1] && dt_seg > 0.0)
        sa = s[i - 1] + (s[i] - s[i - 1]) * (a - t[i - 1]) / dt_seg;
      integral += 0.5 * (sa + s[i]) * (b - a);
    }
    return integral;
  }
};

}  // namespace

SegmentResult run_segments(const ProtocolContext& ctx, const std::vector<Segment>& segments) {
  if (segments.empty()) return {};
  SegmentEngine engine(ctx);
  return engine.run(segments);
}

// ---------------------------------------------------------------------------
// Named protocols
// ---------------------------------------------------------------------------

HoleBurningResult simulate_hole_burning(const PumpModel& model, double pulse_duration_ms) {
  ProtocolContext ctx;
  ctx.model = model;

  SegmentEngine engine(ctx);
  std::vector<Segment> segments(1);
  segments[0].kind = Segment::Kind::laser;
  segments[0].duration_s = pulse_duration_ms * 1e-3;
  SegmentResult run = engine.run(segments);

  HoleBurningResult out;
  out.pl_trace = std::move(run.pl);
  double peak = 0.0;
  for (double v : out.pl_trace.signal) peak = std::max(peak, v);
  if (peak <= 0.0) {
    out.contrast = 0.0;
    out.contrast_defined = false;
  } else {
    out.contrast = (peak - out.pl_trace.signal.back()) / peak;
  }
  const Eigen::Vector4d& p = engine.populations();
  const double ground = p(0) + p(1) + p(2);
  if (ground > 0.0) {
    const double gmax = std::max({p(0), p(1), p(2)});
    const double gmin = std::min({p(0), p(1), p(2)});
    out.polarization = (gmax - gmin) / ground;
  }
  out.pl_trace.metadata.emplace_back("pulse_duration_ms", std::to_string(pulse_duration_ms));
  return out;
}

namespace {

std::vector<Segment> readout_tail(double readout_s) {
  Segment laser;
  laser.kind = Segment::Kind::laser;
  laser.duration_s = readout_s;
  Segment meas;
  meas.kind = Segment::Kind::measure;
  meas.duration_s = readout_s;
  return {laser, meas};
}

}  // namespace

Trace simulate_t1_recovery(const ProtocolContext& ctx, double init_duration_us,
                           double readout_duration_us, const std::vector<double>& wait_times_s) {
  Trace trace;
  for (double tau : wait_times_s) {
    Segment init;
    init.kind = Segment::Kind::laser;
    init.duration_s = init_duration_us * 1e-6;
    Segment wait;
    wait.kind = Segment::Kind::wait;
    wait.duration_s = tau;
    std::vector<Segment> segments{init, wait};
    for (const Segment& s : readout_tail(readout_duration_us * 1e-6)) segments.push_back(s);
    const SegmentResult res = run_segments(ctx, segments);
    trace.time.push_back(tau);
    trace.signal.push_back(res.measures.at(0));
  }
  trace.metadata.emplace_back("protocol", "t1_recovery");
  return trace;
}

Trace simulate_rabi(const ProtocolContext& ctx, const std::vector<double>& durations_s) {
  Trace trace;
  for (double t : durations_s) {
    Segment init;
    init.kind = Segment::Kind::laser;
    init.duration_s = 300e-6;
    Segment wait;
    wait.kind = Segment::Kind::wait;
    wait.duration_s = 10e-6;
    Segment mw;
    mw.kind = Segment::Kind::mw;
    mw.mw.duration_s = t;
    std::vector<Segment> segments{init, wait, mw};
    for (const Segment& s : readout_tail(20e-6)) segments.push_back(s);
    const SegmentResult res = run_segments(ctx, segments);
    trace.time.push_back(t);
    trace.signal.push_back(res.measures.at(0));
  }
  trace.metadata.emplace_back("protocol", "rabi");
  return trace;
}

Trace simulate_hahn_echo(const ProtocolContext& ctx, const std::vector<double>& tau_values_s) {
  Trace trace;
  for (double tau : tau_values_s) {
    Segment init;
    init.kind = Segment::Kind::laser;
    init.duration_s = 300e-6;
    Segment wait;
    wait.kind = Segment::Kind::wait;
    wait.duration_s = 10e-6;
    auto pulse = [](double angle) {
      Segment s;
      s.kind = Segment::Kind::mw;
      s.mw.ideal = true;
      s.mw.angle_rad = angle;
      return s;
    };
    Segment free_arm;
    free_arm.kind = Segment::Kind::wait;
    free_arm.duration_s = tau;
    std::vector<Segment> segments{init,          wait,     pulse(std::numbers::pi / 2),
                                  free_arm,      pulse(std::numbers::pi),
                                  free_arm,      pulse(std::numbers::pi / 2)};
    for (const Segment& s : readout_tail(20e-6)) segments.push_back(s);
    const SegmentResult res = run_segments(ctx, segments);
    trace.time.push_back(tau);
    trace.signal.push_back(res.measures.at(0));
  }
  trace.metadata.emplace_back("protocol", "hahn_echo");
  return trace;
}

Spectrum simulate_pulsed_odmr(const ProtocolContext& ctx, const std::vector<double>& f_grid_ghz,
                              double pi_duration_s) {
  auto run_at = [&](double f_ghz, double amplitude) {
    Segment init;
    init.kind = Segment::Kind::laser;
    init.duration_s = 300e-6;
    Segment wait;
    wait.kind = Segment::Kind::wait;
    wait.duration_s = 3.0 * ctx.model.optical.t_opt_us * 1e-6;
    Segment mw;
    mw.kind = Segment::Kind::mw;
    mw.mw.duration_s = pi_duration_s;
    mw.mw.frequency_ghz = f_ghz;
    mw.mw.amplitude = amplitude;
    std::vector<Segment> segments{init, wait, mw};
    for (const Segment& s : readout_tail(20e-6)) segments.push_back(s);
    return run_segments(ctx, segments).measures.at(0);
  };

  // undriven baseline for the contrast reference
  const double baseline = run_at(f_grid_ghz.front(), 0.0);

  Spectrum spec;
  spec.axis = f_grid_ghz;
  spec.axis_unit = "GHz";
  for (double f : f_grid_ghz) spec.values.push_back(run_at(f, 1.0) - baseline);
  spec.metadata.emplace_back("protocol", "pulsed_odmr");
  spec.metadata.emplace_back("baseline", std::to_string(baseline));
  return spec;
}

// ---------------------------------------------------------------------------
// DSL execution
// ---------------------------------------------------------------------------

namespace {

std::vector<Segment> to_segments(const seqlang::PulseSequence& concrete) {
  std::vector<Segment> segments;
  for (const auto& stmt : concrete.statements) {
    if (const auto* laser = std::get_if<seqlang::LaserStmt>(&stmt)) {
      Segment s;
      s.kind = Segment::Kind::laser;
      s.duration_s = laser->duration.value->si();
      s.power = laser->power.value->si();
      segments.push_back(s);
    } else if (const auto* wait = std::get_if<seqlang::WaitStmt>(&stmt)) {
      Segment s;
      s.kind = Segment::Kind::wait;
      s.duration_s = wait->duration.value->si();
      segments.push_back(s);
    } else if (const auto* mw = std::get_if<seqlang::MwStmt>(&stmt)) {
      Segment s;
      s.kind = Segment::Kind::mw;
      if (mw->angle != seqlang::MwAngle::none) {
        s.mw.ideal = true;
        s.mw.angle_rad =
            mw->angle == seqlang::MwAngle::pi ? std::numbers::pi : 0.5 * std::numbers::pi;
      } else {
        s.mw.duration_s = mw->duration.value->si();
      }
      if (mw->frequency) s.mw.frequency_ghz = mw->frequency->value->si() * 1e-9;
      s.mw.amplitude = mw->amplitude.value->si();
      s.mw.phase_rad = mw->phase.value->si();
      segments.push_back(s);
    } else if (const auto* meas = std::get_if<seqlang::MeasureStmt>(&stmt)) {
      Segment s;
      s.kind = Segment::Kind::measure;
      s.duration_s = meas->window.value->si();
      segments.push_back(s);
    } else {
      throw std::logic_error("execute_sequence: unexpanded sweep statement");
    }
  }
  return segments;
}

}  // namespace

SequenceRun execute_sequence(const ProtocolContext& ctx, const seqlang::PulseSequence& seq) {
  if (!seq.validated)
    throw std::invalid_argument("execute_sequence: sequence must be validated first");
  seqlang::Expansion expansion = seqlang::expand(seq);

  SequenceRun run;
  run.sweep_names = expansion.sweep_names;
  run.sweep_points = std::move(expansion.sweep_values_si);
  const size_t n = expansion.sequences.size();
  run.results.resize(n);

  int threads = 1;
  if (const char* env = std::getenv("SPINTERFACE_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) threads = v;
  } else if (const unsigned hw = std::thread::hardware_concurrency()) {
    threads = static_cast<int>(hw);
  }
  threads = std::min<int>(threads, static_cast<int>(n));

  if (threads <= 1) {
    for (size_t i = 0; i < n; ++i)
      run.results[i] = run_segments(ctx, to_segments(expansion.sequences[i]));
    return run;
  }

  // Results are indexed by sweep point, so output order is independent of the
  // thread count.
  std::atomic<size_t> next{0};
  std::vector<std::thread> pool;
  std::mutex error_mutex;
  std::exception_ptr error;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
        try {
          run.results[i] = run_segments(ctx, to_segments(expansion.sequences[i]));
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
  return run;
}

void add_gaussian_noise(Trace& trace, double sigma, unsigned long long seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, sigma);
  for (double& v : trace.signal) v += dist(rng);
}

}  // namespace spinterface
