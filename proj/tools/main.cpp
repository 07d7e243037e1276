// spinterface command-line front end.
//
// Exit codes: 0 success, 2 configuration/usage error, 3 domain error in the
// physical parameters, 4 sequence parse or validation error.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "spinterface/config.hpp"
#include "spinterface/csv.hpp"
#include "spinterface/dynamics.hpp"
#include "spinterface/fitting.hpp"
#include "spinterface/seqlang.hpp"
#include "spinterface/spectra.hpp"
#include "spinterface/svg.hpp"
#include "spinterface/units.hpp"

namespace fs = std::filesystem;
using namespace spinterface;

namespace {

int thread_budget() {
  if (const char* env = std::getenv("SPINTERFACE_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? static_cast<int>(hw) : 1;
}

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = n > 1 ? a + (b - a) * i / (n - 1) : a;
  return v;
}

Eigen::Vector3d parse_axis(const std::string& s) {
  Eigen::Vector3d v;
  char comma1 = 0, comma2 = 0;
  std::istringstream in(s);
  in >> v.x() >> comma1 >> v.y() >> comma2 >> v.z();
  if (!in || comma1 != ',' || comma2 != ',')
    throw std::runtime_error("expected axis as x,y,z: '" + s + "'");
  if (v.norm() < 1e-12) throw std::invalid_argument("axis must be nonzero");
  return v.normalized();
}

/// Collects outputs and writes the per-run manifest on success.
class Manifest {
 public:
  Manifest(std::string subcommand, fs::path out_dir, const Config* cfg)
      : subcommand_(std::move(subcommand)), out_dir_(std::move(out_dir)), cfg_(cfg) {
    fs::create_directories(out_dir_);
    start_ = std::chrono::steady_clock::now();
  }

  fs::path out(const std::string& name) {
    const fs::path p = out_dir_ / name;
    files_.push_back(p);
    return p;
  }

  void note(const std::string& key, const std::string& value) {
    notes_.emplace_back(key, value);
  }

  void write() const {
    const auto elapsed = std::chrono::duration<double>(
                             std::chrono::steady_clock::now() - start_)
                             .count();
    std::ofstream m(out_dir_ / (subcommand_ + "_manifest.txt"), std::ios::binary);
    m << "subcommand=" << subcommand_ << "\n";
    if (cfg_) {
      const auto& s = cfg_->model.sys;
      m << "spin=" << format_double(s.spin) << "\nd_ghz=" << format_double(s.zfs_d_ghz)
        << "\ne_ghz=" << format_double(s.zfs_e_ghz)
        << "\ng_factor=" << format_double(s.g_factor)
        << "\nzpl_nm=" << format_double(cfg_->model.optical.zpl_wavelength_nm)
        << "\nt_opt_us=" << format_double(cfg_->model.optical.t_opt_us)
        << "\nt1_ms=" << format_double(cfg_->model.t1_ms)
        << "\nt2_ns=" << format_double(cfg_->params.t2_ns)
        << "\nrabi_mhz=" << format_double(cfg_->params.rabi_frequency_mhz)
        << "\nb0_mt=" << format_double(cfg_->b0_mt)
        << "\ntemperature_k=" << format_double(cfg_->temperature_k)
        << "\nseed=" << cfg_->seed << "\n";
    }
    for (const auto& [k, v] : notes_) m << k << "=" << v << "\n";
    for (const auto& f : files_) m << "output=" << f.string() << "\n";
    m << "wall_time_s=" << format_double(elapsed) << "\n";
  }

 private:
  std::string subcommand_;
  fs::path out_dir_;
  const Config* cfg_;
  std::vector<fs::path> files_;
  std::vector<std::pair<std::string, std::string>> notes_;
  std::chrono::steady_clock::time_point start_;
};

int cmd_levels(const Config& cfg, double b_mt, const std::string& axis_str,
               const fs::path& out_dir) {
  Manifest manifest("levels", out_dir, &cfg);
  FieldPoint field;
  const Eigen::Vector3d axis =
      axis_str.empty() ? cfg.model.sys.zfs_axis : parse_axis(axis_str);
  field.b0_tesla = axis * (b_mt * 1e-3);
  field.b1_dir = frame_from_axis(cfg.model.sys.zfs_axis).col(0);

  const auto h = build_hamiltonian(cfg.model.sys, field);
  const auto es = eigensystem(h);
  const auto transitions = transition_table(es, field, cfg.model.sys.spin, cfg.temperature_k);

  std::ofstream out(manifest.out("levels.csv"), std::ios::binary);
  out << "# b_mt=" << format_double(b_mt) << "\n# levels: index,energy_ghz\n";
  for (int i = 0; i < es.energies_ghz.size(); ++i)
    out << i << "," << format_double(es.energies_ghz(i)) << "\n";
  out << "# transitions: lower,upper,frequency_ghz,intensity,population_weight\n";
  for (const auto& t : transitions)
    out << t.lower << "," << t.upper << "," << format_double(t.frequency_ghz) << ","
        << format_double(t.intensity) << "," << format_double(t.population_weight) << "\n";
  out.close();
  manifest.write();
  return 0;
}

int cmd_odmr(const Config& cfg, double b_min, double b_max, int nb, double f_min, double f_max,
             int nf, double fwhm_mhz, bool svg, const fs::path& out_dir) {
  Manifest manifest("odmr", out_dir, &cfg);
  LineShape line{LineShape::Kind::lorentzian, fwhm_mhz * 1e-3, false};
  const auto map = odmr_map(cfg.model.sys, cfg.model.optical, cfg.model.sys.zfs_axis,
                            linspace(b_min, b_max, nb), linspace(f_min, f_max, nf), line,
                            cfg.temperature_k);
  write_odmr_csv(manifest.out("odmr.csv"), map);
  if (svg) write_heatmap_svg(manifest.out("odmr.svg"), map, "ODMR contrast");
  manifest.write();
  return 0;
}

int cmd_esr(const Config& cfg, double f_mw_ghz, double b_min, double b_max, int nb,
            double fwhm_mt, int powder_n, const std::string& axis_str, bool svg,
            const fs::path& out_dir) {
  Manifest manifest("esr", out_dir, &cfg);
  LineShape line{LineShape::Kind::lorentzian, fwhm_mt, true};
  Orientation orientation;
  if (powder_n > 0)
    orientation = PowderAverage{powder_n};
  else
    orientation = SingleOrientation{axis_str.empty() ? Eigen::Vector3d::UnitZ()
                                                     : parse_axis(axis_str)};
  const auto spectrum = cw_esr_spectrum(cfg.model.sys, f_mw_ghz, linspace(b_min, b_max, nb),
                                        line, cfg.temperature_k, orientation);
  write_spectrum_csv(manifest.out("esr.csv"), spectrum);
  if (svg) write_line_svg(manifest.out("esr.svg"), spectrum, "cw-ESR");
  manifest.write();
  return 0;
}

int cmd_zeeman_pl(const Config& cfg, double b_tesla, double span_nm, int n, double fwhm_ghz,
                  bool svg, const fs::path& out_dir) {
  Manifest manifest("zeeman-pl", out_dir, &cfg);
  const double zpl = cfg.model.optical.zpl_wavelength_nm;
  LineShape line{LineShape::Kind::gaussian, fwhm_ghz, false};
  const auto [pl, diff] = zeeman_pl_spectrum(cfg.model.sys, cfg.model.optical, b_tesla,
                                             linspace(zpl - span_nm, zpl + span_nm, n), line);
  write_spectrum_csv(manifest.out("zeeman_pl.csv"), pl);
  write_spectrum_csv(manifest.out("zeeman_pl_diff.csv"), diff);
  if (svg) write_line_svg(manifest.out("zeeman_pl.svg"), diff, "Differential PL");
  manifest.write();
  return 0;
}

int cmd_run(const Config& cfg, const fs::path& seq_path, bool svg, const fs::path& out_dir) {
  Manifest manifest("run", out_dir, &cfg);
  std::ifstream in(seq_path);
  if (!in) throw std::runtime_error("sequence file not found: " + seq_path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();

  const ProtocolContext ctx = cfg.protocol_context();
  seqlang::ValidationContext vctx;
  for (const auto& t : transition_table(cfg.model.sys, ctx.field, cfg.temperature_k))
    vctx.transition_freqs_ghz.push_back(t.frequency_ghz);
  vctx.rabi_frequency_hz = cfg.params.rabi_frequency_mhz * 1e6;
  vctx.max_detuning_ghz = ctx.max_detuning_ghz;

  const auto seq =
      seqlang::validate(seqlang::parse_text(buffer.str(), seq_path.string()), vctx);
  const auto run = execute_sequence(ctx, seq);

  for (size_t s = 0; s < run.sweep_names.size(); ++s) {
    std::ostringstream grid;
    for (size_t i = 0; i < run.sweep_points.size(); ++i)
      grid << (i ? ";" : "") << format_double(run.sweep_points[i][s]);
    manifest.note("sweep." + run.sweep_names[s], grid.str());
  }

  if (run.sweep_names.empty()) {
    // No sweep: the deliverable is the time-resolved PL trace.
    Trace pl = run.results.at(0).pl;
    for (size_t i = 0; i < run.results.at(0).measures.size(); ++i)
      pl.metadata.emplace_back("measure_" + std::to_string(i),
                               format_double(run.results.at(0).measures[i]));
    write_trace_csv(manifest.out("run_pl.csv"), pl, "time_s");
    if (svg) {
      Spectrum s{pl.time, pl.signal, "s", {}};
      write_line_svg(manifest.out("run_pl.svg"), s, "PL trace");
    }
  } else {
    // One row per expanded point: sweep values then integrated measures.
    std::ofstream out(manifest.out("run_measures.csv"), std::ios::binary);
    out << "# columns=";
    for (const auto& name : run.sweep_names) out << name << ",";
    out << "measures...\n";
    for (size_t i = 0; i < run.results.size(); ++i) {
      for (double v : run.sweep_points[i]) out << format_double(v) << ",";
      const auto& m = run.results[i].measures;
      for (size_t j = 0; j < m.size(); ++j) out << (j ? "," : "") << format_double(m[j]);
      out << "\n";
    }
    out.close();
    if (svg && run.sweep_names.size() == 1 && !run.results.empty() &&
        !run.results[0].measures.empty()) {
      Spectrum s;
      s.axis_unit = run.sweep_names[0];
      for (size_t i = 0; i < run.results.size(); ++i) {
        s.axis.push_back(run.sweep_points[i][0]);
        s.values.push_back(run.results[i].measures[0]);
      }
      write_line_svg(manifest.out("run_measures.svg"), s, "Swept measure");
    }
  }
  manifest.write();
  return 0;
}

int cmd_fit(const fs::path& data_path, const std::string& model_tag, int peaks,
            const fs::path& out_dir) {
  Manifest manifest("fit", out_dir, nullptr);
  const auto data = read_xy_csv(data_path);
  if (data.x.empty()) throw std::runtime_error("no data rows in " + data_path.string());

  FitResult result;
  if (model_tag == "exp-decay")
    result = fit_exponential(data.x, data.y, ExponentialKind::decay);
  else if (model_tag == "exp-recovery")
    result = fit_exponential(data.x, data.y, ExponentialKind::recovery);
  else if (model_tag == "lorentzian")
    result = fit_lorentzian_sum(data.x, data.y, peaks);
  else if (model_tag == "power-law")
    result = fit_power_law(data.x, data.y);
  else if (model_tag == "damped-cosine")
    result = fit_damped_cosine(data.x, data.y);
  else
    throw std::runtime_error("unknown model tag '" + model_tag +
                             "' (expected exp-decay, exp-recovery, lorentzian, power-law or "
                             "damped-cosine)");

  std::ostringstream report;
  report << "model=" << model_tag << "\nconverged=" << (result.converged ? 1 : 0)
         << "\niterations=" << result.iterations
         << "\nresidual_rms=" << format_double(result.residual_rms) << "\n";
  for (int i = 0; i < result.params.size(); ++i) {
    report << "param_" << i << "=" << format_double(result.params(i));
    if (i < result.param_uncertainty.size())
      report << " +- " << format_double(result.param_uncertainty(i));
    report << "\n";
  }
  for (const auto& flag : result.flags) report << "flag=" << flag << "\n";

  std::cout << report.str();
  std::ofstream out(manifest.out("fit_report.txt"), std::ios::binary);
  out << report.str();
  out.close();
  manifest.write();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spin-qubit spectra, dynamics and fitting toolkit"};
  app.require_subcommand(1);

  std::string config_path, axis, seq_file, data_file, model_tag = "exp-decay", out_dir = ".";
  double b_mt = 0.0, b_min = 0.0, b_max = 30.0, f_min = 3.0, f_max = 4.3;
  double f_mw_ghz = 9.4, fwhm_mhz = 10.0, fwhm_mt = 1.0, b_tesla = 9.0;
  double span_nm = 3.0, pl_fwhm_ghz = 60.0;
  int nb = 121, nf = 261, n_wl = 1201, powder_n = 0, peaks = 1;
  bool svg = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-o,--output-dir", out_dir, "Directory for CSV/SVG outputs");
  };
  auto add_config = [&](CLI::App* sub) {
    add_common(sub);
    sub->add_option("-c,--config", config_path, "Configuration file")->required();
  };

  auto* levels = app.add_subcommand("levels", "Eigenlevels and transition table at one field");
  add_config(levels);
  levels->add_option("--b0-mt", b_mt, "Static field magnitude in mT");
  levels->add_option("--axis", axis, "Field direction x,y,z (default: the zfs axis)");

  auto* odmr = app.add_subcommand("odmr", "ODMR contrast map over field and frequency");
  add_config(odmr);
  odmr->add_option("--b-min", b_min, "Field sweep start, mT");
  odmr->add_option("--b-max", b_max, "Field sweep end, mT");
  odmr->add_option("--nb", nb, "Field grid points");
  odmr->add_option("--f-min", f_min, "Frequency sweep start, GHz");
  odmr->add_option("--f-max", f_max, "Frequency sweep end, GHz");
  odmr->add_option("--nf", nf, "Frequency grid points");
  odmr->add_option("--fwhm-mhz", fwhm_mhz, "Lorentzian linewidth, MHz");
  odmr->add_flag("--svg", svg, "Also write an SVG plot");

  auto* esr = app.add_subcommand("esr", "Field-swept cw-ESR derivative spectrum");
  add_config(esr);
  esr->add_option("--f-mw-ghz", f_mw_ghz, "Microwave frequency, GHz");
  esr->add_option("--b-min", b_min, "Field sweep start, mT");
  esr->add_option("--b-max", b_max, "Field sweep end, mT")->default_val(600.0);
  esr->add_option("--nb", nb, "Field grid points")->default_val(2401);
  esr->add_option("--fwhm-mt", fwhm_mt, "Linewidth in field units, mT");
  esr->add_option("--powder", powder_n, "Powder-average over N orientations (0: single)");
  esr->add_option("--axis", axis, "Single-orientation field direction x,y,z");
  esr->add_flag("--svg", svg, "Also write an SVG plot");

  auto* zpl = app.add_subcommand("zeeman-pl", "Zeeman-split PL spectrum and differential");
  add_config(zpl);
  zpl->add_option("--b-tesla", b_tesla, "Static field, Tesla");
  zpl->add_option("--span-nm", span_nm, "Half-width of the wavelength grid around the ZPL");
  zpl->add_option("--n", n_wl, "Wavelength grid points");
  zpl->add_option("--fwhm-ghz", pl_fwhm_ghz, "Emission linewidth, GHz");
  zpl->add_flag("--svg", svg, "Also write an SVG plot");

  auto* run = app.add_subcommand("run", "Execute a pulse-sequence file");
  add_config(run);
  run->add_option("sequence", seq_file, "Sequence (.seq) file")->required();
  run->add_flag("--svg", svg, "Also write an SVG plot");

  auto* fit = app.add_subcommand("fit", "Fit a model to a two-column CSV");
  add_common(fit);
  fit->add_option("data", data_file, "Input CSV with x,y rows")->required();
  fit->add_option("-m,--model", model_tag,
                  "exp-decay | exp-recovery | lorentzian | power-law | damped-cosine");
  fit->add_option("--peaks", peaks, "Number of Lorentzian peaks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    Config cfg;
    if (!config_path.empty()) cfg = load_config(config_path);
    (void)thread_budget();  // validated here; used inside execute_sequence

    if (levels->parsed()) return cmd_levels(cfg, b_mt, axis, out_dir);
    if (odmr->parsed())
      return cmd_odmr(cfg, b_min, b_max, nb, f_min, f_max, nf, fwhm_mhz, svg, out_dir);
    if (esr->parsed())
      return cmd_esr(cfg, f_mw_ghz, b_min, b_max, nb, fwhm_mt, powder_n, axis, svg, out_dir);
    if (zpl->parsed())
      return cmd_zeeman_pl(cfg, b_tesla, span_nm, n_wl, pl_fwhm_ghz, svg, out_dir);
    if (run->parsed()) return cmd_run(cfg, seq_file, svg, out_dir);
    if (fit->parsed()) return cmd_fit(data_file, model_tag, peaks, out_dir);
  } catch (const seqlang::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
