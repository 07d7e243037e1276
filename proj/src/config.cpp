#include "spinterface/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace spinterface {

ProtocolContext Config::protocol_context() const {
  ProtocolContext ctx;
  ctx.model = model;
  ctx.params = params;
  ctx.field.b0_tesla = model.sys.zfs_axis * (b0_mt * 1e-3);
  ctx.field.b1_dir = frame_from_axis(model.sys.zfs_axis).col(0);
  ctx.temperature_k = temperature_k;
  return ctx;
}

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config file not found: " + path.string());

  Config cfg;
  std::string section, line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[' && t.back() == ']') {
      section = t.substr(1, t.size() - 2);
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                               ": expected key=value");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    const std::string full = section.empty() ? key : section + "." + key;

    auto num = [&]() {
      try {
        size_t used = 0;
        const double v = std::stod(value, &used);
        if (trim(value.substr(used)).size())
          throw std::invalid_argument("trailing characters");
        return v;
      } catch (const std::exception&) {
        throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                                 ": expected a number for " + full);
      }
    };

    if (full == "spin.spin") cfg.model.sys.spin = num();
    else if (full == "spin.d_ghz") cfg.model.sys.zfs_d_ghz = num();
    else if (full == "spin.e_ghz") cfg.model.sys.zfs_e_ghz = num();
    else if (full == "spin.g_factor") cfg.model.sys.g_factor = num();
    else if (full == "optical.zpl_nm") cfg.model.optical.zpl_wavelength_nm = num();
    else if (full == "optical.t_opt_us") cfg.model.optical.t_opt_us = num();
    else if (full == "optical.inhomogeneous_fwhm_ghz")
      cfg.model.optical.inhomogeneous_fwhm_ghz = num();
    else if (full == "optical.homogeneous_fwhm_ghz")
      cfg.model.optical.homogeneous_fwhm_ghz = num();
    else if (full == "optical.debye_waller") cfg.model.optical.debye_waller = num();
    else if (full == "optical.branching_0") cfg.model.optical.branching[0] = num();
    else if (full == "optical.branching_1") cfg.model.optical.branching[1] = num();
    else if (full == "optical.branching_2") cfg.model.optical.branching[2] = num();
    else if (full == "dynamics.t1_ms") cfg.model.t1_ms = num();
    else if (full == "dynamics.t2_ns") cfg.params.t2_ns = num();
    else if (full == "dynamics.rabi_mhz") cfg.params.rabi_frequency_mhz = num();
    else if (full == "dynamics.pump_rate_hz") cfg.model.pump_rate_hz = num();
    else if (full == "dynamics.bright_index")
      cfg.model.bright_index = static_cast<int>(num());
    else if (full == "dynamics.collection_efficiency")
      cfg.model.collection_efficiency = num();
    else if (full == "run.b0_mt") cfg.b0_mt = num();
    else if (full == "run.temperature_k") cfg.temperature_k = num();
    else if (full == "run.seed") cfg.seed = static_cast<unsigned long long>(num());
    else
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                               ": unknown key '" + full + "'");
  }

  cfg.model.validate();
  cfg.params.validate();
  return cfg;
}

}  // namespace spinterface
