#pragma once

#include <filesystem>
#include <string>

#include "spinterface/dynamics.hpp"
#include "spinterface/spectrum.hpp"

namespace spinterface {

// Shortest round-trip decimal representation; deterministic across runs.
std::string format_double(double v);

// CSV dialect: comma separator, '.' decimal, '#'-prefixed metadata header.
void write_spectrum_csv(const std::filesystem::path& path, const Spectrum& spectrum);
void write_trace_csv(const std::filesystem::path& path, const Trace& trace,
                     const std::string& x_name = "time_s");
void write_odmr_csv(const std::filesystem::path& path, const OdmrMap& map);

struct CsvData {
  std::vector<double> x;
  std::vector<double> y;
  Metadata metadata;
};
CsvData read_xy_csv(const std::filesystem::path& path);

}  // namespace spinterface
