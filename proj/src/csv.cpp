#include "spinterface/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace spinterface {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  return out;
}

void write_metadata(std::ofstream& out, const Metadata& metadata) {
  for (const auto& [key, value] : metadata) out << "# " << key << "=" << value << "\n";
}

}  // namespace

void write_spectrum_csv(const std::filesystem::path& path, const Spectrum& spectrum) {
  auto out = open_out(path);
  write_metadata(out, spectrum.metadata);
  out << "# axis_unit=" << spectrum.axis_unit << "\n";
  for (size_t i = 0; i < spectrum.axis.size(); ++i)
    out << format_double(spectrum.axis[i]) << "," << format_double(spectrum.values[i]) << "\n";
}

void write_trace_csv(const std::filesystem::path& path, const Trace& trace,
                     const std::string& x_name) {
  auto out = open_out(path);
  write_metadata(out, trace.metadata);
  out << "# columns=" << x_name << ",signal\n";
  for (size_t i = 0; i < trace.time.size(); ++i)
    out << format_double(trace.time[i]) << "," << format_double(trace.signal[i]) << "\n";
}

void write_odmr_csv(const std::filesystem::path& path, const OdmrMap& map) {
  auto out = open_out(path);
  write_metadata(out, map.metadata);
  out << "# first row: frequency axis (GHz); first column: field axis (mT)\n";
  out << "";
  for (double f : map.freq_ghz) out << "," << format_double(f);
  out << "\n";
  for (size_t i = 0; i < map.field_mt.size(); ++i) {
    out << format_double(map.field_mt[i]);
    for (int j = 0; j < map.contrast.cols(); ++j)
      out << "," << format_double(map.contrast(static_cast<int>(i), j));
    out << "\n";
  }
}

CsvData read_xy_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
  CsvData data;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq != std::string::npos) {
        std::string key = line.substr(1, eq - 1);
        key.erase(0, key.find_first_not_of(' '));
        key.erase(key.find_last_not_of(' ') + 1);
        data.metadata.emplace_back(key, line.substr(eq + 1));
      }
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos) continue;
    data.x.push_back(std::stod(line.substr(0, comma)));
    data.y.push_back(std::stod(line.substr(comma + 1)));
  }
  return data;
}

}  // namespace spinterface
