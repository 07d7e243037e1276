#include "spinterface/svg.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "spinterface/csv.hpp"

namespace spinterface {

namespace {

constexpr int kWidth = 640;
constexpr int kHeight = 420;
constexpr int kMargin = 50;

std::ofstream open_svg(const std::filesystem::path& path, const std::string& title) {
  std::ofstream out(path, std::ios::binary);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"15\">" << title << "</text>\n";
  return out;
}

void axes(std::ofstream& out, const std::string& x_label, double x0, double x1, double y0,
          double y1) {
  out << "<rect x=\"" << kMargin << "\" y=\"" << kMargin << "\" width=\""
      << kWidth - 2 * kMargin << "\" height=\"" << kHeight - 2 * kMargin
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  out << "<text x=\"" << kMargin << "\" y=\"" << kHeight - 10
      << "\" font-family=\"sans-serif\" font-size=\"12\">" << format_double(x0) << "</text>\n";
  out << "<text x=\"" << kWidth - kMargin << "\" y=\"" << kHeight - 10
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\">"
      << format_double(x1) << "</text>\n";
  out << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 10
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << x_label
      << "</text>\n";
  out << "<text x=\"10\" y=\"" << kHeight - kMargin
      << "\" font-family=\"sans-serif\" font-size=\"12\">" << format_double(y0) << "</text>\n";
  out << "<text x=\"10\" y=\"" << kMargin + 12
      << "\" font-family=\"sans-serif\" font-size=\"12\">" << format_double(y1) << "</text>\n";
}

}  // namespace

void write_line_svg(const std::filesystem::path& path, const Spectrum& spectrum,
                    const std::string& title) {
  auto out = open_svg(path, title);
  if (!spectrum.axis.empty()) {
    const double x0 = spectrum.axis.front(), x1 = spectrum.axis.back();
    double y0 = *std::min_element(spectrum.values.begin(), spectrum.values.end());
    double y1 = *std::max_element(spectrum.values.begin(), spectrum.values.end());
    if (y1 == y0) y1 = y0 + 1.0;
    axes(out, spectrum.axis_unit, x0, x1, y0, y1);
    out << "<polyline fill=\"none\" stroke=\"#1f4e9c\" stroke-width=\"1.5\" points=\"";
    for (size_t i = 0; i < spectrum.axis.size(); ++i) {
      const double px =
          kMargin + (spectrum.axis[i] - x0) / (x1 - x0 + 1e-300) * (kWidth - 2 * kMargin);
      const double py = kHeight - kMargin -
                        (spectrum.values[i] - y0) / (y1 - y0) * (kHeight - 2 * kMargin);
      out << format_double(px) << "," << format_double(py) << " ";
    }
    out << "\"/>\n";
  }
  out << "</svg>\n";
}

void write_heatmap_svg(const std::filesystem::path& path, const OdmrMap& map,
                       const std::string& title) {
  auto out = open_svg(path, title);
  const int nb = static_cast<int>(map.field_mt.size());
  const int nf = static_cast<int>(map.freq_ghz.size());
  if (nb > 0 && nf > 0) {
    axes(out, "mT", map.field_mt.front(), map.field_mt.back(), map.freq_ghz.front(),
         map.freq_ghz.back());
    const double vmax = std::max(1e-300, map.contrast.cwiseAbs().maxCoeff());
    const double cw = double(kWidth - 2 * kMargin) / nb;
    const double ch = double(kHeight - 2 * kMargin) / nf;
    for (int i = 0; i < nb; ++i) {
      for (int j = 0; j < nf; ++j) {
        const int shade = 255 - static_cast<int>(std::abs(map.contrast(i, j)) / vmax * 255.0);
        out << "<rect x=\"" << format_double(kMargin + i * cw) << "\" y=\""
            << format_double(kHeight - kMargin - (j + 1) * ch) << "\" width=\""
            << format_double(cw + 0.5) << "\" height=\"" << format_double(ch + 0.5)
            << "\" fill=\"rgb(" << shade << "," << shade << ",255)\"/>\n";
      }
    }
  }
  out << "</svg>\n";
}

}  // namespace spinterface
