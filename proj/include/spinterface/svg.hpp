#pragma once

#include <filesystem>
#include <string>

#include "spinterface/spectrum.hpp"

namespace spinterface {

// Minimal self-contained static plots; CSV remains the data contract.
void write_line_svg(const std::filesystem::path& path, const Spectrum& spectrum,
                    const std::string& title);
void write_heatmap_svg(const std::filesystem::path& path, const OdmrMap& map,
                       const std::string& title);

}  // namespace spinterface
