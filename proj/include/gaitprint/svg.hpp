#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "gaitprint/cma.hpp"
#include "gaitprint/identify.hpp"

namespace gaitprint {

/// "#rrggbb" on a viridis-like ramp, t clamped to [0, 1].
std::string viridis(double t);

struct SvgOptions {
    std::string title;
    std::string provenance;  // written as an XML comment when non-empty
    bool annotate = false;   // print estimates inside cells
};

/// One panel per lag; significant cells colored by estimate, others grey.
void write_fingerprint_svg(std::ostream& out, const Fingerprint& fp, const GridSpec& grid, const SvgOptions& opt = {});

/// Accuracy against averaging window (log x axis), one line per k.
void write_sensitivity_svg(std::ostream& out, const std::vector<SensitivityRow>& rows, const SvgOptions& opt = {});

} // namespace gaitprint
