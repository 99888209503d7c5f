#pragma once

#include <string>
#include <vector>

#include "bifinfer/io.hpp"

namespace bifinfer::cli {

/// Static figure of a parsed diagram: one panel per state, u_i against p.
/// Solid strokes where det > 0, dashed where det < 0, a circle wherever det
/// changes sign along a branch and a vertical line per target.
std::string render_svg(const io::CsvDiagram& d, const std::vector<double>& targets);

/// Number of det sign changes the renderer marks.
int count_markers(const io::CsvDiagram& d);

}  // namespace bifinfer::cli
