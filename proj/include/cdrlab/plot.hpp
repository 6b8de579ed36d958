#pragma once

#include <string>
#include <string_view>

namespace cdrlab {

/// Static SVG for any CSV this library writes, chosen by its column header:
/// sweep curve with marked minima, eye heatmap, stacked track traces,
/// crossing histogram or oracle distribution. Throws ConfigError otherwise.
std::string render_svg(std::string_view csv_text);

}  // namespace cdrlab
