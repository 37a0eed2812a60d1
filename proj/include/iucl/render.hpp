#pragma once

#include <string>

#include "iucl/core.hpp"

namespace iucl {

// SVG with one <rect> per element, in element order, on a viewBox of the
// layout's canvas size. Colors: text blue, logo red, underlay green,
// embellishment orange. Byte-identical for identical layouts.
std::string render_svg(const Layout& layout);

}  // namespace iucl
