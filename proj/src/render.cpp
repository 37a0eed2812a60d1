#include "iucl/render.hpp"

#include <cstdio>

namespace iucl {

namespace {

const char* color_of(Category c) {
  switch (c) {
    case Category::Text: return "blue";
    case Category::Logo: return "red";
    case Category::Underlay: return "green";
    case Category::Embellishment: return "orange";
    case Category::None: break;
  }
  return "gray";
}

// Fixed-point formatting keeps the output locale-independent and stable.
std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

}  // namespace

std::string render_svg(const Layout& layout) {
  const double W = layout.canvas_w, H = layout.canvas_h;
  std::string out = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(layout.canvas_w) +
         "\" height=\"" + std::to_string(layout.canvas_h) + "\" viewBox=\"0 0 " +
         std::to_string(layout.canvas_w) + " " + std::to_string(layout.canvas_h) + "\">\n";
  for (const Element& e : layout.elements) {
    out += "  <rect x=\"" + num(e.box.left() * W) + "\" y=\"" + num(e.box.top() * H) + "\" width=\"" +
           num(e.box.w * W) + "\" height=\"" + num(e.box.h * H) + "\" fill=\"" + color_of(e.category) +
           "\" fill-opacity=\"0.4\" stroke=\"" + color_of(e.category) + "\" data-category=\"" +
           std::string(category_name(e.category)) + "\"/>\n";
  }
  out += "</svg>\n";
  return out;
}

}  // namespace iucl
