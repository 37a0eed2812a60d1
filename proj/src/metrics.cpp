#include "iucl/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace iucl {

Grid downsample(const Grid& g, std::size_t out_h, std::size_t out_w) {
  if (out_h == 0 || out_w == 0 || g.h == 0 || g.w == 0) throw ShapeError("downsample: empty grid");
  Grid out(out_h, out_w);
  std::vector<double> count(out_h * out_w, 0.0);
  for (std::size_t y = 0; y < g.h; ++y) {
    const std::size_t oy = std::min(out_h - 1, (y * out_h * 2 + out_h) / (g.h * 2));
    for (std::size_t x = 0; x < g.w; ++x) {
      const std::size_t ox = std::min(out_w - 1, (x * out_w * 2 + out_w) / (g.w * 2));
      out.at(oy, ox) += g.at(y, x);
      count[oy * out_w + ox] += 1.0;
    }
  }
  for (std::size_t i = 0; i < out.values.size(); ++i)
    if (count[i] > 0.0) out.values[i] /= count[i];
  return out;
}

bool pixel_in_box(const BBox& b, std::size_t x, std::size_t y, std::size_t w, std::size_t h) {
  const double px = (static_cast<double>(x) + 0.5) / static_cast<double>(w);
  const double py = (static_cast<double>(y) + 0.5) / static_cast<double>(h);
  return px >= b.left() && px <= b.right() && py >= b.top() && py <= b.bottom();
}

double r_ove(const Layout& layout) {
  std::vector<const BBox*> boxes;
  for (const Element& e : layout.elements)
    if (e.category != Category::Underlay) boxes.push_back(&e.box);
  if (boxes.size() < 2) return 0.0;
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < boxes.size(); ++i)
    for (std::size_t j = i + 1; j < boxes.size(); ++j, ++pairs) total += iou(*boxes[i], *boxes[j]);
  return total / static_cast<double>(pairs);
}

std::optional<double> r_und(const Layout& layout) {
  double total = 0.0;
  std::size_t underlays = 0;
  for (const Element& u : layout.elements) {
    if (u.category != Category::Underlay) continue;
    ++underlays;
    double best = 0.0;
    for (const Element& e : layout.elements) {
      if (e.category == Category::Underlay || e.box.area() <= 0.0) continue;
      best = std::max(best, intersection_area(u.box, e.box) / e.box.area());
    }
    total += best;
  }
  if (underlays == 0) return std::nullopt;
  return total / static_cast<double>(underlays);
}

double r_ali(const Layout& layout) {
  const auto& els = layout.elements;
  if (els.size() < 2) return 0.0;
  auto axes = [](const BBox& b) {
    return std::array<double, 6>{b.left(), b.cx, b.right(), b.top(), b.cy, b.bottom()};
  };
  double total = 0.0;
  for (std::size_t i = 0; i < els.size(); ++i) {
    const auto a = axes(els[i].box);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < els.size(); ++j) {
      if (i == j) continue;
      const auto b = axes(els[j].box);
      for (std::size_t k = 0; k < 6; ++k) best = std::min(best, std::abs(a[k] - b[k]));
    }
    total += best;
  }
  return total / static_cast<double>(els.size());
}

double r_occ(std::span<const Layout> layouts) {
  if (layouts.empty()) throw EmptySetError("r_occ over an empty set of layouts");
  const auto nonempty = std::count_if(layouts.begin(), layouts.end(),
                                      [](const Layout& l) { return !l.empty(); });
  return static_cast<double>(nonempty) / static_cast<double>(layouts.size());
}

double r_lac(std::span<const Layout> layouts, AttributeKind attr) {
  if (attr == AttributeKind::Unspecified)
    throw UnspecifiedAttributeError("r_lac needs a specified attribute");
  if (layouts.empty()) throw EmptySetError("r_lac over an empty set of layouts");
  const auto ok = std::count_if(layouts.begin(), layouts.end(),
                                [attr](const Layout& l) { return satisfies(l, attr); });
  return static_cast<double>(ok) / static_cast<double>(layouts.size());
}

double r_plc(std::span<const Tensor> pred_flats, std::span<const PartialLayout> pls) {
  if (pred_flats.size() != pls.size()) throw ShapeError("r_plc: predictions and constraints differ in count");
  double total = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < pls.size(); ++k) {
    const Tensor& p = pred_flats[k];
    const PartialLayout& pl = pls[k];
    if (!p.same_shape(pl.values()))
      throw ShapeError("r_plc: prediction " + shape_string(p.shape()) + " vs constraint " +
                       shape_string(pl.values().shape()));
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (!pl.present(i)) continue;
      total += std::abs(p[i] - pl.values()[i]);
      ++n;
    }
  }
  return n == 0 ? 0.0 : total / static_cast<double>(n);
}

namespace {

double sobel_magnitude(const Grid& g, std::size_t x, std::size_t y) {
  auto px = [&](long xx, long yy) {
    xx = std::clamp(xx, 0L, static_cast<long>(g.w) - 1);
    yy = std::clamp(yy, 0L, static_cast<long>(g.h) - 1);
    return g.at(static_cast<std::size_t>(yy), static_cast<std::size_t>(xx));
  };
  const long X = static_cast<long>(x), Y = static_cast<long>(y);
  // Differences first, so a constant neighborhood gives exactly zero.
  const double gx = ((px(X + 1, Y - 1) - px(X - 1, Y - 1)) + 2 * (px(X + 1, Y) - px(X - 1, Y)) +
                     (px(X + 1, Y + 1) - px(X - 1, Y + 1))) / 8.0;
  const double gy = ((px(X - 1, Y + 1) - px(X - 1, Y - 1)) + 2 * (px(X, Y + 1) - px(X, Y - 1)) +
                     (px(X + 1, Y + 1) - px(X + 1, Y - 1))) / 8.0;
  return std::sqrt(gx * gx + gy * gy);
}

// Pixel range whose centers can fall inside the box.
struct PixelRange {
  std::size_t x0, x1, y0, y1;  // half-open
};

PixelRange candidate_pixels(const BBox& b, std::size_t w, std::size_t h) {
  auto lo = [](double edge, std::size_t n) {
    const double v = std::floor(edge * static_cast<double>(n) - 0.5);
    return static_cast<std::size_t>(std::clamp(v, 0.0, static_cast<double>(n)));
  };
  auto hi = [](double edge, std::size_t n) {
    const double v = std::ceil(edge * static_cast<double>(n) + 0.5);
    return static_cast<std::size_t>(std::clamp(v, 0.0, static_cast<double>(n)));
  };
  return {lo(b.left(), w), hi(b.right(), w), lo(b.top(), h), hi(b.bottom(), h)};
}

}  // namespace

double r_com(const Layout& layout, const Grid& gray) {
  if (gray.h < 3 || gray.w < 3) throw GridTooSmallError("r_com needs a grid of at least 3x3");
  double total = 0.0;
  std::size_t texts = 0;
  for (const Element& e : layout.elements) {
    if (e.category != Category::Text) continue;
    ++texts;
    const PixelRange r = candidate_pixels(e.box, gray.w, gray.h);
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t y = r.y0; y < r.y1; ++y)
      for (std::size_t x = r.x0; x < r.x1; ++x)
        if (pixel_in_box(e.box, x, y, gray.w, gray.h)) {
          sum += sobel_magnitude(gray, x, y);
          ++n;
        }
    if (n == 0) {  // box thinner than a pixel: use the pixel under its center
      const auto cx = std::min(gray.w - 1, static_cast<std::size_t>(e.box.cx * static_cast<double>(gray.w)));
      const auto cy = std::min(gray.h - 1, static_cast<std::size_t>(e.box.cy * static_cast<double>(gray.h)));
      sum = sobel_magnitude(gray, cx, cy);
      n = 1;
    }
    total += sum / static_cast<double>(n);
  }
  return texts == 0 ? 0.0 : total / static_cast<double>(texts);
}

double r_shm(const Layout& layout, const Grid& saliency) {
  if (layout.empty() || saliency.values.empty()) return 0.0;
  std::vector<char> covered(saliency.values.size(), 0);
  for (const Element& e : layout.elements) {
    const PixelRange r = candidate_pixels(e.box, saliency.w, saliency.h);
    for (std::size_t y = r.y0; y < r.y1; ++y)
      for (std::size_t x = r.x0; x < r.x1; ++x)
        if (pixel_in_box(e.box, x, y, saliency.w, saliency.h)) covered[y * saliency.w + x] = 1;
  }
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < covered.size(); ++i)
    if (covered[i]) {
      sum += saliency.values[i];
      ++n;
    }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

double r_sub(const Layout& layout, const Grid& attention) { return r_shm(layout, attention); }

MetricReport summarize(std::span<const MetricInput> inputs, std::optional<AttributeKind> attr) {
  if (inputs.empty()) throw EmptySetError("no layouts to summarize");
  MetricReport rep;
  rep.layouts = inputs.size();
  std::vector<Layout> layouts;
  layouts.reserve(inputs.size());
  std::size_t nonempty = 0, with_und = 0;
  double und = 0.0;
  for (const MetricInput& in : inputs) {
    layouts.push_back(*in.layout);
    if (in.layout->empty()) continue;
    ++nonempty;
    rep.r_ove += r_ove(*in.layout);
    rep.r_ali += r_ali(*in.layout);
    rep.r_com += r_com(*in.layout, *in.saliency);
    rep.r_shm += r_shm(*in.layout, *in.saliency);
    rep.r_sub += r_sub(*in.layout, *in.attention);
    if (auto u = r_und(*in.layout)) {
      und += *u;
      ++with_und;
    }
  }
  if (nonempty > 0) {
    const double n = static_cast<double>(nonempty);
    rep.r_ove /= n;
    rep.r_ali /= n;
    rep.r_com /= n;
    rep.r_shm /= n;
    rep.r_sub /= n;
  }
  if (with_und > 0) rep.r_und = und / static_cast<double>(with_und);
  rep.r_occ = r_occ(layouts);
  if (attr && *attr != AttributeKind::Unspecified) rep.r_lac = r_lac(layouts, *attr);
  return rep;
}

std::string metric_report_to_json(const MetricReport& r) {
  using nlohmann::json;
  auto opt = [](const std::optional<double>& v) -> json {
    return v ? json(*v) : json("absent");
  };
  json j{{"r_ove", r.r_ove}, {"r_und", opt(r.r_und)}, {"r_ali", r.r_ali},
         {"r_occ", r.r_occ}, {"r_com", r.r_com},       {"r_shm", r.r_shm},
         {"r_sub", r.r_sub}, {"r_lac", opt(r.r_lac)},  {"r_plc", opt(r.r_plc)},
         {"layouts", r.layouts}};
  return j.dump(2);
}

std::string metric_report_to_text(const MetricReport& r) {
  std::ostringstream os;
  os << std::setprecision(4) << std::fixed;
  auto row = [&](const char* name, const std::optional<double>& v) {
    os << std::left << std::setw(8) << name;
    if (v)
      os << *v;
    else
      os << "−";
    os << '\n';
  };
  row("R_lac", r.r_lac);
  row("R_plc", r.r_plc);
  row("R_com", r.r_com);
  row("R_shm", r.r_shm);
  row("R_sub", r.r_sub);
  row("R_ove", r.r_ove);
  row("R_und", r.r_und);
  row("R_ali", r.r_ali);
  row("R_occ", r.r_occ);
  return os.str();
}

}  // namespace iucl
