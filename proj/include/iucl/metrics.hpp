#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "iucl/constraints.hpp"
#include "iucl/core.hpp"
#include "iucl/grid.hpp"

namespace iucl {

// Mean pairwise IoU over non-underlay elements; 0 with fewer than two.
double r_ove(const Layout& layout);

// Mean over underlays of the best coverage area(u ∩ e) / area(e) over the
// non-underlay elements; nullopt when the layout has no underlay.
std::optional<double> r_und(const Layout& layout);

// Mean over elements of the smallest same-axis coordinate gap to any other
// element, over left / x-center / right / top / y-center / bottom.
double r_ali(const Layout& layout);

// Fraction of non-empty layouts. Throws EmptySetError.
double r_occ(std::span<const Layout> layouts);

// Fraction of layouts satisfying the attribute. Throws EmptySetError and
// UnspecifiedAttributeError.
double r_lac(std::span<const Layout> layouts, AttributeKind attr);

// Mean |pred - PL| over every constrained slot of every pair.
double r_plc(std::span<const Tensor> pred_flats, std::span<const PartialLayout> pls);

// Mean Sobel gradient magnitude under each text box, averaged over texts.
// Throws GridTooSmallError for grids under 3x3.
double r_com(const Layout& layout, const Grid& gray);

// Mean grid value over the union of pixels covered by any element.
double r_shm(const Layout& layout, const Grid& saliency);
double r_sub(const Layout& layout, const Grid& attention);

// A pixel belongs to a box when its center lies in the closed box.
bool pixel_in_box(const BBox& b, std::size_t x, std::size_t y, std::size_t w, std::size_t h);

struct MetricReport {
  double r_ove = 0.0;
  double r_ali = 0.0;
  double r_com = 0.0;
  double r_shm = 0.0;
  double r_sub = 0.0;
  std::optional<double> r_und;
  double r_occ = 0.0;
  std::optional<double> r_lac;
  std::optional<double> r_plc;
  std::size_t layouts = 0;
};

// Per-layout metrics averaged over the non-empty layouts; r_und averaged
// over the layouts where it is defined.
struct MetricInput {
  const Layout* layout;
  const Grid* saliency;
  const Grid* attention;
};
MetricReport summarize(std::span<const MetricInput> inputs, std::optional<AttributeKind> attr);

std::string metric_report_to_json(const MetricReport& r);
// Human-readable table; absent values print as "−".
std::string metric_report_to_text(const MetricReport& r);

}  // namespace iucl
