#include "iucl/constraints.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "iucl/rng.hpp"
#include "json.hpp"

namespace iucl {

using nlohmann::json;

std::optional<Category> attribute_category(AttributeKind kind) {
  switch (kind) {
    case AttributeKind::TextOnly: return Category::Text;
    case AttributeKind::UnderlayNoLogoEmb: return Category::Underlay;
    case AttributeKind::LogoNoEmb: return Category::Logo;
    case AttributeKind::WithEmbellishment: return Category::Embellishment;
    case AttributeKind::Unspecified: return std::nullopt;
  }
  return std::nullopt;
}

std::vector<Category> undesired_set(AttributeKind kind) {
  switch (kind) {
    case AttributeKind::TextOnly:
      return {Category::Logo, Category::Underlay, Category::Embellishment};
    case AttributeKind::UnderlayNoLogoEmb: return {Category::Logo, Category::Embellishment};
    case AttributeKind::LogoNoEmb: return {Category::Embellishment};
    case AttributeKind::WithEmbellishment:
    case AttributeKind::Unspecified: return {};
  }
  return {};
}

namespace {
constexpr std::array<std::string_view, 5> kAttrNames = {"text", "underlay", "logo",
                                                        "embellishment", "unspecified"};
}

std::string_view attribute_name(AttributeKind kind) {
  return kAttrNames[static_cast<std::size_t>(kind)];
}

AttributeKind attribute_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kAttrNames.size(); ++i)
    if (kAttrNames[i] == name) return static_cast<AttributeKind>(i);
  throw ValidationError("unknown attribute \"" + std::string(name) + "\"");
}

bool satisfies(const Layout& layout, AttributeKind kind) {
  const auto a = attribute_category(kind);
  if (!a || layout.count(*a) == 0) return false;
  for (Category u : undesired_set(kind))
    if (layout.count(u) > 0) return false;
  return true;
}

NoiseMean attribute_mean(AttributeKind kind) {
  switch (kind) {
    case AttributeKind::TextOnly: return {1, -1, -1, 1};
    case AttributeKind::UnderlayNoLogoEmb: return {1, -1, 1, -1};
    case AttributeKind::LogoNoEmb: return {1, 1, -1, -1};
    case AttributeKind::WithEmbellishment: return {1, 1, 1, 1};
    case AttributeKind::Unspecified: return {0, 0, 0, 0};
  }
  return {0, 0, 0, 0};
}

Tensor sample_noise(const NoiseSpec& spec, std::uint64_t seed) {
  if (spec.grid_h == 0 || spec.grid_w == 0) throw ShapeError("noise grid must be at least 1x1");
  Tensor field({4, spec.grid_h, spec.grid_w});
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, std::sqrt(spec.variance));
  const std::size_t cells = spec.grid_h * spec.grid_w;
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t i = 0; i < cells; ++i) field[c * cells + i] = spec.mean[c] + normal(rng);
  return field;
}

// ---------------------------------------------------------------- PartialLayout

PartialLayout::PartialLayout(std::size_t q_total)
    : values_({q_total, kFlatWidth}), presence_(q_total * kFlatWidth, 0) {}

void PartialLayout::check_row(std::size_t row) const {
  if (row >= rows()) {
    throw CapacityError("partial-layout index " + std::to_string(row) + " exceeds " +
                        std::to_string(rows()) + " query slots");
  }
}

std::size_t PartialLayout::present_count() const {
  return static_cast<std::size_t>(std::count(presence_.begin(), presence_.end(), 1));
}

bool PartialLayout::row_present(std::size_t row) const {
  for (std::size_t s = 0; s < kFlatWidth; ++s)
    if (present(row, s)) return true;
  return false;
}

bool PartialLayout::category_present(std::size_t row) const {
  for (std::size_t s = 0; s < kNumCategories; ++s)
    if (present(row, s)) return true;
  return false;
}

void PartialLayout::set_category(std::size_t row, Category c) {
  check_row(row);
  if (c == Category::None) throw ValidationError("a partial layout cannot constrain \"none\"");
  for (std::size_t s = 0; s < kNumCategories; ++s) {
    values_.at(row, s) = (s == index_of(c)) ? 1.0 : 0.0;
    presence_[row * kFlatWidth + s] = 1;
  }
}

void PartialLayout::set_box_slot(std::size_t row, std::size_t field, double value) {
  check_row(row);
  if (field >= kBoxDims) throw ShapeError("box field index out of range");
  if (!(value >= 0.0 && value <= 1.0)) throw ValidationError("constrained coordinate outside [0,1]");
  values_.at(row, kNumCategories + field) = value;
  presence_[row * kFlatWidth + kNumCategories + field] = 1;
}

void PartialLayout::set_element(std::size_t row, const Element& e) {
  set_category(row, e.category);
  set_box_slot(row, 0, e.box.cx);
  set_box_slot(row, 1, e.box.cy);
  set_box_slot(row, 2, e.box.w);
  set_box_slot(row, 3, e.box.h);
}

void PartialLayout::clear_slot(std::size_t row, std::size_t slot) {
  check_row(row);
  values_.at(row, slot) = 0.0;
  presence_[row * kFlatWidth + slot] = 0;
}

Tensor PartialLayout::masked_values() const {
  Tensor out = values_;
  for (std::size_t i = 0; i < out.size(); ++i)
    if (!presence_[i]) out[i] = 0.0;
  return out;
}

Tensor PartialLayout::presence_matrix() const {
  Tensor out(values_.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = presence_[i] ? 1.0 : 0.0;
  return out;
}

void PartialLayout::set_slot(std::size_t row, std::size_t slot, double value) {
  check_row(row);
  if (slot >= kFlatWidth) throw ShapeError("slot index out of range");
  values_.at(row, slot) = value;
  presence_[row * kFlatWidth + slot] = 1;
}

PartialLayout presence_from_zero_convention(const Tensor& pl_values) {
  if (pl_values.rank() != 2 || pl_values.cols() != kFlatWidth)
    throw ShapeError("partial-layout matrix must have 9 columns");
  PartialLayout pl(pl_values.rows());
  for (std::size_t r = 0; r < pl_values.rows(); ++r)
    for (std::size_t s = 0; s < kFlatWidth; ++s)
      if (pl_values.at(r, s) != 0.0) pl.set_slot(r, s, pl_values.at(r, s));
  return pl;
}

// ---------------------------------------------------------------- masks

std::size_t round_half_up_quarter(std::size_t n) { return (n + 2) / 4; }

RandomMask full_mask(const PartialLayout& pl) {
  RandomMask mask{pl.presence_matrix(), 0};
  return mask;
}

RandomMask sample_random_mask(const PartialLayout& pl, std::uint64_t seed) {
  const std::size_t n = pl.present_count();
  if (n == 0) throw EmptyConstraintError("partial layout has no constrained slots");
  RandomMask mask = full_mask(pl);
  std::size_t budget = round_half_up_quarter(n);
  mask.zeros = budget;

  // Units: a whole present category block, or a single present box slot.
  struct Unit {
    std::size_t row;
    std::size_t first;
    std::size_t width;
  };
  std::vector<Unit> units;
  for (std::size_t r = 0; r < pl.rows(); ++r) {
    for (std::size_t s = 0; s < kNumCategories; ++s) {
      if (!pl.present(r, s)) continue;
      // Raw ingest may mark only part of a block; group the present run.
      std::size_t w = 0;
      while (s + w < kNumCategories && pl.present(r, s + w)) ++w;
      units.push_back({r, s, w});
      s += w - 1;
    }
    for (std::size_t s = kNumCategories; s < kFlatWidth; ++s)
      if (pl.present(r, s)) units.push_back({r, s, 1});
  }
  std::mt19937_64 rng(seed);
  std::shuffle(units.begin(), units.end(), rng);

  std::vector<const Unit*> skipped;
  for (const Unit& u : units) {
    if (budget == 0) break;
    if (u.width <= budget) {
      for (std::size_t k = 0; k < u.width; ++k) mask.keep.at(u.row, u.first + k) = 0.0;
      budget -= u.width;
    } else {
      skipped.push_back(&u);
    }
  }
  // Only wide blocks remain and the budget is smaller than any of them.
  for (const Unit* u : skipped) {
    if (budget == 0) break;
    const std::size_t take = std::min(budget, u->width);
    for (std::size_t k = 0; k < take; ++k) mask.keep.at(u->row, u->first + k) = 0.0;
    budget -= take;
  }
  return mask;
}

PartialLayout apply_mask(const PartialLayout& pl, const RandomMask& mask) {
  if (!mask.keep.same_shape(pl.values())) throw ShapeError("mask shape differs from partial layout");
  PartialLayout out = pl;
  for (std::size_t r = 0; r < pl.rows(); ++r)
    for (std::size_t s = 0; s < kFlatWidth; ++s)
      if (pl.present(r, s) && mask.keep.at(r, s) == 0.0) out.clear_slot(r, s);
  return out;
}

// ---------------------------------------------------------------- JSON

namespace {
constexpr std::array<const char*, 4> kBoxKeys = {"cx", "cy", "w", "h"};
}

std::string partial_to_json(const PartialLayout& pl) {
  json elems = json::array();
  for (std::size_t r = 0; r < pl.rows(); ++r) {
    if (!pl.row_present(r)) continue;
    json e;
    e["index"] = r;
    if (pl.category_present(r)) {
      const auto row = pl.values().data().subspan(r * kFlatWidth, kNumCategories);
      e["category"] = std::string(category_name(argmax_category(row)));
    } else {
      e["category"] = nullptr;
    }
    for (std::size_t f = 0; f < kBoxDims; ++f) {
      if (pl.present(r, kNumCategories + f))
        e[kBoxKeys[f]] = pl.values().at(r, kNumCategories + f);
      else
        e[kBoxKeys[f]] = nullptr;
    }
    elems.push_back(std::move(e));
  }
  return json{{"elements", elems}}.dump(2);
}

PartialLayout partial_from_json(std::string_view text, std::size_t q_total) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(e.what());
  }
  try {
    PartialLayout pl(q_total);
    for (const json& e : j.at("elements")) {
      const long idx = e.at("index").get<long>();
      if (idx < 0 || static_cast<std::size_t>(idx) >= q_total)
        throw ValidationError("partial-layout index " + std::to_string(idx) + " out of range");
      const auto row = static_cast<std::size_t>(idx);
      if (e.contains("category") && !e["category"].is_null())
        pl.set_category(row, category_from_name(e["category"].get<std::string>()));
      for (std::size_t f = 0; f < kBoxDims; ++f)
        if (e.contains(kBoxKeys[f]) && !e[kBoxKeys[f]].is_null())
          pl.set_box_slot(row, f, e[kBoxKeys[f]].get<double>());
    }
    return pl;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("partial-layout schema: ") + e.what());
  }
}

}  // namespace iucl
