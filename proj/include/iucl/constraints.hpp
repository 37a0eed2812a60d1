#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "iucl/core.hpp"

namespace iucl {

// Layout attribute constraints. Each kind requires one attribute category
// and forbids an undesired set of categories.
enum class AttributeKind : std::uint8_t {
  TextOnly = 0,           // texts, nothing else
  UnderlayNoLogoEmb = 1,  // underlays, no logos or embellishments
  LogoNoEmb = 2,          // logos, no embellishments
  WithEmbellishment = 3,  // embellishments, anything else allowed
  Unspecified = 4,
};

inline constexpr std::array<AttributeKind, 4> kAttributeKinds = {
    AttributeKind::TextOnly, AttributeKind::UnderlayNoLogoEmb, AttributeKind::LogoNoEmb,
    AttributeKind::WithEmbellishment};

std::optional<Category> attribute_category(AttributeKind kind);
std::vector<Category> undesired_set(AttributeKind kind);
std::string_view attribute_name(AttributeKind kind);   // text|underlay|logo|embellishment|unspecified
AttributeKind attribute_from_name(std::string_view name);  // throws ValidationError

// True when the layout has at least one attribute element and no element
// of the undesired set. Always false for Unspecified.
bool satisfies(const Layout& layout, AttributeKind kind);

using NoiseMean = std::array<double, 4>;

// Mean of the four-channel Gaussian noise assigned to an attribute.
NoiseMean attribute_mean(AttributeKind kind);

struct NoiseSpec {
  NoiseMean mean{};
  double variance = 1.0;
  std::size_t grid_h = 8;
  std::size_t grid_w = 8;

  static NoiseSpec for_attribute(AttributeKind kind, std::size_t grid_h = 8, std::size_t grid_w = 8) {
    return {attribute_mean(kind), 1.0, grid_h, grid_w};
  }
};

// 4 x grid_h x grid_w field of independent normal draws, channel c centered
// at mean[c]. Deterministic in the seed.
Tensor sample_noise(const NoiseSpec& spec, std::uint64_t seed);

// Per-slot constraint values with explicit presence. Slots follow the flat
// element encoding: 5 one-hot category slots, then cx, cy, w, h.
class PartialLayout {
 public:
  explicit PartialLayout(std::size_t q_total = kMaxQueries);

  std::size_t rows() const noexcept { return values_.rows(); }
  const Tensor& values() const noexcept { return values_; }
  bool present(std::size_t row, std::size_t slot) const { return presence_[row * kFlatWidth + slot] != 0; }
  bool present(std::size_t flat_index) const { return presence_[flat_index] != 0; }
  std::size_t present_count() const;
  bool row_present(std::size_t row) const;
  bool category_present(std::size_t row) const;

  void set_category(std::size_t row, Category c);
  void set_box_slot(std::size_t row, std::size_t box_field, double value);  // field 0..3
  void set_element(std::size_t row, const Element& e);
  void clear_slot(std::size_t row, std::size_t slot);
  // Raw write of one slot (value and presence), no one-hot handling.
  void set_slot(std::size_t row, std::size_t slot, double value);

  // Values with unconstrained slots forced to zero (the generator's input).
  Tensor masked_values() const;
  // 1.0 on present slots, 0.0 elsewhere.
  Tensor presence_matrix() const;

  friend bool operator==(const PartialLayout&, const PartialLayout&) = default;

 private:
  void check_row(std::size_t row) const;
  Tensor values_;
  std::vector<std::uint8_t> presence_;
};

// Presence inferred from non-zero values. Lossy: a constrained coordinate
// equal to 0.0 reads as unconstrained.
PartialLayout presence_from_zero_convention(const Tensor& pl_values);

// Keep-mask over a partial layout: 1 keeps a constrained slot, 0 drops it.
// Only meaningful on present slots; absent slots are stored as 0.
struct RandomMask {
  Tensor keep;  // q x 9
  std::size_t zeros = 0;
};

// Drops exactly round_half_up(0.25 * n) of the n present slots. A category
// block is dropped as a whole unit and box slots individually; when only
// category blocks remain and the budget is not a multiple of 5, the last
// block is split to keep the count exact. Throws EmptyConstraintError.
RandomMask sample_random_mask(const PartialLayout& pl, std::uint64_t seed);

// Mask that keeps every present slot.
RandomMask full_mask(const PartialLayout& pl);

// The partial layout the generator sees under the mask.
PartialLayout apply_mask(const PartialLayout& pl, const RandomMask& mask);

std::size_t round_half_up_quarter(std::size_t n);

std::string partial_to_json(const PartialLayout& pl);
PartialLayout partial_from_json(std::string_view text, std::size_t q_total = kMaxQueries);

}  // namespace iucl
