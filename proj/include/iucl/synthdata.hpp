#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "iucl/constraints.hpp"
#include "iucl/core.hpp"
#include "iucl/grid.hpp"

namespace iucl {

struct DatasetSpec {
  std::size_t n_samples = 1000;
  std::uint64_t seed = 0;
  std::size_t grid_w = 64;  // 240 / 3.75
  std::size_t grid_h = 93;  // 350 / 3.75, rounded
  // Target shares of text, logo, underlay, embellishment.
  std::array<double, 4> proportions = {0.6112, 0.1289, 0.2276, 0.0323};
  std::size_t min_elements = 1;
  std::size_t max_elements = 10;
};

void validate(const DatasetSpec& spec);

struct Sample {
  Layout layout;
  Grid saliency;
  Grid attention;
  AttributeKind attribute = AttributeKind::Unspecified;
  PartialLayout partial;
};

// Deterministic in spec.seed; sample i depends only on (seed, i).
std::vector<Sample> generate(const DatasetSpec& spec);
Sample generate_sample(const DatasetSpec& spec, std::size_t index);

// The single attribute a layout satisfies, checked in the order
// text, underlay, logo, embellishment. Unspecified for an empty layout.
AttributeKind label_attribute(const Layout& layout);

// Constrains round(0.25 * 4n) of the 4n box slots of an n-element layout,
// chosen uniformly; an element whose four box slots are all chosen also has
// its category constrained. Throws EmptyLayoutError.
PartialLayout extract_partial(const Layout& layout, std::uint64_t seed,
                              std::size_t q_total = kMaxQueries);

// Whole boxes of round(0.25 n) (at least one) randomly chosen elements,
// without categories. Throws EmptyLayoutError.
PartialLayout coordinates_only_partial(const Layout& layout, std::uint64_t seed,
                                       std::size_t q_total = kMaxQueries);

// ASCII PGM ("P2"), maxval 255; values map to v / 255.
Grid parse_pgm(std::string_view text);
std::string format_pgm(const Grid& grid);
Grid load_grid(const std::string& path);
void save_grid(const Grid& grid, const std::string& path);

// One directory per sample: layout.json, partial.json, saliency.pgm,
// attention.pgm, attr.txt.
void save_dataset(const std::vector<Sample>& samples, const std::string& dir);
std::vector<Sample> load_dataset(const std::string& dir);

}  // namespace iucl
