#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "iucl/tensor.hpp"

namespace iucl {

// Element categories. The ordinal is the column index inside every flat
// encoding and file format; do not reorder.
enum class Category : std::uint8_t { Text = 0, Logo = 1, Underlay = 2, Embellishment = 3, None = 4 };

inline constexpr std::size_t kNumCategories = 5;
inline constexpr std::size_t kBoxDims = 4;
inline constexpr std::size_t kFlatWidth = kNumCategories + kBoxDims;  // 9
inline constexpr std::size_t kMaxQueries = 10;
inline constexpr int kCanvasWidth = 240;
inline constexpr int kCanvasHeight = 350;

inline constexpr std::array<Category, 4> kRealCategories = {
    Category::Text, Category::Logo, Category::Underlay, Category::Embellishment};

constexpr std::size_t index_of(Category c) { return static_cast<std::size_t>(c); }
Category category_from_index(std::size_t i);
std::string_view category_name(Category c);
Category category_from_name(std::string_view name);  // throws ValidationError

// Center/size box in canvas-normalized units.
struct BBox {
  double cx = 0.5;
  double cy = 0.5;
  double w = 0.0;
  double h = 0.0;

  double left() const { return cx - 0.5 * w; }
  double right() const { return cx + 0.5 * w; }
  double top() const { return cy - 0.5 * h; }
  double bottom() const { return cy + 0.5 * h; }
  double area() const { return w * h; }

  static BBox from_edges(double l, double t, double r, double b) {
    return {0.5 * (l + r), 0.5 * (t + b), r - l, b - t};
  }
  friend bool operator==(const BBox&, const BBox&) = default;
};

// Validates coordinate ranges (tolerating 1e-6 float noise) and clamps the
// box edges to the canvas. Throws ValidationError.
BBox sanitize_box(const BBox& raw);

double intersection_area(const BBox& a, const BBox& b);
double iou(const BBox& a, const BBox& b);

struct Element {
  Category category = Category::Text;
  BBox box;
  friend bool operator==(const Element&, const Element&) = default;
};

struct Layout {
  int canvas_w = kCanvasWidth;
  int canvas_h = kCanvasHeight;
  std::vector<Element> elements;

  std::size_t count(Category c) const;
  bool empty() const { return elements.empty(); }
  friend bool operator==(const Layout&, const Layout&) = default;
};

// Throws ValidationError on None elements, too many elements or bad boxes.
void validate(const Layout& layout);

// Generator output: per-query category probabilities and boxes.
struct PredictionBatch {
  Tensor probs;                   // Q x 5, rows sum to 1
  Tensor boxes;                   // Q x 4 (cx, cy, w, h)
  std::optional<Tensor> logits;   // Q x 5

  std::size_t queries() const { return probs.rows(); }
};

void validate(const PredictionBatch& pred);

// Q x 9 rows: one-hot category then box. Row i holds element i; rows past the
// last element are one-hot None with a zero box.
Tensor flatten(const Layout& layout, std::size_t q_total = kMaxQueries);
Tensor flatten(const PredictionBatch& pred);

// Inverse of flatten: argmax category per row, None rows dropped.
Layout layout_from_flat(const Tensor& flat, int canvas_w = kCanvasWidth,
                        int canvas_h = kCanvasHeight);

// Lowest index wins ties.
Category argmax_category(std::span<const double> scores);
std::array<std::size_t, kNumCategories> hard_counts(const PredictionBatch& pred);

std::string layout_to_json(const Layout& layout);
Layout layout_from_json(std::string_view text);

std::string prediction_to_json(const PredictionBatch& pred);
PredictionBatch prediction_from_json(std::string_view text);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view text);

}  // namespace iucl
