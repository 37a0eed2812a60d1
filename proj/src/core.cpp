#include "iucl/core.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace iucl {

using nlohmann::json;

namespace {

constexpr double kIngestTolerance = 1e-6;
// Edge overhang below this is rounding noise from center/size arithmetic.
constexpr double kEdgeSlack = 1e-9;
constexpr std::array<std::string_view, kNumCategories> kNames = {
    "text", "logo", "underlay", "embellishment", "none"};

double clamp_unit(double v, const char* field) {
  if (!std::isfinite(v) || v < -kIngestTolerance || v > 1.0 + kIngestTolerance) {
    throw ValidationError(std::string(field) + " = " + std::to_string(v) + " is outside [0,1]");
  }
  return std::clamp(v, 0.0, 1.0);
}

}  // namespace

Category category_from_index(std::size_t i) {
  if (i >= kNumCategories) throw ValidationError("category index out of range");
  return static_cast<Category>(i);
}

std::string_view category_name(Category c) { return kNames[index_of(c)]; }

Category category_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kNames.size(); ++i)
    if (kNames[i] == name) return static_cast<Category>(i);
  throw ValidationError("unknown category \"" + std::string(name) + "\"");
}

BBox sanitize_box(const BBox& raw) {
  BBox b{clamp_unit(raw.cx, "cx"), clamp_unit(raw.cy, "cy"), clamp_unit(raw.w, "w"),
         clamp_unit(raw.h, "h")};
  if (b.w <= 0.0 || b.h <= 0.0) throw ValidationError("box has zero width or height");
  if (b.left() >= -kEdgeSlack && b.right() <= 1.0 + kEdgeSlack && b.top() >= -kEdgeSlack &&
      b.bottom() <= 1.0 + kEdgeSlack) {
    return b;
  }
  const double l = std::max(0.0, b.left()), r = std::min(1.0, b.right());
  const double t = std::max(0.0, b.top()), bo = std::min(1.0, b.bottom());
  if (r <= l || bo <= t) throw ValidationError("box lies outside the canvas");
  return BBox::from_edges(l, t, r, bo);
}

double intersection_area(const BBox& a, const BBox& b) {
  const double w = std::min(a.right(), b.right()) - std::max(a.left(), b.left());
  const double h = std::min(a.bottom(), b.bottom()) - std::max(a.top(), b.top());
  return (w > 0.0 && h > 0.0) ? w * h : 0.0;
}

double iou(const BBox& a, const BBox& b) {
  const double inter = intersection_area(a, b);
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

std::size_t Layout::count(Category c) const {
  return static_cast<std::size_t>(std::count_if(
      elements.begin(), elements.end(), [c](const Element& e) { return e.category == c; }));
}

void validate(const Layout& layout) {
  if (layout.canvas_w <= 0 || layout.canvas_h <= 0) throw ValidationError("canvas must be positive");
  if (layout.elements.size() > kMaxQueries) {
    throw ValidationError("layout has " + std::to_string(layout.elements.size()) +
                          " elements, the maximum is " + std::to_string(kMaxQueries));
  }
  for (const Element& e : layout.elements) {
    if (e.category == Category::None) throw ValidationError("category \"none\" inside a layout");
    if (!(sanitize_box(e.box) == e.box)) throw ValidationError("box not normalized to the canvas");
  }
}

void validate(const PredictionBatch& pred) {
  const std::size_t q = pred.probs.rows();
  if (pred.probs.rank() != 2 || pred.probs.cols() != kNumCategories)
    throw ShapeError("prediction probs must be Q x 5");
  if (pred.boxes.rank() != 2 || pred.boxes.cols() != kBoxDims || pred.boxes.rows() != q)
    throw ShapeError("prediction boxes must be Q x 4");
  if (pred.logits && !pred.logits->same_shape(pred.probs))
    throw ShapeError("prediction logits must match probs");
  for (std::size_t r = 0; r < q; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < kNumCategories; ++c) {
      const double p = pred.probs.at(r, c);
      if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("probability outside [0,1]");
      s += p;
    }
    if (std::abs(s - 1.0) > 1e-9) throw ValidationError("probabilities of a query do not sum to 1");
    for (std::size_t c = 0; c < kBoxDims; ++c) {
      const double v = pred.boxes.at(r, c);
      if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("box coordinate outside [0,1]");
    }
  }
}

Tensor flatten(const Layout& layout, std::size_t q_total) {
  if (layout.elements.size() > q_total) {
    throw CapacityError("layout has " + std::to_string(layout.elements.size()) +
                        " elements but only " + std::to_string(q_total) + " query slots");
  }
  Tensor flat({q_total, kFlatWidth});
  for (std::size_t r = 0; r < q_total; ++r) {
    if (r >= layout.elements.size()) {
      flat.at(r, index_of(Category::None)) = 1.0;
      continue;
    }
    const Element& e = layout.elements[r];
    flat.at(r, index_of(e.category)) = 1.0;
    flat.at(r, 5) = e.box.cx;
    flat.at(r, 6) = e.box.cy;
    flat.at(r, 7) = e.box.w;
    flat.at(r, 8) = e.box.h;
  }
  return flat;
}

Tensor flatten(const PredictionBatch& pred) {
  const std::size_t q = pred.queries();
  Tensor flat({q, kFlatWidth});
  for (std::size_t r = 0; r < q; ++r) {
    for (std::size_t c = 0; c < kNumCategories; ++c) flat.at(r, c) = pred.probs.at(r, c);
    for (std::size_t c = 0; c < kBoxDims; ++c) flat.at(r, kNumCategories + c) = pred.boxes.at(r, c);
  }
  return flat;
}

Category argmax_category(std::span<const double> scores) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < scores.size(); ++c)
    if (scores[c] > scores[best]) best = c;
  return static_cast<Category>(best);
}

Layout layout_from_flat(const Tensor& flat, int canvas_w, int canvas_h) {
  if (flat.rank() != 2 || flat.cols() != kFlatWidth) throw ShapeError("flat layout must be Q x 9");
  Layout layout{canvas_w, canvas_h, {}};
  for (std::size_t r = 0; r < flat.rows(); ++r) {
    const auto row = flat.data().subspan(r * kFlatWidth, kFlatWidth);
    const Category c = argmax_category(row.first(kNumCategories));
    if (c == Category::None) continue;
    layout.elements.push_back({c, BBox{row[5], row[6], row[7], row[8]}});
  }
  return layout;
}

std::array<std::size_t, kNumCategories> hard_counts(const PredictionBatch& pred) {
  std::array<std::size_t, kNumCategories> counts{};
  for (std::size_t r = 0; r < pred.queries(); ++r) {
    const auto row = pred.probs.data().subspan(r * kNumCategories, kNumCategories);
    ++counts[index_of(argmax_category(row))];
  }
  return counts;
}

// ---------------------------------------------------------------- JSON

std::string layout_to_json(const Layout& layout) {
  json j;
  j["canvas"] = {{"w", layout.canvas_w}, {"h", layout.canvas_h}};
  j["elements"] = json::array();
  for (const Element& e : layout.elements) {
    j["elements"].push_back({{"category", std::string(category_name(e.category))},
                             {"cx", e.box.cx},
                             {"cy", e.box.cy},
                             {"w", e.box.w},
                             {"h", e.box.h}});
  }
  return j.dump(2);
}

Layout layout_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(e.what());
  }
  try {
    Layout layout;
    if (j.contains("canvas")) {
      layout.canvas_w = j.at("canvas").at("w").get<int>();
      layout.canvas_h = j.at("canvas").at("h").get<int>();
    }
    const json& elems = j.at("elements");
    if (!elems.is_array()) throw ValidationError("\"elements\" must be an array");
    if (elems.size() > kMaxQueries) {
      throw ValidationError("layout has " + std::to_string(elems.size()) + " elements, maximum is " +
                            std::to_string(kMaxQueries));
    }
    for (const json& e : elems) {
      const Category c = category_from_name(e.at("category").get<std::string>());
      if (c == Category::None) throw ValidationError("category \"none\" is not a layout element");
      const BBox raw{e.at("cx").get<double>(), e.at("cy").get<double>(), e.at("w").get<double>(),
                     e.at("h").get<double>()};
      layout.elements.push_back({c, sanitize_box(raw)});
    }
    validate(layout);
    return layout;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("layout schema: ") + e.what());
  }
}

std::string prediction_to_json(const PredictionBatch& pred) {
  json queries = json::array();
  for (std::size_t r = 0; r < pred.queries(); ++r) {
    json q;
    q["probs"] = std::vector<double>(pred.probs.data().begin() + r * kNumCategories,
                                     pred.probs.data().begin() + (r + 1) * kNumCategories);
    q["box"] = std::vector<double>(pred.boxes.data().begin() + r * kBoxDims,
                                   pred.boxes.data().begin() + (r + 1) * kBoxDims);
    if (pred.logits) {
      q["logits"] = std::vector<double>(pred.logits->data().begin() + r * kNumCategories,
                                        pred.logits->data().begin() + (r + 1) * kNumCategories);
    }
    queries.push_back(std::move(q));
  }
  return json{{"queries", queries}}.dump(2);
}

PredictionBatch prediction_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(e.what());
  }
  try {
    const json& qs = j.at("queries");
    const std::size_t q = qs.size();
    PredictionBatch pred{Tensor({q, kNumCategories}), Tensor({q, kBoxDims}), std::nullopt};
    const bool has_logits = q > 0 && qs[0].contains("logits");
    if (has_logits) pred.logits = Tensor({q, kNumCategories});
    for (std::size_t r = 0; r < q; ++r) {
      const auto probs = qs[r].at("probs").get<std::vector<double>>();
      const auto box = qs[r].at("box").get<std::vector<double>>();
      if (probs.size() != kNumCategories || box.size() != kBoxDims)
        throw ValidationError("query needs 5 probs and 4 box values");
      std::copy(probs.begin(), probs.end(), &pred.probs.at(r, 0));
      std::copy(box.begin(), box.end(), &pred.boxes.at(r, 0));
      if (has_logits) {
        const auto logits = qs[r].at("logits").get<std::vector<double>>();
        if (logits.size() != kNumCategories) throw ValidationError("query needs 5 logits");
        std::copy(logits.begin(), logits.end(), &pred.logits->at(r, 0));
      }
    }
    validate(pred);
    return pred;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("prediction schema: ") + e.what());
  }
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << text;
}

}  // namespace iucl
