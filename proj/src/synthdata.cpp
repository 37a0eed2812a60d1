#include "iucl/synthdata.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

#include "iucl/rng.hpp"

namespace iucl {

namespace fs = std::filesystem;

void validate(const DatasetSpec& spec) {
  if (spec.n_samples == 0) throw ValidationError("dataset needs at least one sample");
  if (spec.grid_w < 3 || spec.grid_h < 3) throw ValidationError("grid must be at least 3x3");
  double total = 0.0;
  for (double p : spec.proportions) {
    if (!(p >= 0.0)) throw ValidationError("category proportions must be nonnegative");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-4) throw ValidationError("category proportions must sum to 1");
  if (spec.min_elements == 0 || spec.min_elements > spec.max_elements ||
      spec.max_elements > kMaxQueries)
    throw ValidationError("element range must lie within [1, 10]");
}

namespace {

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

struct Blob {
  double x, y, sigma, amp;
};

Grid render_blobs(const std::vector<Blob>& blobs, std::size_t h, std::size_t w) {
  Grid g(h, w);
  for (std::size_t y = 0; y < h; ++y) {
    const double py = (static_cast<double>(y) + 0.5) / static_cast<double>(h);
    for (std::size_t x = 0; x < w; ++x) {
      const double px = (static_cast<double>(x) + 0.5) / static_cast<double>(w);
      double v = 0.0;
      for (const Blob& b : blobs) {
        const double d2 = (px - b.x) * (px - b.x) + (py - b.y) * (py - b.y);
        v = std::max(v, b.amp * std::exp(-d2 / (2.0 * b.sigma * b.sigma)));
      }
      g.at(y, x) = std::clamp(v, 0.0, 1.0);
    }
  }
  return g;
}

bool covers_peak(const BBox& box, const std::vector<Blob>& blobs) {
  return std::any_of(blobs.begin(), blobs.end(), [&](const Blob& b) {
    return b.x >= box.left() && b.x <= box.right() && b.y >= box.top() && b.y <= box.bottom();
  });
}

// Width and height ranges per category, canvas-normalized.
struct SizeRange {
  double w0, w1, h0, h1;
};

SizeRange size_range(Category c) {
  switch (c) {
    case Category::Text: return {0.3, 0.8, 0.04, 0.10};
    case Category::Logo: return {0.10, 0.25, 0.05, 0.12};
    case Category::Embellishment: return {0.05, 0.30, 0.02, 0.15};
    default: return {0.3, 0.8, 0.05, 0.12};
  }
}

BBox place_box(Category c, const std::vector<Blob>& blobs, Rng& rng) {
  const SizeRange s = size_range(c);
  const bool avoid = uniform(rng, 0.0, 1.0) < 0.9;
  BBox box;
  for (int attempt = 0; attempt < 50; ++attempt) {
    const double w = uniform(rng, s.w0, s.w1);
    const double h = uniform(rng, s.h0, s.h1);
    box = {uniform(rng, 0.5 * w, 1.0 - 0.5 * w), uniform(rng, 0.5 * h, 1.0 - 0.5 * h), w, h};
    if (!avoid || !covers_peak(box, blobs)) break;
  }
  return sanitize_box(box);
}

BBox underlay_for(const BBox& text) {
  return sanitize_box(BBox::from_edges(std::max(0.0, text.left() - 0.02),
                                       std::max(0.0, text.top() - 0.015),
                                       std::min(1.0, text.right() + 0.02),
                                       std::min(1.0, text.bottom() + 0.015)));
}

}  // namespace

AttributeKind label_attribute(const Layout& layout) {
  for (AttributeKind k : kAttributeKinds)
    if (satisfies(layout, k)) return k;
  return AttributeKind::Unspecified;
}

Sample generate_sample(const DatasetSpec& spec, std::size_t index) {
  Rng rng(mix_seed(spec.seed, index));

  const auto n = std::uniform_int_distribution<std::size_t>(spec.min_elements, spec.max_elements)(rng);
  std::discrete_distribution<std::size_t> pick(spec.proportions.begin(), spec.proportions.end());
  std::vector<Category> cats(n);
  for (Category& c : cats) c = kRealCategories[pick(rng)];

  // Every underlay backs its own text, so surplus underlays become texts.
  const auto texts = static_cast<std::ptrdiff_t>(std::count(cats.begin(), cats.end(), Category::Text));
  const auto unders = static_cast<std::ptrdiff_t>(std::count(cats.begin(), cats.end(), Category::Underlay));
  if (unders > texts) {
    std::ptrdiff_t convert = (unders - texts + 1) / 2;
    for (Category& c : cats)
      if (convert > 0 && c == Category::Underlay) {
        c = Category::Text;
        --convert;
      }
  }

  std::vector<Blob> blobs(std::uniform_int_distribution<int>(1, 3)(rng));
  for (Blob& b : blobs)
    b = {uniform(rng, 0.2, 0.8), uniform(rng, 0.2, 0.8), uniform(rng, 0.08, 0.2), uniform(rng, 0.6, 1.0)};

  Sample s;
  std::vector<BBox> text_boxes;
  for (Category c : cats) {
    if (c == Category::Underlay) continue;
    const BBox box = place_box(c, blobs, rng);
    s.layout.elements.push_back({c, box});
    if (c == Category::Text) text_boxes.push_back(box);
  }
  std::size_t next_text = 0;
  for (Category c : cats)
    if (c == Category::Underlay) s.layout.elements.push_back({c, underlay_for(text_boxes[next_text++])});

  std::stable_sort(s.layout.elements.begin(), s.layout.elements.end(),
                   [](const Element& a, const Element& b) {
                     if (a.box.cy != b.box.cy) return a.box.cy < b.box.cy;
                     return index_of(a.category) < index_of(b.category);
                   });

  s.saliency = render_blobs(blobs, spec.grid_h, spec.grid_w);
  s.attention = render_blobs({blobs.front()}, spec.grid_h, spec.grid_w);
  s.attribute = label_attribute(s.layout);
  s.partial = extract_partial(s.layout, rng());
  return s;
}

std::vector<Sample> generate(const DatasetSpec& spec) {
  validate(spec);
  std::vector<Sample> out;
  out.reserve(spec.n_samples);
  for (std::size_t i = 0; i < spec.n_samples; ++i) out.push_back(generate_sample(spec, i));
  return out;
}

PartialLayout extract_partial(const Layout& layout, std::uint64_t seed, std::size_t q_total) {
  if (layout.empty()) throw EmptyLayoutError("cannot extract a partial layout from an empty layout");
  const std::size_t n = layout.elements.size();
  if (n > q_total) throw CapacityError("layout has more elements than query slots");
  std::vector<std::size_t> slots(4 * n);
  std::iota(slots.begin(), slots.end(), 0);
  Rng rng(seed);
  std::shuffle(slots.begin(), slots.end(), rng);
  slots.resize(round_half_up_quarter(4 * n));

  PartialLayout pl(q_total);
  std::vector<int> chosen(n, 0);
  for (std::size_t s : slots) {
    const std::size_t row = s / kBoxDims, field = s % kBoxDims;
    const BBox& b = layout.elements[row].box;
    const double v[4] = {b.cx, b.cy, b.w, b.h};
    pl.set_box_slot(row, field, v[field]);
    ++chosen[row];
  }
  for (std::size_t r = 0; r < n; ++r)
    if (chosen[r] == static_cast<int>(kBoxDims)) pl.set_category(r, layout.elements[r].category);
  return pl;
}

PartialLayout coordinates_only_partial(const Layout& layout, std::uint64_t seed, std::size_t q_total) {
  if (layout.empty()) throw EmptyLayoutError("cannot extract a partial layout from an empty layout");
  const std::size_t n = layout.elements.size();
  if (n > q_total) throw CapacityError("layout has more elements than query slots");
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), 0);
  Rng rng(seed);
  std::shuffle(rows.begin(), rows.end(), rng);
  rows.resize(std::max<std::size_t>(1, round_half_up_quarter(n)));
  PartialLayout pl(q_total);
  for (std::size_t r : rows) {
    const BBox& b = layout.elements[r].box;
    pl.set_box_slot(r, 0, b.cx);
    pl.set_box_slot(r, 1, b.cy);
    pl.set_box_slot(r, 2, b.w);
    pl.set_box_slot(r, 3, b.h);
  }
  return pl;
}

// ---------------------------------------------------------------- PGM

Grid parse_pgm(std::string_view text) {
  std::string cleaned;
  cleaned.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '#') {
      while (i < text.size() && text[i] != '\n') ++i;
      cleaned.push_back('\n');
    } else {
      cleaned.push_back(text[i]);
    }
  }
  std::istringstream in(cleaned);
  std::string magic;
  if (!(in >> magic) || magic != "P2") throw FormatError("not an ASCII PGM (expected P2)");
  long w = 0, h = 0, maxval = 0;
  if (!(in >> w >> h >> maxval)) throw FormatError("PGM header is incomplete");
  if (w <= 0 || h <= 0) throw FormatError("PGM dimensions must be positive");
  if (maxval <= 0 || maxval > 65535) throw FormatError("PGM maxval must be in [1, 65535]");
  Grid g(static_cast<std::size_t>(h), static_cast<std::size_t>(w));
  for (double& v : g.values) {
    long raw = 0;
    if (!(in >> raw)) throw FormatError("PGM has fewer values than its dimensions");
    if (raw < 0 || raw > maxval) throw FormatError("PGM value " + std::to_string(raw) + " exceeds maxval");
    v = static_cast<double>(raw) / static_cast<double>(maxval);
  }
  std::string extra;
  if (in >> extra) throw FormatError("PGM has more values than its dimensions");
  return g;
}

std::string format_pgm(const Grid& grid) {
  if (grid.values.size() != grid.h * grid.w) throw ShapeError("grid size does not match its dimensions");
  std::ostringstream os;
  os << "P2\n" << grid.w << ' ' << grid.h << "\n255\n";
  for (std::size_t y = 0; y < grid.h; ++y) {
    for (std::size_t x = 0; x < grid.w; ++x) {
      const double v = std::clamp(grid.at(y, x), 0.0, 1.0);
      os << (x ? " " : "") << static_cast<int>(std::floor(v * 255.0 + 0.5));
    }
    os << '\n';
  }
  return os.str();
}

Grid load_grid(const std::string& path) { return parse_pgm(read_text_file(path)); }

void save_grid(const Grid& grid, const std::string& path) { write_text_file(path, format_pgm(grid)); }

// ---------------------------------------------------------------- dataset I/O

void save_dataset(const std::vector<Sample>& samples, const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    std::ostringstream name;
    name << std::setw(6) << std::setfill('0') << i;
    const fs::path sub = fs::path(dir) / name.str();
    fs::create_directories(sub, ec);
    if (ec) throw IoError("cannot create " + sub.string() + ": " + ec.message());
    const Sample& s = samples[i];
    write_text_file((sub / "layout.json").string(), layout_to_json(s.layout) + "\n");
    write_text_file((sub / "partial.json").string(), partial_to_json(s.partial) + "\n");
    save_grid(s.saliency, (sub / "saliency.pgm").string());
    save_grid(s.attention, (sub / "attention.pgm").string());
    write_text_file((sub / "attr.txt").string(), std::string(attribute_name(s.attribute)) + "\n");
  }
}

std::vector<Sample> load_dataset(const std::string& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw IoError("dataset directory not found: " + dir);
  std::vector<fs::path> subs;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_directory()) subs.push_back(entry.path());
  std::sort(subs.begin(), subs.end());
  std::vector<Sample> out;
  out.reserve(subs.size());
  for (const fs::path& sub : subs) {
    Sample s;
    s.layout = layout_from_json(read_text_file((sub / "layout.json").string()));
    s.partial = partial_from_json(read_text_file((sub / "partial.json").string()));
    s.saliency = load_grid((sub / "saliency.pgm").string());
    s.attention = load_grid((sub / "attention.pgm").string());
    std::string attr = read_text_file((sub / "attr.txt").string());
    while (!attr.empty() && std::isspace(static_cast<unsigned char>(attr.back()))) attr.pop_back();
    s.attribute = attribute_from_name(attr);
    out.push_back(std::move(s));
  }
  if (out.empty()) throw IoError("dataset directory has no samples: " + dir);
  return out;
}

}  // namespace iucl
