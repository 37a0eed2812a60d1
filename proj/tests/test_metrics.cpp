#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "iucl/metrics.hpp"

using namespace iucl;

namespace {

Layout make(std::initializer_list<Element> els) {
  Layout l;
  l.elements = els;
  return l;
}

Element el(Category c, double cx, double cy, double w, double h) { return {c, {cx, cy, w, h}}; }

// Direct Sobel oracle: every pixel of the grid, replicated borders, kernel
// normalized by 8, center-in-box membership.
double sobel_oracle(const Layout& l, const Grid& g) {
  auto px = [&](int x, int y) {
    x = std::max(0, std::min(static_cast<int>(g.w) - 1, x));
    y = std::max(0, std::min(static_cast<int>(g.h) - 1, y));
    return g.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x));
  };
  const int kx[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
  const int ky[3][3] = {{-1, -2, -1}, {0, 0, 0}, {1, 2, 1}};
  double total = 0;
  int texts = 0;
  for (const Element& e : l.elements) {
    if (e.category != Category::Text) continue;
    ++texts;
    double s = 0;
    int n = 0;
    for (int y = 0; y < static_cast<int>(g.h); ++y)
      for (int x = 0; x < static_cast<int>(g.w); ++x) {
        const double cx = (x + 0.5) / static_cast<double>(g.w), cy = (y + 0.5) / static_cast<double>(g.h);
        if (cx < e.box.left() || cx > e.box.right() || cy < e.box.top() || cy > e.box.bottom()) continue;
        double gx = 0, gy = 0;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            gx += kx[dy + 1][dx + 1] * px(x + dx, y + dy);
            gy += ky[dy + 1][dx + 1] * px(x + dx, y + dy);
          }
        s += std::hypot(gx / 8.0, gy / 8.0);
        ++n;
      }
    total += s / n;
  }
  return texts ? total / texts : 0.0;
}

}  // namespace

TEST(Overlap, Examples) {
  EXPECT_NEAR(r_ove(make({el(Category::Text, .5, .5, .2, .2), el(Category::Text, .5, .5, .2, .2)})), 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(r_ove(make({el(Category::Text, .2, .2, .1, .1), el(Category::Logo, .8, .8, .1, .1)})), 0.0);
  EXPECT_DOUBLE_EQ(r_ove(make({el(Category::Text, .5, .5, .2, .2)})), 0.0);
  // Underlays are excluded.
  EXPECT_DOUBLE_EQ(r_ove(make({el(Category::Text, .5, .5, .2, .2), el(Category::Underlay, .5, .5, .2, .2)})), 0.0);
}

TEST(Underlay, Examples) {
  EXPECT_DOUBLE_EQ(*r_und(make({el(Category::Underlay, .5, .5, .4, .4), el(Category::Text, .5, .5, .2, .1)})), 1.0);
  EXPECT_DOUBLE_EQ(*r_und(make({el(Category::Underlay, .2, .2, .1, .1), el(Category::Text, .8, .8, .2, .1)})), 0.0);
  EXPECT_FALSE(r_und(make({el(Category::Text, .5, .5, .2, .1)})).has_value());
}

TEST(Alignment, Examples) {
  EXPECT_DOUBLE_EQ(r_ali(make({el(Category::Text, .3, .2, .2, .1), el(Category::Text, .3, .7, .2, .1)})), 0.0);
  EXPECT_NEAR(r_ali(make({el(Category::Text, .3, .2, .2, .1), el(Category::Text, .35, .7, .2, .1)})), 0.05, 1e-12);
  EXPECT_DOUBLE_EQ(r_ali(make({el(Category::Text, .3, .2, .2, .1)})), 0.0);
}

TEST(Occupancy, Examples) {
  const Layout one = make({el(Category::Text, .5, .5, .2, .2)});
  EXPECT_DOUBLE_EQ(r_occ(std::vector<Layout>{Layout{}, one}), 0.5);
  EXPECT_DOUBLE_EQ(r_occ(std::vector<Layout>{one, one}), 1.0);
  EXPECT_DOUBLE_EQ(r_occ(std::vector<Layout>{Layout{}, Layout{}}), 0.0);
  EXPECT_THROW(r_occ(std::vector<Layout>{}), EmptySetError);
}

TEST(AttributeRate, Examples) {
  const std::vector<Layout> ok = {make({el(Category::Logo, .5, .1, .2, .1), el(Category::Text, .5, .5, .2, .1)})};
  EXPECT_DOUBLE_EQ(r_lac(ok, AttributeKind::LogoNoEmb), 1.0);
  const std::vector<Layout> bad = {make({el(Category::Logo, .5, .1, .2, .1), el(Category::Embellishment, .5, .5, .2, .1)})};
  EXPECT_DOUBLE_EQ(r_lac(bad, AttributeKind::LogoNoEmb), 0.0);
  const std::vector<Layout> texts = {make({el(Category::Text, .5, .1, .2, .1), el(Category::Text, .5, .5, .2, .1)})};
  EXPECT_DOUBLE_EQ(r_lac(texts, AttributeKind::TextOnly), 1.0);
  EXPECT_THROW(r_lac(texts, AttributeKind::Unspecified), UnspecifiedAttributeError);
  EXPECT_THROW(r_lac(std::vector<Layout>{}, AttributeKind::TextOnly), EmptySetError);
}

TEST(PartialRate, Examples) {
  PartialLayout pl(1);
  for (std::size_t f = 0; f < 4; ++f) pl.set_box_slot(0, f, 0.25);
  Tensor pred({1, 9});
  for (std::size_t f = 5; f < 9; ++f) pred.at(0, f) = 0.25;
  EXPECT_DOUBLE_EQ(r_plc(std::vector<Tensor>{pred}, std::vector<PartialLayout>{pl}), 0.0);
  pred.at(0, 6) = 0.37;
  EXPECT_NEAR(r_plc(std::vector<Tensor>{pred}, std::vector<PartialLayout>{pl}), 0.03, 1e-12);
}

TEST(Compliance, Examples) {
  const Grid flat(20, 30, 0.4);
  const Layout text = make({el(Category::Text, .5, .5, .4, .3)});
  EXPECT_EQ(r_com(text, flat), 0.0);
  Grid step(20, 30, 0.0);
  for (std::size_t y = 0; y < 20; ++y)
    for (std::size_t x = 15; x < 30; ++x) step.at(y, x) = 1.0;
  EXPECT_EQ(r_com(make({el(Category::Logo, .5, .5, .4, .3)}), step), 0.0);
  const double v = r_com(text, step);
  EXPECT_GT(v, 0.0);
  EXPECT_NEAR(v, sobel_oracle(text, step), 1e-12);
  EXPECT_THROW(r_com(text, Grid(2, 5)), GridTooSmallError);
}

TEST(Compliance, RandomOracle) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0, 1);
  for (int k = 0; k < 30; ++k) {
    Grid g(17, 13);
    for (double& v : g.values) v = u(rng);
    Layout l;
    for (int i = 0; i < 3; ++i) {
      const double w = 0.1 + 0.5 * u(rng), h = 0.1 + 0.5 * u(rng);
      l.elements.push_back(el(i == 1 ? Category::Logo : Category::Text, w / 2 + (1 - w) * u(rng),
                              h / 2 + (1 - h) * u(rng), w, h));
    }
    EXPECT_NEAR(r_com(l, g), sobel_oracle(l, g), 1e-12);
  }
}

TEST(Saliency, Examples) {
  const Layout any = make({el(Category::Text, .3, .3, .2, .2)});
  EXPECT_EQ(r_shm(any, Grid(10, 10, 0.0)), 0.0);
  EXPECT_DOUBLE_EQ(r_shm(make({el(Category::Text, .5, .5, 1, 1)}), Grid(10, 10, 1.0)), 1.0);
  Grid top(10, 10, 0.0);
  for (std::size_t y = 0; y < 5; ++y)
    for (std::size_t x = 0; x < 10; ++x) top.at(y, x) = 1.0;
  EXPECT_DOUBLE_EQ(r_shm(make({el(Category::Text, .5, .25, 1, .5)}), top), 1.0);
  EXPECT_DOUBLE_EQ(r_sub(make({el(Category::Text, .5, .25, 1, .5)}), top), 1.0);
}

TEST(Summary, BoundsAndAbsentValues) {
  std::mt19937_64 rng(30);
  std::uniform_real_distribution<double> u(0, 1);
  Grid sal(24, 16), att(24, 16);
  for (double& v : sal.values) v = u(rng);
  for (double& v : att.values) v = u(rng);
  std::vector<Layout> layouts = {Layout{}, make({el(Category::Text, .5, .2, .4, .1)}),
                                 make({el(Category::Underlay, .5, .5, .5, .2), el(Category::Text, .5, .5, .4, .1),
                                       el(Category::Logo, .2, .8, .1, .1)})};
  std::vector<MetricInput> in;
  for (const Layout& l : layouts) in.push_back({&l, &sal, &att});
  const MetricReport r = summarize(in, AttributeKind::TextOnly);
  EXPECT_EQ(r.layouts, 3u);
  EXPECT_NEAR(r.r_occ, 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(*r.r_lac, 1.0 / 3.0, 1e-15);
  EXPECT_DOUBLE_EQ(*r.r_und, 1.0);
  for (double v : {r.r_ove, r.r_ali, r.r_shm, r.r_sub, r.r_com}) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  EXPECT_FALSE(summarize(in, std::nullopt).r_lac.has_value());
  const std::string text = metric_report_to_text(summarize(in, std::nullopt));
  EXPECT_NE(text.find("−"), std::string::npos);
  EXPECT_THROW(summarize(std::vector<MetricInput>{}, std::nullopt), EmptySetError);
}

TEST(Downsample, BlockMeans) {
  Grid g(4, 4);
  for (std::size_t i = 0; i < 16; ++i) g.values[i] = static_cast<double>(i);
  const Grid d = downsample(g, 2, 2);
  EXPECT_DOUBLE_EQ(d.at(0, 0), (0 + 1 + 4 + 5) / 4.0);
  EXPECT_DOUBLE_EQ(d.at(1, 1), (10 + 11 + 14 + 15) / 4.0);
}
