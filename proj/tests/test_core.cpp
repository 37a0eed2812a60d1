#include <gtest/gtest.h>

#include <random>

#include "iucl/core.hpp"

using namespace iucl;

namespace {

Layout random_layout(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(0.05, 0.3);
  std::uniform_int_distribution<int> cat(0, 3);
  Layout l;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = u(rng), h = u(rng);
    std::uniform_real_distribution<double> cx(w / 2, 1 - w / 2), cy(h / 2, 1 - h / 2);
    l.elements.push_back({category_from_index(static_cast<std::size_t>(cat(rng))), {cx(rng), cy(rng), w, h}});
  }
  return l;
}

PredictionBatch batch_from_probs(std::vector<std::vector<double>> rows) {
  PredictionBatch p{Tensor({rows.size(), kNumCategories}), Tensor({rows.size(), kBoxDims}, 0.5), std::nullopt};
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < kNumCategories; ++c) p.probs.at(r, c) = rows[r][c];
  return p;
}

}  // namespace

TEST(Category, OrdinalsAndNames) {
  EXPECT_EQ(index_of(Category::Text), 0u);
  EXPECT_EQ(index_of(Category::None), 4u);
  for (std::size_t i = 0; i < kNumCategories; ++i) {
    const Category c = category_from_index(i);
    EXPECT_EQ(index_of(c), i);
    EXPECT_EQ(category_from_name(category_name(c)), c);
  }
  EXPECT_THROW(category_from_name("banner"), ValidationError);
}

TEST(LayoutJson, DecodesSingleText) {
  const Layout l = layout_from_json(
      R"({"canvas":{"w":240,"h":350},"elements":[{"category":"text","cx":0.5,"cy":0.1,"w":0.4,"h":0.05}]})");
  ASSERT_EQ(l.elements.size(), 1u);
  EXPECT_EQ(l.elements[0].category, Category::Text);
  EXPECT_DOUBLE_EQ(l.elements[0].box.cy, 0.1);
  EXPECT_EQ(l.canvas_w, 240);
  EXPECT_EQ(l.canvas_h, 350);
}

TEST(LayoutJson, EmptyLayoutIsValid) {
  const Layout l = layout_from_json(R"({"canvas":{"w":240,"h":350},"elements":[]})");
  EXPECT_TRUE(l.empty());
}

TEST(LayoutJson, Rejections) {
  EXPECT_THROW(layout_from_json(
                   R"({"canvas":{"w":240,"h":350},"elements":[{"category":"text","cx":1.3,"cy":0.1,"w":0.4,"h":0.05}]})"),
               ValidationError);
  EXPECT_THROW(layout_from_json(
                   R"({"canvas":{"w":240,"h":350},"elements":[{"category":"none","cx":0.5,"cy":0.1,"w":0.4,"h":0.05}]})"),
               ValidationError);
  EXPECT_THROW(layout_from_json(
                   R"({"canvas":{"w":240,"h":350},"elements":[{"category":"sticker","cx":0.5,"cy":0.1,"w":0.4,"h":0.05}]})"),
               ValidationError);
  EXPECT_THROW(layout_from_json("{\"canvas\":"), ParseError);
  std::mt19937_64 rng(1);
  EXPECT_THROW(layout_from_json(layout_to_json(random_layout(rng, 11))), ValidationError);
}

TEST(LayoutJson, RoundTrip) {
  std::mt19937_64 rng(42);
  for (int i = 0; i < 200; ++i) {
    const Layout l = random_layout(rng, static_cast<std::size_t>(i % 11));
    EXPECT_EQ(layout_from_json(layout_to_json(l)), l);
  }
}

TEST(SanitizeBox, ClampsFloatNoiseOnly) {
  const BBox b = sanitize_box({0.5, 0.5, 1.0 + 5e-7, 0.2});
  EXPECT_LE(b.right(), 1.0);
  EXPECT_GE(b.left(), 0.0);
  EXPECT_THROW(sanitize_box({0.5, 0.5, 0.0, 0.2}), ValidationError);
  EXPECT_THROW(sanitize_box({-0.1, 0.5, 0.1, 0.2}), ValidationError);
}

TEST(Flatten, SingleTextAndPadding) {
  Layout l;
  l.elements.push_back({Category::Text, {0.5, 0.1, 0.4, 0.05}});
  const Tensor f = flatten(l, 2);
  ASSERT_EQ(f.shape(), (Tensor::Shape{2, 9}));
  const std::vector<double> row0 = {1, 0, 0, 0, 0, 0.5, 0.1, 0.4, 0.05};
  const std::vector<double> row1 = {0, 0, 0, 0, 1, 0, 0, 0, 0};
  for (std::size_t c = 0; c < 9; ++c) {
    EXPECT_EQ(f.at(0, c), row0[c]);
    EXPECT_EQ(f.at(1, c), row1[c]);
  }
}

TEST(Flatten, EmptyAndCapacity) {
  const Tensor f = flatten(Layout{}, 1);
  EXPECT_EQ(f.at(0, 4), 1.0);
  std::mt19937_64 rng(3);
  Layout big = random_layout(rng, 11);
  EXPECT_THROW(flatten(big, 10), CapacityError);
}

TEST(Flatten, InverseIsIdentity) {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 100; ++i) {
    const Layout l = random_layout(rng, static_cast<std::size_t>(i % 11));
    EXPECT_EQ(layout_from_flat(flatten(l)), l);
  }
}

TEST(HardCounts, ArgmaxAndTies) {
  const auto all_text = hard_counts(batch_from_probs({{.6, .1, .1, .1, .1}, {.9, 0, 0, .1, 0}, {.3, .2, .2, .2, .1}}));
  EXPECT_EQ(all_text[0], 3u);
  const auto mixed = hard_counts(batch_from_probs({{.6, .1, .1, .1, .1}, {.1, .6, .1, .1, .1}}));
  EXPECT_EQ(mixed[0], 1u);
  EXPECT_EQ(mixed[1], 1u);
  const auto tie = hard_counts(batch_from_probs({{.4, .1, .4, .05, .05}}));
  EXPECT_EQ(tie[0], 1u);
  EXPECT_EQ(tie[2], 0u);
}

TEST(HardCounts, SumToQueries) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 1);
  for (std::size_t q = 1; q <= 10; ++q) {
    std::vector<std::vector<double>> rows(q, std::vector<double>(5));
    for (auto& r : rows) {
      double s = 0;
      for (double& v : r) s += (v = u(rng));
      for (double& v : r) v /= s;
    }
    std::size_t total = 0;
    for (auto n : hard_counts(batch_from_probs(rows))) total += n;
    EXPECT_EQ(total, q);
  }
}

TEST(Geometry, IouAndIntersection) {
  const BBox a{0.5, 0.5, 0.2, 0.2};
  EXPECT_NEAR(iou(a, a), 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(iou(a, {0.9, 0.9, 0.1, 0.1}), 0.0);
  EXPECT_NEAR(intersection_area(a, {0.6, 0.5, 0.2, 0.2}), 0.02, 1e-15);
}

TEST(PredictionJson, RoundTrip) {
  PredictionBatch p = batch_from_probs({{.6, .1, .1, .1, .1}, {.2, .2, .2, .2, .2}});
  p.boxes.at(1, 2) = 0.125;
  const PredictionBatch q = prediction_from_json(prediction_to_json(p));
  EXPECT_EQ(q.probs, p.probs);
  EXPECT_EQ(q.boxes, p.boxes);
}
