#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "iucl/genmodel.hpp"
#include "iucl/rng.hpp"

using namespace iucl;

namespace {

std::vector<Sample> small_dataset(std::size_t n, std::uint64_t seed) {
  DatasetSpec spec;
  spec.n_samples = n;
  spec.seed = seed;
  return generate(spec);
}

double mean_of(const std::vector<double>& v, std::size_t from, std::size_t to) {
  return std::accumulate(v.begin() + static_cast<long>(from), v.begin() + static_cast<long>(to), 0.0) /
         static_cast<double>(to - from);
}

}  // namespace

TEST(Model, ParameterShapes) {
  const ModelConfig cfg;
  const ModelParams p = ModelParams::init(cfg, 1);
  ASSERT_EQ(p.tensors.size(), ModelParams::names().size());
  EXPECT_EQ(p.tensors[6].shape(), (Tensor::Shape{10, 32}));  // queries
  EXPECT_EQ(p.tensors[7].shape(), (Tensor::Shape{9, 32}));   // partial embedding
  EXPECT_EQ(p.tensors[15].shape(), (Tensor::Shape{4}));
  EXPECT_EQ(ModelParams::init(cfg, 1), p);
  EXPECT_NE(ModelParams::init(cfg, 2), p);
  ModelConfig bad;
  bad.queries = 11;
  EXPECT_THROW(validate(bad), ValidationError);
}

TEST(Model, OutputRanges) {
  const auto data = small_dataset(3, 1);
  const ModelParams p = ModelParams::init({}, 5);
  for (const Sample& s : data) {
    const PredictionBatch pred = forward(p, make_input(p.config, s.saliency, s.attribute, 9, s.partial));
    ASSERT_EQ(pred.queries(), 10u);
    for (std::size_t q = 0; q < 10; ++q) {
      double total = 0;
      for (std::size_t c = 0; c < 5; ++c) total += pred.probs.at(q, c);
      EXPECT_NEAR(total, 1.0, 1e-9);
      for (std::size_t k = 0; k < 4; ++k) {
        EXPECT_GT(pred.boxes.at(q, k), 0.0);
        EXPECT_LT(pred.boxes.at(q, k), 1.0);
      }
    }
    EXPECT_NO_THROW(validate(pred));
  }
}

TEST(Model, AbsentPartialEqualsEmptyPartial) {
  const auto data = small_dataset(1, 2);
  const ModelParams p = ModelParams::init({}, 3);
  const PredictionBatch a = forward(p, make_input(p.config, data[0].saliency, AttributeKind::LogoNoEmb, 4));
  const PredictionBatch b =
      forward(p, make_input(p.config, data[0].saliency, AttributeKind::LogoNoEmb, 4, PartialLayout{}));
  EXPECT_EQ(a.probs, b.probs);
  EXPECT_EQ(a.boxes, b.boxes);
  EXPECT_EQ(*a.logits, *b.logits);
}

TEST(Model, ForwardIsPure) {
  const auto data = small_dataset(1, 4);
  const ModelParams p = ModelParams::init({}, 3);
  const ModelInput in = make_input(p.config, data[0].saliency, AttributeKind::TextOnly, 8, data[0].partial);
  const PredictionBatch a = forward(p, in), b = forward(p, in);
  EXPECT_EQ(a.probs, b.probs);
  EXPECT_EQ(a.boxes, b.boxes);
}

TEST(Model, PartialChangesQueries) {
  const auto data = small_dataset(1, 6);
  const ModelParams p = ModelParams::init({}, 3);
  const Tensor without = query_inputs(p, make_input(p.config, data[0].saliency, AttributeKind::TextOnly, 1));
  const Tensor with =
      query_inputs(p, make_input(p.config, data[0].saliency, AttributeKind::TextOnly, 1, data[0].partial));
  EXPECT_NE(with, without);
}

TEST(Model, GradientsMatchFiniteDifferences) {
  const auto data = small_dataset(1, 9);
  ModelConfig cfg;
  cfg.feature_dim = 4;
  cfg.query_dim = 6;
  cfg.head_hidden = 5;
  const ModelParams p = ModelParams::init(cfg, 2);
  PartialLayout pl;
  pl.set_box_slot(1, 0, 0.3);
  const ModelInput in = make_input(cfg, data[0].saliency, AttributeKind::LogoNoEmb, 3, pl);
  const auto f = [&](ad::Tape& tape, std::span<const ad::Var> params) {
    const ForwardVars v = forward(tape, params, cfg, in);
    return ad::add(ad::sum(ad::mul(v.pred.boxes, v.pred.boxes)), ad::sum(ad::mul(v.pred.probs, v.pred.probs)));
  };
  // A cell bias sits within 1e-5 of a relu kink here, hence the small step.
  EXPECT_LT(ad::gradcheck(f, p.tensors, 1e-6).max_rel_error, 1e-6);
}

TEST(Train, ZeroEpochsKeepsInit) {
  const auto data = small_dataset(4, 1);
  TrainConfig tc;
  tc.epochs = 0;
  tc.seed = 13;
  tc.threads = 1;
  const TrainResult r = train({}, data, tc);
  EXPECT_TRUE(r.history.epochs.empty());
  EXPECT_TRUE(r.history.step_totals.empty());
  EXPECT_EQ(r.params, ModelParams::init({}, mix_seed(13, 0)));
}

TEST(Train, LossDecreasesAndRunsAreIdentical) {
  const auto data = small_dataset(32, 5);
  TrainConfig tc;
  tc.epochs = 200;
  tc.batch_size = 32;
  tc.seed = 1;
  tc.threads = 1;
  const TrainResult a = train({}, data, tc);
  ASSERT_EQ(a.history.step_totals.size(), 200u);
  EXPECT_LT(mean_of(a.history.step_totals, 150, 200), mean_of(a.history.step_totals, 0, 50));
  EXPECT_DOUBLE_EQ(a.history.epochs.front().lr, 1e-4);
  EXPECT_DOUBLE_EQ(a.history.epochs[133].lr, 1e-4);
  EXPECT_DOUBLE_EQ(a.history.epochs[134].lr, 1e-5);

  tc.epochs = 3;
  const TrainResult one = train({}, data, tc);
  tc.threads = 2;
  const TrainResult two = train({}, data, tc);
  EXPECT_EQ(history_to_json(one.history), history_to_json(two.history));
  EXPECT_EQ(one.params, two.params);
}

TEST(Train, NoiseMovesTrainedOutputs) {
  const auto data = small_dataset(8, 3);
  TrainConfig tc;
  tc.epochs = 1;
  tc.batch_size = 8;
  tc.threads = 1;
  const TrainResult r = train({}, data, tc);
  const PredictionBatch a = forward(r.params, make_input(r.params.config, data[0].saliency, AttributeKind::TextOnly, 4));
  const PredictionBatch b = forward(r.params, make_input(r.params.config, data[0].saliency, AttributeKind::LogoNoEmb, 4));
  double diff = 0;
  for (std::size_t i = 0; i < a.probs.size(); ++i) diff = std::max(diff, std::abs(a.probs[i] - b.probs[i]));
  EXPECT_GT(diff, 1e-9);
}

TEST(Decode, DropsNoneAndTinyBoxes) {
  PredictionBatch p{Tensor::matrix(3, 5, {.9, .1, 0, 0, 0, 0, 0, 0, .1, .9, 0, .8, .2, 0, 0}),
                    Tensor::matrix(3, 4, {.5, .5, .2, .1, .5, .5, .2, .2, .5, .5, 1e-3, 1e-3}), std::nullopt};
  const Layout l = decode(p);
  ASSERT_EQ(l.elements.size(), 1u);
  EXPECT_EQ(l.elements[0].category, Category::Text);
  PredictionBatch edge{Tensor::matrix(1, 5, {1, 0, 0, 0, 0}), Tensor::matrix(1, 4, {.95, .5, .2, .2}), std::nullopt};
  EXPECT_LE(decode(edge).elements[0].box.right(), 1.0);
}

TEST(Evaluate, UntrainedSmoke) {
  const auto data = small_dataset(6, 8);
  const ModelParams p = ModelParams::init({}, 1);
  const MetricReport attr = evaluate(p, data, {EvalMode::Attribute, AttributeKind::LogoNoEmb, 2});
  ASSERT_TRUE(attr.r_lac.has_value());
  EXPECT_GE(*attr.r_lac, 0.0);
  EXPECT_LE(*attr.r_lac, 1.0);
  EXPECT_FALSE(attr.r_plc.has_value());
  const MetricReport part = evaluate(p, data, {EvalMode::Partial, AttributeKind::Unspecified, 2});
  ASSERT_TRUE(part.r_plc.has_value());
  EXPECT_GE(*part.r_plc, 0.0);
  for (double v : {part.r_occ, part.r_ove, part.r_shm, part.r_sub}) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Checkpoint, RoundTripAndCorruption) {
  const ModelParams p = ModelParams::init({}, 4);
  const std::string bytes = encode_checkpoint(p);
  EXPECT_EQ(decode_checkpoint(bytes), p);
  EXPECT_THROW(decode_checkpoint(bytes.substr(0, bytes.size() - 3)), FormatError);
  EXPECT_THROW(decode_checkpoint(bytes + "x"), FormatError);
  std::string bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(decode_checkpoint(bad), FormatError);
}

TEST(Model, InjectionTouchesOnlyConstrainedRows) {
  const auto data = small_dataset(1, 10);
  const ModelParams p = ModelParams::init({}, 7);
  const Tensor base = query_inputs(p, make_input(p.config, data[0].saliency, AttributeKind::TextOnly, 1));
  for (std::size_t i = 0; i < 10; ++i) {
    PartialLayout pl;
    pl.set_box_slot(i, 2, 0.4);
    if (i % 2) pl.set_category(i, Category::Logo);
    const Tensor q = query_inputs(p, make_input(p.config, data[0].saliency, AttributeKind::TextOnly, 1, pl));
    for (std::size_t r = 0; r < 10; ++r) {
      bool same = true;
      for (std::size_t c = 0; c < q.cols(); ++c) same = same && q.at(r, c) == base.at(r, c);
      EXPECT_EQ(same, r != i) << "row " << r << " with constraint on " << i;
    }
  }
}

TEST(Model, TotalLossGradientsAtInit) {
  const auto data = small_dataset(3, 12);
  ModelConfig cfg;
  cfg.feature_dim = 4;
  cfg.query_dim = 6;
  cfg.head_hidden = 5;
  const ModelParams p = ModelParams::init(cfg, 5);
  for (const Sample& s : data) {
    const ModelInput in = make_input(cfg, s.saliency, s.attribute, 3, s.partial);
    const auto f = [&](ad::Tape& tape, std::span<const ad::Var> params) {
      const ForwardVars v = forward(tape, params, cfg, in);
      const LossParts parts = compute_losses(v.pred, s.layout, s.attribute, &s.partial, nullptr, {});
      return total_loss(parts, {});
    };
    EXPECT_LT(ad::gradcheck(f, p.tensors, 1e-6).max_rel_error, 1e-4);
  }
}

TEST(Decode, ReflattenReproducesOneHotRows) {
  const auto data = small_dataset(20, 14);
  for (const Sample& s : data) {
    // One-hot prediction with None rows interleaved.
    const Tensor gt = flatten(s.layout);
    PredictionBatch p{Tensor({10, 5}), Tensor({10, 4}, 0.5), std::nullopt};
    std::vector<std::size_t> real_rows;
    for (std::size_t r = 0, e = 0; r < 10; ++r) {
      const bool use = e < s.layout.elements.size() && (r % 3 != 1 || 10 - r <= s.layout.elements.size() - e);
      if (use) {
        for (std::size_t c = 0; c < 9; ++c) (c < 5 ? p.probs.at(r, c) : p.boxes.at(r, c - 5)) = gt.at(e, c);
        real_rows.push_back(r);
        ++e;
      } else {
        p.probs.at(r, 4) = 1.0;
      }
    }
    const Tensor back = flatten(decode(p));
    for (std::size_t k = 0; k < real_rows.size(); ++k)
      for (std::size_t c = 0; c < 9; ++c) {
        const double v = c < 5 ? p.probs.at(real_rows[k], c) : p.boxes.at(real_rows[k], c - 5);
        EXPECT_EQ(back.at(k, c), v);
      }
  }
}
