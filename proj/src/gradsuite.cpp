#include "iucl/gradsuite.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "iucl/losses.hpp"
#include "iucl/rng.hpp"

namespace iucl {

using ad::Tape;
using ad::Var;

namespace {

using Rng = std::mt19937_64;

Tensor normal_tensor(Tensor::Shape shape, double sd, Rng& rng) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> n(0.0, sd);
  for (double& v : t.storage()) v = n(rng);
  return t;
}

Layout random_layout(Rng& rng) {
  std::uniform_int_distribution<std::size_t> count(1, kMaxQueries);
  std::uniform_int_distribution<std::size_t> cat(0, 3);
  std::uniform_real_distribution<double> u(0.05, 0.3);
  Layout l;
  const std::size_t n = count(rng);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = u(rng), h = u(rng);
    std::uniform_real_distribution<double> cx(w / 2, 1 - w / 2), cy(h / 2, 1 - h / 2);
    l.elements.push_back({kRealCategories[cat(rng)], {cx(rng), cy(rng), w, h}});
  }
  return l;
}

// Random partial layout whose present slots all sit at least `gap` away
// from the prediction, so |.| is differentiable there.
PartialLayout random_partial(const Tensor& pred_flat, Rng& rng, double gap) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PartialLayout pl(pred_flat.rows());
  for (std::size_t r = 0; r < pl.rows(); ++r) {
    if (u(rng) < 0.5) continue;
    if (u(rng) < 0.3) {
      const std::size_t c = static_cast<std::size_t>(u(rng) * 4.0);
      const auto row = pred_flat.data().subspan(r * kFlatWidth, kNumCategories);
      if (std::all_of(row.begin(), row.end(), [&](double p) { return std::abs(p) > gap && std::abs(1 - p) > gap; }))
        pl.set_category(r, kRealCategories[std::min<std::size_t>(c, 3)]);
    }
    for (std::size_t f = 0; f < kBoxDims; ++f) {
      if (u(rng) < 0.5) continue;
      double v = u(rng);
      while (std::abs(v - pred_flat.at(r, kNumCategories + f)) < gap) v = u(rng);
      pl.set_box_slot(r, f, v);
    }
  }
  return pl;
}

AttributeKind random_attribute(Rng& rng) {
  return kAttributeKinds[std::uniform_int_distribution<std::size_t>(0, 3)(rng)];
}

// Every matched box coordinate at least `gap` from its target.
bool boxes_off_kink(const Tensor& probs, const Tensor& boxes, const Layout& gt, double gap) {
  const Tensor gt_flat = flatten(gt, probs.rows());
  const Assignment a = hungarian(build_cost({probs, boxes, std::nullopt}, gt_flat, {}));
  for (std::size_t r = 0; r < a.size(); ++r) {
    if (a[r] >= gt.elements.size()) continue;
    const BBox& b = gt.elements[a[r]].box;
    const double t[4] = {b.cx, b.cy, b.w, b.h};
    for (std::size_t k = 0; k < kBoxDims; ++k)
      if (std::abs(boxes.at(r, k) - t[k]) < gap) return false;
  }
  return true;
}

Tensor softmax_rows(const Tensor& z) {
  Tape t;
  return ad::softmax(t.constant(z)).value();
}

Tensor sigmoid_all(const Tensor& z) {
  Tape t;
  return ad::sigmoid(t.constant(z)).value();
}

}  // namespace

std::vector<GradcheckEntry> loss_gradcheck_suite(std::uint64_t seed, std::size_t points) {
  const LossWeights w;
  const std::size_t q = kMaxQueries;
  std::vector<GradcheckEntry> out = {{"soft_count"}, {"l_ac"}, {"l_ad"}, {"l_p"},
                                     {"l_plrm"},     {"l_rec"}, {"total"}};
  auto record = [&](std::size_t which, const ad::ScalarFn& f, const std::vector<Tensor>& x, double h) {
    const auto r = ad::gradcheck(f, x, h);
    out[which].max_rel_error = std::max(out[which].max_rel_error, r.max_rel_error);
    ++out[which].points;
  };

  for (std::size_t k = 0; k < points; ++k) {
    Rng rng(mix_seed(seed, k));
    const AttributeKind attr = random_attribute(rng);
    const Category cat = kRealCategories[std::uniform_int_distribution<std::size_t>(0, 3)(rng)];

    // Logits near the scale where epsilon-sharpened softmax is not saturated.
    const Tensor z = normal_tensor({q, kNumCategories}, 0.02, rng);
    record(0, [&](Tape&, std::span<const Var> p) { return soft_count(p[0], cat, w.epsilon); }, {z}, 1e-6);

    Tensor z_ac = z;
    {
      const Category a = *attribute_category(attr);
      Tape t;
      while (std::abs(1.0 - soft_count(t.constant(z_ac), a, w.epsilon).value().item()) < 1e-2)
        z_ac = normal_tensor({q, kNumCategories}, 0.02, rng);
    }
    record(1, [&](Tape&, std::span<const Var> p) { return attribute_consistent_loss(p[0], attr, w.epsilon); },
           {z_ac}, 1e-6);
    const AttributeKind attr_ad = attr == AttributeKind::WithEmbellishment ? AttributeKind::TextOnly : attr;
    record(2, [&](Tape&, std::span<const Var> p) { return attribute_disentangled_loss(p[0], attr_ad, w.epsilon); },
           {z}, 1e-6);

    const Tensor flat = normal_tensor({q, kFlatWidth}, 0.3, rng);
    const PartialLayout pl = random_partial(flat, rng, 1e-3);
    record(3, [&](Tape&, std::span<const Var> p) { return partial_loss(p[0], pl); }, {flat}, 1e-5);
    RandomMask mask = pl.present_count() > 0 ? sample_random_mask(pl, rng()) : full_mask(pl);
    record(4, [&](Tape&, std::span<const Var> p) { return masked_partial_loss(p[0], pl, mask); }, {flat}, 1e-5);

    // Reconstruction and total over raw logits and pre-sigmoid boxes.
    const Layout gt = random_layout(rng);
    Tensor zr = normal_tensor({q, kNumCategories}, 1.0, rng);
    Tensor br = normal_tensor({q, kBoxDims}, 1.0, rng);
    while (!boxes_off_kink(softmax_rows(zr), sigmoid_all(br), gt, 1e-3)) br = normal_tensor({q, kBoxDims}, 1.0, rng);
    auto vars = [](std::span<const Var> p) {
      return PredictionVars{p[0], ad::softmax(p[0]), ad::sigmoid(p[1])};
    };
    record(5, [&](Tape&, std::span<const Var> p) { return reconstruction_loss(vars(p), gt); }, {zr, br}, 1e-5);

    // Total with small logits so the attribute terms carry gradient.
    Tensor zt = normal_tensor({q, kNumCategories}, 0.02, rng);
    PartialLayout plt(q);
    RandomMask mt;
    for (;;) {
      const Tensor probs = softmax_rows(zt), boxes = sigmoid_all(br);
      Tape t;
      const double n_a = soft_count(t.constant(zt), *attribute_category(attr), w.epsilon).value().item();
      Tensor pf({q, kFlatWidth});
      for (std::size_t r = 0; r < q; ++r)
        for (std::size_t c = 0; c < kFlatWidth; ++c)
          pf.at(r, c) = c < kNumCategories ? probs.at(r, c) : boxes.at(r, c - kNumCategories);
      plt = random_partial(pf, rng, 1e-3);
      if (std::abs(1.0 - n_a) >= 1e-2 && boxes_off_kink(probs, boxes, gt, 1e-3) && plt.present_count() > 0) break;
      zt = normal_tensor({q, kNumCategories}, 0.02, rng);
      br = normal_tensor({q, kBoxDims}, 1.0, rng);
    }
    mt = sample_random_mask(plt, rng());
    record(6, [&](Tape&, std::span<const Var> p) {
      const PredictionVars pv = vars(p);
      return total_loss(compute_losses(pv, gt, attr, &plt, &mt, w), w);
    }, {zt, br}, 1e-6);
  }
  return out;
}

}  // namespace iucl
