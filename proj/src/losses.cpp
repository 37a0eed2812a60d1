#include "iucl/losses.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

namespace iucl {

using ad::Var;

PredictionVars to_vars(ad::Tape& tape, const PredictionBatch& pred, bool differentiable) {
  Tensor logits = pred.logits ? *pred.logits : Tensor(pred.probs.shape());
  if (!pred.logits) {
    for (std::size_t i = 0; i < logits.size(); ++i)
      logits[i] = std::log(std::max(pred.probs[i], 1e-12));
  }
  auto put = [&](Tensor t) { return differentiable ? tape.leaf(std::move(t)) : tape.constant(std::move(t)); };
  return {put(std::move(logits)), put(pred.probs), put(pred.boxes)};
}

Var flatten(const PredictionVars& pred) { return ad::concat_cols(pred.probs, pred.boxes); }

namespace {

Var zero(ad::Tape& tape) { return tape.constant(Tensor::scalar(0.0)); }

Var sharpened(Var logits, double epsilon) {
  if (!(epsilon > 0.0)) throw ValidationError("soft-count sharpness must be positive");
  if (logits.value().rank() != 2 || logits.value().cols() != kNumCategories)
    throw ShapeError("logits must be Q x 5, got " + shape_string(logits.value().shape()));
  return ad::softmax(ad::scale(logits, epsilon));
}

Var column_sum(Var probs, const std::vector<Category>& cats) {
  const std::size_t q = probs.value().rows();
  std::vector<std::size_t> idx;
  for (Category c : cats)
    for (std::size_t r = 0; r < q; ++r) idx.push_back(r * kNumCategories + index_of(c));
  if (idx.empty()) return zero(probs.tape());
  return ad::sum(ad::gather(probs, std::move(idx)));
}

Var slot_l1(Var pred_flat, const PartialLayout& pl, const Tensor* keep) {
  const Tensor& v = pred_flat.value();
  if (v.rank() != 2 || v.cols() != kFlatWidth || v.rows() != pl.rows()) {
    throw ShapeError("prediction " + shape_string(v.shape()) + " does not match partial layout " +
                     shape_string(pl.values().shape()));
  }
  std::vector<std::size_t> idx;
  std::vector<double> target;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!pl.present(i)) continue;
    if (keep && (*keep)[i] == 0.0) continue;
    idx.push_back(i);
    target.push_back(pl.values()[i]);
  }
  if (idx.empty()) return zero(pred_flat.tape());
  const std::size_t n = idx.size();
  Var picked = ad::gather(pred_flat, std::move(idx));
  Var goal = pred_flat.tape().constant(Tensor({n}, std::move(target)));
  return ad::sum(ad::abs(ad::sub(picked, goal)));
}

}  // namespace

Var soft_count(Var logits, Category c, double epsilon) {
  return column_sum(sharpened(logits, epsilon), {c});
}

Var attribute_consistent_loss(Var logits, AttributeKind attr, double epsilon) {
  const auto a = attribute_category(attr);
  if (!a) throw UnspecifiedAttributeError("attribute-consistent loss needs a specified attribute");
  Var n = soft_count(logits, *a, epsilon);
  return ad::max_with_scalar(ad::add_scalar(ad::scale(n, -1.0), 1.0), 0.0);
}

Var attribute_disentangled_loss(Var logits, AttributeKind attr, double epsilon) {
  if (!attribute_category(attr))
    throw UnspecifiedAttributeError("attribute-disentangled loss needs a specified attribute");
  const auto undesired = undesired_set(attr);
  if (undesired.empty()) {
    sharpened(logits, epsilon);  // shape and finiteness checks only
    return zero(logits.tape());
  }
  return column_sum(sharpened(logits, epsilon), undesired);
}

Var partial_loss(Var pred_flat, const PartialLayout& pl) { return slot_l1(pred_flat, pl, nullptr); }

Var masked_partial_loss(Var pred_flat, const PartialLayout& pl, const RandomMask& mask) {
  if (!mask.keep.same_shape(pl.values())) throw ShapeError("mask shape differs from partial layout");
  return slot_l1(pred_flat, pl, &mask.keep);
}

Var reconstruction_loss(const PredictionVars& pred, const Layout& gt, const MatchWeights& weights) {
  const Tensor& probs = pred.probs.value();
  const Tensor& boxes = pred.boxes.value();
  const std::size_t q = probs.rows();
  const Tensor gt_flat = flatten(gt, q);
  const PredictionBatch snapshot{probs, boxes, std::nullopt};
  const Assignment match = hungarian(build_cost(snapshot, gt_flat, weights));

  std::vector<std::size_t> cls_idx;
  std::vector<std::size_t> box_idx;
  std::vector<double> box_target;
  std::size_t matched_real = 0;
  for (std::size_t r = 0; r < q; ++r) {
    const std::size_t t = match[r];
    const auto row = gt_flat.data().subspan(t * kFlatWidth, kFlatWidth);
    const Category cat = argmax_category(row.first(kNumCategories));
    cls_idx.push_back(r * kNumCategories + index_of(cat));
    if (cat == Category::None) continue;
    ++matched_real;
    for (std::size_t k = 0; k < kBoxDims; ++k) {
      box_idx.push_back(r * kBoxDims + k);
      box_target.push_back(row[kNumCategories + k]);
    }
  }
  Var nll = ad::scale(ad::sum(ad::log(ad::gather(pred.probs, std::move(cls_idx)))),
                      -weights.cls / static_cast<double>(q));
  if (matched_real == 0) return nll;
  const std::size_t n = box_idx.size();
  Var goal = pred.boxes.tape().constant(Tensor({n}, std::move(box_target)));
  Var l1 = ad::sum(ad::abs(ad::sub(ad::gather(pred.boxes, std::move(box_idx)), goal)));
  return ad::add(nll, ad::scale(l1, weights.box / static_cast<double>(matched_real)));
}

Var total_loss(const LossParts& parts, const LossWeights& w) {
  Var total = parts.rec;
  if (parts.ac) total = ad::add(total, ad::scale(*parts.ac, w.beta));
  if (parts.ad) total = ad::add(total, ad::scale(*parts.ad, w.gamma));
  if (parts.plrm) total = ad::add(total, ad::scale(*parts.plrm, w.eta));
  return total;
}

LossReport make_report(const LossParts& parts, Var total) {
  LossReport r;
  r.l_rec = parts.rec.value().item();
  if (parts.ac) r.l_ac = parts.ac->value().item();
  if (parts.ad) r.l_ad = parts.ad->value().item();
  if (parts.plrm) r.l_plrm = parts.plrm->value().item();
  r.total = total.value().item();
  return r;
}

std::string report_to_json(const LossReport& r) {
  nlohmann::json j{{"l_rec", r.l_rec}, {"l_ac", r.l_ac}, {"l_ad", r.l_ad}, {"l_plrm", r.l_plrm},
                   {"total", r.total}};
  return j.dump(2);
}

LossParts compute_losses(const PredictionVars& pred, const Layout& gt, AttributeKind attr,
                         const PartialLayout* partial, const RandomMask* mask,
                         const LossWeights& weights) {
  LossParts parts;
  parts.rec = reconstruction_loss(pred, gt);
  if (attr != AttributeKind::Unspecified) {
    parts.ac = attribute_consistent_loss(pred.logits, attr, weights.epsilon);
    parts.ad = attribute_disentangled_loss(pred.logits, attr, weights.epsilon);
  }
  if (partial && partial->present_count() > 0) {
    const Var flat = flatten(pred);
    parts.plrm = mask ? masked_partial_loss(flat, *partial, *mask) : partial_loss(flat, *partial);
  }
  return parts;
}

}  // namespace iucl
