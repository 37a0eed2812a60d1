#pragma once

#include <optional>
#include <string>

#include "iucl/autodiff.hpp"
#include "iucl/constraints.hpp"
#include "iucl/matching.hpp"

namespace iucl {

struct LossWeights {
  double beta = 1.0;     // attribute-consistent
  double gamma = 0.1;    // attribute-disentangled
  double eta = 1.0;      // (masked) partial constraint
  double epsilon = 100;  // soft-count sharpness
};

// Tape-resident view of a prediction batch.
struct PredictionVars {
  ad::Var logits;  // Q x 5
  ad::Var probs;   // Q x 5, softmax(logits)
  ad::Var boxes;   // Q x 4
};

// Puts a PredictionBatch on the tape as constants-or-leaves. When the batch
// has no logits, log(max(p, 1e-12)) stands in for them.
PredictionVars to_vars(ad::Tape& tape, const PredictionBatch& pred, bool differentiable);

// Q x 9 concatenation [probs | boxes].
ad::Var flatten(const PredictionVars& pred);

// Soft element count of one category: sum over queries of
// softmax(epsilon * logits)[c].
ad::Var soft_count(ad::Var logits, Category c, double epsilon);

// max(1 - N_a, 0). Throws UnspecifiedAttributeError.
ad::Var attribute_consistent_loss(ad::Var logits, AttributeKind attr, double epsilon);

// Sum of soft counts over the undesired set. Throws UnspecifiedAttributeError.
ad::Var attribute_disentangled_loss(ad::Var logits, AttributeKind attr, double epsilon);

// Sum of |pred - PL| over the constrained slots; row i binds to query i.
ad::Var partial_loss(ad::Var pred_flat, const PartialLayout& pl);

// Same sum restricted to constrained slots the mask keeps.
ad::Var masked_partial_loss(ad::Var pred_flat, const PartialLayout& pl, const RandomMask& mask);

// Set loss against a Hungarian matching of the padded ground truth:
// mean over queries of -log p(matched category) plus box weight times the
// mean L1 distance over matched real elements. The matching itself is not
// differentiated.
ad::Var reconstruction_loss(const PredictionVars& pred, const Layout& gt,
                            const MatchWeights& weights = {});

struct LossParts {
  ad::Var rec;
  std::optional<ad::Var> ac;
  std::optional<ad::Var> ad;
  std::optional<ad::Var> plrm;
};

// L = rec + beta*ac + gamma*ad + eta*plrm; absent parts contribute 0.
ad::Var total_loss(const LossParts& parts, const LossWeights& weights);

struct LossReport {
  double l_rec = 0.0;
  double l_ac = 0.0;
  double l_ad = 0.0;
  double l_plrm = 0.0;
  double total = 0.0;
};

LossReport make_report(const LossParts& parts, ad::Var total);
std::string report_to_json(const LossReport& r);

// Builds every enabled part for one sample. `mask` may be null, in which case
// the plain partial loss is used.
LossParts compute_losses(const PredictionVars& pred, const Layout& gt, AttributeKind attr,
                         const PartialLayout* partial, const RandomMask* mask,
                         const LossWeights& weights);

}  // namespace iucl
