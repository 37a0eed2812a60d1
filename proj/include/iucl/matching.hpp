#pragma once

#include <vector>

#include "iucl/core.hpp"

namespace iucl {

struct MatchWeights {
  double cls = 1.0;
  double box = 5.0;
};

// Square Q x Q matching cost between predictions (rows) and ground-truth
// slots (columns, padded with None targets as produced by flatten()).
//   real target t:  cls * (1 - p_q[cat_t]) + box * L1(b_q, b_t)
//   None target:    cls * (1 - p_q[None])
Tensor build_cost(const PredictionBatch& pred, const Tensor& gt_flat,
                  const MatchWeights& weights = {});

// assignment[q] is the target column matched to query q.
using Assignment = std::vector<std::size_t>;

// Minimum-cost perfect assignment of a square finite cost matrix, O(n^3).
// Among optimal assignments the lexicographically smallest is returned.
Assignment hungarian(const Tensor& cost);

double assignment_cost(const Tensor& cost, const Assignment& a);

}  // namespace iucl
