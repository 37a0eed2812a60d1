#include "iucl/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace iucl {

Tensor build_cost(const PredictionBatch& pred, const Tensor& gt_flat, const MatchWeights& w) {
  const std::size_t q = pred.queries();
  if (gt_flat.rank() != 2 || gt_flat.cols() != kFlatWidth || gt_flat.rows() != q) {
    throw ShapeError("build_cost: ground truth must be flattened to " + std::to_string(q) +
                     " x 9, got " + shape_string(gt_flat.shape()));
  }
  if (pred.boxes.rows() != q) throw ShapeError("build_cost: probs and boxes disagree on Q");
  Tensor cost({q, q});
  for (std::size_t t = 0; t < q; ++t) {
    const auto target = gt_flat.data().subspan(t * kFlatWidth, kFlatWidth);
    const Category cat = argmax_category(target.first(kNumCategories));
    for (std::size_t r = 0; r < q; ++r) {
      double c = w.cls * (1.0 - pred.probs.at(r, index_of(cat)));
      if (cat != Category::None) {
        double l1 = 0.0;
        for (std::size_t k = 0; k < kBoxDims; ++k)
          l1 += std::abs(pred.boxes.at(r, k) - target[kNumCategories + k]);
        c += w.box * l1;
      }
      cost.at(r, t) = c;
    }
  }
  return cost;
}

double assignment_cost(const Tensor& cost, const Assignment& a) {
  double s = 0.0;
  for (std::size_t r = 0; r < a.size(); ++r) s += cost.at(r, a[r]);
  return s;
}

namespace {

// Kuhn augmenting path restricted to allowed edges.
bool augment(std::size_t r, const std::vector<std::vector<char>>& allowed,
             std::vector<std::ptrdiff_t>& col_owner, std::vector<char>& seen) {
  for (std::size_t c = 0; c < allowed[r].size(); ++c) {
    if (!allowed[r][c] || seen[c]) continue;
    seen[c] = 1;
    if (col_owner[c] < 0 ||
        augment(static_cast<std::size_t>(col_owner[c]), allowed, col_owner, seen)) {
      col_owner[c] = static_cast<std::ptrdiff_t>(r);
      return true;
    }
  }
  return false;
}

bool has_perfect_matching(const std::vector<std::vector<char>>& allowed,
                          const std::vector<std::size_t>& rows, std::size_t n) {
  std::vector<std::ptrdiff_t> owner(n, -1);
  for (std::size_t r : rows) {
    std::vector<char> seen(n, 0);
    if (!augment(r, allowed, owner, seen)) return false;
  }
  return true;
}

}  // namespace

Assignment hungarian(const Tensor& cost) {
  if (cost.rank() != 2 || cost.rows() != cost.cols()) {
    throw ShapeError("hungarian: cost matrix must be square, got " + shape_string(cost.shape()));
  }
  if (!cost.all_finite()) throw NonFiniteError("hungarian: cost matrix has NaN or Inf");
  const std::size_t n = cost.rows();
  if (n == 0) return {};

  // Shortest augmenting path with row/column potentials (1-based internally).
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost.at(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  // Every optimal assignment is a perfect matching on the zero-reduced-cost
  // edges of the optimal potentials, so the lexicographically smallest
  // optimum is found greedily on that graph.
  double scale = 1.0;
  for (double c : cost.data()) scale = std::max(scale, std::abs(c));
  const double tol = 1e-9 * scale;
  std::vector<std::vector<char>> tight(n, std::vector<char>(n, 0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      tight[i][j] = std::abs(cost.at(i, j) - u[i + 1] - v[j + 1]) <= tol;

  Assignment solver(n);
  for (std::size_t j = 1; j <= n; ++j) solver[p[j] - 1] = j - 1;

  Assignment result(n);
  std::vector<std::vector<char>> allowed = tight;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> rest;
    for (std::size_t k = i + 1; k < n; ++k) rest.push_back(k);
    bool fixed = false;
    for (std::size_t j = 0; j < n && !fixed; ++j) {
      if (!allowed[i][j]) continue;
      auto trial = allowed;
      for (std::size_t c = 0; c < n; ++c) trial[i][c] = (c == j);
      for (std::size_t k = i + 1; k < n; ++k) trial[k][j] = 0;
      if (has_perfect_matching(trial, rest, n)) {
        allowed = std::move(trial);
        result[i] = j;
        fixed = true;
      }
    }
    // Falls back to the solver's own assignment if tolerance split a tie.
    if (!fixed) return solver;
  }
  return result;
}

}  // namespace iucl
