#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "iucl/tensor.hpp"

namespace iucl::ad {

class Tape;

// Handle to a node recorded on a Tape. Cheap to copy; valid for the
// lifetime of the owning tape.
class Var {
 public:
  Var() = default;
  const Tensor& value() const;
  Tape& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Reverse-mode tape. Nodes are appended in evaluation order, so the node
// vector is already a topological order; backward walks it in reverse.
// A tape is consumed by a single backward() call.
class Tape {
 public:
  // Receives the node's own value and adjoint and accumulates into the
  // parents' adjoints.
  using Pullback = std::function<void(Tape&, const Tensor& out, const Tensor& adjoint)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value);       // differentiable input
  Var constant(Tensor value);   // no gradient flows into it

  // Records a derived node. `parents` decide whether a gradient is needed.
  Var record(Tensor value, std::span<const Var> parents, Pullback pullback);

  void backward(Var root);
  const Tensor& grad(Var v) const;
  const Tensor& value(std::size_t id) const { return nodes_[id].value; }

  Tensor& adjoint(std::size_t id) { return nodes_[id].adjoint; }
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }

  std::size_t size() const noexcept { return nodes_.size(); }
  std::size_t pullbacks_run() const noexcept { return pullbacks_run_; }
  bool consumed() const noexcept { return consumed_; }

 private:
  struct Node {
    Tensor value;
    Tensor adjoint;
    Pullback pullback;
    bool needs_grad = false;
  };
  void check_open() const;

  std::vector<Node> nodes_;
  std::size_t pullbacks_run_ = 0;
  bool consumed_ = false;
};

// Elementwise ops require equal shapes unless stated otherwise.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double k);
Var add_scalar(Var a, double k);
Var add_row(Var a, Var row);  // a: r x c, row: c (broadcast over rows)
Var matmul(Var a, Var b);     // (m x k) * (k x n)
Var exp(Var a);
Var log(Var a);
Var abs(Var a);                    // d|x|/dx = 0 at x = 0
Var max_with_scalar(Var a, double s);  // gradient 0 where a == s
Var relu(Var a);                   // gradient 0 at 0
Var sigmoid(Var a);
Var softmax(Var a);                // over the last axis, max-shifted
Var sum(Var a);                    // -> scalar
Var mean(Var a);                   // -> scalar
Var mean_rows(Var a);              // r x c -> 1 x c
Var concat_cols(Var a, Var b);     // (r x p), (r x q) -> r x (p+q)
Var slice_cols(Var a, std::size_t begin, std::size_t end);
Var gather(Var a, std::vector<std::size_t> flat_indices);  // -> 1-D

// Scalar function of a list of parameter tensors, built on the given tape.
using ScalarFn = std::function<Var(Tape&, std::span<const Var>)>;

struct GradcheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
};

// Central differences against the tape gradient. The error per coordinate is
// |analytic - numeric| / max(1, |numeric|).
GradcheckResult gradcheck(const ScalarFn& f, const std::vector<Tensor>& point,
                          double h = 1e-5);

// Runs f once and returns (value, gradient per parameter).
std::pair<double, std::vector<Tensor>> value_and_grad(const ScalarFn& f,
                                                      const std::vector<Tensor>& point);

}  // namespace iucl::ad
