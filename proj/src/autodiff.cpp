#include "iucl/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace iucl {

// ---------------------------------------------------------------- Tensor

namespace {
std::size_t product(const Tensor::Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}
}  // namespace

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(product(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != product(shape_)) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                     " does not match shape " + shape_string(shape_));
  }
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols,
                      std::initializer_list<double> v) {
  return Tensor(Shape{rows, cols}, std::vector<double>(v));
}

std::size_t Tensor::rows() const noexcept {
  if (shape_.size() < 2) return 1;
  std::size_t r = 1;
  for (std::size_t i = 0; i + 1 < shape_.size(); ++i) r *= shape_[i];
  return r;
}

std::size_t Tensor::cols() const noexcept {
  if (shape_.empty()) return 1;
  return shape_.back();
}

double Tensor::item() const {
  if (data_.size() != 1) throw ShapeError("item() on non-scalar tensor " + shape_string(shape_));
  return data_[0];
}

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

std::string shape_string(const Tensor::Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

namespace ad {

// ---------------------------------------------------------------- Tape

const Tensor& Var::value() const { return tape_->value(id_); }

void Tape::check_open() const {
  if (consumed_) throw TapeReusedError("tape already consumed by backward()");
}

Var Tape::leaf(Tensor value) {
  check_open();
  if (!value.all_finite()) throw NonFiniteError("non-finite leaf value");
  nodes_.push_back(Node{std::move(value), Tensor{}, nullptr, true});
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  check_open();
  if (!value.all_finite()) throw NonFiniteError("non-finite constant value");
  nodes_.push_back(Node{std::move(value), Tensor{}, nullptr, false});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::span<const Var> parents, Pullback pullback) {
  check_open();
  if (!value.all_finite()) throw NonFiniteError("forward value is NaN or Inf");
  bool needs = false;
  for (const Var& p : parents) {
    if (&p.tape() != this) throw ShapeError("operands recorded on different tapes");
    needs = needs || nodes_[p.id()].needs_grad;
  }
  nodes_.push_back(Node{std::move(value), Tensor{}, needs ? std::move(pullback) : nullptr, needs});
  return Var(this, nodes_.size() - 1);
}

void Tape::backward(Var root) {
  check_open();
  if (&root.tape() != this) throw ShapeError("root belongs to another tape");
  if (!nodes_[root.id()].value.is_scalar()) {
    throw NonScalarRootError("backward root has shape " +
                             shape_string(nodes_[root.id()].value.shape()));
  }
  consumed_ = true;
  for (Node& n : nodes_) n.adjoint = Tensor(n.value.shape(), 0.0);
  nodes_[root.id()].adjoint[0] = 1.0;
  for (std::size_t i = root.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.needs_grad || !n.pullback) continue;
    n.pullback(*this, n.value, n.adjoint);
    ++pullbacks_run_;
  }
}

const Tensor& Tape::grad(Var v) const {
  if (!consumed_) throw TapeReusedError("grad() requested before backward()");
  return nodes_[v.id()].adjoint;
}

// ---------------------------------------------------------------- ops

namespace {

void require_same(const Var& a, const Var& b, const char* op) {
  if (!a.value().same_shape(b.value())) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.value().shape()) +
                     " vs " + shape_string(b.value().shape()));
  }
}

void require_matrix(const Var& a, const char* op) {
  if (a.value().rank() != 2) {
    throw ShapeError(std::string(op) + ": expected a matrix, got " +
                     shape_string(a.value().shape()));
  }
}

// Accumulates `scale_fn(i) * adj[i]` into the adjoint of `id` if it needs one.
template <typename F>
void accumulate(Tape& t, std::size_t id, const Tensor& adj, F&& local) {
  if (!t.needs_grad(id)) return;
  Tensor& g = t.adjoint(id);
  for (std::size_t i = 0; i < adj.size(); ++i) g[i] += local(i) * adj[i];
}

template <typename F>
Var unary(Var a, F&& f, Tape::Pullback pb) {
  const Tensor& x = a.value();
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  const Var parents[] = {a};
  return a.tape().record(std::move(out), parents, std::move(pb));
}

}  // namespace

Var add(Var a, Var b) {
  require_same(a, b, "add");
  Tensor out(a.value().shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + b.value()[i];
  const Var parents[] = {a, b};
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), parents, [ia, ib](Tape& t, const Tensor&, const Tensor& adj) {
    accumulate(t, ia, adj, [](std::size_t) { return 1.0; });
    accumulate(t, ib, adj, [](std::size_t) { return 1.0; });
  });
}

Var sub(Var a, Var b) {
  require_same(a, b, "sub");
  Tensor out(a.value().shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] - b.value()[i];
  const Var parents[] = {a, b};
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), parents, [ia, ib](Tape& t, const Tensor&, const Tensor& adj) {
    accumulate(t, ia, adj, [](std::size_t) { return 1.0; });
    accumulate(t, ib, adj, [](std::size_t) { return -1.0; });
  });
}

Var mul(Var a, Var b) {
  require_same(a, b, "mul");
  Tensor out(a.value().shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
  const Var parents[] = {a, b};
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), parents, [ia, ib](Tape& t, const Tensor&, const Tensor& adj) {
    const Tensor& va = t.value(ia);
    const Tensor& vb = t.value(ib);
    accumulate(t, ia, adj, [&](std::size_t i) { return vb[i]; });
    accumulate(t, ib, adj, [&](std::size_t i) { return va[i]; });
  });
}

Var scale(Var a, double k) {
  const std::size_t ia = a.id();
  return unary(a, [k](double x) { return k * x; }, [ia, k](Tape& t, const Tensor&, const Tensor& adj) {
    accumulate(t, ia, adj, [k](std::size_t) { return k; });
  });
}

Var add_scalar(Var a, double k) {
  const std::size_t ia = a.id();
  return unary(a, [k](double x) { return x + k; }, [ia](Tape& t, const Tensor&, const Tensor& adj) {
    accumulate(t, ia, adj, [](std::size_t) { return 1.0; });
  });
}

Var add_row(Var a, Var row) {
  const Tensor& x = a.value();
  const Tensor& r = row.value();
  if (r.size() != x.cols() || x.rank() < 1) {
    throw ShapeError("add_row: row of size " + std::to_string(r.size()) +
                     " does not match " + shape_string(x.shape()));
  }
  Tensor out(x.shape());
  const std::size_t cols = x.cols();
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + r[i % cols];
  const Var parents[] = {a, row};
  const std::size_t ia = a.id(), ir = row.id();
  return a.tape().record(std::move(out), parents, [ia, ir, cols](Tape& t, const Tensor&, const Tensor& adj) {
    accumulate(t, ia, adj, [](std::size_t) { return 1.0; });
    if (t.needs_grad(ir)) {
      Tensor& g = t.adjoint(ir);
      for (std::size_t i = 0; i < adj.size(); ++i) g[i % cols] += adj[i];
    }
  });
}

Var matmul(Var a, Var b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  const std::size_t m = x.shape()[0], k = x.shape()[1], n = y.shape()[1];
  if (y.shape()[0] != k) {
    throw ShapeError("matmul: inner dimensions differ " + shape_string(x.shape()) + " * " +
                     shape_string(y.shape()));
  }
  Tensor out({m, n});
  {
    const double* __restrict xs = x.data().data();
    const double* __restrict ys = y.data().data();
    double* __restrict os = out.data().data();
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t p = 0; p < k; ++p) {
        const double xip = xs[i * k + p];
        if (xip == 0.0) continue;
        const double* __restrict yr = ys + p * n;
        double* __restrict orow = os + i * n;
        for (std::size_t j = 0; j < n; ++j) orow[j] += xip * yr[j];
      }
    }
  }
  const Var parents[] = {a, b};
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), parents, [ia, ib, m, k, n](Tape& t, const Tensor&, const Tensor& adj) {
    const double* __restrict xs = t.value(ia).data().data();
    const double* __restrict ys = t.value(ib).data().data();
    const double* __restrict ds = adj.data().data();
    if (t.needs_grad(ia)) {  // dA = dC * B^T
      double* __restrict ga = t.adjoint(ia).data().data();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double s = 0.0;
          for (std::size_t j = 0; j < n; ++j) s += ds[i * n + j] * ys[p * n + j];
          ga[i * k + p] += s;
        }
    }
    if (t.needs_grad(ib)) {  // dB = A^T * dC
      double* __restrict gb = t.adjoint(ib).data().data();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double xip = xs[i * k + p];
          if (xip == 0.0) continue;
          for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += xip * ds[i * n + j];
        }
    }
  });
}

Var exp(Var a) {
  const std::size_t ia = a.id();
  return unary(a, [](double x) { return std::exp(x); },
               [ia](Tape& t, const Tensor& out, const Tensor& adj) {
                 accumulate(t, ia, adj, [&](std::size_t i) { return out[i]; });
               });
}

Var log(Var a) {
  const std::size_t ia = a.id();
  return unary(a, [](double x) { return std::log(x); },
               [ia](Tape& t, const Tensor&, const Tensor& adj) {
                 const Tensor& x = t.value(ia);
                 accumulate(t, ia, adj, [&](std::size_t i) { return 1.0 / x[i]; });
               });
}

Var abs(Var a) {
  const std::size_t ia = a.id();
  return unary(a, [](double x) { return std::abs(x); },
               [ia](Tape& t, const Tensor&, const Tensor& adj) {
                 const Tensor& x = t.value(ia);
                 accumulate(t, ia, adj, [&](std::size_t i) {
                   return x[i] > 0.0 ? 1.0 : (x[i] < 0.0 ? -1.0 : 0.0);
                 });
               });
}

Var max_with_scalar(Var a, double s) {
  const std::size_t ia = a.id();
  return unary(a, [s](double x) { return std::max(x, s); },
               [ia, s](Tape& t, const Tensor&, const Tensor& adj) {
                 const Tensor& x = t.value(ia);
                 accumulate(t, ia, adj, [&](std::size_t i) { return x[i] > s ? 1.0 : 0.0; });
               });
}

Var relu(Var a) { return max_with_scalar(a, 0.0); }

Var sigmoid(Var a) {
  const std::size_t ia = a.id();
  return unary(a,
               [](double x) {
                 if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
                 const double e = std::exp(x);
                 return e / (1.0 + e);
               },
               [ia](Tape& t, const Tensor& out, const Tensor& adj) {
                 accumulate(t, ia, adj, [&](std::size_t i) { return out[i] * (1.0 - out[i]); });
               });
}

Var softmax(Var a) {
  const Tensor& x = a.value();
  if (x.rank() == 0) throw ShapeError("softmax of a scalar");
  const std::size_t cols = x.cols();
  const std::size_t rows = x.size() / cols;
  Tensor out(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = (x.data().data() + (r * cols));
    double* o = &out[r * cols];
    const double m = *std::max_element(in, in + cols);
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) z += (o[c] = std::exp(in[c] - m));
    for (std::size_t c = 0; c < cols; ++c) o[c] /= z;
  }
  const Var parents[] = {a};
  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), parents,
                         [ia, rows, cols](Tape& t, const Tensor& y, const Tensor& adj) {
                           if (!t.needs_grad(ia)) return;
                           Tensor& g = t.adjoint(ia);
                           for (std::size_t r = 0; r < rows; ++r) {
                             double dot = 0.0;
                             for (std::size_t c = 0; c < cols; ++c)
                               dot += adj[r * cols + c] * y[r * cols + c];
                             for (std::size_t c = 0; c < cols; ++c) {
                               const std::size_t i = r * cols + c;
                               g[i] += y[i] * (adj[i] - dot);
                             }
                           }
                         });
}

Var sum(Var a) {
  const Tensor& x = a.value();
  double s = 0.0;
  for (double v : x.data()) s += v;
  const Var parents[] = {a};
  const std::size_t ia = a.id();
  return a.tape().record(Tensor::scalar(s), parents,
                         [ia](Tape& t, const Tensor&, const Tensor& adj) {
                           if (!t.needs_grad(ia)) return;
                           Tensor& g = t.adjoint(ia);
                           for (std::size_t i = 0; i < g.size(); ++i) g[i] += adj[0];
                         });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  return scale(sum(a), 1.0 / n);
}

Var mean_rows(Var a) {
  require_matrix(a, "mean_rows");
  const Tensor& x = a.value();
  const std::size_t rows = x.shape()[0], cols = x.shape()[1];
  if (rows == 0) throw ShapeError("mean_rows of an empty matrix");
  Tensor out({1, cols});
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[c] += x[r * cols + c];
  const double inv = 1.0 / static_cast<double>(rows);
  for (std::size_t c = 0; c < cols; ++c) out[c] *= inv;
  const Var parents[] = {a};
  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), parents,
                         [ia, cols, inv](Tape& t, const Tensor&, const Tensor& adj) {
                           if (!t.needs_grad(ia)) return;
                           Tensor& g = t.adjoint(ia);
                           for (std::size_t i = 0; i < g.size(); ++i) g[i] += adj[i % cols] * inv;
                         });
}

Var concat_cols(Var a, Var b) {
  require_matrix(a, "concat_cols");
  require_matrix(b, "concat_cols");
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  const std::size_t rows = x.shape()[0];
  if (y.shape()[0] != rows) {
    throw ShapeError("concat_cols: row counts differ " + shape_string(x.shape()) + " vs " +
                     shape_string(y.shape()));
  }
  const std::size_t p = x.shape()[1], q = y.shape()[1], n = p + q;
  Tensor out({rows, n});
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n((x.data().data() + (r * p)), p, &out[r * n]);
    std::copy_n((y.data().data() + (r * q)), q, &out[r * n + p]);
  }
  const Var parents[] = {a, b};
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), parents,
                         [ia, ib, rows, p, q, n](Tape& t, const Tensor&, const Tensor& adj) {
                           if (t.needs_grad(ia)) {
                             Tensor& g = t.adjoint(ia);
                             for (std::size_t r = 0; r < rows; ++r)
                               for (std::size_t c = 0; c < p; ++c) g[r * p + c] += adj[r * n + c];
                           }
                           if (t.needs_grad(ib)) {
                             Tensor& g = t.adjoint(ib);
                             for (std::size_t r = 0; r < rows; ++r)
                               for (std::size_t c = 0; c < q; ++c)
                                 g[r * q + c] += adj[r * n + p + c];
                           }
                         });
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  require_matrix(a, "slice_cols");
  const Tensor& x = a.value();
  const std::size_t rows = x.shape()[0], cols = x.shape()[1];
  if (begin >= end || end > cols) {
    throw ShapeError("slice_cols: bad range [" + std::to_string(begin) + "," +
                     std::to_string(end) + ") of " + shape_string(x.shape()));
  }
  const std::size_t w = end - begin;
  Tensor out({rows, w});
  for (std::size_t r = 0; r < rows; ++r) std::copy_n((x.data().data() + (r * cols + begin)), w, &out[r * w]);
  const Var parents[] = {a};
  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), parents,
                         [ia, rows, cols, begin, w](Tape& t, const Tensor&, const Tensor& adj) {
                           if (!t.needs_grad(ia)) return;
                           Tensor& g = t.adjoint(ia);
                           for (std::size_t r = 0; r < rows; ++r)
                             for (std::size_t c = 0; c < w; ++c)
                               g[r * cols + begin + c] += adj[r * w + c];
                         });
}

Var gather(Var a, std::vector<std::size_t> idx) {
  const Tensor& x = a.value();
  Tensor out({idx.size()});
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= x.size()) throw ShapeError("gather: index out of range");
    out[i] = x[idx[i]];
  }
  const Var parents[] = {a};
  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), parents,
                         [ia, idx = std::move(idx)](Tape& t, const Tensor&, const Tensor& adj) {
                           if (!t.needs_grad(ia)) return;
                           Tensor& g = t.adjoint(ia);
                           for (std::size_t i = 0; i < idx.size(); ++i) g[idx[i]] += adj[i];
                         });
}

// ---------------------------------------------------------------- checks

std::pair<double, std::vector<Tensor>> value_and_grad(const ScalarFn& f,
                                                      const std::vector<Tensor>& point) {
  Tape tape;
  std::vector<Var> leaves;
  leaves.reserve(point.size());
  for (const Tensor& p : point) leaves.push_back(tape.leaf(p));
  Var y = f(tape, leaves);
  const double value = y.value().item();
  tape.backward(y);
  std::vector<Tensor> grads;
  grads.reserve(leaves.size());
  for (Var v : leaves) grads.push_back(tape.grad(v));
  return {value, std::move(grads)};
}

namespace {
double evaluate(const ScalarFn& f, const std::vector<Tensor>& point) {
  Tape tape;
  std::vector<Var> leaves;
  leaves.reserve(point.size());
  for (const Tensor& p : point) leaves.push_back(tape.constant(p));
  return f(tape, leaves).value().item();
}
}  // namespace

GradcheckResult gradcheck(const ScalarFn& f, const std::vector<Tensor>& point, double h) {
  const auto [value, grads] = value_and_grad(f, point);
  (void)value;
  GradcheckResult result;
  std::vector<Tensor> probe = point;
  for (std::size_t p = 0; p < probe.size(); ++p) {
    for (std::size_t i = 0; i < probe[p].size(); ++i) {
      const double x0 = probe[p][i];
      probe[p][i] = x0 + h;
      const double fp = evaluate(f, probe);
      probe[p][i] = x0 - h;
      const double fm = evaluate(f, probe);
      probe[p][i] = x0;
      const double numeric = (fp - fm) / (2.0 * h);
      const double err = std::abs(grads[p][i] - numeric) / std::max(1.0, std::abs(numeric));
      if (err > result.max_rel_error) result = {err, p, i};
    }
  }
  return result;
}

}  // namespace ad
}  // namespace iucl
