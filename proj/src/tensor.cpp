#include "mufen/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <unordered_set>

namespace mufen {

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

namespace {

std::atomic<std::uint64_t> g_seq{1};

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

// f32 storage rounding plus the finite-everywhere invariant.
void finalize(Node& node) {
  if (node.dtype == Dtype::f32)
    for (double& v : node.values) v = static_cast<double>(static_cast<float>(v));
  for (double v : node.values)
    if (!std::isfinite(v))
      throw NumericError(std::string(node.op) + ": produced a non-finite value");
}

Dtype merge_dtype(const std::vector<NodePtr>& parents) {
  for (const auto& p : parents)
    if (p->dtype == Dtype::f64) return Dtype::f64;
  return Dtype::f32;
}

NodePtr make_node(const char* op, Shape shape, std::vector<NodePtr> parents) {
  auto node = std::make_shared<Node>();
  node->op = op;
  node->shape = std::move(shape);
  node->values.resize(shape_numel(node->shape));
  node->dtype = parents.empty() ? Dtype::f64 : merge_dtype(parents);
  node->seq = g_seq.fetch_add(1, std::memory_order_relaxed);
  for (const auto& p : parents) node->needs_grad = node->needs_grad || p->needs_grad;
  node->parents = std::move(parents);
  return node;
}

std::vector<std::size_t> row_major_strides(const Shape& shape) {
  std::vector<std::size_t> strides(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;) strides[i - 1] = strides[i] * shape[i];
  return strides;
}

// Strides for reading an input of `shape` at the coordinates of a broadcast
// result with `result_rank` dims; broadcast (size-1 or missing) dims get
// stride 0.
std::vector<std::size_t> broadcast_strides(const Shape& shape, std::size_t result_rank) {
  const auto strides = row_major_strides(shape);
  std::vector<std::size_t> out(result_rank, 0);
  const std::size_t offset = result_rank - shape.size();
  for (std::size_t i = 0; i < shape.size(); ++i)
    out[offset + i] = shape[i] == 1 ? 0 : strides[i];
  return out;
}

Shape broadcast_shape(const char* op, const Shape& a, const Shape& b) {
  const std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank, 1);
  for (std::size_t i = 0; i < rank; ++i) {
    const std::size_t da = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
    const std::size_t db = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
    if (da != db && da != 1 && db != 1)
      throw ShapeError(std::string(op) + ": shapes " + shape_str(a) + " and " +
                       shape_str(b) + " are not broadcast-compatible");
    out[i] = std::max(da, db);
  }
  return out;
}

int normalize_axis(const char* op, int axis, std::size_t rank) {
  const int r = static_cast<int>(rank);
  if (axis < 0) axis += r;
  if (axis < 0 || axis >= r)
    throw ShapeError(std::string(op) + ": axis out of range for rank " + std::to_string(r));
  return axis;
}

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shapes " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()) + " must match");
}

// Elementwise binary op with broadcasting. `fwd(a, b)` computes the value,
// `dfa`/`dfb` the partials with respect to a and b.
template <class F, class Da, class Db>
Tensor broadcast_binary(const char* op, const Tensor& a, const Tensor& b, F fwd, Da dfa,
                        Db dfb) {
  const Shape rshape = broadcast_shape(op, a.shape(), b.shape());
  auto node = make_node(op, rshape, {a.node_ptr(), b.node_ptr()});
  const std::size_t rank = rshape.size();
  const auto rstrides = row_major_strides(rshape);
  const auto astr = broadcast_strides(a.shape(), rank);
  const auto bstr = broadcast_strides(b.shape(), rank);
  const auto& av = a.values();
  const auto& bv = b.values();

  const std::size_t n = node->values.size();
  if (a.shape() == b.shape()) {  // fast path, no index decomposition
    for (std::size_t i = 0; i < n; ++i) node->values[i] = fwd(av[i], bv[i]);
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t rem = i, ia = 0, ib = 0;
      for (std::size_t d = 0; d < rank; ++d) {
        const std::size_t c = rem / rstrides[d];
        rem %= rstrides[d];
        ia += c * astr[d];
        ib += c * bstr[d];
      }
      node->values[i] = fwd(av[ia], bv[ib]);
    }
  }
  finalize(*node);

  if (node->needs_grad) {
    node->backward_fn = [rstrides, astr, bstr, rank, dfa, dfb](Node& self) {
      Node& na = *self.parents[0];
      Node& nb = *self.parents[1];
      const bool wa = na.needs_grad, wb = nb.needs_grad;
      if (wa) na.ensure_grad();
      if (wb) nb.ensure_grad();
      const std::size_t n = self.values.size();
      const bool same = na.shape == nb.shape && na.shape == self.shape;
      for (std::size_t i = 0; i < n; ++i) {
        std::size_t ia = i, ib = i;
        if (!same) {
          std::size_t rem = i;
          ia = ib = 0;
          for (std::size_t d = 0; d < rank; ++d) {
            const std::size_t c = rem / rstrides[d];
            rem %= rstrides[d];
            ia += c * astr[d];
            ib += c * bstr[d];
          }
        }
        const double g = self.grad[i];
        if (wa) na.grad[ia] += g * dfa(na.values[ia], nb.values[ib]);
        if (wb) nb.grad[ib] += g * dfb(na.values[ia], nb.values[ib]);
      }
    };
  }
  return Tensor::wrap(node);
}

// Elementwise unary op; `dfx(x, y)` is dy/dx given input and output values.
template <class F, class D>
Tensor unary(const char* op, const Tensor& x, F fwd, D dfx) {
  auto node = make_node(op, x.shape(), {x.node_ptr()});
  const auto& xv = x.values();
  for (std::size_t i = 0; i < xv.size(); ++i) node->values[i] = fwd(xv[i]);
  finalize(*node);
  if (node->needs_grad) {
    node->backward_fn = [dfx](Node& self) {
      Node& nx = *self.parents[0];
      nx.ensure_grad();
      for (std::size_t i = 0; i < self.values.size(); ++i)
        nx.grad[i] += self.grad[i] * dfx(nx.values[i], self.values[i]);
    };
  }
  return Tensor::wrap(node);
}

}  // namespace

// --- construction ------------------------------------------------------------

Tensor Tensor::zeros(const Shape& shape, bool requires_grad, Dtype dtype) {
  return from_data(shape, std::vector<double>(shape_numel(shape), 0.0), requires_grad,
                   dtype);
}

Tensor Tensor::full(const Shape& shape, double value, bool requires_grad, Dtype dtype) {
  return from_data(shape, std::vector<double>(shape_numel(shape), value), requires_grad,
                   dtype);
}

Tensor Tensor::scalar(double value, bool requires_grad, Dtype dtype) {
  return from_data({}, {value}, requires_grad, dtype);
}

Tensor Tensor::from_data(const Shape& shape, std::vector<double> values,
                         bool requires_grad, Dtype dtype) {
  if (values.size() != shape_numel(shape))
    throw ShapeError("from_data: " + std::to_string(values.size()) +
                     " values for shape " + shape_str(shape));
  auto node = make_node("leaf", shape, {});
  node->values = std::move(values);
  node->dtype = dtype;
  node->requires_grad = requires_grad;
  node->needs_grad = requires_grad;
  finalize(*node);
  return wrap(node);
}

double Tensor::item() const {
  if (numel() != 1)
    throw ShapeError("item(): tensor has shape " + shape_str(shape()) +
                     ", expected a single element");
  return node_->values[0];
}

double Tensor::at(const std::vector<std::size_t>& index) const {
  if (index.size() != rank()) throw ShapeError("at(): index rank mismatch");
  const auto strides = row_major_strides(shape());
  std::size_t off = 0;
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= shape()[i]) throw ShapeError("at(): index out of range");
    off += index[i] * strides[i];
  }
  return node_->values[off];
}

std::vector<double>& Tensor::leaf_values() {
  if (!node_->parents.empty())
    throw ValidationError("leaf_values(): only leaf tensors may be mutated");
  return node_->values;
}

// --- elementwise -------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  return broadcast_binary(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return broadcast_binary(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return broadcast_binary(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor scale(const Tensor& x, double factor) {
  require_finite(factor, "scale factor");
  return unary(
      "scale", x, [factor](double v) { return v * factor; },
      [factor](double, double) { return factor; });
}

Tensor broadcast_to(const Tensor& x, const Shape& shape) {
  const Shape check = broadcast_shape("broadcast_to", x.shape(), shape);
  if (check != shape)
    throw ShapeError("broadcast_to: cannot broadcast " + shape_str(x.shape()) + " to " +
                     shape_str(shape));
  auto node = make_node("broadcast_to", shape, {x.node_ptr()});
  const std::size_t rank = shape.size();
  const auto rstrides = row_major_strides(shape);
  const auto xstr = broadcast_strides(x.shape(), rank);
  const auto& xv = x.values();
  for (std::size_t i = 0; i < node->values.size(); ++i) {
    std::size_t rem = i, ix = 0;
    for (std::size_t d = 0; d < rank; ++d) {
      ix += (rem / rstrides[d]) * xstr[d];
      rem %= rstrides[d];
    }
    node->values[i] = xv[ix];
  }
  finalize(*node);
  if (node->needs_grad) {
    node->backward_fn = [rstrides, xstr, rank](Node& self) {
      Node& nx = *self.parents[0];
      nx.ensure_grad();
      for (std::size_t i = 0; i < self.values.size(); ++i) {
        std::size_t rem = i, ix = 0;
        for (std::size_t d = 0; d < rank; ++d) {
          ix += (rem / rstrides[d]) * xstr[d];
          rem %= rstrides[d];
        }
        nx.grad[ix] += self.grad[i];
      }
    };
  }
  return Tensor::wrap(node);
}

// --- linear algebra ------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0])
    throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  auto node = make_node("matmul", {m, n}, {a.node_ptr(), b.node_ptr()});
  const auto& av = a.values();
  const auto& bv = b.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double aik = av[i * k + kk];
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) node->values[i * n + j] += aik * bv[kk * n + j];
    }
  finalize(*node);
  if (node->needs_grad) {
    node->backward_fn = [m, k, n](Node& self) {
      Node& na = *self.parents[0];
      Node& nb = *self.parents[1];
      if (na.needs_grad) {
        na.ensure_grad();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) {
            const double g = self.grad[i * n + j];
            if (g == 0.0) continue;
            for (std::size_t kk = 0; kk < k; ++kk)
              na.grad[i * k + kk] += g * nb.values[kk * n + j];
          }
      }
      if (nb.needs_grad) {
        nb.ensure_grad();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t kk = 0; kk < k; ++kk) {
            const double aik = na.values[i * k + kk];
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j)
              nb.grad[kk * n + j] += aik * self.grad[i * n + j];
          }
      }
    };
  }
  return Tensor::wrap(node);
}

Tensor transpose2d(const Tensor& x) {
  if (x.rank() != 2)
    throw ShapeError("transpose2d: expected rank 2, got " + shape_str(x.shape()));
  const std::size_t m = x.shape()[0], n = x.shape()[1];
  auto node = make_node("transpose2d", {n, m}, {x.node_ptr()});
  const auto& xv = x.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) node->values[j * m + i] = xv[i * n + j];
  finalize(*node);
  if (node->needs_grad) {
    node->backward_fn = [m, n](Node& self) {
      Node& nx = *self.parents[0];
      nx.ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) nx.grad[i * n + j] += self.grad[j * m + i];
    };
  }
  return Tensor::wrap(node);
}

Tensor reshape(const Tensor& x, const Shape& shape) {
  if (shape_numel(shape) != x.numel())
    throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " +
                     shape_str(shape));
  auto node = make_node("reshape", shape, {x.node_ptr()});
  node->values = x.values();
  finalize(*node);
  if (node->needs_grad) {
    node->backward_fn = [](Node& self) {
      Node& nx = *self.parents[0];
      nx.ensure_grad();
      for (std::size_t i = 0; i < self.values.size(); ++i) nx.grad[i] += self.grad[i];
    };
  }
  return Tensor::wrap(node);
}

Tensor concat(const std::vector<Tensor>& xs, int axis) {
  require(!xs.empty(), "concat: need at least one tensor");
  const int ax = normalize_axis("concat", axis, xs[0].rank());
  Shape rshape = xs[0].shape();
  std::size_t total = 0;
  for (const Tensor& t : xs) {
    if (t.rank() != rshape.size())
      throw ShapeError("concat: rank mismatch between inputs");
    for (std::size_t d = 0; d < rshape.size(); ++d)
      if (d != static_cast<std::size_t>(ax) && t.shape()[d] != rshape[d])
        throw ShapeError("concat: shapes " + shape_str(rshape) + " and " +
                         shape_str(t.shape()) + " differ off-axis");
    total += t.shape()[static_cast<std::size_t>(ax)];
  }
  rshape[static_cast<std::size_t>(ax)] = total;

  std::vector<NodePtr> parents;
  for (const Tensor& t : xs) parents.push_back(t.node_ptr());
  auto node = make_node("concat", rshape, std::move(parents));

  std::size_t outer = 1, inner = 1;
  for (int d = 0; d < ax; ++d) outer *= rshape[static_cast<std::size_t>(d)];
  for (std::size_t d = static_cast<std::size_t>(ax) + 1; d < rshape.size(); ++d)
    inner *= rshape[d];

  std::vector<std::size_t> piece(xs.size());
  for (std::size_t p = 0; p < xs.size(); ++p)
    piece[p] = xs[p].shape()[static_cast<std::size_t>(ax)];

  for (std::size_t o = 0; o < outer; ++o) {
    std::size_t dst_axis = 0;
    for (std::size_t p = 0; p < xs.size(); ++p) {
      const auto& v = xs[p].values();
      const std::size_t len = piece[p] * inner;
      std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(o * len), len,
                  node->values.begin() +
                      static_cast<std::ptrdiff_t>((o * total + dst_axis) * inner));
      dst_axis += piece[p];
    }
  }
  finalize(*node);
  if (node->needs_grad) {
    node->backward_fn = [outer, inner, total, piece](Node& self) {
      std::size_t dst_axis = 0;
      for (std::size_t p = 0; p < self.parents.size(); ++p) {
        Node& np = *self.parents[p];
        const std::size_t len = piece[p] * inner;
        if (np.needs_grad) {
          np.ensure_grad();
          for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t i = 0; i < len; ++i)
              np.grad[o * len + i] += self.grad[(o * total + dst_axis) * inner + i];
        }
        dst_axis += piece[p];
      }
    };
  }
  return Tensor::wrap(node);
}

// --- activations ----------------------------------------------------------------

Tensor relu(const Tensor& x) {
  return unary(
      "relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      "sigmoid", x,
      [](double v) {
        return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                        : std::exp(v) / (1.0 + std::exp(v));
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor softmax(const Tensor& x, int axis) {
  const int ax = normalize_axis("softmax", axis, x.rank());
  const Shape& shape = x.shape();
  const std::size_t len = shape[static_cast<std::size_t>(ax)];
  std::size_t outer = 1, inner = 1;
  for (int d = 0; d < ax; ++d) outer *= shape[static_cast<std::size_t>(d)];
  for (std::size_t d = static_cast<std::size_t>(ax) + 1; d < shape.size(); ++d)
    inner *= shape[d];

  auto node = make_node("softmax", shape, {x.node_ptr()});
  const auto& xv = x.values();
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t i = 0; i < inner; ++i) {
      const std::size_t base = o * len * inner + i;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t l = 0; l < len; ++l) mx = std::max(mx, xv[base + l * inner]);
      double sum = 0.0;
      for (std::size_t l = 0; l < len; ++l) {
        const double e = std::exp(xv[base + l * inner] - mx);
        node->values[base + l * inner] = e;
        sum += e;
      }
      for (std::size_t l = 0; l < len; ++l) node->values[base + l * inner] /= sum;
    }
  finalize(*node);
  if (node->needs_grad) {
    node->backward_fn = [outer, inner, len](Node& self) {
      Node& nx = *self.parents[0];
      nx.ensure_grad();
      for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t i = 0; i < inner; ++i) {
          const std::size_t base = o * len * inner + i;
          double dot = 0.0;
          for (std::size_t l = 0; l < len; ++l)
            dot += self.grad[base + l * inner] * self.values[base + l * inner];
          for (std::size_t l = 0; l < len; ++l) {
            const std::size_t idx = base + l * inner;
            nx.grad[idx] += self.values[idx] * (self.grad[idx] - dot);
          }
        }
    };
  }
  return Tensor::wrap(node);
}

// --- reductions --------------------------------------------------------------------

Tensor sum_all(const Tensor& x) {
  auto node = make_node("sum", {}, {x.node_ptr()});
  double s = 0.0;
  for (double v : x.values()) s += v;
  node->values[0] = s;
  finalize(*node);
  if (node->needs_grad) {
    node->backward_fn = [](Node& self) {
      Node& nx = *self.parents[0];
      nx.ensure_grad();
      const double g = self.grad[0];
      for (double& gv : nx.grad) gv += g;
    };
  }
  return Tensor::wrap(node);
}

Tensor mean_all(const Tensor& x) {
  require(x.numel() > 0, "mean of an empty tensor");
  auto node = make_node("mean", {}, {x.node_ptr()});
  double s = 0.0;
  for (double v : x.values()) s += v;
  node->values[0] = s / static_cast<double>(x.numel());
  finalize(*node);
  if (node->needs_grad) {
    node->backward_fn = [](Node& self) {
      Node& nx = *self.parents[0];
      nx.ensure_grad();
      const double g = self.grad[0] / static_cast<double>(nx.values.size());
      for (double& gv : nx.grad) gv += g;
    };
  }
  return Tensor::wrap(node);
}

// --- spatial -----------------------------------------------------------------------

namespace {

void check_chw(const char* op, const Tensor& x) {
  if (x.rank() != 3)
    throw ShapeError(std::string(op) + ": expected a [C,H,W] tensor, got " +
                     shape_str(x.shape()));
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, int stride,
              int pad) {
  check_chw("conv2d", x);
  if (weight.rank() != 4)
    throw ShapeError("conv2d: expected [Cout,Cin,kh,kw] weights, got " +
                     shape_str(weight.shape()));
  require(stride >= 1, "conv2d: stride must be >= 1");
  require(pad >= 0, "conv2d: pad must be >= 0");
  const std::size_t cin = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
  const std::size_t cout = weight.shape()[0], kh = weight.shape()[2],
                    kw = weight.shape()[3];
  if (weight.shape()[1] != cin)
    throw ShapeError("conv2d: input channels " + std::to_string(cin) +
                     " do not match weight channels " + std::to_string(weight.shape()[1]));
  const bool has_bias = bias.defined();
  if (has_bias && (bias.rank() != 1 || bias.shape()[0] != cout))
    throw ShapeError("conv2d: bias shape " + shape_str(bias.shape()) +
                     " does not match " + std::to_string(cout) + " output channels");
  if (h + 2 * static_cast<std::size_t>(pad) < kh ||
      w + 2 * static_cast<std::size_t>(pad) < kw)
    throw ShapeError("conv2d: kernel larger than padded input");
  const std::size_t ho = (h + 2 * static_cast<std::size_t>(pad) - kh) /
                             static_cast<std::size_t>(stride) + 1;
  const std::size_t wo = (w + 2 * static_cast<std::size_t>(pad) - kw) /
                             static_cast<std::size_t>(stride) + 1;

  std::vector<NodePtr> parents{x.node_ptr(), weight.node_ptr()};
  if (has_bias) parents.push_back(bias.node_ptr());
  auto node = make_node("conv2d", {cout, ho, wo}, std::move(parents));

  const auto& xv = x.values();
  const auto& wv = weight.values();
  for (std::size_t co = 0; co < cout; ++co) {
    const double b = has_bias ? bias.values()[co] : 0.0;
    for (std::size_t oy = 0; oy < ho; ++oy)
      for (std::size_t ox = 0; ox < wo; ++ox) {
        double acc = b;
        for (std::size_t ci = 0; ci < cin; ++ci)
          for (std::size_t ky = 0; ky < kh; ++ky) {
            const std::ptrdiff_t iy =
                static_cast<std::ptrdiff_t>(oy) * stride - pad + static_cast<std::ptrdiff_t>(ky);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
            for (std::size_t kx = 0; kx < kw; ++kx) {
              const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox) * stride - pad +
                                        static_cast<std::ptrdiff_t>(kx);
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
              acc += xv[(ci * h + static_cast<std::size_t>(iy)) * w +
                        static_cast<std::size_t>(ix)] *
                     wv[((co * cin + ci) * kh + ky) * kw + kx];
            }
          }
        node->values[(co * ho + oy) * wo + ox] = acc;
      }
  }
  finalize(*node);

  if (node->needs_grad) {
    node->backward_fn = [cin, h, w, cout, kh, kw, ho, wo, stride, pad,
                         has_bias](Node& self) {
      Node& nx = *self.parents[0];
      Node& nw = *self.parents[1];
      Node* nb = has_bias ? self.parents[2].get() : nullptr;
      const bool gx = nx.needs_grad, gw = nw.needs_grad;
      const bool gb = nb != nullptr && nb->needs_grad;
      if (gx) nx.ensure_grad();
      if (gw) nw.ensure_grad();
      if (gb) nb->ensure_grad();
      for (std::size_t co = 0; co < cout; ++co)
        for (std::size_t oy = 0; oy < ho; ++oy)
          for (std::size_t ox = 0; ox < wo; ++ox) {
            const double g = self.grad[(co * ho + oy) * wo + ox];
            if (g == 0.0) continue;
            if (gb) nb->grad[co] += g;
            if (!gx && !gw) continue;
            for (std::size_t ci = 0; ci < cin; ++ci)
              for (std::size_t ky = 0; ky < kh; ++ky) {
                const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy) * stride - pad +
                                          static_cast<std::ptrdiff_t>(ky);
                if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                for (std::size_t kx = 0; kx < kw; ++kx) {
                  const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox) * stride -
                                            pad + static_cast<std::ptrdiff_t>(kx);
                  if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                  const std::size_t xi =
                      (ci * h + static_cast<std::size_t>(iy)) * w +
                      static_cast<std::size_t>(ix);
                  const std::size_t wi = ((co * cin + ci) * kh + ky) * kw + kx;
                  if (gx) nx.grad[xi] += g * nw.values[wi];
                  if (gw) nw.grad[wi] += g * nx.values[xi];
                }
              }
          }
    };
  }
  return Tensor::wrap(node);
}

Tensor conv2d(const Tensor& x, const Tensor& weight, int stride, int pad) {
  return conv2d(x, weight, Tensor(), stride, pad);
}

namespace {

template <bool kMax>
Tensor pool2d(const char* op, const Tensor& x, int kh, int kw, int sh, int sw) {
  check_chw(op, x);
  require(kh >= 1 && kw >= 1 && sh >= 1 && sw >= 1,
          std::string(op) + ": kernel and stride must be >= 1");
  const std::size_t c = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
  if (h < static_cast<std::size_t>(kh) || w < static_cast<std::size_t>(kw))
    throw ShapeError(std::string(op) + ": kernel larger than input");
  const std::size_t ho = (h - static_cast<std::size_t>(kh)) / static_cast<std::size_t>(sh) + 1;
  const std::size_t wo = (w - static_cast<std::size_t>(kw)) / static_cast<std::size_t>(sw) + 1;
  auto node = make_node(op, {c, ho, wo}, {x.node_ptr()});
  const auto& xv = x.values();
  auto argmax = std::make_shared<std::vector<std::size_t>>();
  if (kMax) argmax->resize(node->values.size());
  for (std::size_t ci = 0; ci < c; ++ci)
    for (std::size_t oy = 0; oy < ho; ++oy)
      for (std::size_t ox = 0; ox < wo; ++ox) {
        const std::size_t oi = (ci * ho + oy) * wo + ox;
        if (kMax) {
          double best = -std::numeric_limits<double>::infinity();
          std::size_t best_idx = 0;
          for (std::size_t ky = 0; ky < static_cast<std::size_t>(kh); ++ky)
            for (std::size_t kx = 0; kx < static_cast<std::size_t>(kw); ++kx) {
              const std::size_t xi = (ci * h + oy * sh + ky) * w + ox * sw + kx;
              if (xv[xi] > best) {  // first maximum wins on ties
                best = xv[xi];
                best_idx = xi;
              }
            }
          node->values[oi] = best;
          (*argmax)[oi] = best_idx;
        } else {
          double acc = 0.0;
          for (std::size_t ky = 0; ky < static_cast<std::size_t>(kh); ++ky)
            for (std::size_t kx = 0; kx < static_cast<std::size_t>(kw); ++kx)
              acc += xv[(ci * h + oy * sh + ky) * w + ox * sw + kx];
          node->values[oi] = acc / (static_cast<double>(kh) * kw);
        }
      }
  finalize(*node);
  if (node->needs_grad) {
    if (kMax) {
      node->backward_fn = [argmax](Node& self) {
        Node& nx = *self.parents[0];
        nx.ensure_grad();
        for (std::size_t i = 0; i < self.values.size(); ++i)
          nx.grad[(*argmax)[i]] += self.grad[i];
      };
    } else {
      const double inv = 1.0 / (static_cast<double>(kh) * kw);
      node->backward_fn = [c, h, w, ho, wo, kh, kw, sh, sw, inv](Node& self) {
        Node& nx = *self.parents[0];
        nx.ensure_grad();
        for (std::size_t ci = 0; ci < c; ++ci)
          for (std::size_t oy = 0; oy < ho; ++oy)
            for (std::size_t ox = 0; ox < wo; ++ox) {
              const double g = self.grad[(ci * ho + oy) * wo + ox] * inv;
              for (std::size_t ky = 0; ky < static_cast<std::size_t>(kh); ++ky)
                for (std::size_t kx = 0; kx < static_cast<std::size_t>(kw); ++kx)
                  nx.grad[(ci * h + oy * sh + ky) * w + ox * sw + kx] += g;
            }
      };
    }
  }
  return Tensor::wrap(node);
}

}  // namespace

Tensor avg_pool2d(const Tensor& x, int kernel, int stride) {
  return pool2d<false>("avg_pool2d", x, kernel, kernel, stride, stride);
}

Tensor max_pool2d(const Tensor& x, int kernel, int stride) {
  return pool2d<true>("max_pool2d", x, kernel, kernel, stride, stride);
}

Tensor avg_pool2d(const Tensor& x, int kernel_h, int kernel_w, int stride_h, int stride_w) {
  return pool2d<false>("avg_pool2d", x, kernel_h, kernel_w, stride_h, stride_w);
}

Tensor max_pool2d(const Tensor& x, int kernel_h, int kernel_w, int stride_h, int stride_w) {
  return pool2d<true>("max_pool2d", x, kernel_h, kernel_w, stride_h, stride_w);
}

Tensor channel_mean(const Tensor& x) {
  check_chw("channel_mean", x);
  const std::size_t c = x.shape()[0], hw = x.shape()[1] * x.shape()[2];
  auto node = make_node("channel_mean", {1, x.shape()[1], x.shape()[2]}, {x.node_ptr()});
  const auto& xv = x.values();
  for (std::size_t i = 0; i < hw; ++i) {
    double s = 0.0;
    for (std::size_t ci = 0; ci < c; ++ci) s += xv[ci * hw + i];
    node->values[i] = s / static_cast<double>(c);
  }
  finalize(*node);
  if (node->needs_grad) {
    node->backward_fn = [c, hw](Node& self) {
      Node& nx = *self.parents[0];
      nx.ensure_grad();
      for (std::size_t i = 0; i < hw; ++i) {
        const double g = self.grad[i] / static_cast<double>(c);
        for (std::size_t ci = 0; ci < c; ++ci) nx.grad[ci * hw + i] += g;
      }
    };
  }
  return Tensor::wrap(node);
}

Tensor channel_max(const Tensor& x) {
  check_chw("channel_max", x);
  const std::size_t c = x.shape()[0], hw = x.shape()[1] * x.shape()[2];
  auto node = make_node("channel_max", {1, x.shape()[1], x.shape()[2]}, {x.node_ptr()});
  const auto& xv = x.values();
  auto argmax = std::make_shared<std::vector<std::size_t>>(hw);
  for (std::size_t i = 0; i < hw; ++i) {
    double best = xv[i];
    std::size_t best_c = 0;
    for (std::size_t ci = 1; ci < c; ++ci)
      if (xv[ci * hw + i] > best) {
        best = xv[ci * hw + i];
        best_c = ci;
      }
    node->values[i] = best;
    (*argmax)[i] = best_c * hw + i;
  }
  finalize(*node);
  if (node->needs_grad) {
    node->backward_fn = [argmax, hw](Node& self) {
      Node& nx = *self.parents[0];
      nx.ensure_grad();
      for (std::size_t i = 0; i < hw; ++i) nx.grad[(*argmax)[i]] += self.grad[i];
    };
  }
  return Tensor::wrap(node);
}

Tensor bilinear_resize(const Tensor& x, std::size_t out_h, std::size_t out_w) {
  check_chw("bilinear_resize", x);
  require(out_h >= 1 && out_w >= 1, "bilinear_resize: output must be non-empty");
  const std::size_t c = x.shape()[0], h = x.shape()[1], w = x.shape()[2];

  // Half-pixel-center source coordinates, clamped at the borders.
  struct Tap {
    std::size_t lo, hi;
    double frac;
  };
  auto make_taps = [](std::size_t in, std::size_t out) {
    std::vector<Tap> taps(out);
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    for (std::size_t o = 0; o < out; ++o) {
      double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
      if (src < 0.0) src = 0.0;
      const double limit = static_cast<double>(in - 1);
      if (src > limit) src = limit;
      const std::size_t lo = static_cast<std::size_t>(src);
      taps[o] = {lo, std::min(lo + 1, in - 1), src - static_cast<double>(lo)};
    }
    return taps;
  };
  auto ytaps = std::make_shared<std::vector<Tap>>(make_taps(h, out_h));
  auto xtaps = std::make_shared<std::vector<Tap>>(make_taps(w, out_w));

  auto node = make_node("bilinear_resize", {c, out_h, out_w}, {x.node_ptr()});
  const auto& xv = x.values();
  for (std::size_t ci = 0; ci < c; ++ci)
    for (std::size_t oy = 0; oy < out_h; ++oy) {
      const Tap& ty = (*ytaps)[oy];
      for (std::size_t ox = 0; ox < out_w; ++ox) {
        const Tap& tx = (*xtaps)[ox];
        const double v00 = xv[(ci * h + ty.lo) * w + tx.lo];
        const double v01 = xv[(ci * h + ty.lo) * w + tx.hi];
        const double v10 = xv[(ci * h + ty.hi) * w + tx.lo];
        const double v11 = xv[(ci * h + ty.hi) * w + tx.hi];
        const double top = v00 + (v01 - v00) * tx.frac;
        const double bot = v10 + (v11 - v10) * tx.frac;
        node->values[(ci * out_h + oy) * out_w + ox] = top + (bot - top) * ty.frac;
      }
    }
  finalize(*node);
  if (node->needs_grad) {
    node->backward_fn = [c, h, w, out_h, out_w, ytaps, xtaps](Node& self) {
      Node& nx = *self.parents[0];
      nx.ensure_grad();
      for (std::size_t ci = 0; ci < c; ++ci)
        for (std::size_t oy = 0; oy < out_h; ++oy) {
          const Tap& ty = (*ytaps)[oy];
          for (std::size_t ox = 0; ox < out_w; ++ox) {
            const Tap& tx = (*xtaps)[ox];
            const double g = self.grad[(ci * out_h + oy) * out_w + ox];
            if (g == 0.0) continue;
            nx.grad[(ci * h + ty.lo) * w + tx.lo] += g * (1 - ty.frac) * (1 - tx.frac);
            nx.grad[(ci * h + ty.lo) * w + tx.hi] += g * (1 - ty.frac) * tx.frac;
            nx.grad[(ci * h + ty.hi) * w + tx.lo] += g * ty.frac * (1 - tx.frac);
            nx.grad[(ci * h + ty.hi) * w + tx.hi] += g * ty.frac * tx.frac;
          }
        }
    };
  }
  return Tensor::wrap(node);
}

// --- losses ---------------------------------------------------------------------

Tensor l1_loss(const Tensor& a, const Tensor& b) {
  check_same_shape("l1_loss", a, b);
  auto node = make_node("l1_loss", {}, {a.node_ptr(), b.node_ptr()});
  const auto& av = a.values();
  const auto& bv = b.values();
  double s = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) s += std::abs(av[i] - bv[i]);
  node->values[0] = s / static_cast<double>(av.size());
  finalize(*node);
  if (node->needs_grad) {
    node->backward_fn = [](Node& self) {
      Node& na = *self.parents[0];
      Node& nb = *self.parents[1];
      const double g = self.grad[0] / static_cast<double>(na.values.size());
      if (na.needs_grad) na.ensure_grad();
      if (nb.needs_grad) nb.ensure_grad();
      for (std::size_t i = 0; i < na.values.size(); ++i) {
        const double d = na.values[i] - nb.values[i];
        const double s = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
        if (na.needs_grad) na.grad[i] += g * s;
        if (nb.needs_grad) nb.grad[i] -= g * s;
      }
    };
  }
  return Tensor::wrap(node);
}

Tensor mse_loss(const Tensor& a, const Tensor& b) {
  check_same_shape("mse_loss", a, b);
  auto node = make_node("mse_loss", {}, {a.node_ptr(), b.node_ptr()});
  const auto& av = a.values();
  const auto& bv = b.values();
  double s = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) {
    const double d = av[i] - bv[i];
    s += d * d;
  }
  node->values[0] = s / static_cast<double>(av.size());
  finalize(*node);
  if (node->needs_grad) {
    node->backward_fn = [](Node& self) {
      Node& na = *self.parents[0];
      Node& nb = *self.parents[1];
      const double g = 2.0 * self.grad[0] / static_cast<double>(na.values.size());
      if (na.needs_grad) na.ensure_grad();
      if (nb.needs_grad) nb.ensure_grad();
      for (std::size_t i = 0; i < na.values.size(); ++i) {
        const double d = na.values[i] - nb.values[i];
        if (na.needs_grad) na.grad[i] += g * d;
        if (nb.needs_grad) nb.grad[i] -= g * d;
      }
    };
  }
  return Tensor::wrap(node);
}

// --- backward --------------------------------------------------------------------

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1)
    throw ValidationError("backward: loss must be a defined scalar tensor");
  Node* root = loss.node();
  if (!root->needs_grad) return;  // nothing on the tape requires gradients

  // The tape: every reachable gradient-relevant node, replayed in exact
  // reverse creation order (creation order is topological by construction).
  std::vector<Node*> tape;
  std::unordered_set<Node*> seen;
  std::vector<Node*> stack{root};
  seen.insert(root);
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    tape.push_back(n);
    for (const auto& p : n->parents)
      if (p->needs_grad && seen.insert(p.get()).second) stack.push_back(p.get());
  }
  std::sort(tape.begin(), tape.end(),
            [](const Node* a, const Node* b) { return a->seq > b->seq; });

  root->ensure_grad();
  root->grad[0] += 1.0;
  for (Node* n : tape) {
    if (!n->backward_fn) continue;
    n->ensure_grad();
    n->backward_fn(*n);
  }
}

}  // namespace mufen
