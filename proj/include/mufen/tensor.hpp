#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "mufen/common.hpp"

namespace mufen {

// Storage precision. Values are always computed in double; f32 tensors round
// every stored element through IEEE binary32, so checkpoints and 32-bit runs
// behave exactly like single-precision storage. Gradients stay in double.
enum class Dtype : std::uint8_t { f32, f64 };

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

namespace detail {

// One tape node. Tensors are immutable once created (no in-place mutation of
// anything participating in a tape), so nodes can be shared freely.
struct Node {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // allocated on demand during backward
  bool requires_grad = false;  // leaf wants its gradient kept
  bool needs_grad = false;     // this node or an ancestor requires grad
  Dtype dtype = Dtype::f64;
  std::uint64_t seq = 0;  // creation index; ascending order is topological
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;  // scatters node.grad into parents
  const char* op = "leaf";

  void ensure_grad() {
    if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
  }
};

}  // namespace detail

// Dense n-dimensional array with reverse-mode automatic differentiation.
// A Tensor is a cheap shared handle to an immutable tape node; ops build the
// tape implicitly and backward() replays it in exact reverse creation order,
// which makes gradients bit-deterministic. Rank-0 tensors are scalars.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(const Shape& shape, bool requires_grad = false,
                      Dtype dtype = Dtype::f64);
  static Tensor full(const Shape& shape, double value, bool requires_grad = false,
                     Dtype dtype = Dtype::f64);
  static Tensor scalar(double value, bool requires_grad = false, Dtype dtype = Dtype::f64);
  static Tensor from_data(const Shape& shape, std::vector<double> values,
                          bool requires_grad = false, Dtype dtype = Dtype::f64);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t numel() const { return node_->values.size(); }
  std::size_t rank() const { return node_->shape.size(); }
  Dtype dtype() const { return node_->dtype; }
  bool requires_grad() const { return node_->requires_grad; }

  const std::vector<double>& values() const { return node_->values; }
  double item() const;
  double at(const std::vector<std::size_t>& index) const;

  // Gradient of the last backward() pass; empty if none flowed here.
  const std::vector<double>& grad() const { return node_->grad; }
  void zero_grad() { node_->grad.assign(node_->values.size(), 0.0); }

  // Direct mutation of a leaf's storage, for optimizer updates and
  // finite-difference probes between tape uses. Never call on a tensor that
  // still participates in a live tape.
  std::vector<double>& leaf_values();

  detail::Node* node() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

  static Tensor wrap(std::shared_ptr<detail::Node> node) {
    Tensor t;
    t.node_ = std::move(node);
    return t;
  }

 private:
  std::shared_ptr<detail::Node> node_;
};

// --- elementwise / broadcasting -------------------------------------------
// add/sub/mul broadcast with trailing-dimension alignment (a size-1 or
// missing leading dimension stretches).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor broadcast_to(const Tensor& x, const Shape& shape);

// --- linear algebra --------------------------------------------------------
Tensor matmul(const Tensor& a, const Tensor& b);  // [m,k]x[k,n] -> [m,n]
Tensor transpose2d(const Tensor& x);
Tensor reshape(const Tensor& x, const Shape& shape);
Tensor concat(const std::vector<Tensor>& xs, int axis);

// --- activations -----------------------------------------------------------
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor softmax(const Tensor& x, int axis);

// --- reductions ------------------------------------------------------------
Tensor sum_all(const Tensor& x);   // rank-0
Tensor mean_all(const Tensor& x);  // rank-0

// --- spatial ops on [C,H,W] --------------------------------------------------
// conv2d applies zero padding `pad` on both sides and stride `stride`.
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, int stride,
              int pad);
Tensor conv2d(const Tensor& x, const Tensor& weight, int stride, int pad);
Tensor avg_pool2d(const Tensor& x, int kernel, int stride);
Tensor max_pool2d(const Tensor& x, int kernel, int stride);
Tensor avg_pool2d(const Tensor& x, int kernel_h, int kernel_w, int stride_h, int stride_w);
Tensor max_pool2d(const Tensor& x, int kernel_h, int kernel_w, int stride_h, int stride_w);
Tensor channel_mean(const Tensor& x);  // [C,H,W] -> [1,H,W]
Tensor channel_max(const Tensor& x);   // [C,H,W] -> [1,H,W]
// Bilinear resize with half-pixel centers (align_corners = false).
Tensor bilinear_resize(const Tensor& x, std::size_t out_h, std::size_t out_w);

// --- losses ------------------------------------------------------------------
Tensor l1_loss(const Tensor& a, const Tensor& b);   // mean |a-b|
Tensor mse_loss(const Tensor& a, const Tensor& b);  // mean (a-b)^2

// Reverse-mode sweep from a scalar loss. Populates grad on every
// requires_grad leaf reachable from `loss`; gradients from fan-out add up.
void backward(const Tensor& loss);

}  // namespace mufen
