#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mufen/tensor.hpp"

namespace mufen {

// Ordered registry of trainable leaf tensors. Every parameter is initialized
// uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) from a substream derived from the
// store seed and the parameter name, so initialization does not depend on
// construction order.
class ParamStore {
 public:
  explicit ParamStore(std::uint64_t seed, Dtype dtype = Dtype::f64)
      : seed_(seed), dtype_(dtype) {}

  Tensor create(const std::string& name, const Shape& shape, std::size_t fan_in);
  Tensor create_zeros(const std::string& name, const Shape& shape);

  const std::vector<std::pair<std::string, Tensor>>& items() const { return items_; }
  Tensor get(const std::string& name) const;
  Dtype dtype() const { return dtype_; }

  void zero_grad();
  std::map<std::string, Tensor> snapshot() const;
  // Copies values from a loaded checkpoint into the existing parameters.
  void load(const std::map<std::string, Tensor>& values);

 private:
  std::uint64_t seed_;
  Dtype dtype_;
  std::vector<std::pair<std::string, Tensor>> items_;
};

struct Linear {
  Tensor weight;  // [in, out]
  Tensor bias;    // [out]

  Linear() = default;
  // zero_bias: bias starts at exactly zero (used for fusion gates).
  Linear(ParamStore& ps, const std::string& name, std::size_t in, std::size_t out,
         bool zero_bias = false);

  // [N, in] -> [N, out]
  Tensor forward(const Tensor& x) const;
  std::size_t in_features() const { return weight.shape()[0]; }
  std::size_t out_features() const { return weight.shape()[1]; }
};

struct Conv2dLayer {
  Tensor weight;  // [out, in, k, k]
  Tensor bias;    // [out]
  int stride = 1;
  int pad = 0;

  Conv2dLayer() = default;
  Conv2dLayer(ParamStore& ps, const std::string& name, std::size_t in, std::size_t out,
              int kernel, int stride, int pad);

  Tensor forward(const Tensor& x) const;
};

// Single-head scaled dot-product attention over [N, D] tokens with an output
// projection and residual connection. `attn_out`, when given, receives the
// row-stochastic attention matrix.
struct SelfAttention {
  Linear wq, wk, wv, wo;

  SelfAttention() = default;
  SelfAttention(ParamStore& ps, const std::string& name, std::size_t dim);
  Tensor forward(const Tensor& tokens, Tensor* attn_out = nullptr) const;
};

// As SelfAttention, but queries come from one token set and keys/values from
// another (used to merge skip connections). Residual is on the query side.
struct CrossAttention {
  Linear wq, wk, wv, wo;

  CrossAttention() = default;
  CrossAttention(ParamStore& ps, const std::string& name, std::size_t dim);
  Tensor forward(const Tensor& queries, const Tensor& keyvalues,
                 Tensor* attn_out = nullptr) const;
};

// Scaled dot-product attention core shared by the blocks above.
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v,
                 Tensor* attn_out = nullptr);

// Adam with bias correction; steps update leaf values in place between tape
// uses. Parameters that never receive gradient stay bit-identical.
class Adam {
 public:
  explicit Adam(ParamStore& params, double lr = 1e-3, double beta1 = 0.9,
                double beta2 = 0.999, double eps = 1e-8);
  void step();
  double lr() const { return lr_; }

 private:
  ParamStore& params_;
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

}  // namespace mufen
