#include "mufen/nn.hpp"

#include <cmath>

#include "mufen/rng.hpp"

namespace mufen {

Tensor ParamStore::create(const std::string& name, const Shape& shape,
                          std::size_t fan_in) {
  require(fan_in > 0, "parameter fan_in must be positive");
  for (const auto& [n, t] : items_)
    require(n != name, "duplicate parameter name: " + name);
  Rng rng(substream_seed(seed_, "init/" + name));
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::vector<double> values(shape_numel(shape));
  for (double& v : values) v = rng.uniform(-bound, bound);
  Tensor t = Tensor::from_data(shape, std::move(values), true, dtype_);
  items_.emplace_back(name, t);
  return t;
}

Tensor ParamStore::create_zeros(const std::string& name, const Shape& shape) {
  for (const auto& [n, t] : items_)
    require(n != name, "duplicate parameter name: " + name);
  Tensor t = Tensor::zeros(shape, true, dtype_);
  items_.emplace_back(name, t);
  return t;
}

Tensor ParamStore::get(const std::string& name) const {
  for (const auto& [n, t] : items_)
    if (n == name) return t;
  throw ValidationError("unknown parameter: " + name);
}

void ParamStore::zero_grad() {
  for (auto& [n, t] : items_) t.zero_grad();
}

std::map<std::string, Tensor> ParamStore::snapshot() const {
  std::map<std::string, Tensor> out;
  for (const auto& [n, t] : items_) out.emplace(n, t);
  return out;
}

void ParamStore::load(const std::map<std::string, Tensor>& values) {
  for (auto& [name, param] : items_) {
    const auto it = values.find(name);
    if (it == values.end()) throw ValidationError("checkpoint is missing parameter " + name);
    if (it->second.shape() != param.shape())
      throw ShapeError("checkpoint parameter " + name + " has shape " +
                       shape_str(it->second.shape()) + ", expected " +
                       shape_str(param.shape()));
    param.leaf_values() = it->second.values();
  }
}

Linear::Linear(ParamStore& ps, const std::string& name, std::size_t in, std::size_t out,
               bool zero_bias) {
  weight = ps.create(name + ".weight", {in, out}, in);
  bias = zero_bias ? ps.create_zeros(name + ".bias", {out})
                   : ps.create(name + ".bias", {out}, in);
}

Tensor Linear::forward(const Tensor& x) const {
  return add(matmul(x, weight), bias);
}

Conv2dLayer::Conv2dLayer(ParamStore& ps, const std::string& name, std::size_t in,
                         std::size_t out, int kernel, int stride, int pad)
    : stride(stride), pad(pad) {
  const std::size_t k = static_cast<std::size_t>(kernel);
  weight = ps.create(name + ".weight", {out, in, k, k}, in * k * k);
  bias = ps.create(name + ".bias", {out}, in * k * k);
}

Tensor Conv2dLayer::forward(const Tensor& x) const {
  return conv2d(x, weight, bias, stride, pad);
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, Tensor* attn_out) {
  const std::size_t dim = q.shape()[1];
  const Tensor scores = scale(matmul(q, transpose2d(k)), 1.0 / std::sqrt(static_cast<double>(dim)));
  const Tensor attn = softmax(scores, -1);
  if (attn_out) *attn_out = attn;
  return matmul(attn, v);
}

SelfAttention::SelfAttention(ParamStore& ps, const std::string& name, std::size_t dim)
    : wq(ps, name + ".wq", dim, dim),
      wk(ps, name + ".wk", dim, dim),
      wv(ps, name + ".wv", dim, dim),
      wo(ps, name + ".wo", dim, dim) {}

Tensor SelfAttention::forward(const Tensor& tokens, Tensor* attn_out) const {
  const Tensor ctx = attention(wq.forward(tokens), wk.forward(tokens),
                               wv.forward(tokens), attn_out);
  return add(tokens, wo.forward(ctx));
}

CrossAttention::CrossAttention(ParamStore& ps, const std::string& name, std::size_t dim)
    : wq(ps, name + ".wq", dim, dim),
      wk(ps, name + ".wk", dim, dim),
      wv(ps, name + ".wv", dim, dim),
      wo(ps, name + ".wo", dim, dim) {}

Tensor CrossAttention::forward(const Tensor& queries, const Tensor& keyvalues,
                               Tensor* attn_out) const {
  const Tensor ctx = attention(wq.forward(queries), wk.forward(keyvalues),
                               wv.forward(keyvalues), attn_out);
  return add(queries, wo.forward(ctx));
}

Adam::Adam(ParamStore& params, double lr, double beta1, double beta2, double eps)
    : params_(params), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  m_.resize(params.items().size());
  v_.resize(params.items().size());
  for (std::size_t i = 0; i < params.items().size(); ++i) {
    const std::size_t n = params.items()[i].second.numel();
    m_[i].assign(n, 0.0);
    v_[i].assign(n, 0.0);
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.items().size(); ++i) {
    Tensor param = params_.items()[i].second;
    const auto& grad = param.grad();
    auto& values = param.leaf_values();
    const bool f32 = param.dtype() == Dtype::f32;
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double g = j < grad.size() ? grad[j] : 0.0;
      m_[i][j] = beta1_ * m_[i][j] + (1.0 - beta1_) * g;
      v_[i][j] = beta2_ * v_[i][j] + (1.0 - beta2_) * g * g;
      const double mhat = m_[i][j] / bc1;
      const double vhat = v_[i][j] / bc2;
      double nv = values[j] - lr_ * mhat / (std::sqrt(vhat) + eps_);
      if (f32) nv = static_cast<double>(static_cast<float>(nv));
      values[j] = nv;
    }
  }
}

}  // namespace mufen
