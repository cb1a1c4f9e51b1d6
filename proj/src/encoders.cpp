#include "mufen/encoders.hpp"

#include <cmath>

#include "mufen/rng.hpp"

namespace mufen {

const std::array<std::string, 18>& gesture_labels() {
  static const std::array<std::string, 18> labels = {
      "call", "dislike", "fist", "four", "like", "mute", "ok", "one", "palm",
      "peace", "peace_inverted", "rock", "stop", "stop_inverted", "three",
      "three2", "two_up", "two_up_inverted"};
  return labels;
}

void EncoderConfig::validate() const {
  require(out_channels >= 8, "encoder out_channels must be >= 8");
  require(grid >= 2, "encoder grid must be >= 2");
  require(!backbone_channels.empty(), "backbone needs at least one stage");
}

Cbam::Cbam(ParamStore& ps, const std::string& name, std::size_t channels)
    : channels_(channels) {
  require(channels >= 2, "cbam needs at least 2 channels");
  const std::size_t hidden = std::max<std::size_t>(1, channels / 4);
  mlp1_ = Linear(ps, name + ".mlp1", channels, hidden);
  mlp2_ = Linear(ps, name + ".mlp2", hidden, channels);
  spatial_ = Conv2dLayer(ps, name + ".spatial", 2, 1, 7, 1, 3);
}

Tensor Cbam::forward(const Tensor& x) const { return forward(x, nullptr, nullptr); }

Tensor Cbam::forward(const Tensor& x, Tensor* channel_gate, Tensor* spatial_gate) const {
  if (x.rank() != 3 || x.shape()[0] != channels_)
    throw ShapeError("cbam: expected [" + std::to_string(channels_) +
                     ",H,W] input, got " + shape_str(x.shape()));
  const std::size_t h = x.shape()[1], w = x.shape()[2];

  // Channel attention: shared MLP over global average- and max-pooled stats.
  auto pooled_stats = [&](const Tensor& pooled) {
    const Tensor row = reshape(pooled, {1, channels_});
    return mlp2_.forward(relu(mlp1_.forward(row)));
  };
  const Tensor avg_stat =
      pooled_stats(avg_pool2d(x, static_cast<int>(h), static_cast<int>(w), 1, 1));
  const Tensor max_stat =
      pooled_stats(max_pool2d(x, static_cast<int>(h), static_cast<int>(w), 1, 1));
  const Tensor cgate = reshape(sigmoid(add(avg_stat, max_stat)), {channels_, 1, 1});
  if (channel_gate) *channel_gate = cgate;
  const Tensor gated = mul(x, cgate);

  // Spatial attention: 7x7 conv over the channel mean/max maps.
  const Tensor maps = concat({channel_mean(gated), channel_max(gated)}, 0);
  const Tensor sgate = sigmoid(spatial_.forward(maps));  // [1,H,W]
  if (spatial_gate) *spatial_gate = sgate;
  return mul(gated, sgate);
}

RenderingEncoder::RenderingEncoder(ParamStore& ps, const std::string& name,
                                   std::size_t in_channels, const EncoderConfig& cfg)
    : cfg_(cfg), in_channels_(in_channels) {
  cfg.validate();
  std::size_t prev = in_channels;
  for (std::size_t i = 0; i < cfg.backbone_channels.size(); ++i) {
    stages_.emplace_back(ps, name + ".stage" + std::to_string(i), prev,
                         cfg.backbone_channels[i], 3, 2, 1);
    prev = cfg.backbone_channels[i];
  }
  cbam_ = Cbam(ps, name + ".cbam", prev);
  reduce_ = Conv2dLayer(ps, name + ".reduce", prev, cfg.out_channels, 1, 1, 0);
}

Tensor RenderingEncoder::forward(const Tensor& image) const {
  if (image.rank() != 3 || image.shape()[0] != in_channels_)
    throw ShapeError("rendering_encoder: expected [" + std::to_string(in_channels_) +
                     ",H,W] input, got " + shape_str(image.shape()));
  const std::size_t h = image.shape()[1], w = image.shape()[2];
  if (h < 64 || w < 64 || h % 4 != 0 || w % 4 != 0)
    throw ValidationError("rendering_encoder: input size must be >= 64 and divisible by 4, got " +
                          shape_str(image.shape()));

  Tensor x = image;
  for (const auto& stage : stages_) x = relu(stage.forward(x));
  if (x.shape()[1] != cfg_.grid || x.shape()[2] != cfg_.grid)
    x = bilinear_resize(x, cfg_.grid, cfg_.grid);
  x = cbam_.forward(x);
  return reduce_.forward(x);
}

DualStream::DualStream(ParamStore& ps, const std::string& name, std::size_t channels)
    : channels_(channels),
      fc1_(ps, name + ".fc1", 2 * channels, channels),
      fc2_(ps, name + ".fc2", channels, channels) {}

Tensor DualStream::forward(const Tensor& feat_a, const Tensor& feat_b) const {
  if (feat_a.shape() != feat_b.shape())
    throw ShapeError("dual_stream: shapes " + shape_str(feat_a.shape()) + " and " +
                     shape_str(feat_b.shape()) + " must match");
  if (feat_a.rank() != 3 || feat_a.shape()[0] != channels_)
    throw ShapeError("dual_stream: expected [" + std::to_string(channels_) +
                     ",G,G] features, got " + shape_str(feat_a.shape()));
  const std::size_t g1 = feat_a.shape()[1], g2 = feat_a.shape()[2];
  const std::size_t n = g1 * g2;

  auto to_tokens = [&](const Tensor& t) {
    return transpose2d(reshape(t, {channels_, n}));  // [N, C]
  };
  const Tensor both = concat({to_tokens(feat_a), to_tokens(feat_b)}, 1);  // [N, 2C]
  const Tensor mixed = fc2_.forward(relu(fc1_.forward(both)));
  const Tensor grid = reshape(transpose2d(mixed), {channels_, g1, g2});
  return add(grid, scale(add(feat_a, feat_b), 0.5));
}

BBoxEncoder::BBoxEncoder(ParamStore& ps, const std::string& name, std::size_t out_dim)
    : fc1_(ps, name + ".fc1", 4, 64), fc2_(ps, name + ".fc2", 64, out_dim) {}

Tensor BBoxEncoder::forward(const std::array<double, 4>& bbox) const {
  require(bbox[0] < bbox[2] && bbox[1] < bbox[3],
          "bbox corners must satisfy x0 < x1 and y0 < y1");
  for (double v : bbox) require_finite(v, "bbox coordinate");
  const Tensor in = Tensor::from_data({1, 4}, {bbox[0], bbox[1], bbox[2], bbox[3]});
  return reshape(fc2_.forward(relu(fc1_.forward(in))), {fc2_.out_features()});
}

Tensor text_encoder_stub(const std::string& label) {
  require(!label.empty(), "text label must be non-empty");
  Rng rng(substream_seed(fnv1a(label), "text_stub"));
  std::vector<double> v(kTextFeatureDim);
  double norm_sq = 0.0;
  for (double& x : v) {
    x = rng.normal();
    norm_sq += x * x;
  }
  const double inv = 1.0 / std::sqrt(norm_sq);
  for (double& x : v) x *= inv;
  return Tensor::from_data({kTextFeatureDim}, std::move(v));
}

}  // namespace mufen
