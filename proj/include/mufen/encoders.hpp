#pragma once

#include <array>
#include <string>

#include "mufen/nn.hpp"

namespace mufen {

// The 18 gesture classes used for dataset labels and the text stub tests.
const std::array<std::string, 18>& gesture_labels();

struct EncoderConfig {
  std::size_t out_channels = 64;  // 1280 reproduces the full-scale width
  std::size_t grid = 16;          // spatial size of the output feature map
  std::vector<std::size_t> backbone_channels = {16, 32, 64, 64};

  void validate() const;
};

// Convolutional block attention: a channel gate from pooled statistics
// followed by a spatial gate from channel-pooled maps. Both gates are
// sigmoids, so they live strictly inside (0,1) and never grow a feature.
class Cbam {
 public:
  Cbam() = default;
  Cbam(ParamStore& ps, const std::string& name, std::size_t channels);

  // [C,H,W] -> [C,H,W]
  Tensor forward(const Tensor& x) const;
  // Exposes the channel gate [C,1,1] and spatial gate [1,H,W].
  Tensor forward(const Tensor& x, Tensor* channel_gate, Tensor* spatial_gate) const;

 private:
  std::size_t channels_ = 0;
  Linear mlp1_, mlp2_;      // shared MLP over avg- and max-pooled stats
  Conv2dLayer spatial_;     // 7x7 conv over [mean;max] channel maps
};

// Four stride-2 conv stages, a resize onto the target grid, CBAM, and a 1x1
// channel reduction. Stands in for the truncated classification backbone at
// desk scale; the contract is the [out_channels, grid, grid] output.
class RenderingEncoder {
 public:
  RenderingEncoder() = default;
  RenderingEncoder(ParamStore& ps, const std::string& name, std::size_t in_channels,
                   const EncoderConfig& cfg);

  // [in_channels, H, W] -> [out_channels, grid, grid]; H, W >= 64 and
  // divisible by 4.
  Tensor forward(const Tensor& image) const;
  const EncoderConfig& config() const { return cfg_; }

 private:
  EncoderConfig cfg_;
  std::size_t in_channels_ = 0;
  std::vector<Conv2dLayer> stages_;
  Cbam cbam_;
  Conv2dLayer reduce_;
};

// Depth maps run through the same architecture with one input channel.
class DepthEncoder {
 public:
  DepthEncoder() = default;
  DepthEncoder(ParamStore& ps, const std::string& name, const EncoderConfig& cfg)
      : encoder_(ps, name, 1, cfg) {}
  Tensor forward(const Tensor& depth) const { return encoder_.forward(depth); }

 private:
  RenderingEncoder encoder_;
};

// Fuses the two complementary-view feature grids: a per-site MLP over the
// concatenated features plus the mean of the two streams as the residual
// (symmetric, and an identity on duplicated inputs at zero weights).
class DualStream {
 public:
  DualStream() = default;
  DualStream(ParamStore& ps, const std::string& name, std::size_t channels);

  // two [C,G,G] grids -> [C,G,G]
  Tensor forward(const Tensor& feat_a, const Tensor& feat_b) const;

 private:
  std::size_t channels_ = 0;
  Linear fc1_, fc2_;
};

// MLP over the normalized corner coordinates (4 -> 64 -> out_dim).
class BBoxEncoder {
 public:
  BBoxEncoder() = default;
  BBoxEncoder(ParamStore& ps, const std::string& name, std::size_t out_dim);

  // bbox = (x0, y0, x1, y1), x0 < x1 and y0 < y1, all in [0,1].
  Tensor forward(const std::array<double, 4>& bbox) const;
  std::size_t out_dim() const { return fc2_.out_features(); }

 private:
  Linear fc1_, fc2_;
};

// Deterministic 768-d unit vector from a label hash; a drop-in slot for real
// language-model embeddings (any external 768-vector works via the same
// interface). Equal labels give identical vectors.
Tensor text_encoder_stub(const std::string& label);

inline constexpr std::size_t kTextFeatureDim = 768;

// Per-modality features on the shared grid plus the fused output.
struct FeatureBundle {
  Tensor mesh_feat;   // [C, G, G]
  Tensor depth_feat;  // [C, G, G]
  Tensor text_feat;   // [768]
  Tensor bbox_feat;   // [D_b]
  Tensor fused;       // [C, G, G] after multimodal concat
};

}  // namespace mufen
