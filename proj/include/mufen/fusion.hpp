#pragma once

#include "mufen/encoders.hpp"

namespace mufen {

// [C,G,G] grid <-> [G*G, C] token matrix.
Tensor grid_to_tokens(const Tensor& grid);
Tensor tokens_to_grid(const Tensor& tokens, std::size_t h, std::size_t w);

// Injects bounding-box localization into one modality's tokens:
//   1. transform the bbox feature to the modality width (query),
//   2. single-query attention with the modality tokens as keys and values,
//   3. a learnable sigmoid gate over [token; context] picks how much of the
//      retrieved context each token takes,
//   4. out = Proj(tokens + gate * context).
// Width-preserving: output shape equals the input token shape.
class BBoxFusion {
 public:
  BBoxFusion() = default;
  BBoxFusion(ParamStore& ps, const std::string& name, std::size_t model_dim,
             std::size_t bbox_dim);

  struct Trace {
    Tensor attention;  // [1, N], sums to 1
    Tensor gate;       // [N, D], strictly inside (0,1)
  };

  // tokens [N, D], bbox_feat [bbox_dim] -> [N, D]
  Tensor forward(const Tensor& tokens, const Tensor& bbox_feat,
                 Trace* trace = nullptr) const;
  std::size_t model_dim() const { return model_dim_; }

 private:
  std::size_t model_dim_ = 0;
  Linear transform_;  // bbox_dim -> D
  Linear gate_;       // 2D -> D, bias starts at zero (gate ~ 0.5)
  Linear proj_;       // D -> D
};

// Concatenates all modality tokens along the feature axis (vector modalities
// broadcast to every grid token) and mixes them with a per-site MLP down to
// the unified width.
class MultiModalConcat {
 public:
  MultiModalConcat() = default;
  MultiModalConcat(ParamStore& ps, const std::string& name, std::size_t mesh_dim,
                   std::size_t depth_dim, std::size_t text_dim, std::size_t bbox_dim,
                   std::size_t out_channels, std::size_t grid);

  // Inputs are post-BBoxFusion tokens: mesh/depth [N, C], text [1, text_dim],
  // bbox [1, bbox_dim]. Throws MissingModalityError naming an undefined one.
  Tensor forward(const Tensor& mesh_tokens, const Tensor& depth_tokens,
                 const Tensor& text_tokens, const Tensor& bbox_tokens) const;

 private:
  std::size_t grid_ = 0;
  std::size_t out_channels_ = 0;
  Linear fc1_, fc2_;
};

// UNet over the fused 16x16 grid: identity -> strided-conv DownBlock with
// self-attention at 8x8 -> bottleneck self-attention -> bilinear up to 16x16
// with cross-attention against the skip tokens -> bilinear to 225x225 and a
// 3x3 conv to RGB through a sigmoid.
class MultiModalUNet {
 public:
  static constexpr std::size_t kGrid = 16;
  static constexpr std::size_t kOutSize = 225;

  MultiModalUNet() = default;
  MultiModalUNet(ParamStore& ps, const std::string& name, std::size_t channels);

  struct Trace {
    Tensor down_attention;        // [64, 64]
    Tensor bottleneck_attention;  // [64, 64]
    Tensor up_attention;          // [256, 256]
  };

  // [C,16,16] -> [3,225,225], values in (0,1).
  Tensor forward(const Tensor& unified, Trace* trace = nullptr) const;
  std::size_t channels() const { return channels_; }

 private:
  std::size_t channels_ = 0;
  Conv2dLayer down_conv_;  // stride 2
  SelfAttention down_attn_;
  SelfAttention bottleneck_attn_;
  Conv2dLayer up_conv_;
  CrossAttention up_cross_;
  Conv2dLayer head_;  // C -> 3
};

struct MufenConfig {
  EncoderConfig encoder;
  std::size_t bbox_dim = 64;

  void validate() const { encoder.validate(); }
};

// The full feature-encoder stack: two rendering encoders fused by the dual
// stream, a depth encoder, bbox and text features, per-modality bbox fusion,
// multimodal concat, and the UNet head producing the reconstruction.
class MufenNetwork {
 public:
  MufenNetwork() = default;
  MufenNetwork(ParamStore& ps, const MufenConfig& cfg);

  struct Output {
    FeatureBundle bundle;
    Tensor unified;  // [C,16,16] condition grid
    Tensor recon;    // [3,225,225]
  };

  Output forward(const Tensor& rgb_a, const Tensor& rgb_b, const Tensor& depth,
                 const std::array<double, 4>& bbox, const Tensor& text_feat) const;

  const MufenConfig& config() const { return cfg_; }

 private:
  MufenConfig cfg_;
  RenderingEncoder render_a_, render_b_;
  DualStream dual_;
  DepthEncoder depth_;
  BBoxEncoder bbox_;
  BBoxFusion fuse_mesh_, fuse_depth_, fuse_text_, fuse_bbox_;
  MultiModalConcat mm_concat_;
  MultiModalUNet unet_;
};

}  // namespace mufen
