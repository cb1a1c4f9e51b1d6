#include "mufen/fusion.hpp"

#include <cmath>

namespace mufen {

Tensor grid_to_tokens(const Tensor& grid) {
  if (grid.rank() != 3)
    throw ShapeError("grid_to_tokens: expected [C,H,W], got " + shape_str(grid.shape()));
  const std::size_t c = grid.shape()[0], n = grid.shape()[1] * grid.shape()[2];
  return transpose2d(reshape(grid, {c, n}));
}

Tensor tokens_to_grid(const Tensor& tokens, std::size_t h, std::size_t w) {
  if (tokens.rank() != 2 || tokens.shape()[0] != h * w)
    throw ShapeError("tokens_to_grid: expected [" + std::to_string(h * w) +
                     ",C] tokens, got " + shape_str(tokens.shape()));
  return reshape(transpose2d(tokens), {tokens.shape()[1], h, w});
}

BBoxFusion::BBoxFusion(ParamStore& ps, const std::string& name, std::size_t model_dim,
                       std::size_t bbox_dim)
    : model_dim_(model_dim),
      transform_(ps, name + ".transform", bbox_dim, model_dim),
      gate_(ps, name + ".gate", 2 * model_dim, model_dim, /*zero_bias=*/true),
      proj_(ps, name + ".proj", model_dim, model_dim) {}

Tensor BBoxFusion::forward(const Tensor& tokens, const Tensor& bbox_feat,
                           Trace* trace) const {
  if (tokens.rank() != 2 || tokens.shape()[1] != model_dim_)
    throw ShapeError("bbox_fuse: expected [N," + std::to_string(model_dim_) +
                     "] tokens, got " + shape_str(tokens.shape()));
  if (bbox_feat.rank() != 1 || bbox_feat.shape()[0] != transform_.in_features())
    throw ShapeError("bbox_fuse: expected [" + std::to_string(transform_.in_features()) +
                     "] bbox feature, got " + shape_str(bbox_feat.shape()));
  const std::size_t n = tokens.shape()[0];

  // Feature transformation: bbox feature becomes the query at width D.
  const Tensor query = transform_.forward(reshape(bbox_feat, {1, transform_.in_features()}));
  // Attention fusion: the query reads context from the modality tokens.
  Tensor attn;
  const Tensor context = attention(query, tokens, tokens, &attn);  // [1, D]
  const Tensor context_rows = broadcast_to(context, {n, model_dim_});
  // Learnable gated fusion, per token and per channel.
  const Tensor gate = sigmoid(gate_.forward(concat({tokens, context_rows}, 1)));
  if (trace) {
    trace->attention = attn;
    trace->gate = gate;
  }
  // Residual connection and projection.
  return proj_.forward(add(tokens, mul(gate, context_rows)));
}

MultiModalConcat::MultiModalConcat(ParamStore& ps, const std::string& name,
                                   std::size_t mesh_dim, std::size_t depth_dim,
                                   std::size_t text_dim, std::size_t bbox_dim,
                                   std::size_t out_channels, std::size_t grid)
    : grid_(grid),
      out_channels_(out_channels),
      fc1_(ps, name + ".fc1", mesh_dim + depth_dim + text_dim + bbox_dim, out_channels),
      fc2_(ps, name + ".fc2", out_channels, out_channels) {}

Tensor MultiModalConcat::forward(const Tensor& mesh_tokens, const Tensor& depth_tokens,
                                 const Tensor& text_tokens,
                                 const Tensor& bbox_tokens) const {
  if (!mesh_tokens.defined()) throw MissingModalityError("mesh");
  if (!depth_tokens.defined()) throw MissingModalityError("depth");
  if (!text_tokens.defined()) throw MissingModalityError("text");
  if (!bbox_tokens.defined()) throw MissingModalityError("bbox");
  const std::size_t n = grid_ * grid_;
  if (mesh_tokens.shape()[0] != n || depth_tokens.shape()[0] != n)
    throw ShapeError("mm_concat: grid tokens must have " + std::to_string(n) + " rows");

  // Vector modalities replicate across the grid before the feature concat.
  auto spread = [&](const Tensor& t) {
    return broadcast_to(t, {n, t.shape()[1]});
  };
  const Tensor all = concat(
      {mesh_tokens, depth_tokens, spread(text_tokens), spread(bbox_tokens)}, 1);
  const Tensor mixed = fc2_.forward(relu(fc1_.forward(all)));
  return tokens_to_grid(mixed, grid_, grid_);
}

MultiModalUNet::MultiModalUNet(ParamStore& ps, const std::string& name,
                               std::size_t channels)
    : channels_(channels),
      down_conv_(ps, name + ".down_conv", channels, channels, 3, 2, 1),
      down_attn_(ps, name + ".down_attn", channels),
      bottleneck_attn_(ps, name + ".bottleneck_attn", channels),
      up_conv_(ps, name + ".up_conv", channels, channels, 3, 1, 1),
      up_cross_(ps, name + ".up_cross", channels),
      head_(ps, name + ".head", channels, 3, 3, 1, 1) {
  require(channels >= 8, "mm_unet needs at least 8 channels");
}

Tensor MultiModalUNet::forward(const Tensor& unified, Trace* trace) const {
  if (unified.rank() != 3 || unified.shape()[0] != channels_ ||
      unified.shape()[1] != kGrid || unified.shape()[2] != kGrid)
    throw ShapeError("mm_unet: expected [" + std::to_string(channels_) + ",16,16], got " +
                     shape_str(unified.shape()));

  // Identity layer: the fused grid enters unchanged.
  const Tensor x0 = unified;
  const Tensor skip = grid_to_tokens(x0);  // [256, C]

  // DownBlock: 16x16 -> 8x8 conv, then self-attention over the 64 tokens.
  Tensor down = relu(down_conv_.forward(x0));
  Tensor down_tokens = grid_to_tokens(down);
  down_tokens = down_attn_.forward(down_tokens, trace ? &trace->down_attention : nullptr);

  // Bottleneck self-attention, spatial size unchanged.
  Tensor mid_tokens = bottleneck_attn_.forward(
      down_tokens, trace ? &trace->bottleneck_attention : nullptr);
  const Tensor mid = tokens_to_grid(mid_tokens, kGrid / 2, kGrid / 2);

  // Up path: bilinear 8 -> 16, conv, cross-attention against the skip tokens.
  Tensor up = relu(up_conv_.forward(bilinear_resize(mid, kGrid, kGrid)));
  Tensor up_tokens = grid_to_tokens(up);
  up_tokens = up_cross_.forward(up_tokens, skip, trace ? &trace->up_attention : nullptr);
  const Tensor merged = tokens_to_grid(up_tokens, kGrid, kGrid);

  // Head: resize to the target resolution, 3x3 conv to RGB, sigmoid range.
  return sigmoid(head_.forward(bilinear_resize(merged, kOutSize, kOutSize)));
}

MufenNetwork::MufenNetwork(ParamStore& ps, const MufenConfig& cfg)
    : cfg_(cfg),
      render_a_(ps, "render_a", 3, cfg.encoder),
      render_b_(ps, "render_b", 3, cfg.encoder),
      dual_(ps, "dual_stream", cfg.encoder.out_channels),
      depth_(ps, "depth_enc", cfg.encoder),
      bbox_(ps, "bbox_enc", cfg.bbox_dim),
      fuse_mesh_(ps, "fuse_mesh", cfg.encoder.out_channels, cfg.bbox_dim),
      fuse_depth_(ps, "fuse_depth", cfg.encoder.out_channels, cfg.bbox_dim),
      fuse_text_(ps, "fuse_text", kTextFeatureDim, cfg.bbox_dim),
      fuse_bbox_(ps, "fuse_bbox", cfg.bbox_dim, cfg.bbox_dim),
      mm_concat_(ps, "mm_concat", cfg.encoder.out_channels, cfg.encoder.out_channels,
                 kTextFeatureDim, cfg.bbox_dim, cfg.encoder.out_channels,
                 cfg.encoder.grid),
      unet_(ps, "mm_unet", cfg.encoder.out_channels) {
  cfg.validate();
  require(cfg.encoder.grid == MultiModalUNet::kGrid,
          "MUFEN requires the 16x16 feature grid");
}

MufenNetwork::Output MufenNetwork::forward(const Tensor& rgb_a, const Tensor& rgb_b,
                                           const Tensor& depth,
                                           const std::array<double, 4>& bbox,
                                           const Tensor& text_feat) const {
  Output out;
  out.bundle.mesh_feat = dual_.forward(render_a_.forward(rgb_a), render_b_.forward(rgb_b));
  out.bundle.depth_feat = depth_.forward(depth);
  out.bundle.text_feat = text_feat;
  out.bundle.bbox_feat = bbox_.forward(bbox);

  const Tensor mesh_tokens =
      fuse_mesh_.forward(grid_to_tokens(out.bundle.mesh_feat), out.bundle.bbox_feat);
  const Tensor depth_tokens =
      fuse_depth_.forward(grid_to_tokens(out.bundle.depth_feat), out.bundle.bbox_feat);
  const Tensor text_tokens = fuse_text_.forward(
      reshape(out.bundle.text_feat, {1, kTextFeatureDim}), out.bundle.bbox_feat);
  const Tensor bbox_tokens = fuse_bbox_.forward(
      reshape(out.bundle.bbox_feat, {1, cfg_.bbox_dim}), out.bundle.bbox_feat);

  out.unified = mm_concat_.forward(mesh_tokens, depth_tokens, text_tokens, bbox_tokens);
  out.bundle.fused = out.unified;
  out.recon = unet_.forward(out.unified);
  return out;
}

}  // namespace mufen
