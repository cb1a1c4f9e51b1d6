#include "mufen/dataset.hpp"

#include "mufen/encoders.hpp"
#include "mufen/fusion.hpp"
#include "mufen/rng.hpp"

namespace mufen {

Tensor framebuffer_to_tensor(const Framebuffer& fb) {
  const std::size_t h = static_cast<std::size_t>(fb.height);
  const std::size_t w = static_cast<std::size_t>(fb.width);
  std::vector<double> data(3 * h * w);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < h * w; ++i)
      data[c * h * w + i] = static_cast<double>(fb.rgb[i * 3 + c]) / 255.0;
  return Tensor::from_data({3, h, w}, std::move(data));
}

Tensor gray_to_tensor(const GrayImage& img) {
  const std::size_t h = static_cast<std::size_t>(img.height);
  const std::size_t w = static_cast<std::size_t>(img.width);
  return Tensor::from_data({1, h, w}, img.pixels);
}

Tensor coverage_mask(const Framebuffer& fb) {
  const std::size_t h = static_cast<std::size_t>(fb.height);
  const std::size_t w = static_cast<std::size_t>(fb.width);
  std::vector<double> data(h * w);
  for (std::size_t i = 0; i < h * w; ++i)
    data[i] = std::isfinite(fb.depth[i]) ? 1.0 : 0.0;
  return Tensor::from_data({1, h, w}, std::move(data));
}

SampleSpec synth_sample_spec(std::uint64_t seed, std::size_t index) {
  Rng rng(substream_seed(seed, "geometry", index));
  std::array<double, 5> curls;
  for (double& c : curls) c = rng.uniform();
  const Handedness handedness =
      rng.uniform() < 0.5 ? Handedness::Right : Handedness::Left;

  SampleSpec spec;
  spec.mesh = synth_hand(substream_seed(seed, "mesh", index), curls, handedness);
  spec.camera.translation = {rng.uniform(-0.02, 0.02), rng.uniform(-0.02, 0.02), 0.6};
  spec.camera.projection = WeakPerspective{4.5};
  spec.label = gesture_labels()[rng.uniform_index(gesture_labels().size())];
  spec.sample_id = "sample_" + std::to_string(index);
  return spec;
}

ToySample build_toy_sample(const SampleSpec& spec, const DatasetConfig& cfg) {
  const int s = cfg.render_size;
  const auto pairs = score_pairs(spec.mesh, spec.camera, s, s);
  const ViewPair selected = select_pair(pairs, cfg.single_view_max);
  const PriorBundle bundle = emit_pair_renders(spec.mesh, spec.camera, selected, s, s);

  ToySample sample;
  sample.sample_id = spec.sample_id;
  sample.label = spec.label;
  sample.pair = selected.id;
  for (std::size_t i = 0; i < 3; ++i) sample.scores[i] = pairs[i].score;
  sample.bbox = bundle.bbox;
  sample.rgb_a = framebuffer_to_tensor(bundle.rgb_a);
  sample.rgb_b = framebuffer_to_tensor(bundle.rgb_b);
  sample.depth = gray_to_tensor(bundle.depth_front);
  sample.text = text_encoder_stub(spec.label);

  // The front shaded render stands in for the photo's gesture region.
  const Framebuffer front = render_view(spec.mesh, spec.camera, ViewId::Front, s, s);
  const Tensor front_rgb = framebuffer_to_tensor(front);
  sample.gt_region =
      bilinear_resize(front_rgb, MultiModalUNet::kOutSize, MultiModalUNet::kOutSize);

  // Latent target: front rgb + coverage at 16x16, centered and scaled down so
  // the noise dominates mid-schedule.
  const Tensor rgb16 = bilinear_resize(front_rgb, 16, 16);
  const Tensor mask16 = bilinear_resize(coverage_mask(front), 16, 16);
  Tensor z0 = concat({rgb16, mask16}, 0);
  z0 = scale(add(z0, Tensor::full({4, 16, 16}, -0.5)), cfg.latent_scale);
  sample.latent = z0;
  return sample;
}

std::vector<ToySample> make_toy_dataset(const DatasetConfig& cfg) {
  require(cfg.count > 0, "dataset count must be positive");
  require(cfg.render_size >= 64 && cfg.render_size % 4 == 0,
          "dataset render_size must be >= 64 and divisible by 4");
  std::vector<ToySample> out;
  out.reserve(cfg.count);
  for (std::size_t i = 0; i < cfg.count; ++i)
    out.push_back(build_toy_sample(synth_sample_spec(cfg.seed, i), cfg));
  return out;
}

}  // namespace mufen
