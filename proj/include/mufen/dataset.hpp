#pragma once

#include <string>
#include <vector>

#include "mufen/synth_hand.hpp"
#include "mufen/tensor.hpp"
#include "mufen/viewselect.hpp"

namespace mufen {

// [3,H,W] tensor in [0,1] from shaded bytes.
Tensor framebuffer_to_tensor(const Framebuffer& fb);
// [1,H,W] tensor from a grayscale image.
Tensor gray_to_tensor(const GrayImage& img);
// [1,H,W] binary coverage mask.
Tensor coverage_mask(const Framebuffer& fb);

// One synthesized training sample: the selected-pair prior plus the
// ground-truth region image and the latent target.
struct ToySample {
  std::string sample_id;
  std::string label;
  PairId pair = PairId::FrontRear;
  std::array<double, 3> scores{0, 0, 0};
  std::array<double, 4> bbox{0, 0, 0, 0};
  Tensor rgb_a;      // [3,S,S]
  Tensor rgb_b;      // [3,S,S]
  Tensor depth;      // [1,S,S]
  Tensor text;       // [768]
  Tensor gt_region;  // [3,225,225] front render at the target resolution
  Tensor latent;     // [4,16,16] front rgb + coverage, shifted and scaled
};

struct DatasetConfig {
  std::size_t count = 64;
  std::uint64_t seed = 7;
  int render_size = 64;       // pipeline render resolution (>= 64, /4)
  double latent_scale = 0.5;  // latent = scale * (value - 0.5)
  bool single_view_max = false;
};

// Per-sample synthesis inputs, all drawn from named substreams of the root
// seed: hand geometry, handedness, camera jitter, gesture label.
struct SampleSpec {
  HandMesh mesh;
  CameraPose camera;
  std::string label;
  std::string sample_id;
};
SampleSpec synth_sample_spec(std::uint64_t seed, std::size_t index);

ToySample build_toy_sample(const SampleSpec& spec, const DatasetConfig& cfg);
std::vector<ToySample> make_toy_dataset(const DatasetConfig& cfg);

}  // namespace mufen
