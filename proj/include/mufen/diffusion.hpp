#pragma once

#include <functional>

#include "mufen/dataset.hpp"
#include "mufen/fusion.hpp"

namespace mufen {

// Cumulative signal schedule for the forward process
//   z_t = sqrt(alpha_bar[t]) z0 + sqrt(1 - alpha_bar[t]) eps.
struct NoiseSchedule {
  std::size_t steps = 100;
  std::vector<double> alpha_bar;

  // Squared-cosine schedule with the usual small offset.
  static NoiseSchedule cosine(std::size_t steps = 100);
  // alpha_bar must lie in (0,1], start >= 0.99, end <= 0.05 and decrease
  // strictly.
  void validate() const;
};

Tensor q_sample(const Tensor& z0, std::size_t t, const Tensor& eps,
                const NoiseSchedule& schedule);

struct LossWeights {
  double lambda = 0.1;
  void validate() const {
    require(std::isfinite(lambda) && lambda >= 0.0, "lambda must be finite and >= 0");
  }
};

using DenoiserFn =
    std::function<Tensor(const Tensor& z_t, std::size_t t, const Tensor* condition)>;

// Mean-squared noise-prediction error: ||eps - model(q_sample(z0,t,eps), t, c)||^2.
Tensor denoise_loss(const DenoiserFn& model, const Tensor& z0, std::size_t t,
                    const Tensor& eps, const Tensor* condition,
                    const NoiseSchedule& schedule);

// Mean absolute error between the ground-truth and reconstructed gesture
// region images.
Tensor rehand_loss(const Tensor& gt_region, const Tensor& recon);

// Combined objective: denoise + lambda * rehand, exact arithmetic.
Tensor total_loss(const Tensor& denoise, const Tensor& rehand, const LossWeights& w);
double total_loss(double denoise, double rehand, const LossWeights& w);

// Two-conv conditional noise predictor over [4,16,16] latents. Alongside the
// latent it sees the condition grid, the normalized step index and the noise
// level sqrt(1 - alpha_bar[t]) as constant channels.
class ToyDenoiser {
 public:
  ToyDenoiser() = default;
  ToyDenoiser(ParamStore& ps, const std::string& name, std::size_t latent_channels,
              std::size_t cond_channels, std::size_t hidden, NoiseSchedule schedule);

  Tensor forward(const Tensor& z_t, std::size_t t, const Tensor* condition) const;
  DenoiserFn fn() const;
  const NoiseSchedule& schedule() const { return schedule_; }

 private:
  std::size_t latent_channels_ = 0;
  std::size_t cond_channels_ = 0;
  NoiseSchedule schedule_;
  Conv2dLayer conv1_, conv2_;
};

struct TrainConfig {
  std::uint64_t seed = 7;
  std::size_t steps = 300;
  std::size_t batch_size = 4;
  double lr = 1e-3;  // desk-scale default; the full-scale 1e-6 is a flag away
  LossWeights weights;
  std::size_t timesteps = 100;
  std::size_t latent_channels = 4;
  std::size_t denoiser_hidden = 32;
  MufenConfig network;
  DatasetConfig dataset;
  Dtype dtype = Dtype::f64;

  TrainConfig() {
    network.encoder.out_channels = 16;
    network.encoder.backbone_channels = {8, 16, 16, 16};
    network.bbox_dim = 32;
  }
  void validate() const;
};

struct TrainStepRecord {
  std::size_t step;
  double denoise;
  double rehand;
  double total;
};

struct TrainResult {
  std::vector<TrainStepRecord> curve;  // per optimization step, batch averages
  double initial_loss = 0.0;           // full-dataset objective before training
  double final_loss = 0.0;             // same measurement after training
  std::map<std::string, Tensor> checkpoint;
};

// Desk-scale training loop: Adam over the MUFEN network plus the toy
// denoiser, minimizing the combined objective on a synthetic dataset. Fully
// reproducible under cfg.seed; aborts with the step index if the loss goes
// non-finite.
TrainResult train_toy(const TrainConfig& cfg);
TrainResult train_toy(const TrainConfig& cfg, const std::vector<ToySample>& dataset);

void write_loss_csv(const std::vector<TrainStepRecord>& curve, const std::string& path);

}  // namespace mufen
