#include "mufen/diffusion.hpp"

#include <cmath>
#include <fstream>

#include "mufen/rng.hpp"

namespace mufen {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

NoiseSchedule NoiseSchedule::cosine(std::size_t steps) {
  require(steps >= 2, "schedule needs at least 2 steps");
  NoiseSchedule s;
  s.steps = steps;
  s.alpha_bar.resize(steps);
  const double offset = 0.008;
  auto f = [&](double u) {
    const double v = std::cos((u + offset) / (1.0 + offset) * kPi / 2.0);
    return v * v;
  };
  const double f0 = f(0.0);
  for (std::size_t t = 0; t < steps; ++t)
    s.alpha_bar[t] = f(static_cast<double>(t + 1) / static_cast<double>(steps)) / f0;
  s.validate();
  return s;
}

void NoiseSchedule::validate() const {
  require(alpha_bar.size() == steps && steps >= 2, "schedule length mismatch");
  for (double a : alpha_bar)
    require(a > 0.0 && a <= 1.0, "alpha_bar values must lie in (0, 1]");
  require(alpha_bar.front() >= 0.99, "alpha_bar[0] must be >= 0.99");
  require(alpha_bar.back() <= 0.05, "alpha_bar[T-1] must be <= 0.05");
  for (std::size_t t = 1; t < steps; ++t)
    require(alpha_bar[t] < alpha_bar[t - 1], "alpha_bar must decrease strictly");
}

Tensor q_sample(const Tensor& z0, std::size_t t, const Tensor& eps,
                const NoiseSchedule& schedule) {
  if (t >= schedule.alpha_bar.size())
    throw std::out_of_range("q_sample: step " + std::to_string(t) +
                            " out of range for T=" + std::to_string(schedule.alpha_bar.size()));
  if (z0.shape() != eps.shape())
    throw ShapeError("q_sample: z0 shape " + shape_str(z0.shape()) +
                     " does not match eps shape " + shape_str(eps.shape()));
  const double ab = schedule.alpha_bar[t];
  return add(scale(z0, std::sqrt(ab)), scale(eps, std::sqrt(1.0 - ab)));
}

Tensor denoise_loss(const DenoiserFn& model, const Tensor& z0, std::size_t t,
                    const Tensor& eps, const Tensor* condition,
                    const NoiseSchedule& schedule) {
  const Tensor z_t = q_sample(z0, t, eps, schedule);
  const Tensor predicted = model(z_t, t, condition);
  if (predicted.shape() != z0.shape())
    throw ShapeError("denoise_loss: model output shape " + shape_str(predicted.shape()) +
                     " does not match latent shape " + shape_str(z0.shape()));
  return mse_loss(eps, predicted);
}

Tensor rehand_loss(const Tensor& gt_region, const Tensor& recon) {
  if (gt_region.shape() != recon.shape())
    throw ShapeError("rehand_loss: shapes " + shape_str(gt_region.shape()) + " and " +
                     shape_str(recon.shape()) + " must match");
  return l1_loss(gt_region, recon);
}

Tensor total_loss(const Tensor& denoise, const Tensor& rehand, const LossWeights& w) {
  w.validate();
  return add(denoise, scale(rehand, w.lambda));
}

double total_loss(double denoise, double rehand, const LossWeights& w) {
  w.validate();
  require_finite(denoise, "denoise loss");
  require_finite(rehand, "rehand loss");
  return denoise + w.lambda * rehand;
}

ToyDenoiser::ToyDenoiser(ParamStore& ps, const std::string& name,
                         std::size_t latent_channels, std::size_t cond_channels,
                         std::size_t hidden, NoiseSchedule schedule)
    : latent_channels_(latent_channels),
      cond_channels_(cond_channels),
      schedule_(std::move(schedule)),
      conv1_(ps, name + ".conv1", latent_channels + cond_channels + 2, hidden, 3, 1, 1),
      conv2_(ps, name + ".conv2", hidden, latent_channels, 3, 1, 1) {}

Tensor ToyDenoiser::forward(const Tensor& z_t, std::size_t t,
                            const Tensor* condition) const {
  if (z_t.rank() != 3 || z_t.shape()[0] != latent_channels_)
    throw ShapeError("denoiser: expected [" + std::to_string(latent_channels_) +
                     ",H,W] latent, got " + shape_str(z_t.shape()));
  if (t >= schedule_.alpha_bar.size())
    throw std::out_of_range("denoiser: step out of range");
  const std::size_t h = z_t.shape()[1], w = z_t.shape()[2];

  std::vector<Tensor> channels{z_t};
  if (cond_channels_ > 0) {
    if (condition == nullptr) throw MissingModalityError("condition");
    if (condition->rank() != 3 || condition->shape()[0] != cond_channels_ ||
        condition->shape()[1] != h || condition->shape()[2] != w)
      throw ShapeError("denoiser: condition shape " + shape_str(condition->shape()) +
                       " does not match latent grid");
    channels.push_back(*condition);
  }
  const double tn = (static_cast<double>(t) + 0.5) / static_cast<double>(schedule_.steps);
  const double sigma = std::sqrt(1.0 - schedule_.alpha_bar[t]);
  channels.push_back(Tensor::full({1, h, w}, tn));
  channels.push_back(Tensor::full({1, h, w}, sigma));

  const Tensor x = concat(channels, 0);
  return conv2_.forward(relu(conv1_.forward(x)));
}

DenoiserFn ToyDenoiser::fn() const {
  return [this](const Tensor& z_t, std::size_t t, const Tensor* c) {
    return forward(z_t, t, c);
  };
}

void TrainConfig::validate() const {
  require(steps >= 1, "training needs at least one step");
  require(batch_size >= 1, "batch size must be >= 1");
  require(std::isfinite(lr) && lr > 0.0, "learning rate must be positive");
  require(timesteps >= 2, "timesteps must be >= 2");
  require(latent_channels >= 1, "latent_channels must be >= 1");
  weights.validate();
  network.validate();
}

namespace {

Tensor sample_eps(const std::string& sample_id, std::size_t step, const Shape& shape) {
  // Per-sample noise substream keyed by (sample_id, step).
  Rng rng(substream_seed(fnv1a(sample_id), "eps", step));
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = rng.normal();
  return Tensor::from_data(shape, std::move(v));
}

struct SampleLosses {
  Tensor denoise, rehand, total;
};

SampleLosses sample_losses(const MufenNetwork& net, const ToyDenoiser& denoiser,
                           const ToySample& sample, std::size_t t, const Tensor& eps,
                           const LossWeights& weights) {
  const MufenNetwork::Output out =
      net.forward(sample.rgb_a, sample.rgb_b, sample.depth, sample.bbox, sample.text);
  SampleLosses losses;
  losses.denoise = denoise_loss(denoiser.fn(), sample.latent, t, eps, &out.unified,
                                denoiser.schedule());
  losses.rehand = rehand_loss(sample.gt_region, out.recon);
  losses.total = total_loss(losses.denoise, losses.rehand, weights);
  return losses;
}

// Full-dataset objective with evaluation noise/steps pinned per sample, used
// for the before/after comparison.
double evaluate_objective(const MufenNetwork& net, const ToyDenoiser& denoiser,
                          const std::vector<ToySample>& dataset,
                          const LossWeights& weights, std::size_t timesteps) {
  double sum = 0.0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const std::size_t t = (i * timesteps) / dataset.size();
    const Tensor eps =
        sample_eps(dataset[i].sample_id + "/eval", 0, dataset[i].latent.shape());
    const SampleLosses losses =
        sample_losses(net, denoiser, dataset[i], t, eps, weights);
    sum += losses.total.item();
  }
  return sum / static_cast<double>(dataset.size());
}

}  // namespace

TrainResult train_toy(const TrainConfig& cfg) {
  return train_toy(cfg, make_toy_dataset(cfg.dataset));
}

TrainResult train_toy(const TrainConfig& cfg, const std::vector<ToySample>& dataset) {
  cfg.validate();
  require(!dataset.empty(), "training dataset is empty");

  ParamStore params(substream_seed(cfg.seed, "training"), cfg.dtype);
  MufenNetwork net(params, cfg.network);
  ToyDenoiser denoiser(params, "denoiser", cfg.latent_channels,
                       cfg.network.encoder.out_channels, cfg.denoiser_hidden,
                       NoiseSchedule::cosine(cfg.timesteps));
  Adam optimizer(params, cfg.lr);

  TrainResult result;
  result.initial_loss =
      evaluate_objective(net, denoiser, dataset, cfg.weights, cfg.timesteps);

  const std::size_t batch = std::min(cfg.batch_size, dataset.size());
  Rng order_rng(substream_seed(cfg.seed, "training/batch"));
  Rng step_rng(substream_seed(cfg.seed, "training/t"));

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    params.zero_grad();
    const auto indices = order_rng.sample_without_replacement(dataset.size(), batch);

    Tensor batch_total;
    double ld_sum = 0.0, lr_sum = 0.0, total_sum = 0.0;
    try {
      for (std::size_t b = 0; b < batch; ++b) {
        const ToySample& sample = dataset[indices[b]];
        const std::size_t t = static_cast<std::size_t>(step_rng.uniform_index(cfg.timesteps));
        const Tensor eps = sample_eps(sample.sample_id, step, sample.latent.shape());
        const SampleLosses losses =
            sample_losses(net, denoiser, sample, t, eps, cfg.weights);
        ld_sum += losses.denoise.item();
        lr_sum += losses.rehand.item();
        total_sum += losses.total.item();
        batch_total = batch_total.defined() ? add(batch_total, losses.total) : losses.total;
      }
      const Tensor loss = scale(batch_total, 1.0 / static_cast<double>(batch));
      if (!std::isfinite(loss.item()))
        throw NumericError("non-finite loss");
      backward(loss);
      optimizer.step();
    } catch (const NumericError& e) {
      throw NumericError("training aborted at step " + std::to_string(step) + ": " +
                         e.what());
    }

    result.curve.push_back({step, ld_sum / static_cast<double>(batch),
                            lr_sum / static_cast<double>(batch),
                            total_sum / static_cast<double>(batch)});
  }

  result.final_loss =
      evaluate_objective(net, denoiser, dataset, cfg.weights, cfg.timesteps);
  result.checkpoint = params.snapshot();
  return result;
}

void write_loss_csv(const std::vector<TrainStepRecord>& curve, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open file for writing: " + path);
  out << "step,l_denoise,l_rehand,total\n";
  char buf[128];
  for (const auto& rec : curve) {
    std::snprintf(buf, sizeof(buf), "%zu,%.10g,%.10g,%.10g\n", rec.step, rec.denoise,
                  rec.rehand, rec.total);
    out << buf;
  }
}

}  // namespace mufen
