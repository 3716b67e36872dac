#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "pogmdm/prior.hpp"

namespace pogmdm {

struct TrainConfig {
  std::uint64_t iterations{100000};
  std::size_t batch_size{8};
  std::size_t patch_size{64};
  double lr_kernels{5e-3};
  double lr_weights{2e-2};
  double lr_conditioning{1e-3};
  double ema_momentum{0.999};
  double horizon{1.0};  // T; t ~ U(t_min, T]
  double t_min{1e-5};
  std::uint64_t seed{0};
  std::uint64_t log_every{100};

  void validate() const;
};

/// One denoising score-matching example: clean x0, diffused x_t at time t.
struct TrainingSample {
  Image x0;
  Image xt;
  double t{0.0};
};

/// x_t = x0 + sqrt(2t) z with z ~ N(0, I); returns (x_t, z).
std::pair<Image, Image> sample_pair(const Image& x0, double t, std::mt19937_64& rng);

/// Mean over the batch of ||x0 - x_t - 2t score(x_t, 2t)||^2.
double dsm_loss(const PoGmdm& model, std::span<const TrainingSample> batch);

struct LossAndGradient {
  double loss{0.0};
  GradientSet gradient;
};

/// Exact gradient of dsm_loss by reverse-mode differentiation through
/// conv -> mixture score -> conv adjoint -> residual. The spectral scale nu^2
/// is treated as a constant.
LossAndGradient dsm_loss_and_gradients(const PoGmdm& model, std::span<const TrainingSample> batch);
GradientSet dsm_gradients(const PoGmdm& model, std::span<const TrainingSample> batch);

struct AdaBeliefState {
  std::vector<double> m;
  std::vector<double> s;
  std::uint64_t step{0};
};

struct AdaBeliefOptions {
  double beta1{0.9};
  double beta2{0.999};
  double eps{1e-16};
};

/// One AdaBelief update of `params` in place. State vectors are sized on first use.
void adabelief_step(std::span<double> params, std::span<const double> grads, AdaBeliefState& state,
                    double lr, const AdaBeliefOptions& options = {});

/// Zero-mean kernels, mirrored simplex weights, positive softplus scales.
PoGmdm apply_constraints(PoGmdm model);

/// shadow <- momentum * shadow + (1 - momentum) * params.
void ema_update(std::span<double> shadow, std::span<const double> params, double momentum);

struct LossRecord {
  std::uint64_t iteration{0};
  double loss{0.0};
  double wall_seconds{0.0};
};

struct TrainResult {
  PoGmdm model;  // EMA parameters
  std::vector<LossRecord> log;
};

using TrainCallback = std::function<void(const LossRecord&, const PoGmdm& ema_model)>;

/// Trains `initial` on random patch crops of `dataset` (images in [0, 1]).
/// `on_log` runs every config.log_every iterations.
TrainResult train(const std::vector<Image>& dataset, PoGmdm initial, const TrainConfig& config,
                  const TrainCallback& on_log = {});

}  // namespace pogmdm
