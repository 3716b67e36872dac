#pragma once

#include <cstdint>
#include <vector>

#include "pogmdm/array.hpp"
#include "pogmdm/experts.hpp"
#include "pogmdm/filterbank.hpp"

namespace pogmdm {

struct ModelMetadata {
  std::uint64_t iterations{0};
  bool ema{false};
  double v_min{-0.5};
  double v_max{0.5};
  Shape training_shape{};
};

/// Trainable parameters (or gradients with the same layout), grouped the way
/// the optimizer assigns learning rates.
struct ParameterSet {
  std::vector<double> kernels;       // o x r x r, row-major per kernel
  std::vector<double> free_weights;  // o x ceil(L/2)
  std::vector<double> conditioning;  // variant-shaped, see TimeConditioning

  std::size_t size() const { return kernels.size() + free_weights.size() + conditioning.size(); }
  std::vector<double> flatten() const;
  void unflatten(std::span<const double> flat);
  ParameterSet zeros_like() const;
};

using GradientSet = ParameterSet;

/// Product of Gaussian-mixture experts on filter responses, with per-expert
/// variances that follow the diffusion variance v = 2t.
class PoGmdm {
 public:
  PoGmdm() = default;
  PoGmdm(FilterBank bank, std::vector<GmmExpert> experts, TimeConditioning conditioning,
         ModelMetadata metadata = {});

  std::size_t experts_count() const { return experts_.size(); }
  const FilterBank& bank() const { return bank_; }
  const std::vector<GmmExpert>& experts() const { return experts_; }
  const TimeConditioning& conditioning() const { return conditioning_; }
  const ModelMetadata& metadata() const { return metadata_; }
  ModelMetadata& metadata() { return metadata_; }

  /// Moves the cached filter spectra to a new working grid.
  void set_image_shape(Shape shape) { bank_.set_image_shape(shape); }

  ParameterSet parameters() const;
  void set_parameters(const ParameterSet& params);

  /// Recomputes nu^2 from the current kernels at the bank's image shape
  /// (spectral conditioning only).
  void refresh_spectral_scale();

  void set_conditioning(TimeConditioning conditioning);
  void set_bank(FilterBank bank);
  void set_experts(std::vector<GmmExpert> experts);

 private:
  void validate() const;

  FilterBank bank_;
  std::vector<GmmExpert> experts_;
  TimeConditioning conditioning_;
  ModelMetadata metadata_;
};

/// Bank matching the image shape of x, reusing the model's cache when possible.
FilterBank bank_for(const PoGmdm& model, Shape shape);

/// -sum_{l,k} log psi_k((K_k x)_l) at diffusion variance v >= 0.
double energy(const PoGmdm& model, const Image& x, double v);

/// grad_x log p(x, v) = sum_k K_k^T (log psi_k)'(K_k x).
Image score(const PoGmdm& model, const Image& x, double v);

/// One-step empirical-Bayes estimate y + v * score(y, v); v is the noise variance of y.
Image denoise_tweedie(const PoGmdm& model, const Image& y, double v);

std::size_t count_parameters(const PoGmdm& model);

struct ModelSpec {
  std::size_t experts{20};
  std::size_t kernel_size{5};
  std::size_t components{125};
  double v_min{-0.5};
  double v_max{0.5};
  ConditioningKind conditioning{ConditioningKind::kSpectralMax};
  Shape image_shape{64, 64};
};

/// Fresh model with random zero-mean kernels and uniform mixture weights.
PoGmdm make_model(const ModelSpec& spec, std::mt19937_64& rng);

}  // namespace pogmdm
