#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace pogmdm {

/// Equidistant grid of mixture means on [v_min, v_max].
std::vector<double> equidistant_means(std::size_t count, double v_min, double v_max);

/// Euclidean projection onto the unit simplex {w >= 0, sum w = 1} (sort-based).
std::vector<double> project_simplex(std::span<const double> w);

/// Expands ceil(L/2) free weights into an even, length-L weight vector.
/// The last free entry becomes the center; the rest are mirrored around it.
std::vector<double> mirror_weights(std::span<const double> free, std::size_t count);

/// Inverse of mirror_weights on symmetric vectors: the first ceil(L/2) entries.
std::vector<double> extract_free_weights(std::span<const double> weights);

inline std::size_t free_weight_count(std::size_t count) { return (count + 1) / 2; }

/// One-dimensional Gaussian mixture potential with a shared component variance.
///
/// Means sit on a fixed equidistant grid. Only the free half of the weights is
/// stored; the materialized weight vector is its mirror image and is not
/// renormalized here (apply a simplex projection to keep it feasible).
class GmmExpert {
 public:
  GmmExpert() = default;
  GmmExpert(std::vector<double> means, std::vector<double> free_weights, double base_variance);

  /// Uniform weights over `count` components on [v_min, v_max], with the
  /// default base variance (v_max - v_min) / (count - 1).
  static GmmExpert uniform(std::size_t count, double v_min, double v_max);

  std::size_t num_components() const { return means_.size(); }
  const std::vector<double>& means() const { return means_; }
  const std::vector<double>& free_weights() const { return free_weights_; }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<double>& log_weights() const { return log_weights_; }
  double base_variance() const { return base_variance_; }

  void set_free_weights(std::vector<double> free_weights);

  /// Projects the mirrored weights onto the simplex and stores the free half.
  void project_weights();

 private:
  void materialize();

  std::vector<double> means_;
  std::vector<double> free_weights_;
  std::vector<double> weights_;
  std::vector<double> log_weights_;
  double base_variance_{1.0};
};

/// Returns log psi(x) using a stabilized log-sum-exp.
double gmm_log_density(double x, const GmmExpert& expert, double variance);

/// Returns d/dx log psi(x).
double gmm_log_density_grad(double x, const GmmExpert& expert, double variance);

/// Per-response derivative terms needed by the score-matching adjoint.
struct ResponseTerms {
  double log_density{0.0};
  double grad{0.0};       // d log psi / dx
  double grad_dx{0.0};    // d^2 log psi / dx^2
  double grad_dvar{0.0};  // d (d log psi / dx) / d variance
};

/// Evaluates one expert at a fixed variance. Holds precomputed constants so
/// that per-pixel evaluation is a single pass over the components.
class ExpertEvaluator {
 public:
  ExpertEvaluator(const GmmExpert& expert, double variance);

  double log_density(double x) const;
  double grad(double x) const;

  /// Fills every derivative term. If `weight_grad` is non-empty it receives
  /// `cotangent * d grad / d w_i` added onto its entries (length L).
  ResponseTerms terms(double x, double cotangent, std::span<double> weight_grad) const;

 private:
  // Normalized component likelihoods e_i = N_i(x) / psi(x) in `ratio`;
  // returns log psi(x).
  double ratios(double x, std::vector<double>& ratio) const;
  // Unnormalized factors exp(-(x - mu_i)^2 / (2 var) - m) into g and their
  // weighted sum into s; returns the anchor m.
  double profile(double x, double* g, double& s) const;

  const GmmExpert* expert_;
  double variance_;
  double inv_two_var_;
  double log_norm_;
  std::vector<std::size_t> active_;
  double step_{0.0};  // grid spacing when the means are equidistant
  double q_{0.0};
  mutable std::vector<double> scratch_;
};

enum class ConditioningKind { kSpectralMax, kSpectralMean, kLearnedMlp, kLearnedSoftplus };

std::string to_string(ConditioningKind kind);
ConditioningKind conditioning_from_string(const std::string& name);

/// Width of both hidden layers of the learned time-conditioning network.
inline constexpr std::size_t kMlpHidden = 64;

/// Maps the diffusion variance v = 2t to per-expert variance offsets.
///
/// The spectral variants scale v by a per-filter factor nu^2; the learned
/// variants are a 1 -> 64 -> 64 -> o ELU network with a softplus output, and a
/// per-expert theta1 * softplus(theta2 * sqrt(v) + theta3). Parameters are
/// flattened as (W1, b1, W2, b2, W3, b3) and (theta1, theta2, theta3).
class TimeConditioning {
 public:
  TimeConditioning() = default;

  static TimeConditioning spectral(ConditioningKind kind, std::vector<double> nu2, double base_variance);
  static TimeConditioning learned_mlp(std::size_t experts, double base_variance, std::mt19937_64& rng);
  static TimeConditioning learned_softplus(std::size_t experts, double base_variance);

  ConditioningKind kind() const { return kind_; }
  std::size_t experts() const { return experts_; }
  double base_variance() const { return base_variance_; }
  bool is_spectral() const {
    return kind_ == ConditioningKind::kSpectralMax || kind_ == ConditioningKind::kSpectralMean;
  }

  const std::vector<double>& nu2() const { return nu2_; }
  void set_nu2(std::vector<double> nu2);

  std::size_t parameter_count() const { return params_.size(); }
  const std::vector<double>& parameters() const { return params_; }
  void set_parameters(std::vector<double> params);

  /// Conditioning output (without the base variance); entries are >= 0.
  std::vector<double> output(double v) const;

  /// Adds d loss / d params given d loss / d output at variance v.
  void backprop(double v, std::span<const double> d_output, std::span<double> d_params) const;

  /// Clamps theta1 of the softplus variant to stay positive; no-op otherwise.
  void project();

 private:
  ConditioningKind kind_{ConditioningKind::kSpectralMax};
  std::size_t experts_{0};
  double base_variance_{0.0};
  std::vector<double> nu2_;
  std::vector<double> params_;
};

/// Per-expert variances sigma_k^2 = base variance + conditioning output at v >= 0.
std::vector<double> variance_at(const TimeConditioning& conditioning, double v);

inline constexpr double kMinSoftplusScale = 1e-8;

}  // namespace pogmdm
