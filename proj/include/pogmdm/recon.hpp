#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "pogmdm/mri.hpp"
#include "pogmdm/prior.hpp"

namespace pogmdm {

/// zeta(t) = zeta_max * (zeta_min / zeta_max)^((1 - t/T)^p), sampled at t_i = i T / N.
struct NoiseSchedule {
  double zeta_min{0.001};
  double zeta_max{10.0};
  double p{5.0};
  double horizon{1.0};
  std::size_t steps{1000};

  void validate() const;
};

double schedule_value(const NoiseSchedule& schedule, double t);
double schedule_at(const NoiseSchedule& schedule, std::size_t i);

struct ReconConfig {
  NoiseSchedule schedule{};
  std::size_t corrector_steps{1};
  double lambda{1.0};
  double mu{10.0};
  double r{0.075};
  double start_fraction{0.2};
  std::size_t repeats{25};
  std::uint64_t seed{0};
  bool update_coils{true};
  bool record_trace{true};
  std::size_t threads{1};

  void validate() const;
};

struct SenseProblem {
  KSpaceData y;
  Image mask;
  double noise_sigma{0.0};

  Shape shape() const { return mask.shape(); }
};

/// Real image channels that the prior acts on independently (Re and Im, or Re only).
using Channels = std::vector<Image>;

/// x <- x + (z1^2 - z0^2) score(x, z1^2) + sqrt(z1^2 - z0^2) xi, per channel.
Channels predictor_step(Channels x, const PoGmdm& model, double zeta_next, double zeta_cur, std::mt19937_64& rng);

/// Langevin step at zeta with eps = 2 r ||xi||^2 / ||score||^2 per channel.
/// Channels with a vanishing score are left unchanged.
Channels corrector_step(Channels x, const PoGmdm& model, double zeta, double r, std::mt19937_64& rng);

struct TraceEntry {
  std::size_t step{0};
  double zeta{0.0};
  double data_fidelity{0.0};  // ||A(x, s) - y||
  double prior_energy{0.0};
};

struct ReconResult {
  ComplexImage image;
  CoilSensitivities coils;
  std::vector<TraceEntry> trace;
  CoilSensitivities initial_coils;
  double scale{1.0};  // normalization applied to y; `image` is already rescaled
};

/// Joint image and coil-sensitivity reconstruction by predictor-corrector
/// sampling with interleaved data-consistency and proximal coil updates.
ReconResult joint_reconstruct(const SenseProblem& problem, const PoGmdm& model, const ReconConfig& config);

/// Single coil with s = 1 and real-valued iterates.
Image single_coil_reconstruct(const KSpaceData& y, const Image& mask, const PoGmdm& model, const ReconConfig& config);

struct MmseResult {
  Image mean;
  Image variance;
  std::vector<Image> samples;
};

/// K reconstructions with seeds seed, seed+1, ...; pixelwise mean and sample
/// variance of the intensity-corrected magnitudes.
MmseResult mmse_average(const SenseProblem& problem, const PoGmdm& model, const ReconConfig& config, std::size_t k);

/// x * RSS(s) pixelwise.
ComplexImage intensity_correction(const ComplexImage& x, const CoilSensitivities& s);

}  // namespace pogmdm
