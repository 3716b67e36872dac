#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pogmdm/array.hpp"

namespace pogmdm {

using CoilSensitivities = std::vector<ComplexImage>;
using KSpaceData = std::vector<ComplexImage>;

enum class MaskKind { kCartesian, kRadial, kSpiral, kGaussian2d };

std::string to_string(MaskKind kind);
MaskKind mask_kind_from_string(const std::string& name);

struct SamplingMask {
  Image mask;  // entries in {0, 1}, centered k-space layout
  MaskKind kind{MaskKind::kCartesian};
  double acceleration{1.0};
  double acl_fraction{0.0};
  bool rotated{false};
  std::uint64_t seed{0};

  double sampled_fraction() const;
};

/// Sampling pattern in centered k-space layout (DC at (H/2, W/2)).
/// Cartesian masks sample columns (phase encoding along x); `rotated`
/// samples rows instead.
SamplingMask make_mask(MaskKind kind, Shape shape, double acceleration, double acl_fraction, bool rotated,
                       std::uint64_t seed);

// The Fourier transform F below is the centered unitary 2-D DFT, so F^H = F^-1.

/// Per coil: M F(s_i x).
KSpaceData sense_forward(const ComplexImage& x, const CoilSensitivities& s, const Image& mask);

/// Adjoint in x for fixed s: sum_i conj(s_i) F^H M y_i.
ComplexImage sense_adjoint(const KSpaceData& y, const CoilSensitivities& s, const Image& mask);

/// sum_i conj(s_i) F^H M (y_i - M F(s_i x)).
ComplexImage grad_x_loglik(const ComplexImage& x, const CoilSensitivities& s, const Image& mask,
                           const KSpaceData& y);

/// Per coil: conj(x) F^H M (y_i - M F(s_i x)).
CoilSensitivities grad_s_loglik(const ComplexImage& x, const CoilSensitivities& s, const Image& mask,
                                const KSpaceData& y);

/// 0.5 * ||A(x, s) - y||^2.
double data_misfit(const ComplexImage& x, const CoilSensitivities& s, const Image& mask, const KSpaceData& y);

/// Per-coil zero-filled images F^H y_i.
std::vector<ComplexImage> zero_filled(const KSpaceData& y);

/// Forward differences over every adjacent pair of the zero-extended image:
/// returns (vertical (H+1) x W, horizontal H x (W+1)).
std::pair<Image, Image> dirichlet_differences(const Image& u);

/// 0.5 * sum_i ||D Re s_i||^2 + ||D Im s_i||^2.
double coil_prior_energy(const CoilSensitivities& s);

/// Eigenvalues 4 - 2cos(i pi/(H+1)) - 2cos(j pi/(W+1)), i, j starting at 1.
Image dirichlet_eigenvalues(Shape shape);

/// Solves (I + mu D^T D) u = channel for every real/imag channel of every coil.
CoilSensitivities prox_coil(const CoilSensitivities& s, double mu);

Image rss(const std::vector<ComplexImage>& coils);

struct NullspaceResidual {
  std::vector<ComplexImage> residual;
  Image rss;  // root-sum-of-squares of the residual across coils
};

/// Per coil: s_i / RSS(s)^2 * (sum_j conj(s_j) x_j) - x_i, with the denominator
/// guarded by 1e-12 * max RSS(s)^2.
NullspaceResidual nullspace_residual(const CoilSensitivities& s, const std::vector<ComplexImage>& coil_images);

}  // namespace pogmdm
