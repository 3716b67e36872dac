#pragma once

#include <random>
#include <vector>

#include "pogmdm/array.hpp"

namespace pogmdm {

/// Filter responses of one image: one H x W plane per kernel.
using Responses = std::vector<Image>;

enum class SpectralMode { kMax, kMean };

/// A bank of o real r x r convolution kernels acting on H x W images with
/// periodic boundary conditions.
///
/// K_k x is a true convolution: (K_k x)(p) = sum_q f_k(q) x(p - q + c) with c the
/// kernel center, so the adjoint is the matching correlation. Spectra are the
/// unnormalized 2-D DFTs of the kernels zero-padded to the image shape with the
/// center moved to the origin; they are recomputed whenever kernels or the
/// image shape change.
class FilterBank {
 public:
  FilterBank() = default;
  FilterBank(std::vector<Image> kernels, Shape image_shape);

  /// i.i.d. N(0, 1 / (o r^2)) kernels followed by zero-mean projection.
  static FilterBank random(std::size_t count, std::size_t size, Shape image_shape, std::mt19937_64& rng);

  std::size_t count() const { return kernels_.size(); }
  std::size_t kernel_size() const { return kernels_.empty() ? 0 : kernels_.front().rows(); }
  Shape image_shape() const { return image_shape_; }
  const std::vector<Image>& kernels() const { return kernels_; }
  const std::vector<ComplexImage>& spectra() const { return spectra_; }

  void set_kernels(std::vector<Image> kernels);
  void set_image_shape(Shape shape);

  /// True when convolutions run through cached spectra (H, W >= r).
  bool uses_frequency_path() const;

 private:
  void refresh_spectra();

  std::vector<Image> kernels_;
  Shape image_shape_{};
  std::vector<ComplexImage> spectra_;
};

Responses conv_forward(const Image& x, const FilterBank& bank);
Image conv_adjoint(const Responses& u, const FilterBank& bank);

/// Single-kernel helpers in the spatial domain (any image size).
Image convolve_spatial(const Image& x, const Image& kernel);
Image correlate_spatial(const Image& u, const Image& kernel);

/// Gradient of <a, K x> with respect to the kernel entries of K, i.e.
/// g(q) = sum_p a(p) x(p - q + c), accumulated into `grad` (r x r).
void accumulate_kernel_gradient(const Image& a, const Image& x, Image& grad);

/// Subtracts each kernel's mean. Spectra are refreshed.
FilterBank project_zero_mean(FilterBank bank);

/// nu_k^2 = max (or mean) over frequencies of |DFT(f_k)| at bank.image_shape().
std::vector<double> spectral_nu(const FilterBank& bank, SpectralMode mode);

/// Eight classical zero-mean 3 x 3 finite-difference kernels: x/y first
/// differences, both diagonals, the 5-point Laplacian, and the xx, yy and xy
/// second derivatives.
FilterBank fixed_difference_bank(Shape image_shape);

}  // namespace pogmdm
