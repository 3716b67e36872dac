#include "pogmdm/filterbank.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "pogmdm/fft.hpp"

namespace pogmdm {

namespace {

inline std::size_t wrap(long i, long n) { return static_cast<std::size_t>(((i % n) + n) % n); }

void check_kernels(const std::vector<Image>& kernels) {
  if (kernels.empty()) throw std::invalid_argument("FilterBank: at least one kernel required");
  const Shape s = kernels.front().shape();
  if (s.rows == 0 || s.rows != s.cols) throw std::invalid_argument("FilterBank: kernels must be square");
  for (const auto& k : kernels) require_same_shape(k.shape(), s, "FilterBank kernels");
}

ComplexImage kernel_spectrum(const Image& kernel, Shape shape) {
  const long h = static_cast<long>(shape.rows);
  const long w = static_cast<long>(shape.cols);
  const long c = static_cast<long>(kernel.rows() / 2);
  ComplexImage pad(shape);
  for (long a = 0; a < static_cast<long>(kernel.rows()); ++a) {
    for (long b = 0; b < static_cast<long>(kernel.cols()); ++b) {
      pad(wrap(a - c, h), wrap(b - c, w)) += kernel(a, b);
    }
  }
  return fft::forward(pad);
}

}  // namespace

FilterBank::FilterBank(std::vector<Image> kernels, Shape image_shape)
    : kernels_(std::move(kernels)), image_shape_(image_shape) {
  check_kernels(kernels_);
  if (image_shape_.size() == 0) throw std::invalid_argument("FilterBank: empty image shape");
  refresh_spectra();
}

FilterBank FilterBank::random(std::size_t count, std::size_t size, Shape image_shape, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(count * size * size)));
  std::vector<Image> kernels;
  for (std::size_t k = 0; k < count; ++k) {
    Image f(size, size);
    for (double& v : f) v = normal(rng);
    kernels.push_back(std::move(f));
  }
  return project_zero_mean(FilterBank(std::move(kernels), image_shape));
}

void FilterBank::set_kernels(std::vector<Image> kernels) {
  check_kernels(kernels);
  kernels_ = std::move(kernels);
  refresh_spectra();
}

void FilterBank::set_image_shape(Shape shape) {
  if (shape == image_shape_) return;
  if (shape.size() == 0) throw std::invalid_argument("FilterBank: empty image shape");
  image_shape_ = shape;
  refresh_spectra();
}

bool FilterBank::uses_frequency_path() const {
  const std::size_t r = kernel_size();
  return image_shape_.rows >= r && image_shape_.cols >= r;
}

void FilterBank::refresh_spectra() {
  spectra_.clear();
  spectra_.reserve(kernels_.size());
  for (const auto& k : kernels_) spectra_.push_back(kernel_spectrum(k, image_shape_));
}

Image convolve_spatial(const Image& x, const Image& kernel) {
  const long h = static_cast<long>(x.rows());
  const long w = static_cast<long>(x.cols());
  const long r = static_cast<long>(kernel.rows());
  const long c = r / 2;
  Image out(x.shape());
  for (long i = 0; i < h; ++i) {
    for (long j = 0; j < w; ++j) {
      double acc = 0.0;
      for (long a = 0; a < r; ++a) {
        const std::size_t si = wrap(i - a + c, h);
        for (long b = 0; b < r; ++b) acc += kernel(a, b) * x(si, wrap(j - b + c, w));
      }
      out(i, j) = acc;
    }
  }
  return out;
}

Image correlate_spatial(const Image& u, const Image& kernel) {
  const long h = static_cast<long>(u.rows());
  const long w = static_cast<long>(u.cols());
  const long r = static_cast<long>(kernel.rows());
  const long c = r / 2;
  Image out(u.shape());
  for (long i = 0; i < h; ++i) {
    for (long j = 0; j < w; ++j) {
      double acc = 0.0;
      for (long a = 0; a < r; ++a) {
        const std::size_t si = wrap(i + a - c, h);
        for (long b = 0; b < r; ++b) acc += kernel(a, b) * u(si, wrap(j + b - c, w));
      }
      out(i, j) = acc;
    }
  }
  return out;
}

void accumulate_kernel_gradient(const Image& a, const Image& x, Image& grad) {
  require_same_shape(a.shape(), x.shape(), "accumulate_kernel_gradient");
  const long h = static_cast<long>(x.rows());
  const long w = static_cast<long>(x.cols());
  const long r = static_cast<long>(grad.rows());
  const long c = r / 2;
  for (long qa = 0; qa < r; ++qa) {
    for (long qb = 0; qb < r; ++qb) {
      double acc = 0.0;
      for (long i = 0; i < h; ++i) {
        const double* arow = &a(static_cast<std::size_t>(i), 0);
        const double* xrow = &x(wrap(i - qa + c, h), 0);
        const long shift = c - qb;
        for (long j = 0; j < w; ++j) acc += arow[j] * xrow[wrap(j + shift, w)];
      }
      grad(static_cast<std::size_t>(qa), static_cast<std::size_t>(qb)) += acc;
    }
  }
}

Responses conv_forward(const Image& x, const FilterBank& bank) {
  require_same_shape(x.shape(), bank.image_shape(), "conv_forward");
  Responses out;
  out.reserve(bank.count());
  if (!bank.uses_frequency_path()) {
    for (const auto& k : bank.kernels()) out.push_back(convolve_spatial(x, k));
    return out;
  }
  const ComplexImage xf = fft::forward(x);
  for (const auto& spec : bank.spectra()) {
    ComplexImage prod(xf.shape());
    for (std::size_t p = 0; p < xf.size(); ++p) prod[p] = spec[p] * xf[p];
    out.push_back(real_part(fft::inverse(prod)));
  }
  return out;
}

Image conv_adjoint(const Responses& u, const FilterBank& bank) {
  if (u.size() != bank.count()) throw std::invalid_argument("conv_adjoint: response count mismatch");
  for (const auto& plane : u) require_same_shape(plane.shape(), bank.image_shape(), "conv_adjoint");
  if (!bank.uses_frequency_path()) {
    Image out(bank.image_shape());
    for (std::size_t k = 0; k < u.size(); ++k) {
      const Image part = correlate_spatial(u[k], bank.kernels()[k]);
      for (std::size_t p = 0; p < out.size(); ++p) out[p] += part[p];
    }
    return out;
  }
  ComplexImage acc(bank.image_shape());
  for (std::size_t k = 0; k < u.size(); ++k) {
    const ComplexImage uf = fft::forward(u[k]);
    const auto& spec = bank.spectra()[k];
    for (std::size_t p = 0; p < acc.size(); ++p) acc[p] += std::conj(spec[p]) * uf[p];
  }
  return real_part(fft::inverse(acc));
}

FilterBank project_zero_mean(FilterBank bank) {
  auto kernels = bank.kernels();
  for (auto& k : kernels) {
    double mean = 0.0;
    for (double v : k) mean += v;
    mean /= static_cast<double>(k.size());
    for (double& v : k) v -= mean;
  }
  bank.set_kernels(std::move(kernels));
  return bank;
}

std::vector<double> spectral_nu(const FilterBank& bank, SpectralMode mode) {
  std::vector<double> nu2;
  nu2.reserve(bank.count());
  for (const auto& spec : bank.spectra()) {
    double value = 0.0;
    for (const auto& z : spec) {
      const double m = std::abs(z);
      value = mode == SpectralMode::kMax ? std::max(value, m) : value + m;
    }
    if (mode == SpectralMode::kMean) value /= static_cast<double>(spec.size());
    nu2.push_back(value);
  }
  return nu2;
}

FilterBank fixed_difference_bank(Shape image_shape) {
  auto k3 = [](std::initializer_list<double> v) { return Image(Shape{3, 3}, std::vector<double>(v)); };
  std::vector<Image> kernels{
      // Forward differences x(p) - x(p - e) under the convolution convention.
      k3({0, 0, 0, 0, 1, -1, 0, 0, 0}),
      k3({0, 0, 0, 0, 1, 0, 0, -1, 0}),
      k3({0, 0, 0, 0, 1, 0, 0, 0, -1}),
      k3({0, 0, 0, 0, 1, 0, -1, 0, 0}),
      k3({0, 1, 0, 1, -4, 1, 0, 1, 0}),
      k3({0, 0, 0, 1, -2, 1, 0, 0, 0}),
      k3({0, 1, 0, 0, -2, 0, 0, 1, 0}),
      k3({0.25, 0, -0.25, 0, 0, 0, -0.25, 0, 0.25}),
  };
  return FilterBank(std::move(kernels), image_shape);
}

}  // namespace pogmdm
