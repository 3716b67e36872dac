#include "pogmdm/array.hpp"

#include <algorithm>
#include <cmath>

namespace pogmdm {

std::string to_string(const Shape& shape) {
  return "(" + std::to_string(shape.rows) + ", " + std::to_string(shape.cols) + ")";
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: size mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double squared_norm(std::span<const double> a) {
  double acc = 0.0;
  for (double v : a) acc += v * v;
  return acc;
}

double squared_norm(std::span<const complex> a) {
  double acc = 0.0;
  for (const complex& v : a) acc += std::norm(v);
  return acc;
}

complex cdot(std::span<const complex> a, std::span<const complex> b) {
  if (a.size() != b.size()) throw std::invalid_argument("cdot: size mismatch");
  complex acc{0.0, 0.0};
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::conj(a[i]) * b[i];
  return acc;
}

double max_abs(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

bool all_finite(std::span<const double> a) {
  return std::all_of(a.begin(), a.end(), [](double v) { return std::isfinite(v); });
}

bool all_finite(std::span<const complex> a) {
  return std::all_of(a.begin(), a.end(), [](const complex& v) {
    return std::isfinite(v.real()) && std::isfinite(v.imag());
  });
}

Image real_part(const ComplexImage& z) {
  Image out(z.shape());
  for (std::size_t k = 0; k < z.size(); ++k) out[k] = z[k].real();
  return out;
}

Image imag_part(const ComplexImage& z) {
  Image out(z.shape());
  for (std::size_t k = 0; k < z.size(); ++k) out[k] = z[k].imag();
  return out;
}

Image magnitude(const ComplexImage& z) {
  Image out(z.shape());
  for (std::size_t k = 0; k < z.size(); ++k) out[k] = std::abs(z[k]);
  return out;
}

ComplexImage make_complex(const Image& re, const Image& im) {
  require_same_shape(re.shape(), im.shape(), "make_complex");
  ComplexImage out(re.shape());
  for (std::size_t k = 0; k < re.size(); ++k) out[k] = complex(re[k], im[k]);
  return out;
}

ComplexImage to_complex(const Image& re) {
  ComplexImage out(re.shape());
  for (std::size_t k = 0; k < re.size(); ++k) out[k] = complex(re[k], 0.0);
  return out;
}

}  // namespace pogmdm
