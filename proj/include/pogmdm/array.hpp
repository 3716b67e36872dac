#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pogmdm {

using complex = std::complex<double>;

struct Shape {
  std::size_t rows{0};
  std::size_t cols{0};

  std::size_t size() const { return rows * cols; }
  bool operator==(const Shape&) const = default;
};

std::string to_string(const Shape& shape);

/// Dense row-major 2-D array with value semantics.
template <class T>
class Array2D {
 public:
  using value_type = T;

  Array2D() = default;
  explicit Array2D(Shape shape, T fill = T{}) : shape_(shape), data_(shape.size(), fill) {}
  Array2D(std::size_t rows, std::size_t cols, T fill = T{}) : Array2D(Shape{rows, cols}, fill) {}
  Array2D(Shape shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape_.size()) {
      throw std::invalid_argument("Array2D: data size does not match shape " + to_string(shape_));
    }
  }

  Shape shape() const { return shape_; }
  std::size_t rows() const { return shape_.rows; }
  std::size_t cols() const { return shape_.cols; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(std::size_t i, std::size_t j) { return data_[i * shape_.cols + j]; }
  const T& operator()(std::size_t i, std::size_t j) const { return data_[i * shape_.cols + j]; }
  T& operator[](std::size_t k) { return data_[k]; }
  const T& operator[](std::size_t k) const { return data_[k]; }

  std::span<T> span() { return data_; }
  std::span<const T> span() const { return data_; }
  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& values() { return data_; }
  const std::vector<T>& values() const { return data_; }

  auto begin() { return data_.begin(); }
  auto end() { return data_.end(); }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

  bool operator==(const Array2D&) const = default;

 private:
  Shape shape_{};
  std::vector<T> data_{};
};

using Image = Array2D<double>;
using ComplexImage = Array2D<complex>;

inline void require_same_shape(Shape a, Shape b, const char* where) {
  if (!(a == b)) {
    throw std::invalid_argument(std::string(where) + ": shape mismatch " + to_string(a) + " vs " +
                                to_string(b));
  }
}

// Real-valued helpers used throughout the library.
double dot(std::span<const double> a, std::span<const double> b);
double squared_norm(std::span<const double> a);
double squared_norm(std::span<const complex> a);
complex cdot(std::span<const complex> a, std::span<const complex> b);  // sum conj(a) * b
double max_abs(std::span<const double> a);
bool all_finite(std::span<const double> a);
bool all_finite(std::span<const complex> a);

Image real_part(const ComplexImage& z);
Image imag_part(const ComplexImage& z);
Image magnitude(const ComplexImage& z);
ComplexImage make_complex(const Image& re, const Image& im);
ComplexImage to_complex(const Image& re);

/// Cyclic shift: out(i, j) = in(i - di, j - dj) with periodic wrap.
template <class T>
Array2D<T> cyclic_shift(const Array2D<T>& in, long di, long dj) {
  const long h = static_cast<long>(in.rows());
  const long w = static_cast<long>(in.cols());
  Array2D<T> out(in.shape());
  for (long i = 0; i < h; ++i) {
    for (long j = 0; j < w; ++j) {
      const long si = ((i - di) % h + h) % h;
      const long sj = ((j - dj) % w + w) % w;
      out(i, j) = in(si, sj);
    }
  }
  return out;
}

}  // namespace pogmdm
