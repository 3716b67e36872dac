#pragma once

#include "pogmdm/array.hpp"

namespace pogmdm::fft {

// Unnormalized forward DFT with the origin at index (0, 0).
ComplexImage forward(const ComplexImage& x);
ComplexImage forward(const Image& x);
// Inverse of forward(): carries the 1/(H*W) factor.
ComplexImage inverse(const ComplexImage& k);

// Centered unitary DFT used by the acquisition model: fftshift . fft . ifftshift / sqrt(HW).
// The zero frequency sits at (H/2, W/2).
ComplexImage centered_forward(const ComplexImage& x);
ComplexImage centered_inverse(const ComplexImage& k);

template <class T>
Array2D<T> fftshift(const Array2D<T>& a) {
  return cyclic_shift(a, static_cast<long>(a.rows() / 2), static_cast<long>(a.cols() / 2));
}

template <class T>
Array2D<T> ifftshift(const Array2D<T>& a) {
  return cyclic_shift(a, -static_cast<long>(a.rows() / 2), -static_cast<long>(a.cols() / 2));
}

// Orthonormal two-dimensional type-I discrete sine transform. It is its own inverse.
Image dst2(const Image& x);
Image idst2(const Image& x);

}  // namespace pogmdm::fft
