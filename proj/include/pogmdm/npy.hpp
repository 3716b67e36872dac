#pragma once

#include <string>
#include <vector>

#include "pogmdm/array.hpp"

namespace pogmdm {

/// Contents of a .npy file (format 1.0, little-endian float64 or complex128, C order).
struct NpyArray {
  std::vector<std::size_t> shape;
  bool is_complex{false};
  std::vector<double> real;
  std::vector<complex> cplx;
};

NpyArray read_npy(const std::string& path);

void write_npy(const std::string& path, const Image& image);
void write_npy(const std::string& path, const ComplexImage& image);
/// Stacks of equally shaped planes are stored as (count, H, W).
void write_npy(const std::string& path, const std::vector<Image>& stack);
void write_npy(const std::string& path, const std::vector<ComplexImage>& stack);

Image read_image(const std::string& path);
ComplexImage read_complex_image(const std::string& path);  // real arrays are promoted
std::vector<ComplexImage> read_complex_stack(const std::string& path);  // 2-D arrays become one plane

}  // namespace pogmdm
