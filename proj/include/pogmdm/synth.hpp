#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "pogmdm/mri.hpp"

namespace pogmdm {

/// Modified (high-contrast) Shepp-Logan phantom on an n x n grid, in [0, 1].
Image shepp_logan(std::size_t n);

/// Smooth complex coil maps (Gaussian bumps around the field of view with
/// linear magnitude tilt and phase), normalized to RSS = 1 at every pixel.
CoilSensitivities synthetic_coils(std::size_t coils, std::size_t n, std::uint64_t seed);

/// One piecewise-smooth image of random ellipses and polygons on a smooth background, in [0, 1].
Image random_piecewise_image(std::size_t n, std::mt19937_64& rng);

std::vector<Image> corpus_generate(std::size_t count, std::size_t n, std::uint64_t seed);

/// Writes image_NNNNN.npy files plus an index.txt listing them.
void write_corpus(const std::string& dir, const std::vector<Image>& images);
/// Reads the images listed in dir/index.txt.
std::vector<Image> read_corpus(const std::string& dir);

/// Noisy single- or multi-coil measurements M F(s_i x) + M n_i with n_i having
/// independent N(0, sigma^2) real and imaginary parts.
KSpaceData simulate_kspace(const ComplexImage& x, const CoilSensitivities& s, const Image& mask, double sigma,
                           std::mt19937_64& rng);

}  // namespace pogmdm
