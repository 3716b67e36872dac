#pragma once

#include <vector>

#include "pogmdm/array.hpp"

namespace pogmdm {

/// 20 log10(max(ref) / RMSE); +infinity when x equals ref.
double psnr(const Image& x, const Image& ref);

/// ||x - ref||^2 / ||ref||^2.
double nmse(const Image& x, const Image& ref);

/// Mean SSIM over all valid 7x7 Gaussian windows (sigma 1.5), K1 = 0.01,
/// K2 = 0.03, data range max(ref).
double ssim(const Image& x, const Image& ref);

struct MetricsReport {
  double psnr_db{0.0};
  double ssim{0.0};
  double nmse{0.0};
};

MetricsReport evaluate(const Image& x, const Image& ref);

struct MeanStd {
  double mean{0.0};
  double std{0.0};
};

MeanStd mean_std(const std::vector<double>& values);

}  // namespace pogmdm
