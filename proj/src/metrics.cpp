#include "pogmdm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace pogmdm {

namespace {

double ref_max(const Image& ref, const char* where) {
  if (ref.size() == 0) throw std::invalid_argument(std::string(where) + ": empty reference");
  const double m = *std::max_element(ref.begin(), ref.end());
  if (!(m > 0.0)) throw std::invalid_argument(std::string(where) + ": reference maximum must be positive");
  return m;
}

}  // namespace

double psnr(const Image& x, const Image& ref) {
  require_same_shape(x.shape(), ref.shape(), "psnr");
  const double peak = ref_max(ref, "psnr");
  double se = 0.0;
  for (std::size_t p = 0; p < x.size(); ++p) se += (x[p] - ref[p]) * (x[p] - ref[p]);
  if (se == 0.0) return std::numeric_limits<double>::infinity();
  const double rmse = std::sqrt(se / static_cast<double>(x.size()));
  return 20.0 * std::log10(peak / rmse);
}

double nmse(const Image& x, const Image& ref) {
  require_same_shape(x.shape(), ref.shape(), "nmse");
  const double denom = squared_norm(ref.span());
  if (!(denom > 0.0)) throw std::invalid_argument("nmse: reference is identically zero");
  double se = 0.0;
  for (std::size_t p = 0; p < x.size(); ++p) se += (x[p] - ref[p]) * (x[p] - ref[p]);
  return se / denom;
}

double ssim(const Image& x, const Image& ref) {
  require_same_shape(x.shape(), ref.shape(), "ssim");
  constexpr std::size_t kWin = 7;
  if (x.rows() < kWin || x.cols() < kWin) throw std::invalid_argument("ssim: images must be at least 7x7");
  const double range = ref_max(ref, "ssim");
  const double c1 = (0.01 * range) * (0.01 * range);
  const double c2 = (0.03 * range) * (0.03 * range);

  double g[kWin][kWin];
  double total = 0.0;
  for (std::size_t a = 0; a < kWin; ++a) {
    for (std::size_t b = 0; b < kWin; ++b) {
      const double da = static_cast<double>(a) - 3.0;
      const double db = static_cast<double>(b) - 3.0;
      g[a][b] = std::exp(-(da * da + db * db) / (2.0 * 1.5 * 1.5));
      total += g[a][b];
    }
  }
  for (auto& row : g) {
    for (double& v : row) v /= total;
  }

  double acc = 0.0;
  const std::size_t ni = x.rows() - kWin + 1;
  const std::size_t nj = x.cols() - kWin + 1;
  for (std::size_t i = 0; i < ni; ++i) {
    for (std::size_t j = 0; j < nj; ++j) {
      double mx = 0.0, my = 0.0, xx = 0.0, yy = 0.0, xy = 0.0;
      for (std::size_t a = 0; a < kWin; ++a) {
        for (std::size_t b = 0; b < kWin; ++b) {
          const double w = g[a][b];
          const double u = x(i + a, j + b);
          const double v = ref(i + a, j + b);
          mx += w * u;
          my += w * v;
          xx += w * u * u;
          yy += w * v * v;
          xy += w * u * v;
        }
      }
      const double vx = xx - mx * mx;
      const double vy = yy - my * my;
      const double cov = xy - mx * my;
      acc += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
    }
  }
  return acc / static_cast<double>(ni * nj);
}

MetricsReport evaluate(const Image& x, const Image& ref) { return {psnr(x, ref), ssim(x, ref), nmse(x, ref)}; }

MeanStd mean_std(const std::vector<double>& values) {
  MeanStd out;
  if (values.empty()) return out;
  for (double v : values) out.mean += v;
  out.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return out;
}

}  // namespace pogmdm
