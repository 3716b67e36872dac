#include "pogmdm/mri.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "pogmdm/fft.hpp"

namespace pogmdm {

namespace {

void check_problem(const ComplexImage& x, const CoilSensitivities& s, const Image& mask, const char* where) {
  if (s.empty()) throw std::invalid_argument(std::string(where) + ": no coils");
  require_same_shape(x.shape(), mask.shape(), where);
  for (const auto& si : s) require_same_shape(si.shape(), x.shape(), where);
}

void check_data(const KSpaceData& y, std::size_t coils, Shape shape, const char* where) {
  if (y.size() != coils) throw std::invalid_argument(std::string(where) + ": coil count mismatch");
  for (const auto& yi : y) require_same_shape(yi.shape(), shape, where);
}

// F^H M (y_i - M F(s_i x)) per coil.
std::vector<ComplexImage> backprojected_residuals(const ComplexImage& x, const CoilSensitivities& s,
                                                  const Image& mask, const KSpaceData& y) {
  std::vector<ComplexImage> out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    ComplexImage sx(x.shape());
    for (std::size_t p = 0; p < sx.size(); ++p) sx[p] = s[i][p] * x[p];
    ComplexImage k = fft::centered_forward(sx);
    for (std::size_t p = 0; p < k.size(); ++p) k[p] = mask[p] * (y[i][p] - mask[p] * k[p]);
    out.push_back(fft::centered_inverse(k));
  }
  return out;
}

}  // namespace

KSpaceData sense_forward(const ComplexImage& x, const CoilSensitivities& s, const Image& mask) {
  check_problem(x, s, mask, "sense_forward");
  KSpaceData y;
  y.reserve(s.size());
  for (const auto& si : s) {
    ComplexImage sx(x.shape());
    for (std::size_t p = 0; p < sx.size(); ++p) sx[p] = si[p] * x[p];
    ComplexImage k = fft::centered_forward(sx);
    for (std::size_t p = 0; p < k.size(); ++p) k[p] = mask[p] != 0.0 ? k[p] : complex{};
    y.push_back(std::move(k));
  }
  return y;
}

ComplexImage sense_adjoint(const KSpaceData& y, const CoilSensitivities& s, const Image& mask) {
  if (s.empty()) throw std::invalid_argument("sense_adjoint: no coils");
  check_data(y, s.size(), mask.shape(), "sense_adjoint");
  ComplexImage out(mask.shape());
  for (std::size_t i = 0; i < s.size(); ++i) {
    require_same_shape(s[i].shape(), mask.shape(), "sense_adjoint");
    ComplexImage k(y[i].shape());
    for (std::size_t p = 0; p < k.size(); ++p) k[p] = mask[p] * y[i][p];
    const ComplexImage img = fft::centered_inverse(k);
    for (std::size_t p = 0; p < out.size(); ++p) out[p] += std::conj(s[i][p]) * img[p];
  }
  return out;
}

ComplexImage grad_x_loglik(const ComplexImage& x, const CoilSensitivities& s, const Image& mask,
                           const KSpaceData& y) {
  check_problem(x, s, mask, "grad_x_loglik");
  check_data(y, s.size(), x.shape(), "grad_x_loglik");
  const auto res = backprojected_residuals(x, s, mask, y);
  ComplexImage g(x.shape());
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t p = 0; p < g.size(); ++p) g[p] += std::conj(s[i][p]) * res[i][p];
  }
  return g;
}

CoilSensitivities grad_s_loglik(const ComplexImage& x, const CoilSensitivities& s, const Image& mask,
                                const KSpaceData& y) {
  check_problem(x, s, mask, "grad_s_loglik");
  check_data(y, s.size(), x.shape(), "grad_s_loglik");
  auto res = backprojected_residuals(x, s, mask, y);
  for (auto& r : res) {
    for (std::size_t p = 0; p < r.size(); ++p) r[p] *= std::conj(x[p]);
  }
  return res;
}

double data_misfit(const ComplexImage& x, const CoilSensitivities& s, const Image& mask, const KSpaceData& y) {
  const KSpaceData ax = sense_forward(x, s, mask);
  check_data(y, s.size(), x.shape(), "data_misfit");
  double acc = 0.0;
  for (std::size_t i = 0; i < ax.size(); ++i) {
    for (std::size_t p = 0; p < ax[i].size(); ++p) acc += std::norm(ax[i][p] - mask[p] * y[i][p]);
  }
  return 0.5 * acc;
}

std::vector<ComplexImage> zero_filled(const KSpaceData& y) {
  std::vector<ComplexImage> out;
  out.reserve(y.size());
  for (const auto& yi : y) out.push_back(fft::centered_inverse(yi));
  return out;
}

std::pair<Image, Image> dirichlet_differences(const Image& u) {
  const std::size_t h = u.rows();
  const std::size_t w = u.cols();
  auto at = [&](long i, long j) {
    if (i < 0 || j < 0 || i >= static_cast<long>(h) || j >= static_cast<long>(w)) return 0.0;
    return u(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
  };
  Image dv(h + 1, w);
  for (std::size_t i = 0; i <= h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      dv(i, j) = at(static_cast<long>(i), static_cast<long>(j)) - at(static_cast<long>(i) - 1, static_cast<long>(j));
    }
  }
  Image dh(h, w + 1);
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j <= w; ++j) {
      dh(i, j) = at(static_cast<long>(i), static_cast<long>(j)) - at(static_cast<long>(i), static_cast<long>(j) - 1);
    }
  }
  return {std::move(dv), std::move(dh)};
}

double coil_prior_energy(const CoilSensitivities& s) {
  double acc = 0.0;
  for (const auto& si : s) {
    for (const Image& ch : {real_part(si), imag_part(si)}) {
      const auto [dv, dh] = dirichlet_differences(ch);
      acc += squared_norm(dv.span()) + squared_norm(dh.span());
    }
  }
  return 0.5 * acc;
}

Image dirichlet_eigenvalues(Shape shape) {
  Image tau(shape);
  const double ph = std::numbers::pi / static_cast<double>(shape.rows + 1);
  const double pw = std::numbers::pi / static_cast<double>(shape.cols + 1);
  for (std::size_t i = 0; i < shape.rows; ++i) {
    for (std::size_t j = 0; j < shape.cols; ++j) {
      tau(i, j) = 4.0 - 2.0 * std::cos(static_cast<double>(i + 1) * ph) - 2.0 * std::cos(static_cast<double>(j + 1) * pw);
    }
  }
  return tau;
}

CoilSensitivities prox_coil(const CoilSensitivities& s, double mu) {
  if (!(mu >= 0.0)) throw std::invalid_argument("prox_coil: mu must be >= 0");
  if (mu == 0.0) return s;
  CoilSensitivities out;
  out.reserve(s.size());
  for (const auto& si : s) {
    const Image tau = dirichlet_eigenvalues(si.shape());
    auto smooth = [&](const Image& ch) {
      Image c = fft::dst2(ch);
      for (std::size_t p = 0; p < c.size(); ++p) c[p] /= 1.0 + mu * tau[p];
      return fft::idst2(c);
    };
    out.push_back(make_complex(smooth(real_part(si)), smooth(imag_part(si))));
  }
  return out;
}

Image rss(const std::vector<ComplexImage>& coils) {
  if (coils.empty()) throw std::invalid_argument("rss: no coils");
  Image out(coils.front().shape());
  for (const auto& z : coils) {
    require_same_shape(z.shape(), out.shape(), "rss");
    for (std::size_t p = 0; p < out.size(); ++p) out[p] += std::norm(z[p]);
  }
  for (double& v : out) v = std::sqrt(v);
  return out;
}

NullspaceResidual nullspace_residual(const CoilSensitivities& s, const std::vector<ComplexImage>& coil_images) {
  if (s.size() != coil_images.size()) throw std::invalid_argument("nullspace_residual: coil count mismatch");
  const Image r = rss(s);
  for (const auto& z : coil_images) require_same_shape(z.shape(), r.shape(), "nullspace_residual");
  const double top = max_abs(r.span());
  const double eps = 1e-12 * top * top;
  NullspaceResidual out;
  out.residual.assign(s.size(), ComplexImage(r.shape()));
  for (std::size_t p = 0; p < r.size(); ++p) {
    complex proj{};
    for (std::size_t j = 0; j < s.size(); ++j) proj += std::conj(s[j][p]) * coil_images[j][p];
    const double denom = r[p] * r[p] + eps;
    for (std::size_t i = 0; i < s.size(); ++i) {
      out.residual[i][p] = denom > 0.0 ? s[i][p] / denom * proj - coil_images[i][p] : -coil_images[i][p];
    }
  }
  out.rss = rss(out.residual);
  return out;
}

}  // namespace pogmdm
