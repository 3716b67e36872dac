#include <cmath>
#include <random>

#include "doctest.h"
#include "pogmdm/filterbank.hpp"

using namespace pogmdm;

namespace {

Image random_image(Shape s, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Image x(s);
  for (double& v : x) v = n(rng);
  return x;
}

// (K x)(i, j) = sum_{a,b} f(a, b) x(i - a + c, j - b + c), periodic.
Image direct_convolution(const Image& x, const Image& f) {
  const long h = static_cast<long>(x.rows()), w = static_cast<long>(x.cols());
  const long r = static_cast<long>(f.rows()), c = r / 2;
  Image out(x.shape());
  for (long i = 0; i < h; ++i) {
    for (long j = 0; j < w; ++j) {
      double acc = 0.0;
      for (long a = 0; a < r; ++a) {
        for (long b = 0; b < r; ++b) {
          const long ii = ((i - a + c) % h + h) % h;
          const long jj = ((j - b + c) % w + w) % w;
          acc += f(static_cast<std::size_t>(a), static_cast<std::size_t>(b)) * x(static_cast<std::size_t>(ii), static_cast<std::size_t>(jj));
        }
      }
      out(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = acc;
    }
  }
  return out;
}

Image delta(std::size_t r) {
  Image k(r, r);
  k(r / 2, r / 2) = 1.0;
  return k;
}

double rel_err(const Image& a, const Image& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t p = 0; p < a.size(); ++p) {
    num += (a[p] - b[p]) * (a[p] - b[p]);
    den += b[p] * b[p];
  }
  return std::sqrt(num / std::max(den, 1e-300));
}

double inner(const Responses& a, const Responses& b) {
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) acc += dot(a[k].span(), b[k].span());
  return acc;
}

}  // namespace

TEST_CASE("conv_forward: delta kernel, constants, direct oracle") {
  std::mt19937_64 rng(1);
  const Image x = random_image({8, 8}, rng);
  FilterBank id({delta(5)}, {8, 8});
  CHECK(rel_err(conv_forward(x, id)[0], x) <= 1e-14);

  FilterBank bank = FilterBank::random(3, 5, {8, 8}, rng);
  const auto zero = conv_forward(Image(Shape{8, 8}, 2.5), bank);
  for (const auto& z : zero) CHECK(max_abs(z.span()) <= 1e-13);

  const auto u = conv_forward(x, bank);
  for (std::size_t k = 0; k < 3; ++k) CHECK(rel_err(u[k], direct_convolution(x, bank.kernels()[k])) <= 1e-12);
  CHECK_THROWS_AS(conv_forward(Image(Shape{8, 9}), bank), std::invalid_argument);
}

TEST_CASE("frequency path equals spatial path on 6x6 to 64x64 grids") {
  std::mt19937_64 rng(2);
  for (std::size_t n : {6u, 7u, 16u, 33u, 64u}) {
    FilterBank bank = FilterBank::random(2, 5, {n, n + 1}, rng);
    REQUIRE(bank.uses_frequency_path());
    const Image x = random_image({n, n + 1}, rng);
    const auto u = conv_forward(x, bank);
    for (std::size_t k = 0; k < 2; ++k) CHECK(rel_err(u[k], convolve_spatial(x, bank.kernels()[k])) <= 1e-12);
    Responses v{random_image({n, n + 1}, rng), random_image({n, n + 1}, rng)};
    Image spatial(Shape{n, n + 1});
    for (std::size_t k = 0; k < 2; ++k) {
      const Image part = correlate_spatial(v[k], bank.kernels()[k]);
      for (std::size_t p = 0; p < spatial.size(); ++p) spatial[p] += part[p];
    }
    CHECK(rel_err(conv_adjoint(v, bank), spatial) <= 1e-12);
  }
}

TEST_CASE("tiny grids use the spatial path and still wrap periodically") {
  std::mt19937_64 rng(3);
  FilterBank bank = FilterBank::random(2, 5, {3, 4}, rng);
  CHECK_FALSE(bank.uses_frequency_path());
  const Image x = random_image({3, 4}, rng);
  const auto u = conv_forward(x, bank);
  for (std::size_t k = 0; k < 2; ++k) CHECK(rel_err(u[k], direct_convolution(x, bank.kernels()[k])) <= 1e-12);
}

TEST_CASE("conv_adjoint: inner-product identity and impulse response") {
  std::mt19937_64 rng(4);
  for (Shape s : {Shape{8, 8}, Shape{12, 9}, Shape{3, 3}}) {
    FilterBank bank = FilterBank::random(4, 5, s, rng);
    const Image x = random_image(s, rng);
    Responses u;
    for (int k = 0; k < 4; ++k) u.push_back(random_image(s, rng));
    const double lhs = inner(conv_forward(x, bank), u);
    const double rhs = dot(x.span(), conv_adjoint(u, bank).span());
    CHECK(std::abs(lhs - rhs) <= 1e-12 * std::abs(lhs));
  }
  FilterBank bank = FilterBank::random(1, 3, {8, 8}, rng);
  Responses impulse{Image(Shape{8, 8})};
  impulse[0](4, 4) = 1.0;
  const Image out = conv_adjoint(impulse, bank);
  const Image& f = bank.kernels()[0];
  for (std::size_t a = 0; a < 3; ++a) {
    for (std::size_t b = 0; b < 3; ++b) CHECK(out(4 - a + 1, 4 - b + 1) == doctest::Approx(f(a, b)).epsilon(1e-12));
  }
  FilterBank id({delta(3)}, {8, 8});
  const Image y = random_image({8, 8}, rng);
  CHECK(rel_err(conv_adjoint(Responses{y}, id), y) <= 1e-14);
}

TEST_CASE("shift equivariance") {
  std::mt19937_64 rng(5);
  const Image x = random_image({10, 12}, rng);
  FilterBank bank = FilterBank::random(2, 5, {10, 12}, rng);
  for (auto [di, dj] : {std::pair<long, long>{1, 0}, {0, 3}, {-4, 7}}) {
    const auto shifted = conv_forward(cyclic_shift(x, di, dj), bank);
    const auto plain = conv_forward(x, bank);
    for (std::size_t k = 0; k < 2; ++k) {
      // The spatial path is bit-exact; the FFT path agrees to rounding.
      CHECK(convolve_spatial(cyclic_shift(x, di, dj), bank.kernels()[k]) ==
            cyclic_shift(convolve_spatial(x, bank.kernels()[k]), di, dj));
      CHECK(rel_err(shifted[k], cyclic_shift(plain[k], di, dj)) <= 1e-13);
    }
  }
}

TEST_CASE("project_zero_mean") {
  std::mt19937_64 rng(6);
  Image c(Shape{5, 5}, 0.7);
  FilterBank constant({c}, {8, 8});
  CHECK(max_abs(project_zero_mean(constant).kernels()[0].span()) <= 1e-15);

  Image f = random_image({5, 5}, rng);
  FilterBank bank({f}, {8, 8});
  const FilterBank once = project_zero_mean(bank);
  double mean = 0.0;
  for (double v : once.kernels()[0]) mean += v;
  CHECK(std::abs(mean / 25.0) <= 1e-15);
  const FilterBank twice = project_zero_mean(once);
  CHECK(rel_err(twice.kernels()[0], once.kernels()[0]) <= 1e-15);
  // Spectra follow the projected kernels.
  const Image x = random_image({8, 8}, rng);
  CHECK(rel_err(conv_forward(x, once)[0], direct_convolution(x, once.kernels()[0])) <= 1e-12);
}

TEST_CASE("random initialization has the documented scale") {
  std::mt19937_64 rng(7);
  FilterBank bank = FilterBank::random(20, 5, {16, 16}, rng);
  double ss = 0.0;
  for (const auto& k : bank.kernels()) {
    double mean = 0.0;
    for (double v : k) mean += v, ss += v * v;
    CHECK(std::abs(mean) <= 1e-14);
  }
  // E||f||^2 after centering = (r^2 - 1) / (o r^2) per kernel.
  const double expected = 20.0 * 24.0 / 500.0;
  CHECK(ss == doctest::Approx(expected).epsilon(0.2));
  std::size_t params = 0;
  for (const auto& k : bank.kernels()) params += k.size();
  CHECK(params == 500);
}

TEST_CASE("spectral_nu") {
  FilterBank id({delta(5)}, {8, 8});
  CHECK(spectral_nu(id, SpectralMode::kMax)[0] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(spectral_nu(id, SpectralMode::kMean)[0] == doctest::Approx(1.0).epsilon(1e-14));

  std::mt19937_64 rng(8);
  FilterBank bank = FilterBank::random(2, 5, {8, 8}, rng);
  auto scaled = bank.kernels();
  for (auto& k : scaled) {
    for (double& v : k) v *= -3.0;
  }
  FilterBank big(scaled, {8, 8});
  for (auto mode : {SpectralMode::kMax, SpectralMode::kMean}) {
    const auto a = spectral_nu(bank, mode);
    const auto b = spectral_nu(big, mode);
    for (std::size_t k = 0; k < 2; ++k) CHECK(b[k] == doctest::Approx(3.0 * a[k]).epsilon(1e-12));
  }

  Image diff(Shape{3, 3});
  diff(1, 1) = 1.0;
  diff(1, 2) = -1.0;
  for (std::size_t n : {8u, 10u}) {
    FilterBank d({diff}, {n, n});
    CHECK(spectral_nu(d, SpectralMode::kMax)[0] == doctest::Approx(2.0).epsilon(1e-14));
  }
}

TEST_CASE("fixed_difference_bank") {
  std::mt19937_64 rng(9);
  FilterBank bank = fixed_difference_bank({12, 12});
  CHECK(bank.count() == 8);
  for (const auto& k : bank.kernels()) {
    double s = 0.0;
    for (double v : k) s += v;
    CHECK(std::abs(s) <= 1e-15);
  }
  Image ramp(Shape{12, 12});
  for (std::size_t i = 0; i < 12; ++i) {
    for (std::size_t j = 0; j < 12; ++j) ramp(i, j) = 0.5 * static_cast<double>(j);
  }
  const Image dx = conv_forward(ramp, bank)[0];
  for (std::size_t i = 0; i < 12; ++i) {
    for (std::size_t j = 1; j < 12; ++j) CHECK(dx(i, j) == doctest::Approx(0.5).epsilon(1e-12));
  }
  const Image x = random_image({12, 12}, rng);
  Responses u;
  for (int k = 0; k < 8; ++k) u.push_back(random_image({12, 12}, rng));
  const double lhs = inner(conv_forward(x, bank), u);
  const double rhs = dot(x.span(), conv_adjoint(u, bank).span());
  CHECK(std::abs(lhs - rhs) <= 1e-12 * std::abs(lhs));
}

TEST_CASE("accumulate_kernel_gradient is the derivative of <K x, a> in the kernel") {
  std::mt19937_64 rng(10);
  const Image x = random_image({7, 9}, rng);
  const Image a = random_image({7, 9}, rng);
  Image f = random_image({5, 5}, rng);
  Image g(Shape{5, 5});
  accumulate_kernel_gradient(a, x, g);
  // <K x, a> is linear in f, so the derivative along e_q is exactly <K_{e_q} x, a>.
  for (std::size_t q = 0; q < 25; ++q) {
    Image e(Shape{5, 5});
    e[q] = 1.0;
    CHECK(g[q] == doctest::Approx(dot(direct_convolution(x, e).span(), a.span())).epsilon(1e-12));
  }
}

TEST_CASE("bank rejects malformed kernels") {
  CHECK_THROWS_AS(FilterBank({Image(Shape{3, 4})}, {8, 8}), std::invalid_argument);
  CHECK_THROWS_AS(FilterBank({Image(Shape{3, 3}), Image(Shape{5, 5})}, {8, 8}), std::invalid_argument);
  CHECK_THROWS_AS(FilterBank(std::vector<Image>{}, {8, 8}), std::invalid_argument);
}
