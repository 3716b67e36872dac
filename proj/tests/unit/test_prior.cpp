#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "doctest.h"
#include "pogmdm/prior.hpp"

using namespace pogmdm;

namespace {

Image random_image(Shape s, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Image x(s);
  for (double& v : x) v = n(rng);
  return x;
}

Image delta(std::size_t r) {
  Image k(r, r);
  k(r / 2, r / 2) = 1.0;
  return k;
}

PoGmdm gaussian_model(Shape s, double base) {
  return PoGmdm(FilterBank({delta(3)}, s), {GmmExpert({0.0}, {1.0}, base)},
                TimeConditioning::spectral(ConditioningKind::kSpectralMax, {1.0}, base));
}

// Random model with strictly positive mirrored weights.
PoGmdm small_model(std::size_t o, std::size_t L, Shape s, std::mt19937_64& rng, ConditioningKind kind) {
  ModelSpec spec;
  spec.experts = o;
  spec.kernel_size = 5;
  spec.components = L;
  spec.image_shape = s;
  spec.conditioning = kind;
  PoGmdm m = make_model(spec, rng);
  std::uniform_real_distribution<double> u(0.5, 1.5);
  auto experts = m.experts();
  for (auto& e : experts) {
    std::vector<double> free(e.free_weights().size());
    for (double& w : free) w = u(rng);
    e.set_free_weights(free);
    e.project_weights();
  }
  m.set_experts(experts);
  // Stretch the kernels so responses spread over the mixture grid.
  auto p = m.parameters();
  for (double& k : p.kernels) k *= 3.0;
  m.set_parameters(p);
  m.refresh_spectral_scale();
  return m;
}

// Direct spatial convolution plus naive mixture sum.
long double energy_oracle(const PoGmdm& m, const Image& x, double v) {
  const auto var = variance_at(m.conditioning(), v);
  const long h = static_cast<long>(x.rows()), w = static_cast<long>(x.cols());
  long double total = 0.0L;
  for (std::size_t k = 0; k < m.experts_count(); ++k) {
    const Image& f = m.bank().kernels()[k];
    const long r = static_cast<long>(f.rows()), c = r / 2;
    const auto& e = m.experts()[k];
    for (long i = 0; i < h; ++i) {
      for (long j = 0; j < w; ++j) {
        long double z = 0.0L;
        for (long a = 0; a < r; ++a) {
          for (long b = 0; b < r; ++b) {
            z += f(static_cast<std::size_t>(a), static_cast<std::size_t>(b)) *
                 x(static_cast<std::size_t>(((i - a + c) % h + h) % h), static_cast<std::size_t>(((j - b + c) % w + w) % w));
          }
        }
        long double psi = 0.0L;
        for (std::size_t q = 0; q < e.num_components(); ++q) {
          const long double d = z - e.means()[q];
          psi += e.weights()[q] * std::exp(-d * d / (2.0L * var[k])) / std::sqrt(2.0L * std::numbers::pi_v<long double> * var[k]);
        }
        total -= std::log(psi);
      }
    }
  }
  return total;
}

Image fd_gradient(const PoGmdm& m, const Image& x, double v, double h) {
  Image g(x.shape());
  for (std::size_t p = 0; p < x.size(); ++p) {
    Image a = x, b = x;
    a[p] += h;
    b[p] -= h;
    g[p] = -(energy(m, a, v) - energy(m, b, v)) / (2.0 * h);
  }
  return g;
}

}  // namespace

TEST_CASE("Gaussian special case: energy, score, Tweedie shrinkage") {
  std::mt19937_64 rng(1);
  const Image x = random_image({6, 7}, rng);
  const PoGmdm m = gaussian_model({6, 7}, 1.0);
  const double d = 42.0;
  CHECK(energy(m, x, 0.0) == doctest::Approx(0.5 * squared_norm(x.span()) + 0.5 * d * std::log(2.0 * std::numbers::pi)).epsilon(1e-13));
  const Image s = score(m, x, 0.0);
  for (std::size_t p = 0; p < x.size(); ++p) CHECK(s[p] == doctest::Approx(-x[p]).epsilon(1e-13));

  const double base = 0.3;
  const PoGmdm g = gaussian_model({6, 7}, base);
  for (double v : {0.01, 0.2, 1.5}) {
    const Image den = denoise_tweedie(g, x, v);
    for (std::size_t p = 0; p < x.size(); ++p) CHECK(den[p] == doctest::Approx(x[p] * base / (base + v)).epsilon(1e-12));
  }
  const Image near = denoise_tweedie(g, x, 1e-12);
  for (std::size_t p = 0; p < x.size(); ++p) CHECK(near[p] == doctest::Approx(x[p]).epsilon(1e-10));
  CHECK_THROWS_AS(denoise_tweedie(g, x, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(energy(g, x, -0.1), std::invalid_argument);
  CHECK_THROWS_AS(score(g, x, -0.1), std::invalid_argument);
}

TEST_CASE("identity filter with exact variance adaptation is the Bayes denoiser") {
  // Prior sum_i w_i N(mu_i, s0) observed under N(0, v) noise.
  const std::vector<double> mu{-0.4, 0.0, 0.4};
  const std::vector<double> free{0.3, 0.4};
  const double s0 = 0.4 / 2.0;
  PoGmdm m(FilterBank({delta(3)}, {8, 8}), {GmmExpert(mu, free, s0)},
           TimeConditioning::spectral(ConditioningKind::kSpectralMax, {1.0}, s0));
  std::mt19937_64 rng(2);
  const Image y = random_image({8, 8}, rng, 0.6);
  const std::vector<double> w{0.3, 0.4, 0.3};
  for (double v : {0.01, 0.04, 0.16}) {
    const Image den = denoise_tweedie(m, y, v);
    for (std::size_t p = 0; p < y.size(); ++p) {
      double num = 0.0, z = 0.0;
      for (std::size_t i = 0; i < 3; ++i) {
        const double tot = s0 + v;
        const double lik = w[i] * std::exp(-(y[p] - mu[i]) * (y[p] - mu[i]) / (2.0 * tot)) / std::sqrt(tot);
        z += lik;
        num += lik * (s0 * y[p] + v * mu[i]) / tot;
      }
      CHECK(std::abs(den[p] - num / z) <= 1e-10);
    }
  }
}

TEST_CASE("energy matches the naive oracle and is shift invariant") {
  std::mt19937_64 rng(3);
  for (auto kind : {ConditioningKind::kSpectralMax, ConditioningKind::kLearnedMlp, ConditioningKind::kLearnedSoftplus}) {
    const PoGmdm m = small_model(3, 9, {8, 8}, rng, kind);
    const Image x = random_image({8, 8}, rng, 0.1);
    for (double v : {0.0, 0.05}) {
      const double e = energy(m, x, v);
      const long double ref = energy_oracle(m, x, v);
      CHECK(std::abs(e - static_cast<double>(ref)) <= 1e-10 * std::abs(static_cast<double>(ref)));
      Image shifted = x;
      for (double& p : shifted) p += 3.7;
      CHECK(energy(m, shifted, v) == doctest::Approx(e).epsilon(1e-10));
    }
  }
}

TEST_CASE("score is minus the energy gradient") {
  std::mt19937_64 rng(4);
  const PoGmdm m = small_model(4, 125, {8, 8}, rng, ConditioningKind::kSpectralMax);
  for (int trial = 0; trial < 3; ++trial) {
    const Image x = random_image({8, 8}, rng, 0.1);
    for (double v : {0.0, 0.02}) {
      const Image s = score(m, x, v);
      const Image fd = fd_gradient(m, x, v, 1e-5);
      for (std::size_t p = 0; p < x.size(); ++p) CHECK(std::abs(s[p] - fd[p]) <= 1e-6);
    }
  }
}

TEST_CASE("score properties: shift equivariance, oddness, zero mean, symmetric Jacobian") {
  std::mt19937_64 rng(5);
  const PoGmdm m = small_model(3, 17, {9, 10}, rng, ConditioningKind::kSpectralMax);
  const Image x = random_image({9, 10}, rng, 0.1);
  const double v = 0.01;
  const Image s = score(m, x, v);
  const Image shifted = score(m, cyclic_shift(x, 2, -3), v);
  const Image expected = cyclic_shift(s, 2, -3);
  for (std::size_t p = 0; p < s.size(); ++p) CHECK(shifted[p] == doctest::Approx(expected[p]).epsilon(1e-12).scale(1e-12));

  Image neg = x;
  for (double& p : neg) p = -p;
  const Image sn = score(m, neg, v);
  for (std::size_t p = 0; p < s.size(); ++p) CHECK(sn[p] == doctest::Approx(-s[p]).epsilon(1e-12).scale(1e-12));

  double total = 0.0, scale = 0.0;
  for (double p : s) total += p, scale += std::abs(p);
  CHECK(std::abs(total) <= 1e-10 * std::max(1.0, scale));

  // <u, J w> = <w, J u> with J the Jacobian of the score.
  const Image u = random_image({9, 10}, rng);
  const Image w = random_image({9, 10}, rng);
  const double h = 1e-6;
  auto jvp = [&](const Image& dir) {
    Image a = x, b = x;
    for (std::size_t p = 0; p < x.size(); ++p) a[p] += h * dir[p], b[p] -= h * dir[p];
    const Image sa = score(m, a, v), sb = score(m, b, v);
    Image out(x.shape());
    for (std::size_t p = 0; p < x.size(); ++p) out[p] = (sa[p] - sb[p]) / (2 * h);
    return out;
  };
  const double lhs = dot(u.span(), jvp(w).span());
  const double rhs = dot(w.span(), jvp(u).span());
  CHECK(std::abs(lhs - rhs) <= 1e-6 * std::sqrt(squared_norm(u.span()) * squared_norm(w.span())));
}

TEST_CASE("score on a grid other than the bank's") {
  std::mt19937_64 rng(6);
  const PoGmdm m = small_model(2, 9, {8, 8}, rng, ConditioningKind::kSpectralMax);
  const Image x = random_image({12, 10}, rng, 0.1);
  PoGmdm moved = m;
  moved.set_image_shape({12, 10});
  const Image a = score(m, x, 0.03);
  const Image b = score(moved, x, 0.03);
  for (std::size_t p = 0; p < a.size(); ++p) CHECK(a[p] == doctest::Approx(b[p]).epsilon(1e-14));
}

TEST_CASE("parameter counts") {
  std::mt19937_64 rng(7);
  ModelSpec spec;
  CHECK(count_parameters(make_model(spec, rng)) == 1760);
  spec.conditioning = ConditioningKind::kLearnedMlp;
  CHECK(count_parameters(make_model(spec, rng)) == 7348);
  spec.conditioning = ConditioningKind::kLearnedSoftplus;
  CHECK(count_parameters(make_model(spec, rng)) == 1820);
  spec.conditioning = ConditioningKind::kSpectralMean;
  CHECK(count_parameters(make_model(spec, rng)) == 1760);
}

TEST_CASE("parameter flattening round-trips") {
  std::mt19937_64 rng(8);
  ModelSpec spec;
  spec.experts = 3;
  spec.components = 7;
  spec.image_shape = {8, 8};
  spec.conditioning = ConditioningKind::kLearnedSoftplus;
  PoGmdm m = make_model(spec, rng);
  const ParameterSet p = m.parameters();
  ParameterSet q = p.zeros_like();
  q.unflatten(p.flatten());
  CHECK(q.kernels == p.kernels);
  CHECK(q.free_weights == p.free_weights);
  CHECK(q.conditioning == p.conditioning);
  m.set_parameters(q);
  CHECK(m.parameters().flatten() == p.flatten());
}

TEST_CASE("model rejects inconsistent parts") {
  CHECK_THROWS_AS(PoGmdm(FilterBank({delta(3), delta(3)}, {8, 8}), {GmmExpert({0.0}, {1.0}, 1.0)},
                         TimeConditioning::spectral(ConditioningKind::kSpectralMax, {1.0}, 1.0)),
                  std::invalid_argument);
}
