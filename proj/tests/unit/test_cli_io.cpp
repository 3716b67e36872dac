#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <stdexcept>

#include "doctest.h"
#include "pogmdm/config.hpp"
#include "pogmdm/metrics.hpp"
#include "pogmdm/model_io.hpp"
#include "pogmdm/npy.hpp"
#include "pogmdm/synth.hpp"

using namespace pogmdm;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "pogmdm_test_cli_io";
  fs::create_directories(dir);
  return dir / name;
}

Image random_image(Shape s, std::mt19937_64& rng, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Image x(s);
  for (double& v : x) v = u(rng);
  return x;
}

// Two-pass SSIM with explicit window means, no shortcuts.
double ssim_oracle(const Image& x, const Image& y) {
  const double range = *std::max_element(y.begin(), y.end());
  const double c1 = std::pow(0.01 * range, 2), c2 = std::pow(0.03 * range, 2);
  std::vector<double> w(49);
  double tot = 0.0;
  for (int a = -3; a <= 3; ++a) {
    for (int b = -3; b <= 3; ++b) tot += w[(a + 3) * 7 + b + 3] = std::exp(-(a * a + b * b) / 4.5);
  }
  for (double& v : w) v /= tot;
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i + 7 <= x.rows(); ++i) {
    for (std::size_t j = 0; j + 7 <= x.cols(); ++j) {
      long double mx = 0, my = 0;
      for (std::size_t q = 0; q < 49; ++q) mx += w[q] * x(i + q / 7, j + q % 7), my += w[q] * y(i + q / 7, j + q % 7);
      long double vx = 0, vy = 0, cxy = 0;
      for (std::size_t q = 0; q < 49; ++q) {
        const long double dx = x(i + q / 7, j + q % 7) - mx, dy = y(i + q / 7, j + q % 7) - my;
        vx += w[q] * dx * dx;
        vy += w[q] * dy * dy;
        cxy += w[q] * dx * dy;
      }
      sum += static_cast<double>((2 * mx * my + c1) * (2 * cxy + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2)));
      ++count;
    }
  }
  return sum / static_cast<double>(count);
}

}  // namespace

TEST_CASE("npy round trip is bit identical") {
  std::mt19937_64 rng(1);
  const Image a = random_image({5, 7}, rng, -3.0, 3.0);
  write_npy(scratch("a.npy").string(), a);
  CHECK(read_image(scratch("a.npy").string()) == a);

  ComplexImage z(Shape{4, 3});
  for (auto& v : z) v = complex{std::uniform_real_distribution<double>(-1, 1)(rng), 1e-300};
  write_npy(scratch("z.npy").string(), z);
  CHECK(read_complex_image(scratch("z.npy").string()) == z);
  const NpyArray raw = read_npy(scratch("z.npy").string());
  CHECK(raw.is_complex);
  CHECK(raw.shape == std::vector<std::size_t>{4, 3});

  std::vector<ComplexImage> stack{z, z};
  stack[1][0] = complex{-2.0, 5.0};
  write_npy(scratch("stack.npy").string(), stack);
  CHECK(read_complex_stack(scratch("stack.npy").string()) == stack);
  CHECK(read_npy(scratch("stack.npy").string()).shape == std::vector<std::size_t>{2, 4, 3});

  // Real arrays promote; a 2-D array is a one-plane stack.
  CHECK(read_complex_image(scratch("a.npy").string())[3] == complex{a[3], 0.0});
  CHECK(read_complex_stack(scratch("a.npy").string()).size() == 1);
  CHECK_THROWS(read_image(scratch("z.npy").string()));
  CHECK_THROWS(read_image(scratch("missing.npy").string()));
  std::ofstream(scratch("junk.npy")) << "not an npy file";
  CHECK_THROWS(read_npy(scratch("junk.npy").string()));
}

TEST_CASE("model file round trip") {
  std::mt19937_64 rng(2);
  for (auto kind : {ConditioningKind::kSpectralMax, ConditioningKind::kLearnedMlp, ConditioningKind::kLearnedSoftplus}) {
    ModelSpec spec;
    spec.experts = 3;
    spec.components = 9;
    spec.image_shape = {8, 8};
    spec.conditioning = kind;
    const PoGmdm m = make_model(spec, rng);
    save_model(scratch("model.json").string(), m);
    const PoGmdm back = load_model(scratch("model.json").string());
    CHECK(back.parameters().flatten() == m.parameters().flatten());
    CHECK(back.conditioning().kind() == kind);
    const Image x = random_image({8, 8}, rng);
    CHECK(energy(back, x, 0.02) == energy(m, x, 0.02));
  }
  CHECK_THROWS(model_from_string("{\"experts\": 3}"));
}

TEST_CASE("config parsing") {
  const AppConfig defaults;
  const AppConfig back = parse_config(config_to_string(defaults));
  CHECK(config_to_string(back) == config_to_string(defaults));

  const AppConfig c = parse_config(R"({"recon": {"lambda": 0.5, "corrector_steps": 2}, "mask": {"kind": "radial"}})");
  CHECK(c.recon.lambda == 0.5);
  CHECK(c.recon.corrector_steps == 2);
  CHECK(c.mask.kind == MaskKind::kRadial);
  CHECK(c.recon.mu == defaults.recon.mu);

  CHECK_THROWS_AS(parse_config(R"({"recon": {"lamda": 0.5}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"extra": {}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"recon": {"lambda": "big"}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"mask": {"kind": "hexagonal"}})"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config("{ not json"), ConfigError);
}

TEST_CASE("noisy-input PSNR anchors") {
  const std::vector<std::pair<double, double>> anchors{{0.025, 32.04}, {0.05, 26.02}, {0.1, 20.00}, {0.2, 13.98}};
  const auto images = corpus_generate(20, 64, 3);
  std::mt19937_64 rng(4);
  for (const auto& [sigma, expected] : anchors) {
    double total = 0.0;
    for (Image ref : images) {
      // Peak exactly 1 so the anchor is 20 log10(1 / sigma).
      const double peak = *std::max_element(ref.begin(), ref.end());
      for (double& v : ref) v /= peak;
      Image y = ref;
      std::normal_distribution<double> n(0.0, sigma);
      for (double& v : y) v += n(rng);
      total += psnr(y, ref);
    }
    CHECK(std::abs(total / 20.0 - expected) <= 0.05);
  }
}

TEST_CASE("PSNR and NMSE closed forms") {
  Image ref(4, 4);
  ref[0] = 1.0;
  Image x = ref;
  CHECK(std::isinf(psnr(x, ref)));
  for (double& v : x) v += 0.1;
  CHECK(psnr(x, ref) == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(nmse(x, ref) == doctest::Approx(16 * 0.01).epsilon(1e-12));
  CHECK(nmse(ref, ref) == 0.0);
  CHECK_THROWS_AS(psnr(x, Image(4, 4)), std::invalid_argument);
  CHECK_THROWS_AS(nmse(x, Image(4, 5)), std::invalid_argument);

  const MeanStd ms = mean_std({1.0, 2.0, 3.0, 4.0});
  CHECK(ms.mean == 2.5);
  CHECK(ms.std == doctest::Approx(std::sqrt(5.0 / 3.0)));  // sample standard deviation
}

TEST_CASE("SSIM against a two-pass oracle") {
  std::mt19937_64 rng(5);
  const Image ref = shepp_logan(24);
  CHECK(ssim(ref, ref) == doctest::Approx(1.0).epsilon(1e-12));
  Image noisy = ref;
  std::normal_distribution<double> n(0.0, 0.1);
  for (double& v : noisy) v += n(rng);
  const double s = ssim(noisy, ref);
  CHECK(s == doctest::Approx(ssim_oracle(noisy, ref)).epsilon(1e-10));
  CHECK(s < 1.0);
  const Image other = random_image({20, 13}, rng);
  const Image base = random_image({20, 13}, rng);
  CHECK(ssim(other, base) == doctest::Approx(ssim_oracle(other, base)).epsilon(1e-10));
  CHECK_THROWS_AS(ssim(Image(6, 6), Image(6, 6)), std::invalid_argument);
}

TEST_CASE("Shepp-Logan phantom") {
  const Image p = shepp_logan(64);
  CHECK(*std::max_element(p.begin(), p.end()) == doctest::Approx(1.0));
  CHECK(*std::min_element(p.begin(), p.end()) >= 0.0);
  CHECK(p(0, 0) == 0.0);
  CHECK(p(63, 63) == 0.0);
  CHECK(p(0, 63) == 0.0);
  // Mirror symmetric above y = 0.6; the inner ellipses below differ in size.
  for (std::size_t i = 0; i < 11; ++i) {
    for (std::size_t j = 0; j < 64; ++j) CHECK(p(i, j) == p(i, 63 - j));
  }
  CHECK(shepp_logan(64) == p);
}

TEST_CASE("synthetic coils") {
  const CoilSensitivities s = synthetic_coils(4, 32, 7);
  REQUIRE(s.size() == 4);
  const Image w = rss(s);
  for (double v : w) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(synthetic_coils(4, 32, 7) == s);
  CHECK_FALSE(synthetic_coils(4, 32, 8) == s);
  // Smooth: the Dirichlet smoothness energy is far below that of a random field with the same RSS.
  std::mt19937_64 rng(9);
  CoilSensitivities rough(4, ComplexImage(Shape{32, 32}));
  std::normal_distribution<double> n(0.0, 0.5);
  for (auto& c : rough) {
    for (auto& v : c) v = complex{n(rng), n(rng)};
  }
  CHECK(coil_prior_energy(s) < 0.05 * coil_prior_energy(rough));
}

TEST_CASE("synthetic corpus") {
  const auto a = corpus_generate(6, 32, 11);
  REQUIRE(a.size() == 6);
  CHECK(corpus_generate(6, 32, 11) == a);
  CHECK_FALSE(corpus_generate(6, 32, 12)[0] == a[0]);
  for (const auto& img : a) {
    CHECK(*std::min_element(img.begin(), img.end()) >= 0.0);
    CHECK(*std::max_element(img.begin(), img.end()) <= 1.0);
    CHECK(max_abs(img.span()) > 0.0);
  }
  // Images are distinct draws, not copies.
  CHECK_FALSE(a[0] == a[1]);

  const fs::path dir = scratch("corpus");
  fs::remove_all(dir);
  write_corpus(dir.string(), a);
  CHECK(fs::exists(dir / "index.txt"));
  CHECK(read_corpus(dir.string()) == a);
  CHECK_THROWS(read_corpus(scratch("no_corpus").string()));
}

TEST_CASE("k-space simulation") {
  const Image mask = Image(Shape{8, 8}, 1.0);
  const ComplexImage x = to_complex(shepp_logan(8));
  const CoilSensitivities s{ComplexImage(Shape{8, 8}, complex{1.0, 0.0})};
  std::mt19937_64 rng(13);
  const KSpaceData clean = simulate_kspace(x, s, mask, 0.0, rng);
  const KSpaceData direct = sense_forward(x, s, mask);
  CHECK(clean == direct);
  Image half = mask;
  for (std::size_t j = 0; j < 8; ++j) half(0, j) = 0.0;
  const KSpaceData noisy = simulate_kspace(x, s, half, 0.1, rng);
  for (std::size_t j = 0; j < 8; ++j) CHECK(noisy[0](0, j) == complex{0.0, 0.0});
  CHECK_FALSE(noisy[0](1, 1) == direct[0](1, 1));
}
