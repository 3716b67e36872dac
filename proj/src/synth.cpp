#include "pogmdm/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "pogmdm/npy.hpp"

namespace pogmdm {

namespace {

struct Ellipse {
  double value, a, b, x0, y0, phi_deg;
};

// Toft's modified intensities.
constexpr Ellipse kSheppLogan[] = {
    {1.0, 0.69, 0.92, 0.0, 0.0, 0.0},        {-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0},
    {-0.2, 0.11, 0.31, 0.22, 0.0, -18.0},    {-0.2, 0.16, 0.41, -0.22, 0.0, 18.0},
    {0.1, 0.21, 0.25, 0.0, 0.35, 0.0},       {0.1, 0.046, 0.046, 0.0, 0.1, 0.0},
    {0.1, 0.046, 0.046, 0.0, -0.1, 0.0},     {0.1, 0.046, 0.023, -0.08, -0.605, 0.0},
    {0.1, 0.023, 0.023, 0.0, -0.606, 0.0},   {0.1, 0.023, 0.046, 0.06, -0.605, 0.0},
};

bool inside(const Ellipse& e, double x, double y) {
  const double phi = e.phi_deg * std::numbers::pi / 180.0;
  const double dx = x - e.x0;
  const double dy = y - e.y0;
  const double u = dx * std::cos(phi) + dy * std::sin(phi);
  const double v = -dx * std::sin(phi) + dy * std::cos(phi);
  return (u * u) / (e.a * e.a) + (v * v) / (e.b * e.b) <= 1.0;
}

// Pixel (i, j) center in [-1, 1]^2 with y pointing up.
double coord_x(std::size_t j, std::size_t n) { return (2.0 * static_cast<double>(j) + 1.0 - static_cast<double>(n)) / static_cast<double>(n); }
double coord_y(std::size_t i, std::size_t n) { return (static_cast<double>(n) - 1.0 - 2.0 * static_cast<double>(i)) / static_cast<double>(n); }

}  // namespace

Image shepp_logan(std::size_t n) {
  if (n == 0) throw std::invalid_argument("shepp_logan: n must be > 0");
  Image img(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double v = 0.0;
      for (const auto& e : kSheppLogan) {
        if (inside(e, coord_x(j, n), coord_y(i, n))) v += e.value;
      }
      img(i, j) = v;
    }
  }
  const double top = *std::max_element(img.begin(), img.end());
  for (double& v : img) v = top > 0.0 ? std::clamp(v / top, 0.0, 1.0) : 0.0;
  return img;
}

CoilSensitivities synthetic_coils(std::size_t coils, std::size_t n, std::uint64_t seed) {
  if (coils == 0 || n == 0) throw std::invalid_argument("synthetic_coils: need coils > 0 and n > 0");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  CoilSensitivities s;
  for (std::size_t c = 0; c < coils; ++c) {
    const double angle = 2.0 * std::numbers::pi * (static_cast<double>(c) + 0.25 * u(rng)) / static_cast<double>(coils);
    const double cx = 1.4 * std::cos(angle);
    const double cy = 1.4 * std::sin(angle);
    const double width = 1.0 + 0.2 * u(rng);
    const double tilt_x = 0.2 * u(rng);
    const double tilt_y = 0.2 * u(rng);
    const double phase0 = std::numbers::pi * u(rng);
    const double phase_x = 0.8 * u(rng);
    const double phase_y = 0.8 * u(rng);
    ComplexImage si(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const double x = coord_x(j, n);
        const double y = coord_y(i, n);
        const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
        const double mag = std::exp(-d2 / (2.0 * width * width)) * (1.0 + tilt_x * x + tilt_y * y);
        si(i, j) = std::polar(mag, phase0 + phase_x * x + phase_y * y);
      }
    }
    s.push_back(std::move(si));
  }
  const Image r = rss(s);
  for (auto& si : s) {
    for (std::size_t p = 0; p < si.size(); ++p) si[p] /= r[p];
  }
  return s;
}

Image random_piecewise_image(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto range = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };
  Image img(n, n);
  const double base = range(0.0, 0.4);
  const double gx = range(-0.15, 0.15);
  const double gy = range(-0.15, 0.15);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) img(i, j) = base + gx * coord_x(j, n) + gy * coord_y(i, n);
  }
  const int ellipses = 3 + static_cast<int>(u(rng) * 6.0);
  for (int k = 0; k < ellipses; ++k) {
    const Ellipse e{range(-0.4, 0.6), range(0.05, 0.6), range(0.05, 0.6), range(-0.8, 0.8), range(-0.8, 0.8),
                    range(0.0, 180.0)};
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (inside(e, coord_x(j, n), coord_y(i, n))) img(i, j) += e.value;
      }
    }
  }
  // Convex polygons as intersections of half-planes through random vertices on a circle.
  const int polygons = 1 + static_cast<int>(u(rng) * 3.0);
  for (int k = 0; k < polygons; ++k) {
    const int sides = 3 + static_cast<int>(u(rng) * 3.0);
    const double cx = range(-0.7, 0.7);
    const double cy = range(-0.7, 0.7);
    const double radius = range(0.1, 0.5);
    const double value = range(-0.4, 0.6);
    std::vector<double> angles(static_cast<std::size_t>(sides));
    for (double& a : angles) a = range(0.0, 2.0 * std::numbers::pi);
    std::sort(angles.begin(), angles.end());
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const double x = coord_x(j, n);
        const double y = coord_y(i, n);
        bool in = true;
        for (std::size_t s = 0; s < angles.size() && in; ++s) {
          const double a0 = angles[s];
          const double a1 = angles[(s + 1) % angles.size()];
          const double x0 = cx + radius * std::cos(a0), y0 = cy + radius * std::sin(a0);
          const double x1 = cx + radius * std::cos(a1), y1 = cy + radius * std::sin(a1);
          in = (x1 - x0) * (y - y0) - (y1 - y0) * (x - x0) >= 0.0;
        }
        if (in) img(i, j) += value;
      }
    }
  }
  for (double& v : img) v = std::clamp(v, 0.0, 1.0);
  return img;
}

std::vector<Image> corpus_generate(std::size_t count, std::size_t n, std::uint64_t seed) {
  if (count == 0 || n == 0) throw std::invalid_argument("corpus_generate: need count > 0 and n > 0");
  std::mt19937_64 rng(seed);
  std::vector<Image> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) out.push_back(random_piecewise_image(n, rng));
  return out;
}

void write_corpus(const std::string& dir, const std::vector<Image>& images) {
  std::filesystem::create_directories(dir);
  std::ofstream index(std::filesystem::path(dir) / "index.txt");
  if (!index) throw std::runtime_error("cannot write index in '" + dir + "'");
  for (std::size_t k = 0; k < images.size(); ++k) {
    char name[32];
    std::snprintf(name, sizeof(name), "image_%05zu.npy", k);
    write_npy((std::filesystem::path(dir) / name).string(), images[k]);
    index << name << '\n';
  }
}

std::vector<Image> read_corpus(const std::string& dir) {
  std::ifstream index(std::filesystem::path(dir) / "index.txt");
  if (!index) throw std::runtime_error("no index.txt in '" + dir + "'");
  std::vector<Image> out;
  std::string line;
  while (std::getline(index, line)) {
    if (line.empty()) continue;
    out.push_back(read_image((std::filesystem::path(dir) / line).string()));
  }
  return out;
}

KSpaceData simulate_kspace(const ComplexImage& x, const CoilSensitivities& s, const Image& mask, double sigma,
                           std::mt19937_64& rng) {
  if (sigma < 0.0) throw std::invalid_argument("simulate_kspace: sigma must be >= 0");
  KSpaceData y = sense_forward(x, s, mask);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& yi : y) {
    for (std::size_t p = 0; p < yi.size(); ++p) {
      const double re = normal(rng);
      const double im = normal(rng);
      if (mask[p] != 0.0) yi[p] += sigma * complex{re, im};
    }
  }
  return y;
}

}  // namespace pogmdm
