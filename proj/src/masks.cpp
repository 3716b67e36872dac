#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "pogmdm/mri.hpp"

namespace pogmdm {

std::string to_string(MaskKind kind) {
  switch (kind) {
    case MaskKind::kCartesian: return "cartesian";
    case MaskKind::kRadial: return "radial";
    case MaskKind::kSpiral: return "spiral";
    case MaskKind::kGaussian2d: return "gaussian2d";
  }
  return "cartesian";
}

MaskKind mask_kind_from_string(const std::string& name) {
  if (name == "cartesian") return MaskKind::kCartesian;
  if (name == "radial") return MaskKind::kRadial;
  if (name == "spiral") return MaskKind::kSpiral;
  if (name == "gaussian2d") return MaskKind::kGaussian2d;
  throw std::invalid_argument("unknown mask kind '" + name + "'");
}

double SamplingMask::sampled_fraction() const {
  if (mask.size() == 0) return 0.0;
  double n = 0.0;
  for (double v : mask) n += v;
  return n / static_cast<double>(mask.size());
}

namespace {

double fraction(const Image& m) {
  double n = 0.0;
  for (double v : m) n += v;
  return n / static_cast<double>(m.size());
}

void mark(Image& m, double i, double j) {
  const long ii = std::lround(i);
  const long jj = std::lround(j);
  if (ii < 0 || jj < 0 || ii >= static_cast<long>(m.rows()) || jj >= static_cast<long>(m.cols())) return;
  m(static_cast<std::size_t>(ii), static_cast<std::size_t>(jj)) = 1.0;
}

Image cartesian(Shape shape, double acceleration, double acl_fraction) {
  const std::size_t w = shape.cols;
  const auto acl = std::min<std::size_t>(w, static_cast<std::size_t>(std::ceil(acl_fraction * static_cast<double>(w) - 1e-9)));
  const auto target = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(static_cast<double>(w) / acceleration)));
  std::vector<bool> take(w, false);
  const std::size_t first = w / 2 - acl / 2;
  for (std::size_t j = first; j < first + acl; ++j) take[j] = true;
  std::vector<std::size_t> rest;
  for (std::size_t j = 0; j < w; ++j) {
    if (!take[j]) rest.push_back(j);
  }
  const std::size_t extra = target > acl ? std::min(target - acl, rest.size()) : 0;
  for (std::size_t k = 0; k < extra; ++k) {
    const double pos = (static_cast<double>(k) + 0.5) * static_cast<double>(rest.size()) / static_cast<double>(extra);
    take[rest[static_cast<std::size_t>(pos)]] = true;
  }
  Image m(shape);
  for (std::size_t i = 0; i < shape.rows; ++i) {
    for (std::size_t j = 0; j < w; ++j) m(i, j) = take[j] ? 1.0 : 0.0;
  }
  return m;
}

Image radial_with(Shape shape, std::size_t spokes) {
  Image m(shape);
  const double ci = static_cast<double>(shape.rows / 2);
  const double cj = static_cast<double>(shape.cols / 2);
  const double radius = std::hypot(static_cast<double>(shape.rows), static_cast<double>(shape.cols)) / 2.0;
  for (std::size_t k = 0; k < spokes; ++k) {
    const double angle = std::numbers::pi * static_cast<double>(k) / static_cast<double>(spokes);
    const double di = std::sin(angle);
    const double dj = std::cos(angle);
    for (double t = -radius; t <= radius; t += 0.25) mark(m, ci + t * di, cj + t * dj);
  }
  return m;
}

Image radial(Shape shape, double acceleration) {
  const double hw = static_cast<double>(shape.size());
  const double side = static_cast<double>(std::max(shape.rows, shape.cols));
  auto spokes = static_cast<std::size_t>(std::ceil(hw / (acceleration * side)));
  Image m = radial_with(shape, spokes);
  while (fraction(m) < 1.0 / acceleration) m = radial_with(shape, ++spokes);
  return m;
}

Image spiral_with(Shape shape, double pitch, std::size_t arms) {
  Image m(shape);
  const double ci = static_cast<double>(shape.rows / 2);
  const double cj = static_cast<double>(shape.cols / 2);
  const double radius = std::hypot(static_cast<double>(shape.rows), static_cast<double>(shape.cols)) / 2.0;
  for (std::size_t a = 0; a < arms; ++a) {
    const double offset = 2.0 * std::numbers::pi * static_cast<double>(a) / static_cast<double>(arms);
    double theta = 0.0;
    while (pitch * theta <= radius) {
      const double r = pitch * theta;
      mark(m, ci + r * std::sin(theta + offset), cj + r * std::cos(theta + offset));
      // Advance by roughly a quarter pixel of arc length.
      theta += 0.25 / std::max(1.0, std::hypot(r, pitch));
    }
  }
  return m;
}

// Largest pitch (fewest turns) whose rasterized arms reach the target fraction.
Image spiral(Shape shape, double acceleration) {
  constexpr std::size_t kArms = 8;
  const double target = 1.0 / acceleration;
  double lo = 0.05;
  double hi = static_cast<double>(std::max(shape.rows, shape.cols));
  if (fraction(spiral_with(shape, hi, kArms)) >= target) return spiral_with(shape, hi, kArms);
  for (int it = 0; it < 40; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (fraction(spiral_with(shape, mid, kArms)) >= target) lo = mid;
    else hi = mid;
  }
  return spiral_with(shape, lo, kArms);
}

Image gaussian2d(Shape shape, double acceleration, std::uint64_t seed) {
  const double ci = static_cast<double>(shape.rows / 2);
  const double cj = static_cast<double>(shape.cols / 2);
  const double si = 0.25 * static_cast<double>(shape.rows);
  const double sj = 0.25 * static_cast<double>(shape.cols);
  const double center = std::max(2.0, 0.04 * static_cast<double>(std::min(shape.rows, shape.cols)));
  Image profile(shape);
  Image fixed(shape);
  for (std::size_t i = 0; i < shape.rows; ++i) {
    for (std::size_t j = 0; j < shape.cols; ++j) {
      const double a = (static_cast<double>(i) - ci) / si;
      const double b = (static_cast<double>(j) - cj) / sj;
      profile(i, j) = std::exp(-0.5 * (a * a + b * b));
      const bool in_center = std::abs(static_cast<double>(i) - ci) < center && std::abs(static_cast<double>(j) - cj) < center;
      fixed(i, j) = in_center ? 1.0 : 0.0;
    }
  }
  const double target = 1.0 / acceleration;
  auto expected = [&](double alpha) {
    double acc = 0.0;
    for (std::size_t p = 0; p < profile.size(); ++p) acc += fixed[p] > 0.0 ? 1.0 : std::min(1.0, alpha * profile[p]);
    return acc / static_cast<double>(profile.size());
  };
  double lo = 0.0;
  double hi = 1.0;
  while (expected(hi) < target && hi < 1e12) hi *= 2.0;
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (expected(mid) < target) lo = mid;
    else hi = mid;
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image m(shape);
  for (std::size_t p = 0; p < m.size(); ++p) {
    const double draw = u(rng);
    m[p] = fixed[p] > 0.0 || draw < std::min(1.0, hi * profile[p]) ? 1.0 : 0.0;
  }
  return m;
}

Image transpose(const Image& a) {
  Image t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  }
  return t;
}

}  // namespace

SamplingMask make_mask(MaskKind kind, Shape shape, double acceleration, double acl_fraction, bool rotated,
                       std::uint64_t seed) {
  if (shape.size() == 0) throw std::invalid_argument("make_mask: empty shape");
  if (!(acceleration >= 1.0)) throw std::invalid_argument("make_mask: acceleration must be >= 1");
  if (!(acl_fraction >= 0.0 && acl_fraction < 1.0)) throw std::invalid_argument("make_mask: acl fraction must be in [0, 1)");
  SamplingMask out;
  out.kind = kind;
  out.acceleration = acceleration;
  out.acl_fraction = acl_fraction;
  out.rotated = rotated;
  out.seed = seed;
  if (acceleration == 1.0) {
    out.mask = Image(shape, 1.0);
    return out;
  }
  // A rotated mask is the unrotated pattern generated on the transposed grid.
  const Shape grid = rotated ? Shape{shape.cols, shape.rows} : shape;
  Image m;
  switch (kind) {
    case MaskKind::kCartesian: m = cartesian(grid, acceleration, acl_fraction); break;
    case MaskKind::kRadial: m = radial(grid, acceleration); break;
    case MaskKind::kSpiral: m = spiral(grid, acceleration); break;
    case MaskKind::kGaussian2d: m = gaussian2d(grid, acceleration, seed); break;
  }
  out.mask = rotated ? transpose(m) : std::move(m);
  return out;
}

}  // namespace pogmdm
