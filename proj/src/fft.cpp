#include "pogmdm/fft.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <tuple>

namespace pogmdm::fft {

namespace {

// FFTW's planner is not thread-safe while plan execution on new arrays is, so
// plans are created once per shape under a lock and then shared. FFTW_ESTIMATE
// keeps the chosen algorithm (and thus the bits of every result) reproducible.
class PlanCache {
 public:
  enum class Kind { kForward, kBackward, kDst };

  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  fftw_plan get(Kind kind, std::size_t rows, std::size_t cols) {
    std::lock_guard lock(mutex_);
    auto key = std::make_tuple(kind, rows, cols);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;

    const int n0 = static_cast<int>(rows);
    const int n1 = static_cast<int>(cols);
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    fftw_plan plan = nullptr;
    if (kind == Kind::kDst) {
      std::vector<double> buf(rows * cols);
      plan = fftw_plan_r2r_2d(n0, n1, buf.data(), buf.data(), FFTW_RODFT00, FFTW_RODFT00, flags);
    } else {
      std::vector<fftw_complex> buf(rows * cols);
      const int sign = kind == Kind::kForward ? FFTW_FORWARD : FFTW_BACKWARD;
      plan = fftw_plan_dft_2d(n0, n1, buf.data(), buf.data(), sign, flags);
    }
    if (plan == nullptr) throw std::runtime_error("fft: FFTW failed to create a plan");
    plans_.emplace(key, plan);
    return plan;
  }

 private:
  std::mutex mutex_;
  std::map<std::tuple<Kind, std::size_t, std::size_t>, fftw_plan> plans_;
};

PlanCache& cache() {
  static PlanCache instance;
  return instance;
}

fftw_complex* as_fftw(complex* p) { return reinterpret_cast<fftw_complex*>(p); }

void check_nonempty(Shape s, const char* where) {
  if (s.rows == 0 || s.cols == 0) throw std::invalid_argument(std::string(where) + ": empty array");
}

ComplexImage transform(ComplexImage x, PlanCache::Kind kind) {
  check_nonempty(x.shape(), "fft");
  fftw_plan plan = cache().get(kind, x.rows(), x.cols());
  fftw_execute_dft(plan, as_fftw(x.data()), as_fftw(x.data()));
  return x;
}

}  // namespace

ComplexImage forward(const ComplexImage& x) { return transform(x, PlanCache::Kind::kForward); }

ComplexImage forward(const Image& x) { return forward(to_complex(x)); }

ComplexImage inverse(const ComplexImage& k) {
  ComplexImage out = transform(k, PlanCache::Kind::kBackward);
  const double scale = 1.0 / static_cast<double>(out.size());
  for (auto& v : out) v *= scale;
  return out;
}

ComplexImage centered_forward(const ComplexImage& x) {
  ComplexImage out = fftshift(transform(ifftshift(x), PlanCache::Kind::kForward));
  const double scale = 1.0 / std::sqrt(static_cast<double>(out.size()));
  for (auto& v : out) v *= scale;
  return out;
}

ComplexImage centered_inverse(const ComplexImage& k) {
  ComplexImage out = fftshift(transform(ifftshift(k), PlanCache::Kind::kBackward));
  const double scale = 1.0 / std::sqrt(static_cast<double>(out.size()));
  for (auto& v : out) v *= scale;
  return out;
}

Image dst2(const Image& x) {
  check_nonempty(x.shape(), "dst2");
  Image out = x;
  fftw_plan plan = cache().get(PlanCache::Kind::kDst, x.rows(), x.cols());
  fftw_execute_r2r(plan, out.data(), out.data());
  // FFTW's RODFT00 is 2 * sum x_j sin(pi (j+1)(k+1)/(n+1)) per axis.
  const double scale = 1.0 / std::sqrt(4.0 * static_cast<double>(x.rows() + 1) *
                                       static_cast<double>(x.cols() + 1));
  for (auto& v : out) v *= scale;
  return out;
}

Image idst2(const Image& x) { return dst2(x); }

}  // namespace pogmdm::fft
