#include "pogmdm/recon.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "pogmdm/errors.hpp"

namespace pogmdm {

void NoiseSchedule::validate() const {
  if (!(zeta_min > 0.0 && zeta_min < zeta_max)) throw std::invalid_argument("schedule: need 0 < zeta_min < zeta_max");
  if (!(p >= 1.0)) throw std::invalid_argument("schedule: p must be >= 1");
  if (!(horizon > 0.0)) throw std::invalid_argument("schedule: T must be > 0");
  if (steps < 2) throw std::invalid_argument("schedule: N must be >= 2");
}

double schedule_value(const NoiseSchedule& schedule, double t) {
  const double e = std::pow(1.0 - t / schedule.horizon, schedule.p);
  if (e == 0.0) return schedule.zeta_max;
  if (e == 1.0) return schedule.zeta_min;
  return schedule.zeta_max * std::pow(schedule.zeta_min / schedule.zeta_max, e);
}

double schedule_at(const NoiseSchedule& schedule, std::size_t i) {
  if (i > schedule.steps) throw std::out_of_range("schedule_at: index beyond N");
  if (i == schedule.steps) return schedule.zeta_max;
  const double t = static_cast<double>(i) * schedule.horizon / static_cast<double>(schedule.steps);
  return schedule_value(schedule, t);
}

void ReconConfig::validate() const {
  schedule.validate();
  if (lambda < 0.0 || mu < 0.0 || r < 0.0) throw std::invalid_argument("recon: lambda, mu and r must be >= 0");
  if (!(start_fraction > 0.0 && start_fraction <= 1.0)) throw std::invalid_argument("recon: start fraction must be in (0, 1]");
  if (repeats == 0) throw std::invalid_argument("recon: repeats must be >= 1");
}

namespace {

Image gaussian(Shape shape, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Image xi(shape);
  for (double& v : xi) v = normal(rng);
  return xi;
}

}  // namespace

Channels predictor_step(Channels x, const PoGmdm& model, double zeta_next, double zeta_cur, std::mt19937_64& rng) {
  if (zeta_next < zeta_cur) throw std::invalid_argument("predictor_step: schedule must be non-decreasing in i");
  const double dv = zeta_next * zeta_next - zeta_cur * zeta_cur;
  if (dv == 0.0) return x;
  const double noise = std::sqrt(dv);
  for (auto& ch : x) {
    const Image s = score(model, ch, zeta_next * zeta_next);
    const Image xi = gaussian(ch.shape(), rng);
    for (std::size_t p = 0; p < ch.size(); ++p) ch[p] += dv * s[p] + noise * xi[p];
  }
  return x;
}

Channels corrector_step(Channels x, const PoGmdm& model, double zeta, double r, std::mt19937_64& rng) {
  if (!(r >= 0.0)) throw std::invalid_argument("corrector_step: r must be >= 0");
  for (auto& ch : x) {
    const Image xi = gaussian(ch.shape(), rng);
    if (r == 0.0) continue;
    const Image s = score(model, ch, zeta * zeta);
    const double sn = squared_norm(s.span());
    if (!(sn > 0.0) || !std::isfinite(sn)) continue;
    const double eps = 2.0 * r * squared_norm(xi.span()) / sn;
    const double noise = std::sqrt(2.0 * eps);
    for (std::size_t p = 0; p < ch.size(); ++p) ch[p] += eps * s[p] + noise * xi[p];
  }
  return x;
}

ComplexImage intensity_correction(const ComplexImage& x, const CoilSensitivities& s) {
  const Image w = rss(s);
  require_same_shape(x.shape(), w.shape(), "intensity_correction");
  ComplexImage out(x.shape());
  for (std::size_t p = 0; p < out.size(); ++p) out[p] = x[p] * w[p];
  return out;
}

namespace {

ComplexImage combine(const Channels& x) {
  return x.size() == 1 ? to_complex(x[0]) : make_complex(x[0], x[1]);
}

void check_finite(const Channels& x, const CoilSensitivities& s, std::size_t step) {
  bool ok = true;
  for (const auto& ch : x) ok = ok && all_finite(ch.span());
  for (const auto& si : s) ok = ok && all_finite(si.span());
  if (!ok) throw NumericalError("reconstruction: non-finite iterate at step " + std::to_string(step));
}

ReconResult run_sampler(const KSpaceData& data, const Image& mask, const PoGmdm& prior, const ReconConfig& config,
                        bool single_coil) {
  config.validate();
  if (data.empty()) throw std::invalid_argument("reconstruction: no coil data");
  for (const auto& yi : data) require_same_shape(yi.shape(), mask.shape(), "reconstruction");
  bool any = false;
  for (double m : mask) any = any || m != 0.0;
  if (!any) throw std::invalid_argument("reconstruction: empty sampling mask");

  const Shape shape = mask.shape();
  PoGmdm model = prior;
  model.set_image_shape(shape);

  KSpaceData y = data;
  std::vector<ComplexImage> zf = zero_filled(y);
  const Image zf_rss = rss(zf);
  const double scale = max_abs(zf_rss.span());
  if (!(scale > 0.0)) throw std::invalid_argument("reconstruction: zero-filled image is identically zero");
  for (auto& yi : y) {
    for (auto& v : yi) v /= scale;
  }
  for (auto& zi : zf) {
    for (auto& v : zi) v /= scale;
  }

  const bool update_coils = config.update_coils && !single_coil;
  CoilSensitivities s;
  if (single_coil) {
    s.assign(1, ComplexImage(shape, complex{1.0, 0.0}));
  } else {
    const double eps = 1e-6;
    for (const auto& zi : zf) {
      ComplexImage si(shape);
      for (std::size_t p = 0; p < si.size(); ++p) si[p] = zi[p] / (zf_rss[p] / scale + eps);
      s.push_back(std::move(si));
    }
    if (update_coils) s = prox_coil(s, config.mu);
  }

  std::mt19937_64 rng(config.seed);
  const NoiseSchedule& sched = config.schedule;
  const auto start = static_cast<std::size_t>(std::floor(config.start_fraction * static_cast<double>(sched.steps) + 1e-9));
  const double zeta0 = schedule_at(sched, start);

  Channels x;
  if (single_coil) {
    x.push_back(real_part(zf[0]));
  } else {
    Image re = zf_rss;
    for (double& v : re) v /= scale;
    x.push_back(std::move(re));
    x.push_back(Image(shape));
  }
  for (auto& ch : x) {
    const Image xi = gaussian(shape, rng);
    for (std::size_t p = 0; p < ch.size(); ++p) ch[p] += zeta0 * xi[p];
  }

  auto data_consistency = [&](Channels& xc) {
    if (config.lambda == 0.0) return;
    const ComplexImage g = grad_x_loglik(combine(xc), s, mask, y);
    for (std::size_t p = 0; p < g.size(); ++p) {
      xc[0][p] += config.lambda * g[p].real();
      if (xc.size() > 1) xc[1][p] += config.lambda * g[p].imag();
    }
  };

  ReconResult result;
  result.initial_coils = s;
  for (std::size_t i = start; i > 0; --i) {
    const double zn = schedule_at(sched, i);
    const double zc = schedule_at(sched, i - 1);
    x = predictor_step(std::move(x), model, zn, zc, rng);
    data_consistency(x);
    for (std::size_t j = 0; j < config.corrector_steps; ++j) {
      x = corrector_step(std::move(x), model, zc, config.r, rng);
      data_consistency(x);
    }
    if (update_coils && config.mu > 0.0) {
      const CoilSensitivities gs = grad_s_loglik(combine(x), s, mask, y);
      for (std::size_t c = 0; c < s.size(); ++c) {
        for (std::size_t p = 0; p < s[c].size(); ++p) s[c][p] += config.mu * gs[c][p];
      }
      s = prox_coil(s, config.mu);
    }
    check_finite(x, s, i - 1);
    if (config.record_trace) {
      TraceEntry e;
      e.step = i - 1;
      e.zeta = zc;
      e.data_fidelity = std::sqrt(2.0 * data_misfit(combine(x), s, mask, y));
      for (const auto& ch : x) e.prior_energy += energy(model, ch, zc * zc);
      result.trace.push_back(e);
    }
  }

  result.image = combine(x);
  for (auto& v : result.image) v *= scale;
  result.coils = std::move(s);
  result.scale = scale;
  return result;
}

}  // namespace

ReconResult joint_reconstruct(const SenseProblem& problem, const PoGmdm& model, const ReconConfig& config) {
  return run_sampler(problem.y, problem.mask, model, config, false);
}

Image single_coil_reconstruct(const KSpaceData& y, const Image& mask, const PoGmdm& model, const ReconConfig& config) {
  if (y.size() != 1) throw std::invalid_argument("single_coil_reconstruct: expected exactly one coil");
  return real_part(run_sampler(y, mask, model, config, true).image);
}

MmseResult mmse_average(const SenseProblem& problem, const PoGmdm& model, const ReconConfig& config, std::size_t k) {
  if (k == 0) throw std::invalid_argument("mmse_average: K must be >= 1");
  MmseResult out;
  out.samples.assign(k, Image());
  auto run_one = [&](std::size_t idx) {
    ReconConfig c = config;
    c.seed = config.seed + idx;
    const ReconResult r = joint_reconstruct(problem, model, c);
    out.samples[idx] = magnitude(intensity_correction(r.image, r.coils));
  };
  const std::size_t workers = std::min(std::max<std::size_t>(config.threads, 1), k);
  if (workers == 1) {
    for (std::size_t idx = 0; idx < k; ++idx) run_one(idx);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t idx = next++; idx < k; idx = next++) run_one(idx);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  const Shape shape = out.samples.front().shape();
  out.mean = Image(shape);
  out.variance = Image(shape);
  for (const auto& smp : out.samples) {
    for (std::size_t p = 0; p < smp.size(); ++p) out.mean[p] += smp[p];
  }
  for (double& v : out.mean) v /= static_cast<double>(k);
  if (k > 1) {
    for (const auto& smp : out.samples) {
      for (std::size_t p = 0; p < smp.size(); ++p) {
        const double d = smp[p] - out.mean[p];
        out.variance[p] += d * d;
      }
    }
    for (double& v : out.variance) v /= static_cast<double>(k - 1);
  }
  return out;
}

}  // namespace pogmdm
