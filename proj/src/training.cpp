#include "pogmdm/training.hpp"

#include <chrono>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "pogmdm/errors.hpp"

namespace pogmdm {

void TrainConfig::validate() const {
  if (iterations == 0) throw std::invalid_argument("train: iterations must be > 0");
  if (batch_size == 0) throw std::invalid_argument("train: batch size must be > 0");
  if (patch_size == 0) throw std::invalid_argument("train: patch size must be > 0");
  if (!(ema_momentum > 0.0 && ema_momentum < 1.0)) throw std::invalid_argument("train: EMA momentum must be in (0, 1)");
  if (!(horizon > 0.0)) throw std::invalid_argument("train: T must be > 0");
  if (!(t_min >= 0.0 && t_min < horizon)) throw std::invalid_argument("train: t_min must be in [0, T)");
  if (lr_kernels < 0.0 || lr_weights < 0.0 || lr_conditioning < 0.0) {
    throw std::invalid_argument("train: learning rates must be >= 0");
  }
}

std::pair<Image, Image> sample_pair(const Image& x0, double t, std::mt19937_64& rng) {
  if (!(t >= 0.0)) throw std::invalid_argument("sample_pair: t must be >= 0");
  std::normal_distribution<double> normal;
  Image z(x0.shape());
  for (double& v : z) v = normal(rng);
  Image xt(x0.shape());
  const double scale = std::sqrt(2.0 * t);
  for (std::size_t p = 0; p < xt.size(); ++p) xt[p] = x0[p] + scale * z[p];
  return {std::move(xt), std::move(z)};
}

namespace {

void check_batch(std::span<const TrainingSample> batch) {
  if (batch.empty()) throw std::invalid_argument("dsm_loss: empty batch");
  for (const auto& s : batch) {
    if (!(s.t > 0.0)) throw std::invalid_argument("dsm_loss: every t must be > 0");
    require_same_shape(s.x0.shape(), s.xt.shape(), "dsm_loss");
  }
}

const FilterBank& bank_at(const PoGmdm& model, Shape shape, FilterBank& storage) {
  if (model.bank().image_shape() == shape) return model.bank();
  storage = bank_for(model, shape);
  return storage;
}

// Adds one sample's loss gradient (scaled) into `grad`; returns its loss.
double accumulate_sample(const PoGmdm& model, const TrainingSample& sample, double scale, GradientSet& grad) {
  FilterBank storage;
  const FilterBank& bank = bank_at(model, sample.xt.shape(), storage);
  const std::size_t o = model.experts_count();
  const std::size_t r = bank.kernel_size();
  const std::size_t L = model.experts().front().num_components();
  const std::size_t nfree = free_weight_count(L);
  const double v = 2.0 * sample.t;
  const auto variances = variance_at(model.conditioning(), v);

  const Responses u = conv_forward(sample.xt, bank);
  std::vector<ExpertEvaluator> evals;
  evals.reserve(o);
  for (std::size_t k = 0; k < o; ++k) evals.emplace_back(model.experts()[k], variances[k]);

  Responses a(o, Image(sample.xt.shape()));
  for (std::size_t k = 0; k < o; ++k) {
    for (std::size_t p = 0; p < u[k].size(); ++p) a[k][p] = evals[k].grad(u[k][p]);
  }
  const Image s = conv_adjoint(a, bank);
  Image res(sample.xt.shape());
  for (std::size_t p = 0; p < res.size(); ++p) res[p] = sample.x0[p] - sample.xt[p] - v * s[p];
  const double loss = squared_norm(res);

  // d loss = -2v <res, d score>; c_k = K_k res.
  const double factor = -2.0 * v * scale;
  const Responses c = conv_forward(res, bank);
  std::vector<double> d_var(o, 0.0);
  std::vector<double> wgrad(L);
  Image h(sample.xt.shape());
  Image kgrad(r, r);
  for (std::size_t k = 0; k < o; ++k) {
    std::fill(wgrad.begin(), wgrad.end(), 0.0);
    double dv = 0.0;
    for (std::size_t p = 0; p < u[k].size(); ++p) {
      const ResponseTerms t = evals[k].terms(u[k][p], c[k][p], wgrad);
      h[p] = t.grad_dx * c[k][p];
      dv += t.grad_dvar * c[k][p];
    }
    std::fill(kgrad.begin(), kgrad.end(), 0.0);
    accumulate_kernel_gradient(h, sample.xt, kgrad);
    accumulate_kernel_gradient(a[k], res, kgrad);
    double* kg = grad.kernels.data() + k * r * r;
    for (std::size_t q = 0; q < r * r; ++q) kg[q] += factor * kgrad[q];

    double* wg = grad.free_weights.data() + k * nfree;
    for (std::size_t i = 0; i < L; ++i) {
      const std::size_t j = i < nfree ? i : L - 1 - i;
      wg[j] += factor * wgrad[i];
    }
    d_var[k] = factor * dv;
  }
  model.conditioning().backprop(v, d_var, grad.conditioning);
  return loss;
}

}  // namespace

double dsm_loss(const PoGmdm& model, std::span<const TrainingSample> batch) {
  check_batch(batch);
  double total = 0.0;
  for (const auto& s : batch) {
    const Image sc = score(model, s.xt, 2.0 * s.t);
    const double v = 2.0 * s.t;
    double acc = 0.0;
    for (std::size_t p = 0; p < sc.size(); ++p) {
      const double d = s.x0[p] - s.xt[p] - v * sc[p];
      acc += d * d;
    }
    total += acc;
  }
  return total / static_cast<double>(batch.size());
}

LossAndGradient dsm_loss_and_gradients(const PoGmdm& model, std::span<const TrainingSample> batch) {
  check_batch(batch);
  LossAndGradient out{0.0, model.parameters().zeros_like()};
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (const auto& s : batch) out.loss += accumulate_sample(model, s, scale, out.gradient);
  out.loss *= scale;
  return out;
}

GradientSet dsm_gradients(const PoGmdm& model, std::span<const TrainingSample> batch) {
  return dsm_loss_and_gradients(model, batch).gradient;
}

void adabelief_step(std::span<double> params, std::span<const double> grads, AdaBeliefState& state, double lr,
                    const AdaBeliefOptions& options) {
  if (params.size() != grads.size()) throw std::invalid_argument("adabelief_step: size mismatch");
  if (state.m.empty() && state.s.empty()) {
    state.m.assign(params.size(), 0.0);
    state.s.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size() || state.s.size() != params.size()) {
    throw std::invalid_argument("adabelief_step: state size mismatch");
  }
  ++state.step;
  const double b1 = options.beta1;
  const double b2 = options.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
    const double d = g - state.m[i];
    state.s[i] = b2 * state.s[i] + (1.0 - b2) * d * d + options.eps;
    const double m_hat = state.m[i] / c1;
    const double s_hat = state.s[i] / c2;
    params[i] -= lr * m_hat / (std::sqrt(s_hat) + options.eps);
  }
}

PoGmdm apply_constraints(PoGmdm model) {
  model.set_bank(project_zero_mean(model.bank()));
  auto experts = model.experts();
  for (auto& e : experts) e.project_weights();
  model.set_experts(std::move(experts));
  TimeConditioning cond = model.conditioning();
  cond.project();
  model.set_conditioning(std::move(cond));
  return model;
}

void ema_update(std::span<double> shadow, std::span<const double> params, double momentum) {
  if (shadow.size() != params.size()) throw std::invalid_argument("ema_update: size mismatch");
  for (std::size_t i = 0; i < shadow.size(); ++i) shadow[i] = momentum * shadow[i] + (1.0 - momentum) * params[i];
}

namespace {

Image random_crop(const Image& img, std::size_t n, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> di(0, img.rows() - n);
  std::uniform_int_distribution<std::size_t> dj(0, img.cols() - n);
  const std::size_t i0 = di(rng);
  const std::size_t j0 = dj(rng);
  Image out(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) out(i, j) = img(i0 + i, j0 + j);
  }
  return out;
}

PoGmdm with_parameters(PoGmdm model, const ParameterSet& params) {
  model.set_parameters(params);
  model.refresh_spectral_scale();
  return model;
}

}  // namespace

TrainResult train(const std::vector<Image>& dataset, PoGmdm initial, const TrainConfig& config,
                  const TrainCallback& on_log) {
  config.validate();
  if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
  const std::size_t n = config.patch_size;
  for (const auto& img : dataset) {
    if (img.rows() < n || img.cols() < n) {
      throw std::invalid_argument("train: dataset image smaller than the patch size " + std::to_string(n));
    }
  }
  std::mt19937_64 rng(config.seed);
  std::uniform_int_distribution<std::size_t> pick(0, dataset.size() - 1);
  std::uniform_real_distribution<double> time(config.t_min, config.horizon);

  PoGmdm model = std::move(initial);
  model.set_image_shape(Shape{n, n});
  model = apply_constraints(std::move(model));
  model.refresh_spectral_scale();

  ParameterSet params = model.parameters();
  ParameterSet shadow = params;
  AdaBeliefState st_kernels, st_weights, st_cond;
  TrainResult result{model, {}};
  const auto start = std::chrono::steady_clock::now();

  std::vector<TrainingSample> batch(config.batch_size);
  for (std::uint64_t it = 1; it <= config.iterations; ++it) {
    for (auto& s : batch) {
      s.x0 = random_crop(dataset[pick(rng)], n, rng);
      // Uniform on (t_min, T]: reflect the half-open interval of the distribution.
      s.t = config.horizon + config.t_min - time(rng);
      s.xt = sample_pair(s.x0, s.t, rng).first;
    }
    LossAndGradient lg = dsm_loss_and_gradients(model, batch);
    if (!std::isfinite(lg.loss) || !all_finite(lg.gradient.flatten())) {
      std::ostringstream msg;
      msg << "train: non-finite loss or gradient at iteration " << it;
      throw NumericalError(msg.str());
    }
    adabelief_step(params.kernels, lg.gradient.kernels, st_kernels, config.lr_kernels);
    adabelief_step(params.free_weights, lg.gradient.free_weights, st_weights, config.lr_weights);
    adabelief_step(params.conditioning, lg.gradient.conditioning, st_cond, config.lr_conditioning);
    model.set_parameters(params);
    model = apply_constraints(std::move(model));
    model.refresh_spectral_scale();
    params = model.parameters();

    auto flat_shadow = shadow.flatten();
    ema_update(flat_shadow, params.flatten(), config.ema_momentum);
    shadow.unflatten(flat_shadow);

    if (it % config.log_every == 0 || it == config.iterations) {
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      LossRecord rec{it, lg.loss, secs};
      result.log.push_back(rec);
      if (on_log) {
        PoGmdm ema = with_parameters(model, shadow);
        ema.metadata().iterations = it;
        ema.metadata().ema = true;
        on_log(rec, ema);
      }
    }
  }
  result.model = with_parameters(model, shadow);
  result.model.metadata().iterations = config.iterations;
  result.model.metadata().ema = true;
  result.model.metadata().training_shape = Shape{n, n};
  return result;
}

}  // namespace pogmdm
