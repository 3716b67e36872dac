#include "pogmdm/experts.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace pogmdm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
// exp() argument cap for components that carry zero weight but sit much
// closer to x than any weighted component.
constexpr double kMaxExponent = 700.0;

void check_variance(double variance, const char* where) {
  if (!(variance > 0.0) || !std::isfinite(variance)) {
    throw std::invalid_argument(std::string(where) + ": variance must be positive and finite");
  }
}

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double elu(double x) { return x > 0.0 ? x : std::expm1(x); }
double elu_grad(double x) { return x > 0.0 ? 1.0 : std::exp(x); }

// Offsets into the flattened MLP parameter vector.
struct MlpLayout {
  std::size_t o;
  std::size_t w1() const { return 0; }
  std::size_t b1() const { return kMlpHidden; }
  std::size_t w2() const { return 2 * kMlpHidden; }
  std::size_t b2() const { return 2 * kMlpHidden + kMlpHidden * kMlpHidden; }
  std::size_t w3() const { return 3 * kMlpHidden + kMlpHidden * kMlpHidden; }
  std::size_t b3() const { return w3() + o * kMlpHidden; }
  std::size_t size() const { return b3() + o; }
};

struct MlpActivations {
  std::vector<double> pre1, h1, pre2, h2, pre3;
};

MlpActivations mlp_forward(std::span<const double> p, std::size_t o, double input) {
  const MlpLayout lay{o};
  MlpActivations a;
  a.pre1.resize(kMlpHidden);
  a.h1.resize(kMlpHidden);
  for (std::size_t j = 0; j < kMlpHidden; ++j) {
    a.pre1[j] = p[lay.w1() + j] * input + p[lay.b1() + j];
    a.h1[j] = elu(a.pre1[j]);
  }
  a.pre2.resize(kMlpHidden);
  a.h2.resize(kMlpHidden);
  for (std::size_t j = 0; j < kMlpHidden; ++j) {
    double acc = p[lay.b2() + j];
    const double* row = &p[lay.w2() + j * kMlpHidden];
    for (std::size_t i = 0; i < kMlpHidden; ++i) acc += row[i] * a.h1[i];
    a.pre2[j] = acc;
    a.h2[j] = elu(acc);
  }
  a.pre3.resize(o);
  for (std::size_t k = 0; k < o; ++k) {
    double acc = p[lay.b3() + k];
    const double* row = &p[lay.w3() + k * kMlpHidden];
    for (std::size_t i = 0; i < kMlpHidden; ++i) acc += row[i] * a.h2[i];
    a.pre3[k] = acc;
  }
  return a;
}

}  // namespace

std::vector<double> equidistant_means(std::size_t count, double v_min, double v_max) {
  if (count == 0) throw std::invalid_argument("equidistant_means: count must be positive");
  if (count == 1) return {0.5 * (v_min + v_max)};
  if (!(v_max > v_min)) throw std::invalid_argument("equidistant_means: v_max must exceed v_min");
  std::vector<double> means(count);
  const double step = (v_max - v_min) / static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i) means[i] = v_min + step * static_cast<double>(i);
  means.back() = v_max;
  return means;
}

std::vector<double> project_simplex(std::span<const double> w) {
  if (w.empty()) return {};
  std::vector<double> sorted(w.begin(), w.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumulative = 0.0;
  double threshold = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    cumulative += sorted[i];
    const double candidate = (cumulative - 1.0) / static_cast<double>(i + 1);
    if (sorted[i] - candidate > 0.0) threshold = candidate;
  }
  std::vector<double> out(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) out[i] = std::max(w[i] - threshold, 0.0);
  return out;
}

std::vector<double> mirror_weights(std::span<const double> free, std::size_t count) {
  if (free.size() != free_weight_count(count)) {
    throw std::invalid_argument("mirror_weights: expected ceil(L/2) free weights");
  }
  std::vector<double> w(count);
  for (std::size_t i = 0; i < free.size(); ++i) {
    w[i] = free[i];
    w[count - 1 - i] = free[i];
  }
  return w;
}

std::vector<double> extract_free_weights(std::span<const double> weights) {
  const std::size_t n = free_weight_count(weights.size());
  return {weights.begin(), weights.begin() + static_cast<std::ptrdiff_t>(n)};
}

// --- GmmExpert -------------------------------------------------------------

GmmExpert::GmmExpert(std::vector<double> means, std::vector<double> free_weights, double base_variance)
    : means_(std::move(means)), free_weights_(std::move(free_weights)), base_variance_(base_variance) {
  check_variance(base_variance_, "GmmExpert");
  if (free_weights_.size() != free_weight_count(means_.size())) {
    throw std::invalid_argument("GmmExpert: expected ceil(L/2) free weights");
  }
  materialize();
}

GmmExpert GmmExpert::uniform(std::size_t count, double v_min, double v_max) {
  auto means = equidistant_means(count, v_min, v_max);
  const double base = count > 1 ? (v_max - v_min) / static_cast<double>(count - 1) : 1.0;
  std::vector<double> free(free_weight_count(count), 1.0 / static_cast<double>(count));
  return GmmExpert(std::move(means), std::move(free), base);
}

void GmmExpert::set_free_weights(std::vector<double> free_weights) {
  if (free_weights.size() != free_weights_.size()) {
    throw std::invalid_argument("GmmExpert::set_free_weights: size mismatch");
  }
  free_weights_ = std::move(free_weights);
  materialize();
}

void GmmExpert::project_weights() {
  const auto projected = project_simplex(mirror_weights(free_weights_, means_.size()));
  free_weights_ = extract_free_weights(projected);
  materialize();
}

void GmmExpert::materialize() {
  weights_ = mirror_weights(free_weights_, means_.size());
  log_weights_.resize(weights_.size());
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    log_weights_[i] = weights_[i] > 0.0 ? std::log(weights_[i]) : kNegInf;
  }
}

// --- evaluation ------------------------------------------------------------

ExpertEvaluator::ExpertEvaluator(const GmmExpert& expert, double variance)
    : expert_(&expert),
      variance_(variance),
      inv_two_var_(0.0),
      log_norm_(0.0),
      scratch_(expert.num_components()) {
  check_variance(variance, "ExpertEvaluator");
  inv_two_var_ = 0.5 / variance;
  log_norm_ = -0.5 * std::log(2.0 * std::numbers::pi * variance);
  const auto& w = expert.weights();
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] > 0.0) active_.push_back(i);
  }
  if (active_.empty()) throw std::invalid_argument("ExpertEvaluator: all mixture weights are zero");
  const auto& mu = expert.means();
  if (mu.size() > 2) {
    step_ = (mu.back() - mu.front()) / static_cast<double>(mu.size() - 1);
    bool equidistant = step_ > 0.0;
    for (std::size_t i = 0; equidistant && i + 1 < mu.size(); ++i) {
      equidistant = std::abs(mu[i + 1] - mu[i] - step_) <= 1e-12 * step_;
    }
    if (equidistant) q_ = std::exp(-2.0 * step_ * step_ * inv_two_var_);
    else step_ = 0.0;
  }
}

double ExpertEvaluator::profile(double x, double* g, double& s) const {
  const auto& mu = expert_->means();
  const auto& w = expert_->weights();
  const std::size_t n = mu.size();
  if (step_ > 0.0 && std::isfinite(x)) {
    // Factors relative to the nearest component, by the recurrence
    // g_{i+1} / g_i = rho_i, rho_{i+1} = q rho_i, re-anchored every kBlock steps.
    constexpr std::size_t kBlock = 16;
    const double pos = (x - mu.front()) / step_;
    const std::size_t j = pos <= 0.0 ? 0 : pos >= static_cast<double>(n - 1) ? n - 1 : static_cast<std::size_t>(std::lround(pos));
    const double dj = x - mu[j];
    const double m = -dj * dj * inv_two_var_;
    auto exact = [&](std::size_t i) {
      const double d = x - mu[i];
      return std::exp(-d * d * inv_two_var_ - m);
    };
    const double h2 = step_ * step_;
    for (std::size_t b = j; b < n; b += kBlock) {
      g[b] = b == j ? 1.0 : exact(b);
      double rho = std::exp((2.0 * (x - mu[b]) * step_ - h2) * inv_two_var_);
      const std::size_t end = std::min(n - 1, b + kBlock);
      for (std::size_t i = b; i < end; ++i, rho *= q_) g[i + 1] = g[i] * rho;
    }
    for (std::size_t b = j; b > 0; b = b > kBlock ? b - kBlock : 0) {
      g[b] = b == j ? 1.0 : exact(b);
      double rho = std::exp((-2.0 * (x - mu[b]) * step_ - h2) * inv_two_var_);
      const std::size_t end = b > kBlock ? b - kBlock : 0;
      for (std::size_t i = b; i > end; --i, rho *= q_) g[i - 1] = g[i] * rho;
    }
    s = 0.0;
    for (std::size_t i : active_) s += w[i] * g[i];
    if (s > 1e-250) return m;
  }
  // Exact path anchored on the largest weighted term.
  const auto& lw = expert_->log_weights();
  double m = kNegInf;
  for (std::size_t i : active_) {
    const double d = x - mu[i];
    m = std::max(m, lw[i] - d * d * inv_two_var_);
  }
  s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = x - mu[i];
    g[i] = std::exp(std::min(-d * d * inv_two_var_ - m, kMaxExponent));
    s += w[i] * g[i];
  }
  return m;
}

double ExpertEvaluator::log_density(double x) const {
  double s = 0.0;
  const double m = profile(x, scratch_.data(), s);
  return m + std::log(s) + log_norm_;
}

double ExpertEvaluator::grad(double x) const {
  const auto& mu = expert_->means();
  const auto& w = expert_->weights();
  double s = 0.0;
  profile(x, scratch_.data(), s);
  double first = 0.0;
  for (std::size_t i : active_) first += w[i] * scratch_[i] * (mu[i] - x);
  return first / (s * variance_);
}

double ExpertEvaluator::ratios(double x, std::vector<double>& ratio) const {
  double s = 0.0;
  const double m = profile(x, ratio.data(), s);
  const double inv_s = 1.0 / s;
  for (double& r : ratio) r *= inv_s;
  return m + std::log(s) + log_norm_;
}

ResponseTerms ExpertEvaluator::terms(double x, double cotangent, std::span<double> weight_grad) const {
  const auto& mu = expert_->means();
  const auto& w = expert_->weights();
  ResponseTerms out;
  out.log_density = ratios(x, scratch_);

  // Central moments of d_i = mu_i - x under the responsibilities w_i e_i.
  double d1 = 0.0, d2 = 0.0, d3 = 0.0;
  for (std::size_t i : active_) {
    const double g = w[i] * scratch_[i];
    const double d = mu[i] - x;
    d1 += g * d;
    d2 += g * d * d;
    d3 += g * d * d * d;
  }
  const double var = variance_;
  const double var2 = var * var;
  out.grad = d1 / var;
  out.grad_dx = -1.0 / var + (d2 - d1 * d1) / var2;
  out.grad_dvar = (d3 - d1 * d2) / (2.0 * var2 * var) - d1 / var2;

  if (!weight_grad.empty()) {
    if (weight_grad.size() != mu.size()) throw std::invalid_argument("terms: weight_grad size");
    const double scale = cotangent / var;
    for (std::size_t i = 0; i < mu.size(); ++i) {
      weight_grad[i] += scale * scratch_[i] * (mu[i] - x - d1);
    }
  }
  return out;
}

double gmm_log_density(double x, const GmmExpert& expert, double variance) {
  return ExpertEvaluator(expert, variance).log_density(x);
}

double gmm_log_density_grad(double x, const GmmExpert& expert, double variance) {
  return ExpertEvaluator(expert, variance).grad(x);
}

// --- time conditioning -----------------------------------------------------

std::string to_string(ConditioningKind kind) {
  switch (kind) {
    case ConditioningKind::kSpectralMax: return "spectral_max";
    case ConditioningKind::kSpectralMean: return "spectral_mean";
    case ConditioningKind::kLearnedMlp: return "learned_mlp";
    case ConditioningKind::kLearnedSoftplus: return "learned_softplus";
  }
  return "unknown";
}

ConditioningKind conditioning_from_string(const std::string& name) {
  if (name == "spectral_max") return ConditioningKind::kSpectralMax;
  if (name == "spectral_mean") return ConditioningKind::kSpectralMean;
  if (name == "learned_mlp") return ConditioningKind::kLearnedMlp;
  if (name == "learned_softplus") return ConditioningKind::kLearnedSoftplus;
  throw std::invalid_argument("unknown time conditioning '" + name + "'");
}

TimeConditioning TimeConditioning::spectral(ConditioningKind kind, std::vector<double> nu2,
                                            double base_variance) {
  if (kind != ConditioningKind::kSpectralMax && kind != ConditioningKind::kSpectralMean) {
    throw std::invalid_argument("TimeConditioning::spectral: not a spectral kind");
  }
  TimeConditioning c;
  c.kind_ = kind;
  c.experts_ = nu2.size();
  c.base_variance_ = base_variance;
  c.set_nu2(std::move(nu2));
  return c;
}

TimeConditioning TimeConditioning::learned_mlp(std::size_t experts, double base_variance,
                                               std::mt19937_64& rng) {
  TimeConditioning c;
  c.kind_ = ConditioningKind::kLearnedMlp;
  c.experts_ = experts;
  c.base_variance_ = base_variance;
  const MlpLayout lay{experts};
  c.params_.assign(lay.size(), 0.0);
  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
  auto fill = [&](std::size_t begin, std::size_t count, double fan_in) {
    std::uniform_real_distribution<double> dist(-1.0 / std::sqrt(fan_in), 1.0 / std::sqrt(fan_in));
    for (std::size_t i = 0; i < count; ++i) c.params_[begin + i] = dist(rng);
  };
  fill(lay.w1(), kMlpHidden, 1.0);
  fill(lay.b1(), kMlpHidden, 1.0);
  fill(lay.w2(), kMlpHidden * kMlpHidden, kMlpHidden);
  fill(lay.b2(), kMlpHidden, kMlpHidden);
  fill(lay.w3(), experts * kMlpHidden, kMlpHidden);
  fill(lay.b3(), experts, kMlpHidden);
  return c;
}

TimeConditioning TimeConditioning::learned_softplus(std::size_t experts, double base_variance) {
  TimeConditioning c;
  c.kind_ = ConditioningKind::kLearnedSoftplus;
  c.experts_ = experts;
  c.base_variance_ = base_variance;
  c.params_.assign(3 * experts, 0.0);
  for (std::size_t k = 0; k < experts; ++k) {
    c.params_[k] = 1.0;                 // theta1
    c.params_[experts + k] = 1.0;       // theta2
    c.params_[2 * experts + k] = -3.0;  // theta3
  }
  return c;
}

void TimeConditioning::set_nu2(std::vector<double> nu2) {
  if (nu2.size() != experts_) throw std::invalid_argument("TimeConditioning::set_nu2: size mismatch");
  for (double v : nu2) {
    if (!(v >= 0.0)) throw std::invalid_argument("TimeConditioning::set_nu2: negative entry");
  }
  nu2_ = std::move(nu2);
}

void TimeConditioning::set_parameters(std::vector<double> params) {
  if (params.size() != params_.size()) {
    throw std::invalid_argument("TimeConditioning::set_parameters: size mismatch");
  }
  params_ = std::move(params);
}

std::vector<double> TimeConditioning::output(double v) const {
  if (!(v >= 0.0)) throw std::invalid_argument("time conditioning: v must be >= 0");
  std::vector<double> out(experts_);
  switch (kind_) {
    case ConditioningKind::kSpectralMax:
    case ConditioningKind::kSpectralMean:
      for (std::size_t k = 0; k < experts_; ++k) out[k] = nu2_[k] * v;
      break;
    case ConditioningKind::kLearnedMlp: {
      const auto act = mlp_forward(params_, experts_, std::sqrt(v));
      for (std::size_t k = 0; k < experts_; ++k) out[k] = softplus(act.pre3[k]);
      break;
    }
    case ConditioningKind::kLearnedSoftplus: {
      const double root = std::sqrt(v);
      for (std::size_t k = 0; k < experts_; ++k) {
        out[k] = params_[k] * softplus(params_[experts_ + k] * root + params_[2 * experts_ + k]);
      }
      break;
    }
  }
  return out;
}

void TimeConditioning::backprop(double v, std::span<const double> d_output, std::span<double> d_params) const {
  if (d_output.size() != experts_ || d_params.size() != params_.size()) {
    throw std::invalid_argument("TimeConditioning::backprop: size mismatch");
  }
  const double root = std::sqrt(v);
  switch (kind_) {
    case ConditioningKind::kSpectralMax:
    case ConditioningKind::kSpectralMean:
      return;
    case ConditioningKind::kLearnedSoftplus:
      for (std::size_t k = 0; k < experts_; ++k) {
        const double pre = params_[experts_ + k] * root + params_[2 * experts_ + k];
        const double dpre = d_output[k] * params_[k] * sigmoid(pre);
        d_params[k] += d_output[k] * softplus(pre);
        d_params[experts_ + k] += dpre * root;
        d_params[2 * experts_ + k] += dpre;
      }
      return;
    case ConditioningKind::kLearnedMlp: {
      const MlpLayout lay{experts_};
      const auto a = mlp_forward(params_, experts_, root);
      std::vector<double> d_h2(kMlpHidden, 0.0);
      for (std::size_t k = 0; k < experts_; ++k) {
        const double d_pre3 = d_output[k] * sigmoid(a.pre3[k]);
        d_params[lay.b3() + k] += d_pre3;
        const double* row = &params_[lay.w3() + k * kMlpHidden];
        double* drow = &d_params[lay.w3() + k * kMlpHidden];
        for (std::size_t i = 0; i < kMlpHidden; ++i) {
          drow[i] += d_pre3 * a.h2[i];
          d_h2[i] += d_pre3 * row[i];
        }
      }
      std::vector<double> d_h1(kMlpHidden, 0.0);
      for (std::size_t j = 0; j < kMlpHidden; ++j) {
        const double d_pre2 = d_h2[j] * elu_grad(a.pre2[j]);
        d_params[lay.b2() + j] += d_pre2;
        const double* row = &params_[lay.w2() + j * kMlpHidden];
        double* drow = &d_params[lay.w2() + j * kMlpHidden];
        for (std::size_t i = 0; i < kMlpHidden; ++i) {
          drow[i] += d_pre2 * a.h1[i];
          d_h1[i] += d_pre2 * row[i];
        }
      }
      for (std::size_t j = 0; j < kMlpHidden; ++j) {
        const double d_pre1 = d_h1[j] * elu_grad(a.pre1[j]);
        d_params[lay.w1() + j] += d_pre1 * root;
        d_params[lay.b1() + j] += d_pre1;
      }
      return;
    }
  }
}

void TimeConditioning::project() {
  if (kind_ != ConditioningKind::kLearnedSoftplus) return;
  for (std::size_t k = 0; k < experts_; ++k) params_[k] = std::max(params_[k], kMinSoftplusScale);
}

std::vector<double> variance_at(const TimeConditioning& conditioning, double v) {
  auto out = conditioning.output(v);
  for (double& s : out) s += conditioning.base_variance();
  return out;
}

}  // namespace pogmdm
