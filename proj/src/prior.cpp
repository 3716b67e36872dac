#include "pogmdm/prior.hpp"

#include <stdexcept>

namespace pogmdm {

std::vector<double> ParameterSet::flatten() const {
  std::vector<double> flat;
  flat.reserve(size());
  flat.insert(flat.end(), kernels.begin(), kernels.end());
  flat.insert(flat.end(), free_weights.begin(), free_weights.end());
  flat.insert(flat.end(), conditioning.begin(), conditioning.end());
  return flat;
}

void ParameterSet::unflatten(std::span<const double> flat) {
  if (flat.size() != size()) throw std::invalid_argument("ParameterSet::unflatten: size mismatch");
  auto it = flat.begin();
  for (auto* group : {&kernels, &free_weights, &conditioning}) {
    std::copy(it, it + static_cast<std::ptrdiff_t>(group->size()), group->begin());
    it += static_cast<std::ptrdiff_t>(group->size());
  }
}

ParameterSet ParameterSet::zeros_like() const {
  return {std::vector<double>(kernels.size(), 0.0), std::vector<double>(free_weights.size(), 0.0),
          std::vector<double>(conditioning.size(), 0.0)};
}

PoGmdm::PoGmdm(FilterBank bank, std::vector<GmmExpert> experts, TimeConditioning conditioning,
               ModelMetadata metadata)
    : bank_(std::move(bank)),
      experts_(std::move(experts)),
      conditioning_(std::move(conditioning)),
      metadata_(metadata) {
  validate();
}

void PoGmdm::validate() const {
  if (bank_.count() != experts_.size() || conditioning_.experts() != experts_.size()) {
    throw std::invalid_argument("PoGmdm: filter, expert and conditioning counts differ");
  }
  for (const auto& e : experts_) {
    if (e.num_components() != experts_.front().num_components()) {
      throw std::invalid_argument("PoGmdm: experts must share the component count");
    }
  }
}

ParameterSet PoGmdm::parameters() const {
  ParameterSet p;
  for (const auto& k : bank_.kernels()) p.kernels.insert(p.kernels.end(), k.begin(), k.end());
  for (const auto& e : experts_) {
    p.free_weights.insert(p.free_weights.end(), e.free_weights().begin(), e.free_weights().end());
  }
  p.conditioning = conditioning_.parameters();
  return p;
}

void PoGmdm::set_parameters(const ParameterSet& params) {
  const std::size_t r = bank_.kernel_size();
  const std::size_t o = experts_.size();
  const std::size_t nfree = experts_.empty() ? 0 : experts_.front().free_weights().size();
  if (params.kernels.size() != o * r * r || params.free_weights.size() != o * nfree) {
    throw std::invalid_argument("PoGmdm::set_parameters: size mismatch");
  }
  std::vector<Image> kernels;
  for (std::size_t k = 0; k < o; ++k) {
    auto first = params.kernels.begin() + static_cast<std::ptrdiff_t>(k * r * r);
    kernels.emplace_back(Shape{r, r}, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(r * r)));
  }
  bank_.set_kernels(std::move(kernels));
  for (std::size_t k = 0; k < o; ++k) {
    auto first = params.free_weights.begin() + static_cast<std::ptrdiff_t>(k * nfree);
    experts_[k].set_free_weights(std::vector<double>(first, first + static_cast<std::ptrdiff_t>(nfree)));
  }
  conditioning_.set_parameters(params.conditioning);
}

void PoGmdm::refresh_spectral_scale() {
  if (!conditioning_.is_spectral()) return;
  const auto mode =
      conditioning_.kind() == ConditioningKind::kSpectralMax ? SpectralMode::kMax : SpectralMode::kMean;
  conditioning_.set_nu2(spectral_nu(bank_, mode));
}

void PoGmdm::set_conditioning(TimeConditioning conditioning) {
  conditioning_ = std::move(conditioning);
  validate();
}

void PoGmdm::set_bank(FilterBank bank) {
  bank_ = std::move(bank);
  validate();
}

void PoGmdm::set_experts(std::vector<GmmExpert> experts) {
  experts_ = std::move(experts);
  validate();
}

FilterBank bank_for(const PoGmdm& model, Shape shape) {
  FilterBank bank = model.bank();
  bank.set_image_shape(shape);
  return bank;
}

namespace {

void check_v(double v, const char* where) {
  if (!(v >= 0.0)) throw std::invalid_argument(std::string(where) + ": diffusion variance must be >= 0");
}

const FilterBank& working_bank(const PoGmdm& model, Shape shape, FilterBank& storage) {
  if (model.bank().image_shape() == shape) return model.bank();
  storage = bank_for(model, shape);
  return storage;
}

}  // namespace

double energy(const PoGmdm& model, const Image& x, double v) {
  check_v(v, "energy");
  FilterBank storage;
  const FilterBank& bank = working_bank(model, x.shape(), storage);
  const auto variances = variance_at(model.conditioning(), v);
  const Responses u = conv_forward(x, bank);
  double total = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    const ExpertEvaluator eval(model.experts()[k], variances[k]);
    for (double z : u[k]) total -= eval.log_density(z);
  }
  return total;
}

Image score(const PoGmdm& model, const Image& x, double v) {
  check_v(v, "score");
  FilterBank storage;
  const FilterBank& bank = working_bank(model, x.shape(), storage);
  const auto variances = variance_at(model.conditioning(), v);
  Responses u = conv_forward(x, bank);
  for (std::size_t k = 0; k < u.size(); ++k) {
    const ExpertEvaluator eval(model.experts()[k], variances[k]);
    for (double& z : u[k]) z = eval.grad(z);
  }
  return conv_adjoint(u, bank);
}

Image denoise_tweedie(const PoGmdm& model, const Image& y, double v) {
  if (!(v > 0.0)) throw std::invalid_argument("denoise_tweedie: noise variance must be positive");
  Image out = score(model, y, v);
  for (std::size_t p = 0; p < out.size(); ++p) out[p] = y[p] + v * out[p];
  return out;
}

std::size_t count_parameters(const PoGmdm& model) { return model.parameters().size(); }

PoGmdm make_model(const ModelSpec& spec, std::mt19937_64& rng) {
  FilterBank bank = FilterBank::random(spec.experts, spec.kernel_size, spec.image_shape, rng);
  std::vector<GmmExpert> experts(spec.experts, GmmExpert::uniform(spec.components, spec.v_min, spec.v_max));
  const double base = experts.front().base_variance();
  TimeConditioning cond;
  switch (spec.conditioning) {
    case ConditioningKind::kSpectralMax:
      cond = TimeConditioning::spectral(spec.conditioning, spectral_nu(bank, SpectralMode::kMax), base);
      break;
    case ConditioningKind::kSpectralMean:
      cond = TimeConditioning::spectral(spec.conditioning, spectral_nu(bank, SpectralMode::kMean), base);
      break;
    case ConditioningKind::kLearnedMlp:
      cond = TimeConditioning::learned_mlp(spec.experts, base, rng);
      break;
    case ConditioningKind::kLearnedSoftplus:
      cond = TimeConditioning::learned_softplus(spec.experts, base);
      break;
  }
  ModelMetadata meta;
  meta.v_min = spec.v_min;
  meta.v_max = spec.v_max;
  meta.training_shape = spec.image_shape;
  return PoGmdm(std::move(bank), std::move(experts), std::move(cond), meta);
}

}  // namespace pogmdm
