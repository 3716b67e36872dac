#include "pogmdm/model_io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace pogmdm {

using nlohmann::json;

std::string model_to_string(const PoGmdm& model) {
  const auto& bank = model.bank();
  const auto& experts = model.experts();
  const auto& cond = model.conditioning();
  const auto& meta = model.metadata();
  json j;
  j["format"] = "pogmdm-model";
  j["version"] = kModelFormatVersion;
  j["experts"] = experts.size();
  j["kernel_size"] = bank.kernel_size();
  j["components"] = experts.front().num_components();
  j["v_min"] = meta.v_min;
  j["v_max"] = meta.v_max;
  j["base_variance"] = experts.front().base_variance();
  json kernels = json::array();
  for (const auto& k : bank.kernels()) kernels.push_back(k.values());
  j["kernels"] = kernels;
  json weights = json::array();
  for (const auto& e : experts) weights.push_back(e.free_weights());
  j["free_weights"] = weights;
  j["conditioning"] = {{"kind", to_string(cond.kind())},
                       {"base_variance", cond.base_variance()},
                       {"parameters", cond.parameters()},
                       {"nu2", cond.nu2()}};
  j["metadata"] = {{"iterations", meta.iterations},
                   {"ema", meta.ema},
                   {"training_shape", {meta.training_shape.rows, meta.training_shape.cols}}};
  return j.dump(1);
}

PoGmdm model_from_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("model file: ") + e.what());
  }
  try {
    if (j.at("format") != "pogmdm-model") throw std::invalid_argument("model file: unexpected format tag");
    if (j.at("version").get<int>() != kModelFormatVersion) throw std::invalid_argument("model file: unsupported version");
    const auto o = j.at("experts").get<std::size_t>();
    const auto r = j.at("kernel_size").get<std::size_t>();
    const auto L = j.at("components").get<std::size_t>();
    ModelMetadata meta;
    meta.v_min = j.at("v_min").get<double>();
    meta.v_max = j.at("v_max").get<double>();
    const auto& m = j.at("metadata");
    meta.iterations = m.at("iterations").get<std::uint64_t>();
    meta.ema = m.at("ema").get<bool>();
    const auto ts = m.at("training_shape").get<std::vector<std::size_t>>();
    if (ts.size() != 2) throw std::invalid_argument("model file: training_shape must have two entries");
    meta.training_shape = Shape{ts[0], ts[1]};
    const double base = j.at("base_variance").get<double>();

    std::vector<Image> kernels;
    for (const auto& k : j.at("kernels")) kernels.emplace_back(Shape{r, r}, k.get<std::vector<double>>());
    if (kernels.size() != o) throw std::invalid_argument("model file: kernel count does not match experts");
    const Shape shape = meta.training_shape.size() > 0 ? meta.training_shape : Shape{r, r};
    FilterBank bank(std::move(kernels), shape);

    std::vector<GmmExpert> experts;
    const auto means = equidistant_means(L, meta.v_min, meta.v_max);
    for (const auto& w : j.at("free_weights")) experts.emplace_back(means, w.get<std::vector<double>>(), base);
    if (experts.size() != o) throw std::invalid_argument("model file: weight rows do not match experts");

    const auto& c = j.at("conditioning");
    const ConditioningKind kind = conditioning_from_string(c.at("kind").get<std::string>());
    const double cbase = c.at("base_variance").get<double>();
    TimeConditioning cond;
    switch (kind) {
      case ConditioningKind::kSpectralMax:
      case ConditioningKind::kSpectralMean:
        cond = TimeConditioning::spectral(kind, c.at("nu2").get<std::vector<double>>(), cbase);
        break;
      case ConditioningKind::kLearnedMlp: {
        std::mt19937_64 unused(0);
        cond = TimeConditioning::learned_mlp(o, cbase, unused);
        break;
      }
      case ConditioningKind::kLearnedSoftplus:
        cond = TimeConditioning::learned_softplus(o, cbase);
        break;
    }
    if (!cond.is_spectral()) cond.set_parameters(c.at("parameters").get<std::vector<double>>());
    return PoGmdm(std::move(bank), std::move(experts), std::move(cond), meta);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("model file: ") + e.what());
  }
}

void save_model(const std::string& path, const PoGmdm& model) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << model_to_string(model) << '\n';
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

PoGmdm load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return model_from_string(ss.str());
}

}  // namespace pogmdm
