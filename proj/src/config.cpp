#include "pogmdm/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace pogmdm {

using nlohmann::json;

namespace {

// Lists every (section, key, field) once; shared by reading and writing.
template <class Visitor>
void visit(AppConfig& c, Visitor&& v) {
  v("model", "experts", c.model.experts);
  v("model", "kernel_size", c.model.kernel_size);
  v("model", "components", c.model.components);
  v("model", "v_min", c.model.v_min);
  v("model", "v_max", c.model.v_max);
  v("model", "conditioning", c.model.conditioning);

  v("train", "iterations", c.train.iterations);
  v("train", "batch_size", c.train.batch_size);
  v("train", "patch_size", c.train.patch_size);
  v("train", "lr_kernels", c.train.lr_kernels);
  v("train", "lr_weights", c.train.lr_weights);
  v("train", "lr_conditioning", c.train.lr_conditioning);
  v("train", "ema_momentum", c.train.ema_momentum);
  v("train", "horizon", c.train.horizon);
  v("train", "t_min", c.train.t_min);
  v("train", "log_every", c.train.log_every);

  v("recon", "zeta_min", c.recon.schedule.zeta_min);
  v("recon", "zeta_max", c.recon.schedule.zeta_max);
  v("recon", "p", c.recon.schedule.p);
  v("recon", "horizon", c.recon.schedule.horizon);
  v("recon", "steps", c.recon.schedule.steps);
  v("recon", "corrector_steps", c.recon.corrector_steps);
  v("recon", "lambda", c.recon.lambda);
  v("recon", "mu", c.recon.mu);
  v("recon", "r", c.recon.r);
  v("recon", "start_fraction", c.recon.start_fraction);
  v("recon", "repeats", c.recon.repeats);
  v("recon", "update_coils", c.recon.update_coils);
  v("recon", "threads", c.recon.threads);

  v("mask", "kind", c.mask.kind);
  v("mask", "acceleration", c.mask.acceleration);
  v("mask", "acl_fraction", c.mask.acl_fraction);
  v("mask", "rotated", c.mask.rotated);

  v("data", "image_size", c.data.image_size);
  v("data", "coils", c.data.coils);
  v("data", "corpus_count", c.data.corpus_count);
  v("data", "kspace_noise", c.data.kspace_noise);
  v("data", "denoise_sigma", c.data.denoise_sigma);
}

struct Reader {
  const json& doc;
  std::set<std::string> seen;

  const json* find(const char* section, const char* key) {
    seen.insert(std::string(section) + "." + key);
    if (!doc.contains(section)) return nullptr;
    const json& s = doc.at(section);
    if (!s.is_object()) throw ConfigError(std::string("config: section '") + section + "' must be an object");
    return s.contains(key) ? &s.at(key) : nullptr;
  }

  static std::string where(const char* section, const char* key) { return std::string(section) + "." + key; }

  void operator()(const char* section, const char* key, double& out) {
    if (const json* j = find(section, key)) {
      if (!j->is_number()) throw ConfigError("config: " + where(section, key) + " must be a number");
      out = j->get<double>();
    }
  }
  template <class T>
    requires std::is_integral_v<T> && (!std::is_same_v<T, bool>)
  void operator()(const char* section, const char* key, T& out) {
    if (const json* j = find(section, key)) {
      if (!j->is_number_unsigned()) throw ConfigError("config: " + where(section, key) + " must be a non-negative integer");
      out = j->get<T>();
    }
  }
  void operator()(const char* section, const char* key, bool& out) {
    if (const json* j = find(section, key)) {
      if (!j->is_boolean()) throw ConfigError("config: " + where(section, key) + " must be true or false");
      out = j->get<bool>();
    }
  }
  void operator()(const char* section, const char* key, MaskKind& out) {
    if (const json* j = find(section, key)) {
      if (!j->is_string()) throw ConfigError("config: " + where(section, key) + " must be a string");
      try {
        out = mask_kind_from_string(j->get<std::string>());
      } catch (const std::invalid_argument& e) {
        throw ConfigError("config: " + where(section, key) + ": " + e.what());
      }
    }
  }
  void operator()(const char* section, const char* key, ConditioningKind& out) {
    if (const json* j = find(section, key)) {
      if (!j->is_string()) throw ConfigError("config: " + where(section, key) + " must be a string");
      try {
        out = conditioning_from_string(j->get<std::string>());
      } catch (const std::invalid_argument& e) {
        throw ConfigError("config: " + where(section, key) + ": " + e.what());
      }
    }
  }
};

struct Writer {
  json& doc;
  template <class T>
  void operator()(const char* section, const char* key, const T& value) {
    if constexpr (std::is_same_v<T, MaskKind> || std::is_same_v<T, ConditioningKind>) {
      doc[section][key] = to_string(value);
    } else {
      doc[section][key] = value;
    }
  }
};

}  // namespace

AppConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config: top level must be an object");
  AppConfig c;
  Reader reader{doc, {}};
  visit(c, reader);
  for (const auto& [section, body] : doc.items()) {
    const bool known = std::any_of(reader.seen.begin(), reader.seen.end(),
                                   [&](const std::string& k) { return k.starts_with(section + "."); });
    if (!known || !body.is_object()) throw ConfigError("config: unknown or malformed section '" + section + "'");
    for (const auto& [key, value] : body.items()) {
      if (!reader.seen.contains(section + "." + key)) throw ConfigError("config: unknown key '" + section + "." + key + "'");
    }
  }
  try {
    c.train.validate();
    c.recon.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

AppConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_string(const AppConfig& config) {
  json doc = json::object();
  AppConfig copy = config;
  visit(copy, Writer{doc});
  return doc.dump(2);
}

}  // namespace pogmdm
