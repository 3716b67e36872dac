#pragma once

#include <stdexcept>
#include <string>

#include "pogmdm/mri.hpp"
#include "pogmdm/prior.hpp"
#include "pogmdm/recon.hpp"
#include "pogmdm/training.hpp"

namespace pogmdm {

class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

struct MaskSettings {
  MaskKind kind{MaskKind::kCartesian};
  double acceleration{4.0};
  double acl_fraction{0.08};
  bool rotated{false};
};

struct DataSettings {
  std::size_t image_size{64};
  std::size_t coils{4};
  std::size_t corpus_count{200};
  double kspace_noise{0.02};   // std of each real/imag k-space component
  double denoise_sigma{0.1};   // noise std added by `denoise` when no noisy input is given
};

/// Everything the CLI can be configured with. Seeds are passed separately.
struct AppConfig {
  ModelSpec model{};
  TrainConfig train{};
  ReconConfig recon{};
  MaskSettings mask{};
  DataSettings data{};
};

/// Parses a JSON document. Unknown sections or keys and wrongly typed values
/// raise ConfigError; missing keys keep their defaults.
AppConfig parse_config(const std::string& text);
AppConfig load_config(const std::string& path);

/// JSON document listing every key with its value.
std::string config_to_string(const AppConfig& config);

}  // namespace pogmdm
