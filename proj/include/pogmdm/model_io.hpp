#pragma once

#include <string>

#include "pogmdm/prior.hpp"

namespace pogmdm {

inline constexpr int kModelFormatVersion = 1;

/// JSON model container: kernels, mixture grid, free weights, conditioning
/// variant with its parameters and nu^2, and training metadata.
std::string model_to_string(const PoGmdm& model);
PoGmdm model_from_string(const std::string& text);

void save_model(const std::string& path, const PoGmdm& model);
PoGmdm load_model(const std::string& path);

}  // namespace pogmdm
