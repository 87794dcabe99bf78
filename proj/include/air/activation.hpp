#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "air/matrix.hpp"

namespace air {

enum class Activation { Identity, ReLU, SiLU, GeluTanh, SoftmaxRowwise };

std::string_view to_string(Activation a);
std::optional<Activation> parse_activation(std::string_view name);

float activate(Activation a, float x) noexcept;

// Elementwise for all kinds except SoftmaxRowwise, which normalizes each
// row (max-shifted, double accumulation).
Matrix apply_activation(const Matrix& m, Activation a);

}  // namespace air
