#include "air/activation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <utility>

#include "air/error.hpp"

namespace air {
namespace {

constexpr std::array<std::pair<Activation, std::string_view>, 5> kNames{{
    {Activation::Identity, "identity"},
    {Activation::ReLU, "relu"},
    {Activation::SiLU, "silu"},
    {Activation::GeluTanh, "gelu"},
    {Activation::SoftmaxRowwise, "softmax"},
}};

}  // namespace

std::string_view to_string(Activation a) {
    for (const auto& [kind, name] : kNames) {
        if (kind == a) return name;
    }
    return "identity";
}

std::optional<Activation> parse_activation(std::string_view name) {
    for (const auto& [kind, n] : kNames) {
        if (n == name) return kind;
    }
    return std::nullopt;
}

float activate(Activation a, float x) noexcept {
    switch (a) {
        case Activation::Identity:
        case Activation::SoftmaxRowwise:
            return x;
        case Activation::ReLU:
            return x > 0.0f ? x : 0.0f;
        case Activation::SiLU: {
            const double v = x;
            return static_cast<float>(v / (1.0 + std::exp(-v)));
        }
        case Activation::GeluTanh: {
            const double v = x;
            constexpr double kSqrt2OverPi = 0.7978845608028654;
            return static_cast<float>(0.5 * v * (1.0 + std::tanh(kSqrt2OverPi * (v + 0.044715 * v * v * v))));
        }
    }
    return x;
}

Matrix apply_activation(const Matrix& m, Activation a) {
    if (!m.all_finite()) fail(ErrorCode::Domain, "apply_activation: non-finite input");
    Matrix out = m;
    if (a == Activation::Identity) return out;
    if (a != Activation::SoftmaxRowwise) {
        for (float& v : out.data()) v = activate(a, v);
        return out;
    }
    for (std::size_t r = 0; r < out.rows(); ++r) {
        auto row = out.row(r);
        if (row.empty()) continue;
        const double peak = *std::max_element(row.begin(), row.end());
        double total = 0.0;
        for (float v : row) total += std::exp(static_cast<double>(v) - peak);
        for (float& v : row) v = static_cast<float>(std::exp(static_cast<double>(v) - peak) / total);
    }
    return out;
}

}  // namespace air
