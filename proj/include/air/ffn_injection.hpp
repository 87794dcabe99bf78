#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>

#include "air/activation.hpp"
#include "air/matrix.hpp"
#include "air/token_reduction.hpp"

namespace air {

// FFN(H) = act(H * w1) * w2^T with w1, w2 both d x d_ff.
struct FfnWeights {
    Matrix w1;
    Matrix w2;
    Activation activation = Activation::GeluTanh;
};

enum class InjectionMode { AllRows, RetainedRows, Off };

std::string_view to_string(InjectionMode mode);
std::optional<InjectionMode> parse_injection_mode(std::string_view name);

// Inclusive range of 1-based decoder layer numbers.
struct LayerGate {
    int start = 26;
    int end = 32;

    bool contains(int layer) const noexcept { return layer >= start && layer <= end; }

    // The [26, 32] range of a 32-layer decoder mapped onto `layers`.
    static LayerGate scaled_default(int layers);
    // The last third of a `layers`-deep decoder.
    static LayerGate last_third(int layers);
};

struct InjectionConfig {
    InjectionMode mode = InjectionMode::AllRows;
    Activation injection_activation = Activation::GeluTanh;
    LayerGate gate{};
};

Matrix ffn_forward(const Matrix& h, const FfnWeights& w);

// act(H * Z^T) * Z. An empty Z gives a zero L x d matrix.
Matrix reinject_full(const Matrix& h, const Matrix& z, Activation act);

// True when the configuration would add anything at `layer`.
bool injection_active(const Matrix& fused, const InjectionConfig& cfg, int layer);

// The additive term alone: L x d, zero where nothing is injected.
// `visual_rows[i]` is the sequence position of visual token i;
// reduced.selected_indices index into visual_rows.
Matrix injection_term(const Matrix& h, std::span<const std::size_t> visual_rows, const ReducedTokens& reduced,
                      const Matrix& fused, const InjectionConfig& cfg);

// ffn_forward plus the re-injection term at gated layers. Falls back to
// the plain FFN output, bit for bit, when the gate is closed, the mode is
// Off, or nothing was fused.
Matrix air_ffn_forward(const Matrix& h, std::span<const std::size_t> visual_rows, const FfnWeights& w,
                       const ReducedTokens& reduced, const Matrix& fused, const InjectionConfig& cfg, int layer);

}  // namespace air
