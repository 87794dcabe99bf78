#include "air/ffn_injection.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "air/error.hpp"

namespace air {

std::string_view to_string(InjectionMode mode) {
    switch (mode) {
        case InjectionMode::AllRows: return "all_rows";
        case InjectionMode::RetainedRows: return "retained_rows";
        case InjectionMode::Off: return "off";
    }
    return "off";
}

std::optional<InjectionMode> parse_injection_mode(std::string_view name) {
    if (name == "all_rows") return InjectionMode::AllRows;
    if (name == "retained_rows") return InjectionMode::RetainedRows;
    if (name == "off") return InjectionMode::Off;
    return std::nullopt;
}

LayerGate LayerGate::scaled_default(int layers) {
    if (layers == 32) return {26, 32};
    const int start = static_cast<int>(std::lround(26.0 / 32.0 * layers));
    return {std::clamp(start, 1, layers), layers};
}

LayerGate LayerGate::last_third(int layers) {
    const int span = std::max(1, static_cast<int>(std::lround(layers / 3.0)));
    return {layers - span + 1, layers};
}

Matrix ffn_forward(const Matrix& h, const FfnWeights& w) {
    if (w.w1.rows() != h.cols() || w.w2.rows() != h.cols() || w.w1.cols() != w.w2.cols()) {
        fail(ErrorCode::Shape, "ffn_forward: weights do not match hidden size " + std::to_string(h.cols()));
    }
    return matmul_transposed(apply_activation(matmul(h, w.w1), w.activation), w.w2);
}

Matrix reinject_full(const Matrix& h, const Matrix& z, Activation act) {
    if (z.rows() == 0) return Matrix(h.rows(), h.cols());
    if (z.cols() != h.cols()) {
        fail(ErrorCode::Shape, "reinject: visual tokens have d=" + std::to_string(z.cols()) + ", hidden d=" +
                                   std::to_string(h.cols()));
    }
    return matmul(apply_activation(matmul_transposed(h, z), act), z);
}

bool injection_active(const Matrix& fused, const InjectionConfig& cfg, int layer) {
    return cfg.mode != InjectionMode::Off && fused.rows() > 0 && cfg.gate.contains(layer);
}

Matrix injection_term(const Matrix& h, std::span<const std::size_t> visual_rows, const ReducedTokens& reduced,
                      const Matrix& fused, const InjectionConfig& cfg) {
    if (cfg.mode == InjectionMode::Off || fused.rows() == 0) return Matrix(h.rows(), h.cols());
    if (cfg.mode == InjectionMode::AllRows) return reinject_full(h, fused, cfg.injection_activation);

    const Matrix term = reinject_full(reduced.h_prime, fused, cfg.injection_activation);
    if (reduced.h_prime.cols() != h.cols()) fail(ErrorCode::Shape, "injection: reduced tokens have wrong width");
    Matrix out(h.rows(), h.cols());
    for (std::size_t i = 0; i < reduced.selected_indices.size(); ++i) {
        const std::size_t visual = reduced.selected_indices[i];
        if (visual >= visual_rows.size()) fail(ErrorCode::Parameter, "injection: retained index outside visual rows");
        const std::size_t pos = visual_rows[visual];
        if (pos >= h.rows()) fail(ErrorCode::Parameter, "injection: visual row outside the sequence");
        std::copy_n(term.row(i).data(), h.cols(), out.row(pos).data());
    }
    return out;
}

Matrix air_ffn_forward(const Matrix& h, std::span<const std::size_t> visual_rows, const FfnWeights& w,
                       const ReducedTokens& reduced, const Matrix& fused, const InjectionConfig& cfg, int layer) {
    Matrix base = ffn_forward(h, w);
    if (!injection_active(fused, cfg, layer)) return base;
    if (fused.cols() != h.cols()) fail(ErrorCode::Shape, "air_ffn_forward: fused tokens have wrong width");

    if (cfg.mode == InjectionMode::AllRows) {
        const Matrix term = reinject_full(h, fused, cfg.injection_activation);
        auto out = base.data();
        auto t = term.data();
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += t[i];
        return base;
    }

    // Retained rows only; every other row stays exactly as the plain FFN.
    const Matrix term = reinject_full(reduced.h_prime, fused, cfg.injection_activation);
    for (std::size_t i = 0; i < reduced.selected_indices.size(); ++i) {
        const std::size_t visual = reduced.selected_indices[i];
        if (visual >= visual_rows.size()) fail(ErrorCode::Parameter, "air_ffn_forward: retained index outside visual rows");
        const std::size_t pos = visual_rows[visual];
        if (pos >= h.rows()) fail(ErrorCode::Parameter, "air_ffn_forward: visual row outside the sequence");
        auto row = base.row(pos);
        const auto add_row = term.row(i);
        for (std::size_t j = 0; j < row.size(); ++j) row[j] += add_row[j];
    }
    return base;
}

}  // namespace air
