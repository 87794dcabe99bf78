#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "air/activation.hpp"
#include "air/ffn_injection.hpp"
#include "air/ot.hpp"
#include "air/patch_scoring.hpp"

namespace air {

// Which token set the patch cost matrix is built against: the retained
// hidden-state rows, or the projector-space visual tokens at the same
// retained indices.
enum class CostSpace { Hidden, Projector };

std::string_view to_string(CostSpace space);

// Every knob of the reduce / score / select / inject pipeline.
struct ReinforcementConfig {
    std::size_t top_q = 100;
    double tau = 0.06;
    // "auto" means epsilon_scale * mean(C); a number is an absolute epsilon.
    std::optional<double> epsilon;
    double epsilon_scale = 0.1;
    int sinkhorn_max_iter = 1000;
    double sinkhorn_tol = 1e-6;
    // Absent: LayerGate::scaled_default for the decoder depth.
    std::optional<LayerGate> layer_gate;
    InjectionMode injection_mode = InjectionMode::AllRows;
    // Absent: reuse the FFN activation.
    std::optional<Activation> injection_activation;
    std::size_t patch_count = 12;
    // Inject only where the logit-lens entropy ratio exceeds this value.
    std::optional<double> uncertainty_threshold;
    int threads = 1;
    std::uint64_t seed = 0;
    CostSpace cost_space = CostSpace::Hidden;

    EpsilonSpec epsilon_spec() const;
    ScoringOptions scoring_options() const;
    InjectionConfig injection_config(int decoder_layers, Activation ffn_activation) const;

    // Throws Error(Parameter) on a broken invariant.
    void validate() const;
};

const std::vector<std::string>& reinforcement_config_keys();

// Unknown keys are rejected with a message that lists the valid ones.
ReinforcementConfig parse_reinforcement_config(const nlohmann::json& j);
nlohmann::json to_json(const ReinforcementConfig& cfg);

// Applies a single "key" -> value override (CLI flags, sweeps). The value
// is given as text and parsed per the key's type.
void set_config_value(ReinforcementConfig& cfg, std::string_view key, std::string_view value);

}  // namespace air
