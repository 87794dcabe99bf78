#include "air/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "air/error.hpp"

namespace air {
namespace {

using nlohmann::json;

std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (const auto& s : items) {
        if (!out.empty()) out += ", ";
        out += s;
    }
    return out;
}

template <typename T>
T get_as(const json& v, std::string_view key) {
    try {
        return v.get<T>();
    } catch (const json::exception&) {
        fail(ErrorCode::Parameter, "config key '" + std::string(key) + "' has the wrong type");
    }
}

std::size_t get_count(const json& v, std::string_view key) {
    if (!v.is_number_integer() || v.get<long long>() < 0) {
        fail(ErrorCode::Parameter, "config key '" + std::string(key) + "' must be a non-negative integer");
    }
    return v.get<std::size_t>();
}

LayerGate parse_gate(const json& v) {
    if (v.is_string()) {
        const auto s = v.get<std::string>();
        const auto dash = s.find('-');
        if (dash == std::string::npos) fail(ErrorCode::Parameter, "layer_gate must look like \"start-end\"");
        return {std::stoi(s.substr(0, dash)), std::stoi(s.substr(dash + 1))};
    }
    if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() || !v[1].is_number_integer()) {
        fail(ErrorCode::Parameter, "layer_gate must be [start, end]");
    }
    return {v[0].get<int>(), v[1].get<int>()};
}

void apply_key(ReinforcementConfig& cfg, const std::string& key, const json& v) {
    if (key == "top_q") {
        cfg.top_q = get_count(v, key);
    } else if (key == "tau") {
        cfg.tau = get_as<double>(v, key);
    } else if (key == "epsilon") {
        if (v.is_string()) {
            if (v.get<std::string>() != "auto") fail(ErrorCode::Parameter, "epsilon must be a number or \"auto\"");
            cfg.epsilon.reset();
        } else {
            cfg.epsilon = get_as<double>(v, key);
        }
    } else if (key == "epsilon_scale") {
        cfg.epsilon_scale = get_as<double>(v, key);
    } else if (key == "sinkhorn_max_iter") {
        cfg.sinkhorn_max_iter = get_as<int>(v, key);
    } else if (key == "sinkhorn_tol") {
        cfg.sinkhorn_tol = get_as<double>(v, key);
    } else if (key == "layer_gate") {
        if (v.is_null() || (v.is_string() && v.get<std::string>() == "auto")) {
            cfg.layer_gate.reset();
        } else {
            cfg.layer_gate = parse_gate(v);
        }
    } else if (key == "injection_mode") {
        auto mode = parse_injection_mode(get_as<std::string>(v, key));
        if (!mode) fail(ErrorCode::Parameter, "injection_mode must be all_rows, retained_rows or off");
        cfg.injection_mode = *mode;
    } else if (key == "injection_activation") {
        const auto name = get_as<std::string>(v, key);
        if (name == "auto") {
            cfg.injection_activation.reset();
        } else {
            auto act = parse_activation(name);
            if (!act) fail(ErrorCode::Parameter, "unknown activation '" + name + "'");
            cfg.injection_activation = *act;
        }
    } else if (key == "patch_count") {
        cfg.patch_count = get_count(v, key);
    } else if (key == "uncertainty_threshold") {
        if (v.is_null()) {
            cfg.uncertainty_threshold.reset();
        } else {
            cfg.uncertainty_threshold = get_as<double>(v, key);
        }
    } else if (key == "threads") {
        cfg.threads = get_as<int>(v, key);
    } else if (key == "seed") {
        cfg.seed = get_as<std::uint64_t>(v, key);
    } else if (key == "cost_space") {
        const auto s = get_as<std::string>(v, key);
        if (s == "hidden") {
            cfg.cost_space = CostSpace::Hidden;
        } else if (s == "projector") {
            cfg.cost_space = CostSpace::Projector;
        } else {
            fail(ErrorCode::Parameter, "cost_space must be hidden or projector");
        }
    } else {
        fail(ErrorCode::Parameter, "unknown config key '" + key + "'; valid keys: " + join(reinforcement_config_keys()));
    }
}

}  // namespace

std::string_view to_string(CostSpace space) { return space == CostSpace::Hidden ? "hidden" : "projector"; }

EpsilonSpec ReinforcementConfig::epsilon_spec() const {
    return epsilon ? EpsilonSpec::absolute(*epsilon) : EpsilonSpec::relative_to_mean(epsilon_scale);
}

ScoringOptions ReinforcementConfig::scoring_options() const {
    ScoringOptions o;
    o.epsilon = epsilon_spec();
    o.sinkhorn.max_iter = sinkhorn_max_iter;
    o.sinkhorn.tol = sinkhorn_tol;
    return o;
}

InjectionConfig ReinforcementConfig::injection_config(int decoder_layers, Activation ffn_activation) const {
    InjectionConfig c;
    c.mode = injection_mode;
    c.injection_activation = injection_activation.value_or(ffn_activation);
    c.gate = layer_gate.value_or(LayerGate::scaled_default(decoder_layers));
    return c;
}

void ReinforcementConfig::validate() const {
    if (top_q < 1) fail(ErrorCode::Parameter, "top_q must be >= 1");
    if (!std::isfinite(tau)) fail(ErrorCode::Parameter, "tau must be finite");
    if (epsilon && !(*epsilon > 0.0 && std::isfinite(*epsilon))) fail(ErrorCode::Parameter, "epsilon must be positive");
    if (!(epsilon_scale > 0.0 && std::isfinite(epsilon_scale))) fail(ErrorCode::Parameter, "epsilon_scale must be positive");
    if (sinkhorn_max_iter < 1) fail(ErrorCode::Parameter, "sinkhorn_max_iter must be >= 1");
    if (!(sinkhorn_tol > 0.0)) fail(ErrorCode::Parameter, "sinkhorn_tol must be positive");
    if (layer_gate && layer_gate->start > layer_gate->end) fail(ErrorCode::Parameter, "layer_gate start must be <= end");
    if (threads < 1) fail(ErrorCode::Parameter, "threads must be >= 1");
}

const std::vector<std::string>& reinforcement_config_keys() {
    static const std::vector<std::string> keys{
        "top_q",       "tau",          "epsilon",     "epsilon_scale",         "sinkhorn_max_iter",
        "sinkhorn_tol", "layer_gate",  "injection_mode", "injection_activation", "patch_count",
        "uncertainty_threshold", "threads", "seed", "cost_space",
    };
    return keys;
}

ReinforcementConfig parse_reinforcement_config(const json& j) {
    if (!j.is_object()) fail(ErrorCode::Parameter, "config must be a JSON object");
    ReinforcementConfig cfg;
    for (const auto& [key, value] : j.items()) apply_key(cfg, key, value);
    cfg.validate();
    return cfg;
}

json to_json(const ReinforcementConfig& cfg) {
    json j;
    j["top_q"] = cfg.top_q;
    j["tau"] = cfg.tau;
    j["epsilon"] = cfg.epsilon ? json(*cfg.epsilon) : json("auto");
    j["epsilon_scale"] = cfg.epsilon_scale;
    j["sinkhorn_max_iter"] = cfg.sinkhorn_max_iter;
    j["sinkhorn_tol"] = cfg.sinkhorn_tol;
    j["layer_gate"] = cfg.layer_gate ? json::array({cfg.layer_gate->start, cfg.layer_gate->end}) : json("auto");
    j["injection_mode"] = std::string(to_string(cfg.injection_mode));
    j["injection_activation"] =
        cfg.injection_activation ? std::string(to_string(*cfg.injection_activation)) : std::string("auto");
    j["patch_count"] = cfg.patch_count;
    j["uncertainty_threshold"] = cfg.uncertainty_threshold ? json(*cfg.uncertainty_threshold) : json(nullptr);
    j["threads"] = cfg.threads;
    j["seed"] = cfg.seed;
    j["cost_space"] = std::string(to_string(cfg.cost_space));
    return j;
}

void set_config_value(ReinforcementConfig& cfg, std::string_view key, std::string_view value) {
    const std::string k(key);
    const std::string text(value);
    json v;
    // Numbers and literals parse as JSON; anything else is taken as a string.
    try {
        v = json::parse(text);
    } catch (const json::exception&) {
        v = text;
    }
    if (k == "layer_gate" && v.is_string() && text != "auto") v = text;
    apply_key(cfg, k, v);
    cfg.validate();
}

}  // namespace air
