#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "air/matrix.hpp"
#include "air/patch_scoring.hpp"

namespace air {

// What the harness saw at one gated layer during prefill.
struct LayerSelection {
    int layer = 0;
    std::vector<std::size_t> retained;  // Top-Q visual indices
    Matrix reference;                   // rows the patches were scored against
    SelectionResult selection;
    bool injected = false;
};

struct ExperimentReport {
    std::string run_id;
    nlohmann::json config;
    std::vector<int> generated_tokens;
    // Per layer (index 0 = layer 1): steps x d residual at the newest position.
    std::vector<Matrix> final_hidden;
    Matrix logits;  // steps x vocab
    std::vector<LayerSelection> selections;
    std::map<std::string, std::vector<double>> curves;
    std::map<std::string, double> metrics;
    std::map<std::string, double> timings_ms;
};

// Timing fields are the only non-deterministic part; `include_timings`
// drops them for reproducibility comparisons.
nlohmann::json to_json(const ExperimentReport& report, bool include_timings = true);

std::string scores_csv(const std::vector<PatchScore>& scores, const std::vector<std::size_t>& selected);

}  // namespace air
