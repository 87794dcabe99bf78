#include "air/report.hpp"

#include <algorithm>

#include "air/io.hpp"

namespace air {

nlohmann::json to_json(const ExperimentReport& report, bool include_timings) {
    using nlohmann::json;
    json j;
    j["run_id"] = report.run_id;
    j["config"] = report.config;
    j["generated_tokens"] = report.generated_tokens;
    j["curves"] = report.curves;
    j["metrics"] = report.metrics;
    json layers = json::array();
    for (const auto& s : report.selections) {
        json scores = json::array();
        for (const auto& p : s.selection.scores) {
            scores.push_back({{"m", p.index}, {"d_ot", p.d_ot}, {"d_cos", p.d_cos}, {"converged", p.converged},
                              {"epsilon", p.epsilon}, {"iterations", p.iterations}});
        }
        layers.push_back({{"layer", s.layer}, {"retained", s.retained}, {"tau", s.selection.tau},
                          {"selected", s.selection.selected}, {"fused_rows", s.selection.fused.rows()},
                          {"injected", s.injected}, {"scores", scores}});
    }
    j["selections"] = layers;
    if (include_timings) j["timings_ms"] = report.timings_ms;
    return j;
}

std::string scores_csv(const std::vector<PatchScore>& scores, const std::vector<std::size_t>& selected) {
    std::string out = "m,d_ot,d_cos,converged,selected\n";
    for (const auto& s : scores) {
        const bool chosen = std::find(selected.begin(), selected.end(), s.index) != selected.end();
        out += std::to_string(s.index) + "," + format_float(s.d_ot) + "," + format_float(s.d_cos) + "," +
               (s.converged ? "1" : "0") + "," + (chosen ? "1" : "0") + "\n";
    }
    return out;
}

}  // namespace air
