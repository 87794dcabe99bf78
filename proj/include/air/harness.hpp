#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "air/config.hpp"
#include "air/ot.hpp"
#include "air/report.hpp"
#include "air/toy_decoder.hpp"

namespace air {

// Greedy decoding of `steps` tokens over [visual tokens | prompt] with
// AIR applied inside the FFN of every gated layer. Records the residual
// at the newest position after each layer, at every step.
ExperimentReport run_toy_decode(const ToyDecoder& decoder, const SyntheticScene& scene, const ReinforcementConfig& air,
                                int steps);

// Mean over steps of cos(final-position residual, centroid(targets)),
// one value per layer.
std::vector<double> layer_similarity(const ExperimentReport& report, const Matrix& targets);

// One seed of an AIR-on / AIR-off comparison on a fresh decoder and scene.
struct PairedOutcome {
    std::uint64_t seed = 0;
    double salient_on = 0.0;   // final-layer similarity to the salient centroid
    double salient_off = 0.0;
    double background_on = 0.0;
    double background_off = 0.0;
    std::size_t selected_patches = 0;      // at the first gated layer
    std::size_t salient_selected = 0;      // of which planted-salient
    std::vector<double> salient_curve_on;  // per layer
    std::vector<double> salient_curve_off;
    std::vector<double> background_curve_on;
    std::vector<PatchScore> first_scores;  // first gated layer, AIR on
    std::vector<std::size_t> first_selected;
    std::set<std::size_t> salient_patch_indices;
    std::vector<int> tokens_on;
    std::vector<int> tokens_off;
    int salient_object = 0;
    int background_object = 0;
};

struct SimulationSetup {
    ToyDecoderConfig decoder{};
    SceneConfig scene{};
    int steps = 8;
};

PairedOutcome run_paired(const SimulationSetup& setup, const ReinforcementConfig& air, std::uint64_t seed);

// Seeds first_seed .. first_seed + count - 1, fanned out across threads.
std::vector<PairedOutcome> run_paired_sweep(const SimulationSetup& setup, const ReinforcementConfig& air,
                                            std::uint64_t first_seed, std::size_t count);

// ---- margin amplification -------------------------------------------

enum class PatchModel {
    Independent,  // patch tokens i.i.d. standard normal
    View,         // patch tokens are noisy copies of reference rows
};

std::string to_string(PatchModel model);
std::optional<PatchModel> parse_patch_model(const std::string& name);

struct MarginTrial {
    double d_ot_1 = 0.0, d_ot_2 = 0.0;
    double d_cos_1 = 0.0, d_cos_2 = 0.0;
    double margin_ot = 0.0;   // |d_ot_1 - d_ot_2|
    double margin_cos = 0.0;  // |d_cos_1 - d_cos_2|
    bool amplified = false;   // margin_ot >= margin_cos
    bool converged = true;
};

struct MarginSummary {
    std::vector<MarginTrial> trials;
    double amplified_fraction = 0.0;
    std::size_t dominance_violations = 0;  // patches with d_ot > d_cos + 1e-9
    std::size_t non_converged = 0;
};

MarginTrial margin_pair(const Matrix& reference, const Matrix& patch_1, const Matrix& patch_2, const EpsilonSpec& eps,
                        const SinkhornOptions& options = {});

MarginSummary margin_experiment(std::size_t trials, std::size_t q, std::size_t n, std::size_t d, const EpsilonSpec& eps,
                                std::uint64_t seed, PatchModel model = PatchModel::Independent,
                                const SinkhornOptions& options = {});

std::string margin_csv(const MarginSummary& summary);

// ---- CHAIR -------------------------------------------------------------

struct Caption {
    std::vector<std::set<std::string>> sentences;  // objects mentioned per sentence
    std::set<std::string> ground_truth;
};

struct ChairResult {
    double chair_i = 0.0;
    double chair_s = 0.0;
    std::size_t mentioned = 0;
    std::size_t hallucinated = 0;
    std::size_t sentences = 0;
    std::size_t hallucinated_sentences = 0;
    bool no_mentions = false;   // CHAIR_I denominator was zero
    bool no_sentences = false;  // CHAIR_S denominator was zero
};

// CHAIR_I = |hallucinated mentions| / |mentions|, pooled over captions
// (mentions are per caption sets); CHAIR_S = |sentences with a
// hallucinated object| / |sentences|.
ChairResult chair_metrics(const std::vector<Caption>& captions);

std::vector<Caption> parse_captions(const nlohmann::json& j);

// Captions for a batch of harness runs: each run's object tokens, split
// into sentences of `sentence_tokens`, against the scene's two objects.
std::vector<Caption> captions_from_tokens(const std::vector<std::vector<int>>& runs,
                                          const std::vector<std::set<int>>& truth, std::size_t sentence_tokens);

}  // namespace air
