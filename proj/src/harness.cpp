#include "air/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>

#include "air/error.hpp"
#include "air/ffn_injection.hpp"
#include "air/io.hpp"
#include "air/token_reduction.hpp"

namespace air {
namespace {

struct LayerCache {
    ReducedTokens reduced;
    SelectionResult selection;
    Matrix reference;
};

int argmax(std::span<const float> row) {
    return static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
}

Matrix centroid(const Matrix& targets) {
    if (targets.rows() == 0) fail(ErrorCode::Shape, "layer_similarity: no target tokens");
    const auto proto = compute_prototype(targets);
    Matrix out(1, proto.size());
    for (std::size_t j = 0; j < proto.size(); ++j) out(0, j) = static_cast<float>(proto[j]);
    return out;
}

double elapsed_ms(std::chrono::steady_clock::time_point since) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

}  // namespace

ExperimentReport run_toy_decode(const ToyDecoder& decoder, const SyntheticScene& scene, const ReinforcementConfig& air,
                                int steps) {
    if (steps < 1) fail(ErrorCode::Parameter, "run_toy_decode: steps must be >= 1");
    air.validate();
    const auto& dcfg = decoder.config();
    const std::size_t k_total = scene.visual_tokens.rows();
    if (scene.visual_tokens.cols() != dcfg.d_model) fail(ErrorCode::Shape, "scene width does not match d_model");
    for (const auto& p : scene.patches) {
        if (p.tokens.cols() != dcfg.d_model) fail(ErrorCode::Shape, "patch width does not match d_model");
    }

    const auto started = std::chrono::steady_clock::now();
    const InjectionConfig inject = air.injection_config(dcfg.layers, dcfg.activation);
    const ScoringOptions scoring = air.scoring_options();
    std::vector<std::size_t> visual_rows(k_total);
    for (std::size_t i = 0; i < k_total; ++i) visual_rows[i] = i;

    ExperimentReport report;
    report.run_id = "toy-" + std::to_string(dcfg.seed) + "-" + std::string(to_string(air.injection_mode));
    report.config = to_json(air);
    report.final_hidden.assign(static_cast<std::size_t>(dcfg.layers), Matrix(static_cast<std::size_t>(steps), dcfg.d_model));
    report.logits = Matrix(static_cast<std::size_t>(steps), dcfg.vocab);

    std::map<int, LayerCache> cache;
    double selection_ms = 0.0;
    int step = 0;

    auto hook = [&](int layer, const Matrix& h, const FfnWeights& w, std::size_t block_start) -> Matrix {
        if (air.injection_mode == InjectionMode::Off || !inject.gate.contains(layer)) return ffn_forward(h, w);
        const bool prefill = block_start == 0;
        if (prefill) {
            const auto t0 = std::chrono::steady_clock::now();
            LayerCache entry;
            const Matrix visual = gather_rows(h, visual_rows);
            entry.reduced = select_top_q_clamped(visual, air.top_q);
            const Matrix reference = air.cost_space == CostSpace::Hidden
                                         ? entry.reduced.h_prime
                                         : gather_rows(scene.visual_tokens, entry.reduced.selected_indices);
            entry.selection = score_and_select(reference, scene.patches, air.tau, scoring);
            entry.reference = reference;
            cache[layer] = std::move(entry);
            selection_ms += elapsed_ms(t0);
        }
        const LayerCache& entry = cache.at(layer);

        bool gate_open = true;
        if (air.uncertainty_threshold) {
            // Logit lens on the newest row: inject only while the model is unsure.
            const Matrix lens = matmul_transposed(gather_rows(h, std::vector<std::size_t>{h.rows() - 1}), decoder.embedding());
            gate_open = entropy_ratio(lens.row(0)) > *air.uncertainty_threshold;
        }
        if (prefill) {
            LayerSelection rec;
            rec.layer = layer;
            rec.retained = entry.reduced.selected_indices;
            rec.reference = entry.reference;
            rec.selection = entry.selection;
            rec.injected = gate_open && entry.selection.fused.rows() > 0;
            report.selections.push_back(std::move(rec));
        }
        if (!gate_open) return ffn_forward(h, w);
        if (!prefill && inject.mode == InjectionMode::RetainedRows) return ffn_forward(h, w);
        const std::span<const std::size_t> rows =
            prefill ? std::span<const std::size_t>(visual_rows) : std::span<const std::size_t>();
        return air_ffn_forward(h, rows, w, entry.reduced, entry.selection.fused, inject, layer);
    };

    auto observe = [&](int layer, const Matrix& residual, std::size_t) {
        const auto last = residual.row(residual.rows() - 1);
        auto dst = report.final_hidden[static_cast<std::size_t>(layer - 1)].row(static_cast<std::size_t>(step));
        std::copy(last.begin(), last.end(), dst.begin());
    };

    auto state = decoder.new_state();
    const Matrix prompt = decoder.embed(scene.prompt_tokens);
    const Matrix parts[] = {scene.visual_tokens, prompt};
    Matrix block = vstack(parts, dcfg.d_model);
    for (step = 0; step < steps; ++step) {
        const Matrix out = decoder.forward(state, block, hook, observe);
        const Matrix logits = decoder.logits(gather_rows(out, std::vector<std::size_t>{out.rows() - 1}));
        std::copy(logits.data().begin(), logits.data().end(), report.logits.row(static_cast<std::size_t>(step)).begin());
        const int token = argmax(logits.row(0));
        report.generated_tokens.push_back(token);
        block = decoder.embed({token});
    }

    report.curves["salient_similarity"] = layer_similarity(report, scene.salient_tokens);
    report.curves["background_similarity"] = layer_similarity(report, scene.background_tokens);
    report.metrics["final_salient_similarity"] = report.curves["salient_similarity"].back();
    report.metrics["final_background_similarity"] = report.curves["background_similarity"].back();
    if (!report.selections.empty()) {
        const auto& first = report.selections.front().selection;
        report.metrics["selected_patches"] = static_cast<double>(first.selected.size());
        std::size_t salient_hits = 0;
        for (auto m : first.selected) salient_hits += scene.salient_patch_indices.count(m);
        report.metrics["salient_patches_selected"] = static_cast<double>(salient_hits);
    }
    report.timings_ms["selection"] = selection_ms;
    report.timings_ms["total"] = elapsed_ms(started);
    return report;
}

std::vector<double> layer_similarity(const ExperimentReport& report, const Matrix& targets) {
    if (report.final_hidden.empty()) fail(ErrorCode::Parameter, "layer_similarity: report has no recorded hidden states");
    const Matrix c = centroid(targets);
    std::vector<double> out;
    out.reserve(report.final_hidden.size());
    for (const auto& states : report.final_hidden) {
        if (states.rows() == 0) fail(ErrorCode::Parameter, "layer_similarity: empty recording");
        if (states.cols() != c.cols()) fail(ErrorCode::Shape, "layer_similarity: target width mismatch");
        double total = 0.0;
        for (std::size_t s = 0; s < states.rows(); ++s) total += cosine_similarity(states.row(s), c.row(0));
        out.push_back(total / static_cast<double>(states.rows()));
    }
    return out;
}

PairedOutcome run_paired(const SimulationSetup& setup, const ReinforcementConfig& air, std::uint64_t seed) {
    ToyDecoderConfig dcfg = setup.decoder;
    dcfg.seed = seed;
    const ToyDecoder decoder(dcfg);
    const SyntheticScene scene = make_scene(decoder, setup.scene, air.patch_count, seed);

    ReinforcementConfig off = air;
    off.injection_mode = InjectionMode::Off;
    const ExperimentReport on_report = run_toy_decode(decoder, scene, air, setup.steps);
    const ExperimentReport off_report = run_toy_decode(decoder, scene, off, setup.steps);

    PairedOutcome o;
    o.seed = seed;
    o.salient_curve_on = on_report.curves.at("salient_similarity");
    o.salient_curve_off = off_report.curves.at("salient_similarity");
    o.background_curve_on = on_report.curves.at("background_similarity");
    o.salient_on = o.salient_curve_on.back();
    o.salient_off = o.salient_curve_off.back();
    o.background_on = o.background_curve_on.back();
    o.background_off = off_report.curves.at("background_similarity").back();
    if (!on_report.selections.empty()) {
        const auto& first = on_report.selections.front().selection;
        o.selected_patches = first.selected.size();
        o.first_scores = first.scores;
        o.first_selected = first.selected;
        for (auto m : first.selected) o.salient_selected += scene.salient_patch_indices.count(m);
    }
    o.salient_patch_indices = scene.salient_patch_indices;
    o.tokens_on = on_report.generated_tokens;
    o.tokens_off = off_report.generated_tokens;
    o.salient_object = scene.salient_object;
    o.background_object = scene.background_object;
    return o;
}

std::vector<PairedOutcome> run_paired_sweep(const SimulationSetup& setup, const ReinforcementConfig& air,
                                            std::uint64_t first_seed, std::size_t count) {
    std::vector<PairedOutcome> out(count);
    std::exception_ptr first_error;
    const auto n = static_cast<std::int64_t>(count);
#pragma omp parallel for schedule(dynamic, 1)
    for (std::int64_t i = 0; i < n; ++i) {
        try {
            out[static_cast<std::size_t>(i)] = run_paired(setup, air, first_seed + static_cast<std::uint64_t>(i));
        } catch (...) {
#pragma omp critical(air_sweep_error)
            if (!first_error) first_error = std::current_exception();
        }
    }
    if (first_error) std::rethrow_exception(first_error);
    return out;
}

// ---- margin amplification -------------------------------------------

std::string to_string(PatchModel model) { return model == PatchModel::Independent ? "independent" : "view"; }

std::optional<PatchModel> parse_patch_model(const std::string& name) {
    if (name == "independent") return PatchModel::Independent;
    if (name == "view") return PatchModel::View;
    return std::nullopt;
}

MarginTrial margin_pair(const Matrix& reference, const Matrix& patch_1, const Matrix& patch_2, const EpsilonSpec& eps,
                        const SinkhornOptions& options) {
    ScoringOptions scoring;
    scoring.epsilon = eps;
    scoring.sinkhorn = options;
    const PatchScore s1 = score_patch(reference, {0, patch_1}, scoring);
    const PatchScore s2 = score_patch(reference, {1, patch_2}, scoring);
    MarginTrial t;
    t.d_ot_1 = s1.d_ot;
    t.d_ot_2 = s2.d_ot;
    t.d_cos_1 = s1.d_cos;
    t.d_cos_2 = s2.d_cos;
    t.margin_ot = std::abs(s1.d_ot - s2.d_ot);
    t.margin_cos = std::abs(s1.d_cos - s2.d_cos);
    t.amplified = t.margin_ot >= t.margin_cos;
    t.converged = s1.converged && s2.converged;
    return t;
}

MarginSummary margin_experiment(std::size_t trials, std::size_t q, std::size_t n, std::size_t d, const EpsilonSpec& eps,
                                std::uint64_t seed, PatchModel model, const SinkhornOptions& options) {
    if (trials < 1) fail(ErrorCode::Parameter, "margin_experiment: trials must be >= 1");
    if (q < 1 || n < 1 || d < 1) fail(ErrorCode::Parameter, "margin_experiment: Q, N, d must be >= 1");
    MarginSummary summary;
    summary.trials.resize(trials);
    const auto count = static_cast<std::int64_t>(trials);
#pragma omp parallel for schedule(dynamic, 4)
    for (std::int64_t i = 0; i < count; ++i) {
        // Per-trial stream: results do not depend on scheduling.
        std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(i)));
        std::normal_distribution<double> normal(0.0, 1.0);
        auto draw = [&](std::size_t rows) {
            Matrix m(rows, d);
            for (float& v : m.data()) v = static_cast<float>(normal(rng));
            return m;
        };
        const Matrix reference = draw(q);
        Matrix patches[2] = {draw(n), draw(n)};
        if (model == PatchModel::View) {
            std::uniform_real_distribution<double> level(0.5, 2.0);
            for (auto& p : patches) {
                const double s = level(rng);
                for (std::size_t r = 0; r < n; ++r) {
                    const auto src = reference.row(r % q);
                    auto dst = p.row(r);
                    for (std::size_t j = 0; j < d; ++j) dst[j] = static_cast<float>(src[j] + s * dst[j]);
                }
            }
        }
        summary.trials[static_cast<std::size_t>(i)] = margin_pair(reference, patches[0], patches[1], eps, options);
    }
    std::size_t amplified = 0;
    for (const auto& t : summary.trials) {
        amplified += t.amplified;
        summary.non_converged += !t.converged;
        summary.dominance_violations += (t.d_ot_1 > t.d_cos_1 + 1e-9) + (t.d_ot_2 > t.d_cos_2 + 1e-9);
    }
    summary.amplified_fraction = static_cast<double>(amplified) / static_cast<double>(trials);
    return summary;
}

std::string margin_csv(const MarginSummary& summary) {
    std::string out = "trial,d_ot_1,d_ot_2,d_cos_1,d_cos_2,margin_ot,margin_cos,differential,amplified\n";
    for (std::size_t i = 0; i < summary.trials.size(); ++i) {
        const auto& t = summary.trials[i];
        out += std::to_string(i) + "," + format_float(t.d_ot_1) + "," + format_float(t.d_ot_2) + "," +
               format_float(t.d_cos_1) + "," + format_float(t.d_cos_2) + "," + format_float(t.margin_ot) + "," +
               format_float(t.margin_cos) + "," + format_float(t.margin_ot - t.margin_cos) + "," +
               (t.amplified ? "1" : "0") + "\n";
    }
    return out;
}

// ---- CHAIR -------------------------------------------------------------

ChairResult chair_metrics(const std::vector<Caption>& captions) {
    if (captions.empty()) fail(ErrorCode::Parameter, "chair_metrics: no captions");
    ChairResult r;
    for (const auto& c : captions) {
        std::set<std::string> mentioned;
        for (const auto& sentence : c.sentences) {
            mentioned.insert(sentence.begin(), sentence.end());
            ++r.sentences;
            const bool bad = std::any_of(sentence.begin(), sentence.end(),
                                         [&](const std::string& o) { return !c.ground_truth.count(o); });
            r.hallucinated_sentences += bad;
        }
        r.mentioned += mentioned.size();
        for (const auto& o : mentioned) r.hallucinated += !c.ground_truth.count(o);
    }
    r.no_mentions = r.mentioned == 0;
    r.no_sentences = r.sentences == 0;
    r.chair_i = r.no_mentions ? 0.0 : static_cast<double>(r.hallucinated) / static_cast<double>(r.mentioned);
    r.chair_s = r.no_sentences ? 0.0 : static_cast<double>(r.hallucinated_sentences) / static_cast<double>(r.sentences);
    return r;
}

std::vector<Caption> parse_captions(const nlohmann::json& j) {
    const auto& list = j.is_object() && j.contains("captions") ? j.at("captions") : j;
    if (!list.is_array()) fail(ErrorCode::Format, "captions must be an array");
    std::vector<Caption> out;
    try {
        for (const auto& item : list) {
            Caption c;
            for (const auto& s : item.at("sentences")) c.sentences.push_back(s.get<std::set<std::string>>());
            c.ground_truth = item.at("ground_truth").get<std::set<std::string>>();
            if (item.contains("mentioned")) {
                // Must agree with the per-sentence mentions.
                std::set<std::string> all;
                for (const auto& s : c.sentences) all.insert(s.begin(), s.end());
                if (item.at("mentioned").get<std::set<std::string>>() != all) {
                    fail(ErrorCode::Format, "caption 'mentioned' disagrees with its sentences");
                }
            }
            out.push_back(std::move(c));
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::Format, std::string("bad caption record: ") + e.what());
    }
    return out;
}

std::vector<Caption> captions_from_tokens(const std::vector<std::vector<int>>& runs,
                                          const std::vector<std::set<int>>& truth, std::size_t sentence_tokens) {
    if (sentence_tokens < 1) fail(ErrorCode::Parameter, "sentence_tokens must be >= 1");
    std::vector<Caption> out;
    for (std::size_t r = 0; r < runs.size(); ++r) {
        Caption c;
        for (int o : truth[r]) c.ground_truth.insert("obj" + std::to_string(o));
        for (std::size_t i = 0; i < runs[r].size(); i += sentence_tokens) {
            std::set<std::string> sentence;
            for (std::size_t k = i; k < std::min(runs[r].size(), i + sentence_tokens); ++k) {
                if (runs[r][k] < static_cast<int>(ToyDecoder::object_classes())) sentence.insert("obj" + std::to_string(runs[r][k]));
            }
            c.sentences.push_back(std::move(sentence));
        }
        out.push_back(std::move(c));
    }
    return out;
}

}  // namespace air
