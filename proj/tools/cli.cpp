#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <regex>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "air/config.hpp"
#include "air/error.hpp"
#include "air/ffn_injection.hpp"
#include "air/harness.hpp"
#include "air/io.hpp"
#include "air/npy.hpp"
#include "air/parallel.hpp"
#include "air/patch_scoring.hpp"
#include "air/token_reduction.hpp"

namespace air::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// A usage problem detected after argument parsing (bad sweep spec, ...).
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Experiment {
    ReinforcementConfig air;
    SimulationSetup setup;
};

struct CommonOptions {
    std::string config_path;
    std::vector<std::string> overrides;
    std::optional<int> threads;
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonOptions& common) {
    cmd->add_option("-c,--config", common.config_path, "JSON config (pipeline keys plus optional decoder/scene/steps)");
    cmd->add_option("--set", common.overrides, "Override a config key, e.g. --set tau=0.08 (repeatable)");
    cmd->add_option("--threads", common.threads, "Worker threads (beats AIR_THREADS and the config)");
    cmd->add_option("--seed", common.seed, "Seed for every random draw");
}

void apply_decoder(ToyDecoderConfig& d, const json& j) {
    for (const auto& [key, v] : j.items()) {
        if (key == "layers") d.layers = v.get<int>();
        else if (key == "d_model") d.d_model = v.get<std::size_t>();
        else if (key == "d_ff") d.d_ff = v.get<std::size_t>();
        else if (key == "heads") d.heads = v.get<std::size_t>();
        else if (key == "seq_len") d.seq_len = v.get<std::size_t>();
        else if (key == "visual_token_count") d.visual_token_count = v.get<std::size_t>();
        else if (key == "vocab") d.vocab = v.get<std::size_t>();
        else if (key == "attn_gain") d.attn_gain = v.get<double>();
        else if (key == "ffn_gain") d.ffn_gain = v.get<double>();
        else if (key == "activation") {
            auto act = parse_activation(v.get<std::string>());
            if (!act) fail(ErrorCode::Parameter, "unknown decoder activation");
            d.activation = *act;
        } else {
            fail(ErrorCode::Parameter, "unknown decoder key '" + key + "'");
        }
    }
    d.validate();
}

void apply_scene(SceneConfig& s, const json& j) {
    for (const auto& [key, v] : j.items()) {
        if (key == "salient_count") s.salient_count = v.get<std::size_t>();
        else if (key == "patch_tokens") s.patch_tokens = v.get<std::size_t>();
        else if (key == "salient_patches") s.salient_patches = v.get<std::size_t>();
        else if (key == "cluster_spread") s.cluster_spread = v.get<double>();
        else if (key == "jitter") s.jitter = v.get<double>();
        else fail(ErrorCode::Parameter, "unknown scene key '" + key + "'");
    }
}

Experiment load_experiment(const CommonOptions& common) {
    Experiment ex;
    ex.air.threads = max_threads();
    if (!common.config_path.empty()) {
        json doc;
        try {
            doc = json::parse(read_file(common.config_path));
        } catch (const json::parse_error& e) {
            fail(ErrorCode::Format, "config " + common.config_path + " is not valid JSON");
        }
        if (!doc.is_object()) fail(ErrorCode::Format, "config must be a JSON object");
        json pipeline = json::object();
        try {
            for (const auto& [key, v] : doc.items()) {
                if (key == "decoder") apply_decoder(ex.setup.decoder, v);
                else if (key == "scene") apply_scene(ex.setup.scene, v);
                else if (key == "steps") ex.setup.steps = v.get<int>();
                else pipeline[key] = v;
            }
        } catch (const json::exception& e) {
            fail(ErrorCode::Parameter, std::string("config value has the wrong type: ") + e.what());
        }
        const int threads = ex.air.threads;
        ex.air = parse_reinforcement_config(pipeline);
        if (!pipeline.contains("threads")) ex.air.threads = threads;
    }
    if (const char* env = std::getenv("AIR_THREADS"); env != nullptr && *env != '\0') {
        set_config_value(ex.air, "threads", env);
    }
    for (const auto& kv : common.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
        set_config_value(ex.air, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (common.threads) set_config_value(ex.air, "threads", std::to_string(*common.threads));
    if (common.seed) ex.air.seed = *common.seed;
    ex.air.validate();
    if (ex.setup.steps < 1) fail(ErrorCode::Parameter, "steps must be >= 1");
    set_threads(ex.air.threads);
    return ex;
}

std::vector<PatchEmbedding> read_patch_dir(const fs::path& dir) {
    if (!fs::is_directory(dir)) fail(ErrorCode::Io, "patch directory " + dir.string() + " does not exist");
    const std::regex name("patch_(\\d+)\\.npy");
    std::vector<PatchEmbedding> patches;
    for (const auto& entry : fs::directory_iterator(dir)) {
        std::smatch m;
        const std::string file = entry.path().filename().string();
        if (!std::regex_match(file, m, name)) continue;
        PatchEmbedding p;
        p.index = static_cast<std::size_t>(std::stoull(m[1].str()));
        p.tokens = npy::read(entry.path());
        patches.push_back(std::move(p));
    }
    std::sort(patches.begin(), patches.end(), [](const auto& a, const auto& b) { return a.index < b.index; });
    return patches;
}

std::string patch_file_name(std::size_t m) {
    std::ostringstream s;
    s << "patch_" << std::setw(3) << std::setfill('0') << m << ".npy";
    return s.str();
}

void check_widths(const Matrix& reference, const std::vector<PatchEmbedding>& patches) {
    for (const auto& p : patches) {
        if (p.tokens.cols() != reference.cols()) {
            fail(ErrorCode::Shape, "patch " + std::to_string(p.index) + " has d=" + std::to_string(p.tokens.cols()) +
                                       " but h_prime has d=" + std::to_string(reference.cols()));
        }
    }
}

std::string join_csv(const std::vector<std::string>& cells) {
    std::string line;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) line += ',';
        line += cells[i];
    }
    return line + "\n";
}

template <typename T>
std::string mean_str(const std::vector<T>& v) {
    double total = 0.0;
    for (const auto& x : v) total += static_cast<double>(x);
    return format_float(v.empty() ? 0.0 : total / static_cast<double>(v.size()));
}

json timing_stats(std::vector<double> samples) {
    std::sort(samples.begin(), samples.end());
    double total = 0.0;
    for (double s : samples) total += s;
    auto pct = [&](double p) {
        const auto idx = static_cast<std::size_t>(std::lround(p * static_cast<double>(samples.size() - 1)));
        return samples[idx];
    };
    return {{"mean_us", total / static_cast<double>(samples.size())}, {"p50_us", pct(0.5)}, {"p95_us", pct(0.95)},
            {"samples", samples.size()}};
}

// ---- subcommands -----------------------------------------------------

struct ScoreArgs {
    CommonOptions common;
    std::string h_prime;
    std::string patches;
    std::string out = "scores.csv";
};

int cmd_score(const ScoreArgs& a, std::ostream& out, std::ostream& err) {
    const Experiment ex = load_experiment(a.common);
    const fs::path h_path = a.h_prime.empty() ? fs::path(a.patches) / "h_prime.npy" : fs::path(a.h_prime);
    const Matrix reference = npy::read(h_path);
    const auto patches = read_patch_dir(a.patches);
    check_widths(reference, patches);
    if (patches.empty()) err << "warning: no patch_*.npy files in " << a.patches << "\n";
    const auto result = score_and_select(reference, patches, ex.air.tau, ex.air.scoring_options());
    for (const auto& s : result.scores) {
        if (!s.converged) err << "warning: sinkhorn did not converge for patch " << s.index << "\n";
    }
    write_file_atomic(a.out, scores_csv(result.scores, result.selected));
    out << "scored " << result.scores.size() << " patches, selected " << result.selected.size() << " -> " << a.out << "\n";
    return kOk;
}

struct SelectArgs {
    CommonOptions common;
    std::string hidden;
    std::optional<std::size_t> top_q;
    std::string out = "selected.csv";
    std::string out_h_prime;
};

int cmd_select(const SelectArgs& a, std::ostream& out, std::ostream& err) {
    Experiment ex = load_experiment(a.common);
    if (a.top_q) ex.air.top_q = *a.top_q;
    const Matrix hidden = npy::read(a.hidden);
    bool clamped = false;
    const auto reduced = select_top_q_clamped(hidden, ex.air.top_q, &clamped);
    if (clamped) err << "warning: top_q " << ex.air.top_q << " exceeds " << hidden.rows() << " tokens; keeping all\n";
    std::string csv = "index,distance\n";
    for (auto idx : reduced.selected_indices) csv += std::to_string(idx) + "," + format_float(reduced.distances[idx]) + "\n";
    write_file_atomic(a.out, csv);
    if (!a.out_h_prime.empty()) npy::write(a.out_h_prime, reduced.h_prime);
    out << "kept " << reduced.selected_indices.size() << " of " << hidden.rows() << " tokens -> " << a.out << "\n";
    return kOk;
}

struct InjectArgs {
    CommonOptions common;
    std::string hidden;
    std::string w1;
    std::string w2;
    std::string patches;
    std::string visual_tokens;
    std::string activation = "gelu";
    std::size_t visual_begin = 0;
    std::optional<std::size_t> visual_count;
    int layer = 0;
    int layers = 32;
    std::string out = "injected.npy";
    std::string scores_out;
};

int cmd_inject(const InjectArgs& a, std::ostream& out, std::ostream& err) {
    const Experiment ex = load_experiment(a.common);
    const auto act = parse_activation(a.activation);
    if (!act) throw UsageError("unknown activation '" + a.activation + "'");
    const Matrix hidden = npy::read(a.hidden);
    FfnWeights w{npy::read(a.w1), npy::read(a.w2), *act};
    const std::size_t count = a.visual_count.value_or(hidden.rows() - std::min(a.visual_begin, hidden.rows()));
    if (count == 0 || a.visual_begin + count > hidden.rows()) {
        fail(ErrorCode::Shape, "visual rows [" + std::to_string(a.visual_begin) + ", " +
                                   std::to_string(a.visual_begin + count) + ") fall outside the hidden states");
    }
    std::vector<std::size_t> visual_rows(count);
    for (std::size_t i = 0; i < count; ++i) visual_rows[i] = a.visual_begin + i;

    bool clamped = false;
    const ReducedTokens reduced = select_top_q_clamped(gather_rows(hidden, visual_rows), ex.air.top_q, &clamped);
    if (clamped) err << "warning: top_q clamped to " << count << " visual tokens\n";
    Matrix reference = reduced.h_prime;
    if (ex.air.cost_space == CostSpace::Projector) {
        if (a.visual_tokens.empty()) throw UsageError("cost_space=projector needs --visual-tokens");
        reference = gather_rows(npy::read(a.visual_tokens), reduced.selected_indices);
    }
    const auto patches = a.patches.empty() ? std::vector<PatchEmbedding>{} : read_patch_dir(a.patches);
    check_widths(reference, patches);
    const auto result = score_and_select(reference, patches, ex.air.tau, ex.air.scoring_options());
    const int layer = a.layer > 0 ? a.layer : a.layers;
    const InjectionConfig inj = ex.air.injection_config(a.layers, *act);
    const Matrix injected = air_ffn_forward(hidden, visual_rows, w, reduced, result.fused, inj, layer);
    npy::write(a.out, injected);
    if (!a.scores_out.empty()) write_file_atomic(a.scores_out, scores_csv(result.scores, result.selected));
    out << "layer " << layer << ": selected " << result.selected.size() << " patches (" << result.fused.rows()
        << " rows), injection " << (injection_active(result.fused, inj, layer) ? "on" : "off") << " -> " << a.out << "\n";
    return kOk;
}

struct MarginArgs {
    CommonOptions common;
    std::size_t trials = 1000;
    std::size_t q = 16;
    std::size_t n = 16;
    std::size_t d = 32;
    double epsilon_scale = 0.01;
    std::optional<double> epsilon;
    std::string model = "independent";
    std::string out_dir = ".";
};

int cmd_margin(const MarginArgs& a, std::ostream& out, std::ostream&) {
    const Experiment ex = load_experiment(a.common);
    const auto model = parse_patch_model(a.model);
    if (!model) throw UsageError("--model must be independent or view");
    const EpsilonSpec eps = a.epsilon ? EpsilonSpec::absolute(*a.epsilon) : EpsilonSpec::relative_to_mean(a.epsilon_scale);
    SinkhornOptions opts;
    opts.max_iter = ex.air.sinkhorn_max_iter;
    opts.tol = ex.air.sinkhorn_tol;
    const auto summary = margin_experiment(a.trials, a.q, a.n, a.d, eps, ex.air.seed, *model, opts);
    fs::create_directories(a.out_dir);
    write_file_atomic(fs::path(a.out_dir) / "margins.csv", margin_csv(summary));
    json j{{"trials", a.trials}, {"q", a.q}, {"n", a.n}, {"d", a.d}, {"model", a.model},
           {"epsilon", a.epsilon ? json(*a.epsilon) : json("auto")}, {"epsilon_scale", a.epsilon_scale},
           {"seed", ex.air.seed}, {"amplified_fraction", summary.amplified_fraction},
           {"dominance_violations", summary.dominance_violations}, {"non_converged", summary.non_converged}};
    write_file_atomic(fs::path(a.out_dir) / "margin_summary.json", j.dump(2) + "\n");
    out << "amplified fraction " << format_float(summary.amplified_fraction) << " over " << a.trials << " trials\n";
    return kOk;
}

struct AblateArgs {
    CommonOptions common;
    std::string sweep;
    std::size_t seeds = 8;
    std::string out_dir = ".";
};

int cmd_ablate(const AblateArgs& a, std::ostream& out, std::ostream&) {
    const Experiment ex = load_experiment(a.common);
    const auto eq = a.sweep.find('=');
    if (eq == std::string::npos) throw UsageError("--sweep expects param=v1,v2,...");
    const std::string param = a.sweep.substr(0, eq);
    const auto& keys = reinforcement_config_keys();
    if (std::find(keys.begin(), keys.end(), param) == keys.end() || param == "threads" || param == "seed") {
        throw UsageError("cannot sweep unknown parameter '" + param + "'");
    }
    std::vector<std::string> values;
    std::stringstream ss(a.sweep.substr(eq + 1));
    for (std::string v; std::getline(ss, v, ',');) {
        if (!v.empty()) values.push_back(v);
    }
    if (values.empty()) throw UsageError("--sweep lists no values");

    std::string grid = join_csv({"param", "value", "seeds", "selected_mean", "salient_selected_mean", "salient_on",
                                 "salient_off", "uplift", "positive_fraction", "chair_i_on", "chair_s_on", "chair_i_off",
                                 "chair_s_off", "wall_ms"});
    std::string per_patch = join_csv({"param", "value", "m", "salient", "d_ot", "d_cos", "converged", "selected"});
    for (const auto& value : values) {
        ReinforcementConfig cfg = ex.air;
        set_config_value(cfg, param, value);
        const auto t0 = std::chrono::steady_clock::now();
        const auto runs = run_paired_sweep(ex.setup, cfg, cfg.seed, a.seeds);
        const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

        std::vector<double> sel, sal_sel, on, off, up;
        std::size_t positive = 0;
        std::vector<std::vector<int>> tok_on, tok_off;
        std::vector<std::set<int>> truth;
        for (const auto& r : runs) {
            sel.push_back(static_cast<double>(r.selected_patches));
            sal_sel.push_back(static_cast<double>(r.salient_selected));
            on.push_back(r.salient_on);
            off.push_back(r.salient_off);
            up.push_back(r.salient_on - r.salient_off);
            positive += r.salient_on > r.salient_off;
            tok_on.push_back(r.tokens_on);
            tok_off.push_back(r.tokens_off);
            truth.push_back({r.salient_object, r.background_object});
        }
        const auto chair_on = chair_metrics(captions_from_tokens(tok_on, truth, 4));
        const auto chair_off = chair_metrics(captions_from_tokens(tok_off, truth, 4));
        grid += join_csv({param, value, std::to_string(runs.size()), mean_str(sel), mean_str(sal_sel), mean_str(on),
                          mean_str(off), mean_str(up),
                          format_float(static_cast<double>(positive) / static_cast<double>(runs.size())),
                          format_float(chair_on.chair_i), format_float(chair_on.chair_s), format_float(chair_off.chair_i),
                          format_float(chair_off.chair_s), format_float(ms)});
        const auto& first = runs.front();
        for (const auto& s : first.first_scores) {
            const bool chosen = std::count(first.first_selected.begin(), first.first_selected.end(), s.index) > 0;
            per_patch += join_csv({param, value, std::to_string(s.index),
                                   first.salient_patch_indices.count(s.index) ? "1" : "0", format_float(s.d_ot),
                                   format_float(s.d_cos), s.converged ? "1" : "0", chosen ? "1" : "0"});
        }
    }
    fs::create_directories(a.out_dir);
    write_file_atomic(fs::path(a.out_dir) / "ablate.csv", grid);
    write_file_atomic(fs::path(a.out_dir) / "ablate_patches.csv", per_patch);
    out << "swept " << param << " over " << values.size() << " values -> " << (fs::path(a.out_dir) / "ablate.csv").string()
        << "\n";
    return kOk;
}

struct BenchArgs {
    CommonOptions common;
    std::size_t iterations = 200;
    std::size_t warmup = 20;
    std::string out = "bench.json";
};

int cmd_bench(const BenchArgs& a, std::ostream& out, std::ostream&) {
    if (a.iterations < 100) throw UsageError("--iterations must be >= 100");
    const Experiment ex = load_experiment(a.common);
    using clock = std::chrono::steady_clock;
    auto us_since = [](clock::time_point t0) {
        return std::chrono::duration<double, std::micro>(clock::now() - t0).count();
    };

    ToyDecoderConfig dcfg = ex.setup.decoder;
    dcfg.seed = ex.air.seed;
    const ToyDecoder decoder(dcfg);
    const SyntheticScene scene = make_scene(decoder, ex.setup.scene, ex.air.patch_count, ex.air.seed);
    const InjectionConfig inj = ex.air.injection_config(dcfg.layers, dcfg.activation);
    const int layer = inj.gate.start;
    const FfnWeights& w = decoder.layers()[static_cast<std::size_t>(layer - 1)].ffn;

    // Prefill-shaped block: visual tokens followed by the prompt.
    const Matrix parts[] = {scene.visual_tokens, decoder.embed(scene.prompt_tokens)};
    const Matrix h = rms_norm(vstack(parts, dcfg.d_model));
    std::vector<std::size_t> visual_rows(scene.visual_tokens.rows());
    for (std::size_t i = 0; i < visual_rows.size(); ++i) visual_rows[i] = i;

    const auto t_sel = clock::now();
    const ReducedTokens reduced = select_top_q_clamped(gather_rows(h, visual_rows), ex.air.top_q);
    const auto selection = score_and_select(reduced.h_prime, scene.patches, ex.air.tau, ex.air.scoring_options());
    const double selection_us = us_since(t_sel);

    std::vector<double> base_us, air_us;
    for (std::size_t i = 0; i < a.warmup + a.iterations; ++i) {
        // Interleaved so drift affects both arms alike.
        auto t0 = clock::now();
        Matrix b = ffn_forward(h, w);
        const double tb = us_since(t0);
        t0 = clock::now();
        Matrix r = air_ffn_forward(h, visual_rows, w, reduced, selection.fused, inj, layer);
        const double ta = us_since(t0);
        if (b.rows() != r.rows()) return kInternal;
        if (i >= a.warmup) {
            base_us.push_back(tb);
            air_us.push_back(ta);
        }
    }

    const ScoringOptions scoring = ex.air.scoring_options();
    std::vector<double> per_patch_us;
    double sinkhorn_total_us = 0.0;
    const std::size_t reps = std::max<std::size_t>(1, a.iterations / 20);
    for (std::size_t rep = 0; rep < reps; ++rep) {
        double total = 0.0;
        for (const auto& p : scene.patches) {
            const auto t0 = clock::now();
            (void)score_patch(reduced.h_prime, p, scoring);
            const double us = us_since(t0);
            per_patch_us.push_back(us);
            total += us;
        }
        sinkhorn_total_us += total;
    }
    sinkhorn_total_us /= static_cast<double>(reps);

    const json base = timing_stats(base_us);
    const json with_air = timing_stats(air_us);
    const double ratio = with_air["p50_us"].get<double>() / base["p50_us"].get<double>();
    json j{{"rows", h.rows()},
           {"d_model", dcfg.d_model},
           {"d_ff", dcfg.d_ff},
           {"layer", layer},
           {"injection_mode", std::string(to_string(inj.mode))},
           {"fused_rows", selection.fused.rows()},
           {"patch_count", scene.patches.size()},
           {"iterations", a.iterations},
           {"warmup", a.warmup},
           {"threads", ex.air.threads},
           {"ffn_forward", base},
           {"air_ffn_forward", with_air},
           {"overhead_ratio", ratio},
           {"overhead_ratio_mean", with_air["mean_us"].get<double>() / base["mean_us"].get<double>()},
           {"sinkhorn_per_patch", timing_stats(per_patch_us)},
           {"sinkhorn_total_us", sinkhorn_total_us},
           {"selection_us", selection_us}};
    write_file_atomic(a.out, j.dump(2) + "\n");
    out << "overhead ratio " << format_float(ratio) << " (p50 AIR / p50 plain) -> " << a.out << "\n";
    return kOk;
}

struct SimulateArgs {
    CommonOptions common;
    std::size_t seeds = 50;
    std::optional<int> steps;
    std::string out_dir = ".";
    std::string dump_scene;
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out, std::ostream&) {
    Experiment ex = load_experiment(a.common);
    if (a.steps) ex.setup.steps = *a.steps;
    if (a.seeds < 1) throw UsageError("--seeds must be >= 1");
    const auto t0 = std::chrono::steady_clock::now();
    const auto runs = run_paired_sweep(ex.setup, ex.air, ex.air.seed, a.seeds);
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

    // Full report of the first seed plus aggregate metrics over all seeds.
    ToyDecoderConfig dcfg = ex.setup.decoder;
    dcfg.seed = ex.air.seed;
    const ToyDecoder decoder(dcfg);
    const SyntheticScene scene = make_scene(decoder, ex.setup.scene, ex.air.patch_count, ex.air.seed);
    ExperimentReport report = run_toy_decode(decoder, scene, ex.air, ex.setup.steps);

    std::string sim = "seed,layer,salient_on,salient_off,background_on\n";
    std::vector<double> uplift;
    std::size_t positive = 0;
    std::vector<std::vector<int>> tok_on, tok_off;
    std::vector<std::set<int>> truth;
    for (const auto& r : runs) {
        for (std::size_t l = 0; l < r.salient_curve_on.size(); ++l) {
            sim += std::to_string(r.seed) + "," + std::to_string(l + 1) + "," + format_float(r.salient_curve_on[l]) + "," +
                   format_float(r.salient_curve_off[l]) + "," + format_float(r.background_curve_on[l]) + "\n";
        }
        uplift.push_back(r.salient_on - r.salient_off);
        positive += r.salient_on > r.salient_off;
        tok_on.push_back(r.tokens_on);
        tok_off.push_back(r.tokens_off);
        truth.push_back({r.salient_object, r.background_object});
    }
    double mean_uplift = 0.0;
    for (double u : uplift) mean_uplift += u;
    mean_uplift /= static_cast<double>(uplift.size());
    const auto chair_on = chair_metrics(captions_from_tokens(tok_on, truth, 4));
    const auto chair_off = chair_metrics(captions_from_tokens(tok_off, truth, 4));
    report.metrics["seeds"] = static_cast<double>(runs.size());
    report.metrics["mean_uplift"] = mean_uplift;
    report.metrics["positive_fraction"] = static_cast<double>(positive) / static_cast<double>(runs.size());
    report.metrics["chair_i_on"] = chair_on.chair_i;
    report.metrics["chair_s_on"] = chair_on.chair_s;
    report.metrics["chair_i_off"] = chair_off.chair_i;
    report.metrics["chair_s_off"] = chair_off.chair_s;
    report.timings_ms["sweep"] = ms;

    json j = to_json(report);
    j["decoder"] = {{"layers", dcfg.layers}, {"d_model", dcfg.d_model}, {"d_ff", dcfg.d_ff}, {"heads", dcfg.heads},
                    {"seq_len", dcfg.seq_len}, {"visual_token_count", dcfg.visual_token_count}, {"vocab", dcfg.vocab},
                    {"activation", std::string(to_string(dcfg.activation))}};
    j["steps"] = ex.setup.steps;
    fs::create_directories(a.out_dir);
    write_file_atomic(fs::path(a.out_dir) / "report.json", j.dump(2) + "\n");
    write_file_atomic(fs::path(a.out_dir) / "similarity.csv", sim);
    if (!report.selections.empty()) {
        const auto& s = report.selections.front().selection;
        write_file_atomic(fs::path(a.out_dir) / "scores.csv", scores_csv(s.scores, s.selected));
    }
    if (!a.dump_scene.empty()) {
        const fs::path dir(a.dump_scene);
        fs::create_directories(dir);
        npy::write(dir / "visual_tokens.npy", scene.visual_tokens);
        for (const auto& p : scene.patches) npy::write(dir / patch_file_name(p.index), p.tokens);
        if (!report.selections.empty()) {
            npy::write(dir / "h_prime.npy", report.selections.front().reference);
        }
    }
    out << "mean uplift " << format_float(mean_uplift) << ", positive in " << positive << "/" << runs.size()
        << " seeds -> " << (fs::path(a.out_dir) / "report.json").string() << "\n";
    return kOk;
}

struct ChairArgs {
    std::string input;
    std::string out;
};

int cmd_chair(const ChairArgs& a, std::ostream& out, std::ostream& err) {
    json doc;
    try {
        doc = json::parse(read_file(a.input));
    } catch (const json::parse_error&) {
        fail(ErrorCode::Format, a.input + " is not valid JSON");
    }
    const auto r = chair_metrics(parse_captions(doc));
    if (r.no_mentions) err << "warning: no objects mentioned; CHAIR_I reported as 0\n";
    json j{{"chair_i", r.chair_i}, {"chair_s", r.chair_s}, {"mentioned", r.mentioned}, {"hallucinated", r.hallucinated},
           {"sentences", r.sentences}, {"hallucinated_sentences", r.hallucinated_sentences},
           {"no_mentions", r.no_mentions}, {"no_sentences", r.no_sentences}};
    if (!a.out.empty()) write_file_atomic(a.out, j.dump(2) + "\n");
    out << j.dump() << "\n";
    return kOk;
}

int exit_code_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::Format:
        case ErrorCode::Io:
        case ErrorCode::Domain:
            return kInputFormat;
        case ErrorCode::Shape:
            return kDimensionMismatch;
        case ErrorCode::Parameter:
        case ErrorCode::Unsupported:
            return kUsage;
    }
    return kInternal;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Adaptive visual reinforcement pipeline: token reduction, OT patch scoring, FFN re-injection"};
    app.require_subcommand(1);
    std::function<int()> action;

    ScoreArgs score;
    auto* c_score = app.add_subcommand("score", "Score patches against h_prime with entropic OT; writes scores.csv");
    add_common(c_score, score.common);
    c_score->add_option("--patches", score.patches, "Directory holding patch_000.npy ...")->required();
    c_score->add_option("--h-prime", score.h_prime, "Reference tokens (default: <patches>/h_prime.npy)");
    c_score->add_option("-o,--out", score.out, "Output CSV");
    c_score->callback([&] { action = [&] { return cmd_score(score, out, err); }; });

    SelectArgs select;
    auto* c_select = app.add_subcommand("select", "Top-Q prototype-distance reduction of visual hidden states");
    add_common(c_select, select.common);
    c_select->add_option("--hidden", select.hidden, "K x d visual hidden states (NPY)")->required();
    c_select->add_option("--top-q", select.top_q, "Tokens to keep (default from config, 100)");
    c_select->add_option("-o,--out", select.out, "Output CSV of kept indices");
    c_select->add_option("--out-h-prime", select.out_h_prime, "Also write the kept rows as NPY");
    c_select->callback([&] { action = [&] { return cmd_select(select, out, err); }; });

    InjectArgs inject;
    auto* c_inject = app.add_subcommand("inject", "Full reduce/score/select pipeline plus the re-injected FFN output");
    add_common(c_inject, inject.common);
    c_inject->add_option("--hidden", inject.hidden, "L x d FFN input rows (NPY)")->required();
    c_inject->add_option("--w1", inject.w1, "d x d_ff first FFN weight (NPY)")->required();
    c_inject->add_option("--w2", inject.w2, "d x d_ff second FFN weight (NPY)")->required();
    c_inject->add_option("--patches", inject.patches, "Patch directory (omit for no patches)");
    c_inject->add_option("--visual-tokens", inject.visual_tokens, "K x d projector tokens for cost_space=projector");
    c_inject->add_option("--activation", inject.activation, "FFN activation: identity|relu|silu|gelu|softmax");
    c_inject->add_option("--visual-begin", inject.visual_begin, "First visual row in --hidden");
    c_inject->add_option("--visual-count", inject.visual_count, "Number of visual rows (default: to the end)");
    c_inject->add_option("--layer", inject.layer, "1-based layer number (default: last layer)");
    c_inject->add_option("--layers", inject.layers, "Decoder depth used for the default layer gate");
    c_inject->add_option("-o,--out", inject.out, "Output NPY");
    c_inject->add_option("--scores-out", inject.scores_out, "Also write the patch scores CSV");
    c_inject->callback([&] { action = [&] { return cmd_inject(inject, out, err); }; });

    MarginArgs margin;
    auto* c_margin = app.add_subcommand("margin-exp", "OT vs cosine margin amplification over random patch pairs");
    add_common(c_margin, margin.common);
    c_margin->add_option("--trials", margin.trials, "Patch pairs");
    c_margin->add_option("--q", margin.q, "Reference rows");
    c_margin->add_option("--n", margin.n, "Tokens per patch");
    c_margin->add_option("--d", margin.d, "Embedding width");
    c_margin->add_option("--epsilon-scale", margin.epsilon_scale, "epsilon as a multiple of mean cost");
    c_margin->add_option("--epsilon", margin.epsilon, "Absolute epsilon (overrides --epsilon-scale)");
    c_margin->add_option("--model", margin.model, "Patch model: independent|view");
    c_margin->add_option("--out-dir", margin.out_dir, "Directory for margins.csv and margin_summary.json");
    c_margin->callback([&] { action = [&] { return cmd_margin(margin, out, err); }; });

    AblateArgs ablate;
    auto* c_ablate = app.add_subcommand("ablate", "Sweep one config key over a grid of toy-decoder runs");
    add_common(c_ablate, ablate.common);
    c_ablate->add_option("--sweep", ablate.sweep, "param=v1,v2,... (layer_gate values as start-end)")->required();
    c_ablate->add_option("--seeds", ablate.seeds, "Paired seeds per grid point");
    c_ablate->add_option("--out-dir", ablate.out_dir, "Directory for ablate.csv and ablate_patches.csv");
    c_ablate->callback([&] { action = [&] { return cmd_ablate(ablate, out, err); }; });

    BenchArgs bench;
    auto* c_bench = app.add_subcommand("bench", "Time plain vs AIR FFN forward and per-patch Sinkhorn");
    add_common(c_bench, bench.common);
    c_bench->add_option("--iterations", bench.iterations, "Timed iterations (>= 100)");
    c_bench->add_option("--warmup", bench.warmup, "Untimed warmup iterations");
    c_bench->add_option("-o,--out", bench.out, "Output JSON");
    c_bench->callback([&] { action = [&] { return cmd_bench(bench, out, err); }; });

    SimulateArgs simulate;
    auto* c_sim = app.add_subcommand("simulate", "Paired AIR on/off toy-decoder runs over many seeds");
    add_common(c_sim, simulate.common);
    c_sim->add_option("--seeds", simulate.seeds, "Number of paired seeds");
    c_sim->add_option("--steps", simulate.steps, "Greedy decoding steps");
    c_sim->add_option("--out-dir", simulate.out_dir, "Directory for report.json, similarity.csv, scores.csv");
    c_sim->add_option("--dump-scene", simulate.dump_scene, "Write the first seed's scene tensors as NPY here");
    c_sim->callback([&] { action = [&] { return cmd_simulate(simulate, out, err); }; });

    ChairArgs chair;
    auto* c_chair = app.add_subcommand("chair", "CHAIR_I / CHAIR_S from a captions JSON file");
    c_chair->add_option("--input", chair.input, "JSON list of {sentences: [[obj...]...], ground_truth: [...]}")->required();
    c_chair->add_option("-o,--out", chair.out, "Also write the result JSON here");
    c_chair->callback([&] { action = [&] { return cmd_chair(chair, out, err); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            // --help on a subcommand
            for (auto* sub : app.get_subcommands()) out << sub->help();
            return kOk;
        }
        err << "error: " << e.what() << "\n";
        return kUsage;
    }

    try {
        return action ? action() : kUsage;
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const Error& e) {
        err << "error (" << to_string(e.code()) << "): " << e.what() << "\n";
        return exit_code_for(e.code());
    } catch (const fs::filesystem_error& e) {
        err << "error (io): " << e.what() << "\n";
        return kInputFormat;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return kInternal;
    }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    std::vector<const char*> argv;
    argv.reserve(args.size() + 1);
    argv.push_back("air");
    for (const auto& a : args) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace air::cli
