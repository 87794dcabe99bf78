#include "air/toy_decoder.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "air/error.hpp"

namespace air {
namespace {

Matrix gaussian(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double stddev) {
    std::normal_distribution<double> dist(0.0, stddev);
    Matrix m(rows, cols);
    for (float& v : m.data()) v = static_cast<float>(dist(rng));
    return m;
}

// gain * (I + noise), the residual-friendly projection used for values and outputs.
Matrix near_identity(std::mt19937_64& rng, std::size_t d, double noise, double gain) {
    Matrix m = gaussian(rng, d, d, noise / std::sqrt(static_cast<double>(d)));
    for (std::size_t i = 0; i < d; ++i) m(i, i) += 1.0f;
    return scale(m, static_cast<float>(gain));
}

void normalize_rows(Matrix& m) {
    for (std::size_t r = 0; r < m.rows(); ++r) {
        auto row = m.row(r);
        const double n = std::sqrt(dot(row, row));
        if (n > 0.0) {
            for (float& v : row) v = static_cast<float>(v / n);
        }
    }
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    // splitmix64 finalizer
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

void ToyDecoderConfig::validate() const {
    if (layers < 1 || d_model < 1 || d_ff < 1 || heads < 1 || visual_token_count < 1 || vocab < 1) {
        fail(ErrorCode::Parameter, "decoder counts must all be >= 1");
    }
    if (d_model % heads != 0) fail(ErrorCode::Parameter, "d_model must be divisible by heads");
    if (vocab <= ToyDecoder::object_classes()) fail(ErrorCode::Parameter, "vocab must exceed the object classes");
}

ToyDecoder::ToyDecoder(const ToyDecoderConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    std::mt19937_64 rng(mix_seed(cfg.seed, 0));
    const std::size_t d = cfg.d_model;
    embedding_ = gaussian(rng, cfg.vocab, d, 1.0);
    normalize_rows(embedding_);
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
    layers_.reserve(static_cast<std::size_t>(cfg.layers));
    for (int l = 0; l < cfg.layers; ++l) {
        Layer layer;
        layer.wq = gaussian(rng, d, d, inv_sqrt_d);
        layer.wk = gaussian(rng, d, d, inv_sqrt_d);
        layer.wv = near_identity(rng, d, 0.1, 1.0);
        layer.wo = near_identity(rng, d, 0.1, cfg.attn_gain);
        layer.ffn.w1 = gaussian(rng, d, cfg.d_ff, inv_sqrt_d);
        layer.ffn.w2 = gaussian(rng, d, cfg.d_ff, cfg.ffn_gain / std::sqrt(static_cast<double>(cfg.d_ff)));
        layer.ffn.activation = cfg.activation;
        layers_.push_back(std::move(layer));
    }
}

ToyDecoder::State ToyDecoder::new_state() const {
    State s;
    s.keys.resize(layers_.size());
    s.values.resize(layers_.size());
    return s;
}

Matrix rms_norm(const Matrix& x) {
    Matrix out = x;
    for (std::size_t r = 0; r < out.rows(); ++r) {
        auto row = out.row(r);
        const double ms = dot(row, row) / static_cast<double>(row.size());
        const double inv = 1.0 / std::sqrt(ms + 1e-6);
        for (float& v : row) v = static_cast<float>(v * inv);
    }
    return out;
}

double entropy_ratio(std::span<const float> logits) {
    if (logits.size() < 2) return 0.0;
    const double peak = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (float v : logits) z += std::exp(v - peak);
    double h = 0.0;
    for (float v : logits) {
        const double p = std::exp(v - peak) / z;
        if (p > 0.0) h -= p * std::log(p);
    }
    return h / std::log(static_cast<double>(logits.size()));
}

Matrix ToyDecoder::forward(State& state, const Matrix& block, const FfnHook& ffn, const LayerObserver& observe) const {
    const std::size_t d = cfg_.d_model;
    if (block.cols() != d) fail(ErrorCode::Shape, "decoder block width " + std::to_string(block.cols()) + " != d_model");
    const std::size_t rows = block.rows();
    const std::size_t start = state.length;
    const std::size_t heads = cfg_.heads;
    const std::size_t dh = d / heads;
    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

    Matrix x = block;
    for (std::size_t li = 0; li < layers_.size(); ++li) {
        const Layer& layer = layers_[li];
        const int layer_no = static_cast<int>(li) + 1;

        const Matrix h = rms_norm(x);
        const Matrix q = matmul(h, layer.wq);
        const Matrix k = matmul(h, layer.wk);
        const Matrix v = matmul(h, layer.wv);
        auto& kc = state.keys[li];
        auto& vc = state.values[li];
        kc.insert(kc.end(), k.data().begin(), k.data().end());
        vc.insert(vc.end(), v.data().begin(), v.data().end());

        Matrix mixed(rows, d);
        const auto rows_i = static_cast<std::int64_t>(rows);
#pragma omp parallel for schedule(static)
        for (std::int64_t ii = 0; ii < rows_i; ++ii) {
            const auto i = static_cast<std::size_t>(ii);
            const std::size_t visible = start + i + 1;  // causal
            std::vector<double> w(visible);
            for (std::size_t hd = 0; hd < heads; ++hd) {
                const std::size_t off = hd * dh;
                double peak = -1e300;
                for (std::size_t j = 0; j < visible; ++j) {
                    double s = 0.0;
                    for (std::size_t t = 0; t < dh; ++t) s += static_cast<double>(q(i, off + t)) * kc[j * d + off + t];
                    w[j] = s * inv_sqrt_dh;
                    peak = std::max(peak, w[j]);
                }
                double z = 0.0;
                for (std::size_t j = 0; j < visible; ++j) {
                    w[j] = std::exp(w[j] - peak);
                    z += w[j];
                }
                for (std::size_t t = 0; t < dh; ++t) {
                    double acc = 0.0;
                    for (std::size_t j = 0; j < visible; ++j) acc += w[j] * vc[j * d + off + t];
                    mixed(i, off + t) = static_cast<float>(acc / z);
                }
            }
        }
        x = add(x, matmul(mixed, layer.wo));

        const Matrix h2 = rms_norm(x);
        const Matrix f = ffn ? ffn(layer_no, h2, layer.ffn, start) : ffn_forward(h2, layer.ffn);
        x = add(x, f);
        if (observe) observe(layer_no, x, start);
    }
    state.length += rows;
    return x;
}

Matrix ToyDecoder::logits(const Matrix& residual) const { return matmul_transposed(rms_norm(residual), embedding_); }

Matrix ToyDecoder::embed(const std::vector<int>& tokens) const {
    Matrix out(tokens.size(), cfg_.d_model);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const auto t = static_cast<std::size_t>(tokens[i]);
        if (t >= cfg_.vocab) fail(ErrorCode::Parameter, "token id out of range");
        std::copy_n(embedding_.row(t).data(), cfg_.d_model, out.row(i).data());
    }
    return out;
}

SyntheticScene make_scene(const ToyDecoder& decoder, const SceneConfig& sc, std::size_t patch_count, std::uint64_t seed) {
    const auto& cfg = decoder.config();
    const std::size_t k_total = cfg.visual_token_count;
    const std::size_t d = cfg.d_model;
    if (sc.salient_count < 1 || sc.salient_count >= k_total) fail(ErrorCode::Parameter, "salient_count must be in [1, K)");
    if (sc.patch_tokens < 1 || sc.patch_tokens > sc.salient_count || sc.patch_tokens > k_total - sc.salient_count) {
        fail(ErrorCode::Parameter, "patch_tokens must fit inside both the salient and the background region");
    }
    std::mt19937_64 rng(mix_seed(seed, 1));
    const std::size_t classes = ToyDecoder::object_classes();

    SyntheticScene scene;
    std::uniform_int_distribution<int> pick(0, static_cast<int>(classes) - 1);
    scene.salient_object = pick(rng);
    const auto& emb = decoder.embedding();
    // Resample the background object until the centroids are separated.
    do {
        scene.background_object = pick(rng);
    } while (scene.background_object == scene.salient_object ||
             1.0 - cosine_similarity(emb.row(static_cast<std::size_t>(scene.salient_object)),
                                     emb.row(static_cast<std::size_t>(scene.background_object))) < 0.5);

    std::uniform_int_distribution<std::size_t> start_dist(0, k_total - sc.salient_count);
    scene.salient_begin = start_dist(rng);
    const std::size_t salient_end = scene.salient_begin + sc.salient_count;

    std::normal_distribution<double> noise(0.0, sc.cluster_spread / std::sqrt(static_cast<double>(d)));
    scene.visual_tokens = Matrix(k_total, d);
    scene.object_labels.resize(k_total);
    std::vector<std::size_t> salient_rows;
    std::vector<std::size_t> background_rows;
    for (std::size_t t = 0; t < k_total; ++t) {
        const bool salient = t >= scene.salient_begin && t < salient_end;
        const int object = salient ? scene.salient_object : scene.background_object;
        scene.object_labels[t] = object;
        (salient ? salient_rows : background_rows).push_back(t);
        const auto centroid = emb.row(static_cast<std::size_t>(object));
        auto row = scene.visual_tokens.row(t);
        for (std::size_t j = 0; j < d; ++j) row[j] = static_cast<float>(centroid[j] + noise(rng));
    }
    scene.salient_tokens = gather_rows(scene.visual_tokens, salient_rows);
    scene.background_tokens = gather_rows(scene.visual_tokens, background_rows);

    // Which patch slots are salient.
    std::vector<std::size_t> slots(patch_count);
    for (std::size_t m = 0; m < patch_count; ++m) slots[m] = m;
    std::shuffle(slots.begin(), slots.end(), rng);
    const std::size_t n_salient = std::min(sc.salient_patches, patch_count);
    scene.salient_patch_indices.insert(slots.begin(), slots.begin() + static_cast<std::ptrdiff_t>(n_salient));

    std::normal_distribution<double> jitter(0.0, sc.jitter);
    scene.patches.reserve(patch_count);
    for (std::size_t m = 0; m < patch_count; ++m) {
        const auto& pool = scene.salient_patch_indices.count(m) ? salient_rows : background_rows;
        std::uniform_int_distribution<std::size_t> at(0, pool.size() - sc.patch_tokens);
        const std::size_t first = at(rng);
        PatchEmbedding p;
        p.index = m;
        p.tokens = Matrix(sc.patch_tokens, d);
        for (std::size_t n = 0; n < sc.patch_tokens; ++n) {
            const auto src = scene.visual_tokens.row(pool[first + n]);
            auto dst = p.tokens.row(n);
            for (std::size_t j = 0; j < d; ++j) dst[j] = static_cast<float>(src[j] + jitter(rng));
        }
        scene.patches.push_back(std::move(p));
    }

    std::uniform_int_distribution<int> word(static_cast<int>(classes), static_cast<int>(cfg.vocab) - 1);
    scene.prompt_tokens.resize(cfg.seq_len);
    for (int& t : scene.prompt_tokens) t = word(rng);
    return scene;
}

}  // namespace air
