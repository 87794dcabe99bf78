#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <set>
#include <vector>

#include "air/activation.hpp"
#include "air/ffn_injection.hpp"
#include "air/matrix.hpp"
#include "air/patch_scoring.hpp"

namespace air {

struct ToyDecoderConfig {
    int layers = 12;
    std::size_t d_model = 64;
    std::size_t d_ff = 256;
    std::size_t heads = 1;
    std::size_t seq_len = 16;  // prompt tokens after the visual block
    std::size_t visual_token_count = 256;
    std::size_t vocab = 64;
    std::uint64_t seed = 0;
    Activation activation = Activation::GeluTanh;
    // Residual write scales of the attention and FFN sublayers.
    double attn_gain = 0.005;
    double ffn_gain = 0.004;

    void validate() const;
};

// Untrained pre-norm transformer decoder with fixed random weights.
// Token ids below `object_classes()` are object words whose embeddings
// double as the scene cluster directions.
class ToyDecoder {
public:
    struct Layer {
        Matrix wq, wk, wv, wo;  // d x d
        FfnWeights ffn;
    };

    // Per-layer key/value rows for every position processed so far.
    struct State {
        std::vector<std::vector<float>> keys;
        std::vector<std::vector<float>> values;
        std::size_t length = 0;
    };

    // Computes the FFN sublayer output for the normalized block rows.
    // `block_start` is the sequence position of the block's first row.
    using FfnHook = std::function<Matrix(int layer, const Matrix& normed, const FfnWeights& w, std::size_t block_start)>;
    // Sees the residual stream after each layer (1-based).
    using LayerObserver = std::function<void(int layer, const Matrix& residual, std::size_t block_start)>;

    explicit ToyDecoder(const ToyDecoderConfig& cfg);

    const ToyDecoderConfig& config() const noexcept { return cfg_; }
    const Matrix& embedding() const noexcept { return embedding_; }
    const std::vector<Layer>& layers() const noexcept { return layers_; }
    static constexpr std::size_t object_classes() { return 8; }

    State new_state() const;

    // Runs the block (rows are residual-stream inputs) through every layer,
    // appending to the cache. Returns the final residual rows.
    Matrix forward(State& state, const Matrix& block, const FfnHook& ffn = {}, const LayerObserver& observe = {}) const;

    // Tied unembedding of the normalized residual rows.
    Matrix logits(const Matrix& residual) const;

    Matrix embed(const std::vector<int>& tokens) const;

private:
    ToyDecoderConfig cfg_;
    Matrix embedding_;  // vocab x d, unit rows
    std::vector<Layer> layers_;
};

// Scale each row to unit RMS.
Matrix rms_norm(const Matrix& x);

// Normalized entropy H(softmax(row)) / log(V) of one logit row.
double entropy_ratio(std::span<const float> logits);

struct SceneConfig {
    std::size_t salient_count = 104;
    std::size_t patch_tokens = 32;
    std::size_t salient_patches = 3;
    double cluster_spread = 0.12;
    double jitter = 0.01;
};

// Visual tokens drawn around two object directions: a contiguous salient
// region and the background. Patches are contiguous token runs plus
// Gaussian jitter; salient patches lie inside the salient region.
struct SyntheticScene {
    Matrix visual_tokens;  // K x d
    Matrix salient_tokens;
    Matrix background_tokens;
    std::vector<PatchEmbedding> patches;
    std::set<std::size_t> salient_patch_indices;
    std::vector<int> object_labels;  // per visual token
    int salient_object = 0;
    int background_object = 1;
    std::size_t salient_begin = 0;
    std::vector<int> prompt_tokens;
};

SyntheticScene make_scene(const ToyDecoder& decoder, const SceneConfig& scene, std::size_t patch_count,
                          std::uint64_t seed);

// Deterministic 64-bit mixing for deriving sub-seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace air
