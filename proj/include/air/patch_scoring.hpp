#pragma once

#include <cstddef>
#include <set>
#include <span>
#include <vector>

#include "air/matrix.hpp"
#include "air/ot.hpp"

namespace air {

struct PatchEmbedding {
    std::size_t index = 0;
    Matrix tokens;  // N x d
};

struct PatchScore {
    std::size_t index = 0;
    double d_ot = 0.0;
    double d_cos = 0.0;
    bool converged = true;
    double epsilon = 0.0;  // resolved regularization actually used
    int iterations = 0;
};

struct ScoringOptions {
    EpsilonSpec epsilon{};
    SinkhornOptions sinkhorn{};
};

struct SelectionResult {
    double tau = 0.0;
    std::vector<std::size_t> selected;  // ascending patch indices
    Matrix fused;                       // concatenated rows of the selected patches
    std::vector<PatchScore> scores;
};

// Cosine cost between `reference` rows and the patch tokens, uniform
// marginals, entropic OT distance plus the uniform-plan baseline.
PatchScore score_patch(const Matrix& reference, const PatchEmbedding& patch, const ScoringOptions& options = {});

// One score per patch, in input order. Patches are solved in parallel.
std::vector<PatchScore> score_patches(const Matrix& reference, std::span<const PatchEmbedding> patches,
                                      const ScoringOptions& options = {});

// { m : d_ot(m) <= tau }, ascending.
std::vector<std::size_t> select_patches(std::span<const PatchScore> scores, double tau);

// Rows of the selected patches concatenated in ascending index order.
// `selected` holds values of PatchEmbedding::index.
Matrix fuse_patches(std::span<const PatchEmbedding> patches, std::span<const std::size_t> selected, std::size_t cols);

SelectionResult score_and_select(const Matrix& reference, std::span<const PatchEmbedding> patches, double tau,
                                 const ScoringOptions& options = {});

namespace serial {
std::vector<PatchScore> score_patches(const Matrix& reference, std::span<const PatchEmbedding> patches,
                                      const ScoringOptions& options = {});
}  // namespace serial

}  // namespace air
