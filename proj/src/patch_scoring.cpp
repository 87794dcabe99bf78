#include "air/patch_scoring.hpp"

#include <algorithm>
#include <cstdint>
#include <exception>
#include <string>

#include "air/error.hpp"

namespace air {

PatchScore score_patch(const Matrix& reference, const PatchEmbedding& patch, const ScoringOptions& options) {
    if (reference.rows() == 0 || patch.tokens.rows() == 0) fail(ErrorCode::Shape, "score_patch: empty token set");
    if (reference.cols() != patch.tokens.cols()) {
        fail(ErrorCode::Shape, "score_patch: patch " + std::to_string(patch.index) + " has d=" +
                                   std::to_string(patch.tokens.cols()) + ", expected " + std::to_string(reference.cols()));
    }
    // Serial cost kernel: this runs inside the per-patch parallel loop.
    const Matrix cost = serial::cosine_cost(reference, patch.tokens);
    const double eps = options.epsilon.resolve(cost);
    const auto a = uniform_marginal(cost.rows());
    const auto b = uniform_marginal(cost.cols());
    const TransportPlan plan = sinkhorn(cost, a, b, eps, options.sinkhorn);

    PatchScore s;
    s.index = patch.index;
    s.d_ot = ot_distance(plan, cost);
    s.d_cos = cosine_baseline(cost);
    s.converged = plan.converged;
    s.epsilon = eps;
    s.iterations = plan.iterations;
    return s;
}

std::vector<PatchScore> score_patches(const Matrix& reference, std::span<const PatchEmbedding> patches,
                                      const ScoringOptions& options) {
    std::vector<PatchScore> out(patches.size());
    std::exception_ptr first_error;
    const auto count = static_cast<std::int64_t>(patches.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (std::int64_t m = 0; m < count; ++m) {
        try {
            out[static_cast<std::size_t>(m)] = score_patch(reference, patches[static_cast<std::size_t>(m)], options);
        } catch (...) {
#pragma omp critical(air_score_error)
            if (!first_error) first_error = std::current_exception();
        }
    }
    if (first_error) std::rethrow_exception(first_error);
    return out;
}

std::vector<std::size_t> select_patches(std::span<const PatchScore> scores, double tau) {
    std::vector<std::size_t> out;
    for (const auto& s : scores) {
        if (s.d_ot <= tau) out.push_back(s.index);
    }
    std::sort(out.begin(), out.end());
    return out;
}

Matrix fuse_patches(std::span<const PatchEmbedding> patches, std::span<const std::size_t> selected, std::size_t cols) {
    std::vector<std::size_t> order(selected.begin(), selected.end());
    std::sort(order.begin(), order.end());
    std::vector<Matrix> parts;
    parts.reserve(order.size());
    for (std::size_t m : order) {
        auto it = std::find_if(patches.begin(), patches.end(), [m](const PatchEmbedding& p) { return p.index == m; });
        if (it == patches.end()) fail(ErrorCode::Parameter, "fuse_patches: no patch with index " + std::to_string(m));
        parts.push_back(it->tokens);
    }
    return vstack(parts, cols);
}

SelectionResult score_and_select(const Matrix& reference, std::span<const PatchEmbedding> patches, double tau,
                                 const ScoringOptions& options) {
    SelectionResult r;
    r.tau = tau;
    r.scores = score_patches(reference, patches, options);
    r.selected = select_patches(r.scores, tau);
    r.fused = fuse_patches(patches, r.selected, reference.cols());
    return r;
}

namespace serial {

std::vector<PatchScore> score_patches(const Matrix& reference, std::span<const PatchEmbedding> patches,
                                      const ScoringOptions& options) {
    std::vector<PatchScore> out;
    out.reserve(patches.size());
    for (const auto& p : patches) out.push_back(air::score_patch(reference, p, options));
    return out;
}

}  // namespace serial
}  // namespace air
