#pragma once

#include <cstddef>
#include <vector>

#include "air/matrix.hpp"

namespace air {

// The Top-Q rows of a visual hidden-state block that sit farthest from
// the block's mean.
struct ReducedTokens {
    std::vector<std::size_t> selected_indices;  // ascending, into the K input rows
    Matrix h_prime;                             // Q x d, rows in original order
    std::vector<double> prototype;              // length d
    std::vector<double> distances;              // length K, L2 to the prototype
};

std::vector<double> compute_prototype(const Matrix& visual);

// Keeps the `q` rows with the largest distance to the prototype. Ties go
// to the smaller original index; retained rows keep sequence order.
ReducedTokens select_top_q(const Matrix& visual, std::size_t q);

// Clamps `q` to the row count instead of rejecting it. Sets `clamped`
// when that happened so callers can warn.
ReducedTokens select_top_q_clamped(const Matrix& visual, std::size_t q, bool* clamped = nullptr);

}  // namespace air
