#include "air/token_reduction.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "air/error.hpp"

namespace air {

std::vector<double> compute_prototype(const Matrix& visual) {
    if (visual.rows() == 0) fail(ErrorCode::Shape, "compute_prototype: no tokens");
    std::vector<double> proto(visual.cols(), 0.0);
    for (std::size_t k = 0; k < visual.rows(); ++k) {
        const auto row = visual.row(k);
        for (std::size_t j = 0; j < proto.size(); ++j) proto[j] += row[j];
    }
    for (double& v : proto) v /= static_cast<double>(visual.rows());
    return proto;
}

ReducedTokens select_top_q(const Matrix& visual, std::size_t q) {
    const std::size_t k_total = visual.rows();
    if (q < 1 || q > k_total) {
        fail(ErrorCode::Parameter, "select_top_q: Q=" + std::to_string(q) + " outside [1, " + std::to_string(k_total) + "]");
    }
    ReducedTokens out;
    out.prototype = compute_prototype(visual);
    out.distances.resize(k_total);
    for (std::size_t k = 0; k < k_total; ++k) {
        const auto row = visual.row(k);
        double sq = 0.0;
        for (std::size_t j = 0; j < row.size(); ++j) {
            const double diff = static_cast<double>(row[j]) - out.prototype[j];
            sq += diff * diff;
        }
        out.distances[k] = std::sqrt(sq);
    }

    std::vector<std::size_t> order(k_total);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(q), order.end(),
                      [&](std::size_t x, std::size_t y) {
                          if (out.distances[x] != out.distances[y]) return out.distances[x] > out.distances[y];
                          return x < y;
                      });
    out.selected_indices.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(q));
    std::sort(out.selected_indices.begin(), out.selected_indices.end());
    out.h_prime = gather_rows(visual, out.selected_indices);
    return out;
}

ReducedTokens select_top_q_clamped(const Matrix& visual, std::size_t q, bool* clamped) {
    const bool over = q > visual.rows();
    if (clamped != nullptr) *clamped = over;
    return select_top_q(visual, over ? visual.rows() : q);
}

}  // namespace air
