#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "air/matrix.hpp"

namespace air {

// Entropic coupling between a row distribution `a` and a column
// distribution `b`. The coupling is kept in double precision; marginal
// and ordering checks down to 1e-9 need more than float32 resolution.
struct TransportPlan {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> coupling;  // row-major rows x cols
    std::vector<double> row_marginal;
    std::vector<double> col_marginal;
    double epsilon = 0.0;
    int iterations = 0;
    bool converged = false;
    double marginal_error = 0.0;  // L1 row error + L1 column error

    double operator()(std::size_t r, std::size_t c) const noexcept { return coupling[r * cols + c]; }

    double mass() const noexcept;
    // -sum T log T, with 0 log 0 = 0.
    double entropy() const noexcept;
    Matrix to_matrix() const;
};

struct SinkhornOptions {
    int max_iter = 1000;
    double tol = 1e-6;
    // Warm-start through a geometric schedule max(C), max(C)*factor, ...
    // down to the target epsilon. Same fixed point, far fewer sweeps at
    // small epsilon. Sweeps spent here count against max_iter.
    bool epsilon_scaling = true;
    double scaling_factor = 0.5;
    int stage_iterations = 10;
};

// Regularization strength, either absolute or as a multiple of mean(C).
struct EpsilonSpec {
    bool relative = true;
    double value = 0.1;

    static EpsilonSpec absolute(double eps) { return {false, eps}; }
    static EpsilonSpec relative_to_mean(double factor) { return {true, factor}; }

    // An all-zero cost has mean 0; the factor is then used as-is since any
    // positive epsilon yields the same (uniform) plan.
    double resolve(const Matrix& cost) const;
};

std::vector<double> uniform_marginal(std::size_t n);

double mean_cost(const Matrix& cost);

// Log-domain Sinkhorn-Knopp on the Gibbs kernel exp(-C/eps). Runs until
// the L1 marginal error is within `tol` or `max_iter` sweeps elapse; a
// non-converged plan is returned with converged == false.
TransportPlan sinkhorn(const Matrix& cost, std::span<const double> a, std::span<const double> b, double epsilon,
                       const SinkhornOptions& options = {});

// <T, C>.
double ot_distance(const TransportPlan& plan, const Matrix& cost);

// Mean of C, i.e. <U, C> for the uniform plan U = 1/(QN).
double cosine_baseline(const Matrix& cost);

// Exact uniform-marginal OT on a square instance: (1/n) * min over all
// permutations of sum_i C(i, sigma(i)). Enumerates n! permutations; n <= 7.
double exact_matching_ot(const Matrix& cost);

}  // namespace air
