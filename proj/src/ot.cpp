#include "air/ot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "air/error.hpp"

namespace air {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kMarginalSumSlack = 1e-9;

void check_marginal(std::span<const double> p, std::size_t expected, const char* name) {
    if (p.size() != expected) {
        fail(ErrorCode::Shape, std::string("sinkhorn: marginal ") + name + " has length " +
                                   std::to_string(p.size()) + ", expected " + std::to_string(expected));
    }
    double total = 0.0;
    for (double v : p) {
        if (!std::isfinite(v) || v < 0.0) fail(ErrorCode::Domain, std::string("sinkhorn: marginal ") + name + " has a negative or non-finite entry");
        total += v;
    }
    if (std::abs(total - 1.0) > kMarginalSumSlack) {
        fail(ErrorCode::Domain, std::string("sinkhorn: marginal ") + name + " does not sum to 1");
    }
}

// log(sum_i exp(x_i)) over a strided view; -inf when every term is -inf.
template <typename Term>
double log_sum_exp(std::size_t n, Term term) {
    double peak = kNegInf;
    for (std::size_t i = 0; i < n; ++i) peak = std::max(peak, term(i));
    if (peak == kNegInf) return kNegInf;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += std::exp(term(i) - peak);
    return peak + std::log(total);
}

double safe_log(double x) { return x > 0.0 ? std::log(x) : kNegInf; }

}  // namespace

double TransportPlan::mass() const noexcept {
    double total = 0.0;
    for (double v : coupling) total += v;
    return total;
}

double TransportPlan::entropy() const noexcept {
    double h = 0.0;
    for (double v : coupling) {
        if (v > 0.0) h -= v * std::log(v);
    }
    return h;
}

Matrix TransportPlan::to_matrix() const {
    Matrix out(rows, cols);
    for (std::size_t i = 0; i < coupling.size(); ++i) out.data()[i] = static_cast<float>(coupling[i]);
    return out;
}

double EpsilonSpec::resolve(const Matrix& cost) const {
    if (!relative) return value;
    const double m = mean_cost(cost);
    return m > 0.0 ? value * m : value;
}

std::vector<double> uniform_marginal(std::size_t n) {
    return std::vector<double>(n, n == 0 ? 0.0 : 1.0 / static_cast<double>(n));
}

double mean_cost(const Matrix& cost) {
    if (cost.empty()) fail(ErrorCode::Shape, "mean_cost: empty matrix");
    double total = 0.0;
    for (float v : cost.data()) total += v;
    return total / static_cast<double>(cost.size());
}

TransportPlan sinkhorn(const Matrix& cost, std::span<const double> a, std::span<const double> b, double epsilon,
                       const SinkhornOptions& options) {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) fail(ErrorCode::Parameter, "sinkhorn: epsilon must be positive");
    if (options.max_iter < 1) fail(ErrorCode::Parameter, "sinkhorn: max_iter must be >= 1");
    if (cost.empty()) fail(ErrorCode::Shape, "sinkhorn: empty cost matrix");
    if (!cost.all_finite()) fail(ErrorCode::Domain, "sinkhorn: non-finite cost");
    for (float v : cost.data()) {
        if (v < 0.0f) fail(ErrorCode::Domain, "sinkhorn: negative cost");
    }
    const std::size_t rows = cost.rows();
    const std::size_t cols = cost.cols();
    check_marginal(a, rows, "a");
    check_marginal(b, cols, "b");

    std::vector<double> c64(cost.size());
    double c_max = 0.0;
    for (std::size_t i = 0; i < c64.size(); ++i) {
        c64[i] = cost.data()[i];
        c_max = std::max(c_max, c64[i]);
    }

    std::vector<double> log_a(rows);
    std::vector<double> log_b(cols);
    std::transform(a.begin(), a.end(), log_a.begin(), safe_log);
    std::transform(b.begin(), b.end(), log_b.begin(), safe_log);

    // Dual potentials: T(k, n) = exp((f_k + g_n - C(k, n)) / eps).
    std::vector<double> f(rows, 0.0);
    std::vector<double> g(cols, 0.0);
    std::vector<double> row_lse(rows);

    TransportPlan plan;
    plan.rows = rows;
    plan.cols = cols;
    plan.epsilon = epsilon;
    plan.row_marginal.assign(a.begin(), a.end());
    plan.col_marginal.assign(b.begin(), b.end());

    // Row log-sums at the current g; also gives row masses exp((f + eps*lse)/eps).
    auto update_row_lse = [&](double eps) {
        for (std::size_t k = 0; k < rows; ++k) {
            const double* c = c64.data() + k * cols;
            row_lse[k] = log_sum_exp(cols, [&](std::size_t n) { return (g[n] - c[n]) / eps; });
        }
    };
    // One f-update followed by one g-update; returns the L1 row error of
    // the resulting plan (columns are exact after the g-update).
    auto sweep = [&](double eps) {
        for (std::size_t k = 0; k < rows; ++k) f[k] = log_a[k] == kNegInf ? kNegInf : eps * (log_a[k] - row_lse[k]);
        for (std::size_t n = 0; n < cols; ++n) {
            const double lse = log_sum_exp(rows, [&](std::size_t k) { return (f[k] - c64[k * cols + n]) / eps; });
            g[n] = log_b[n] == kNegInf ? kNegInf : eps * (log_b[n] - lse);
        }
        update_row_lse(eps);
        double row_error = 0.0;
        for (std::size_t k = 0; k < rows; ++k) {
            const double row_sum = f[k] == kNegInf ? 0.0 : std::exp(f[k] / eps + row_lse[k]);
            row_error += std::abs(row_sum - a[k]);
        }
        return row_error;
    };

    int budget = options.max_iter;
    // Anneal from the cost scale down to the target, warm-starting the
    // potentials; small epsilon otherwise needs far more sweeps.
    if (options.epsilon_scaling && c_max > epsilon) {
        for (double eps = c_max; eps > epsilon && budget > 0; eps *= options.scaling_factor) {
            update_row_lse(eps);
            for (int it = 0; it < options.stage_iterations && budget > 0; ++it) {
                --budget;
                ++plan.iterations;
                if (sweep(eps) <= options.tol) break;
            }
        }
    }
    update_row_lse(epsilon);
    while (budget > 0) {
        --budget;
        ++plan.iterations;
        if (sweep(epsilon) <= options.tol) break;
    }

    plan.coupling.resize(rows * cols);
    for (std::size_t k = 0; k < rows; ++k) {
        for (std::size_t n = 0; n < cols; ++n) {
            const double e = (f[k] + g[n] - c64[k * cols + n]) / epsilon;
            plan.coupling[k * cols + n] = e == kNegInf ? 0.0 : std::exp(e);
        }
    }

    double error = 0.0;
    for (std::size_t k = 0; k < rows; ++k) {
        double s = 0.0;
        for (std::size_t n = 0; n < cols; ++n) s += plan.coupling[k * cols + n];
        error += std::abs(s - a[k]);
    }
    for (std::size_t n = 0; n < cols; ++n) {
        double s = 0.0;
        for (std::size_t k = 0; k < rows; ++k) s += plan.coupling[k * cols + n];
        error += std::abs(s - b[n]);
    }
    plan.marginal_error = error;
    plan.converged = error <= options.tol;
    return plan;
}

double ot_distance(const TransportPlan& plan, const Matrix& cost) {
    if (plan.rows != cost.rows() || plan.cols != cost.cols()) {
        fail(ErrorCode::Shape, "ot_distance: plan and cost shapes differ");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < plan.coupling.size(); ++i) total += plan.coupling[i] * static_cast<double>(cost.data()[i]);
    return total;
}

double cosine_baseline(const Matrix& cost) {
    if (cost.empty()) fail(ErrorCode::Shape, "cosine_baseline: empty matrix");
    if (!cost.all_finite()) fail(ErrorCode::Domain, "cosine_baseline: non-finite cost");
    return mean_cost(cost);
}

double exact_matching_ot(const Matrix& cost) {
    const std::size_t n = cost.rows();
    if (n != cost.cols()) fail(ErrorCode::Unsupported, "exact_matching_ot: cost matrix must be square");
    if (n == 0 || n > 7) fail(ErrorCode::Unsupported, "exact_matching_ot: supports 1 <= n <= 7");
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    double best = std::numeric_limits<double>::infinity();
    do {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) total += cost(i, perm[i]);
        best = std::min(best, total);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best / static_cast<double>(n);
}

}  // namespace air
