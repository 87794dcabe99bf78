#pragma once

// Independent reference implementations used as test oracles. Nothing here
// calls into air_core beyond the Matrix container.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "air/matrix.hpp"

namespace oracle {

inline air::Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double sd = 1.0) {
    std::normal_distribution<double> g(0.0, sd);
    std::vector<float> v(rows * cols);
    for (auto& x : v) x = static_cast<float>(g(rng));
    return air::Matrix(rows, cols, std::move(v));
}

inline air::Matrix random_uniform(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<float> v(rows * cols);
    for (auto& x : v) x = static_cast<float>(u(rng));
    return air::Matrix(rows, cols, std::move(v));
}

// Triple loop, double accumulation. b is k x n.
inline std::vector<double> naive_matmul(const air::Matrix& a, const air::Matrix& b) {
    std::vector<double> out(a.rows() * b.cols(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += double(a(i, k)) * double(b(k, j));
            out[i * b.cols() + j] = s;
        }
    return out;
}

inline std::vector<double> naive_matmul_bt(const air::Matrix& a, const air::Matrix& b) {
    std::vector<double> out(a.rows() * b.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.rows(); ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += double(a(i, k)) * double(b(j, k));
            out[i * b.rows() + j] = s;
        }
    return out;
}

inline double naive_cosine_cost(const air::Matrix& a, std::size_t i, const air::Matrix& b, std::size_t j) {
    double ab = 0, aa = 0, bb = 0;
    for (std::size_t k = 0; k < a.cols(); ++k) {
        ab += double(a(i, k)) * b(j, k);
        aa += double(a(i, k)) * a(i, k);
        bb += double(b(j, k)) * b(j, k);
    }
    if (aa == 0 || bb == 0) return 1.0;
    return 1.0 - ab / std::sqrt(aa * bb);
}

struct RefPlan {
    std::vector<double> t;
    double cost = 0.0;
    double error = 0.0;
    int iterations = 0;
};

// Plain log-domain Sinkhorn on uniform marginals, no annealing, iterated
// until the column+row L1 marginal error drops under tol.
inline RefPlan reference_sinkhorn(const std::vector<double>& c, std::size_t q, std::size_t n, double eps, double tol,
                                  int max_iter = 200000) {
    const double la = -std::log(double(q)), lb = -std::log(double(n));
    std::vector<double> u(q, 0.0), v(n, 0.0);
    auto lse_row = [&](std::size_t i) {
        double m = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < n; ++j) m = std::max(m, (v[j] - c[i * n + j]) / eps);
        double s = 0;
        for (std::size_t j = 0; j < n; ++j) s += std::exp((v[j] - c[i * n + j]) / eps - m);
        return m + std::log(s);
    };
    auto lse_col = [&](std::size_t j) {
        double m = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < q; ++i) m = std::max(m, (u[i] - c[i * n + j]) / eps);
        double s = 0;
        for (std::size_t i = 0; i < q; ++i) s += std::exp((u[i] - c[i * n + j]) / eps - m);
        return m + std::log(s);
    };
    RefPlan p;
    p.t.assign(q * n, 0.0);
    for (int it = 1; it <= max_iter; ++it) {
        for (std::size_t i = 0; i < q; ++i) u[i] = eps * (la - lse_row(i));
        for (std::size_t j = 0; j < n; ++j) v[j] = eps * (lb - lse_col(j));
        p.iterations = it;
        for (std::size_t i = 0; i < q; ++i)
            for (std::size_t j = 0; j < n; ++j) p.t[i * n + j] = std::exp((u[i] + v[j] - c[i * n + j]) / eps);
        double err = 0;
        for (std::size_t i = 0; i < q; ++i) {
            double s = 0;
            for (std::size_t j = 0; j < n; ++j) s += p.t[i * n + j];
            err += std::abs(s - 1.0 / double(q));
        }
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0;
            for (std::size_t i = 0; i < q; ++i) s += p.t[i * n + j];
            err += std::abs(s - 1.0 / double(n));
        }
        p.error = err;
        if (err <= tol) break;
    }
    p.cost = 0;
    for (std::size_t k = 0; k < q * n; ++k) p.cost += p.t[k] * c[k];
    return p;
}

// Recursive enumeration of all permutations (Heap-free, swap-based).
inline double min_matching(const std::vector<double>& c, std::size_t n) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    auto rec = [&](auto&& self, std::size_t k, double acc) -> void {
        if (k == n) {
            best = std::min(best, acc);
            return;
        }
        for (std::size_t i = k; i < n; ++i) {
            std::swap(perm[k], perm[i]);
            self(self, k + 1, acc + c[k * n + perm[k]]);
            std::swap(perm[k], perm[i]);
        }
    };
    rec(rec, 0, 0.0);
    return best / double(n);
}

// Full stable sort by (distance desc, index asc), then take Q and sort by index.
inline std::vector<std::size_t> brute_top_q(const air::Matrix& h, std::size_t q) {
    const std::size_t k = h.rows(), d = h.cols();
    std::vector<long double> proto(d, 0.0L);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < d; ++j) proto[j] += h(i, j);
    for (auto& p : proto) p /= static_cast<long double>(k);
    std::vector<std::pair<long double, std::size_t>> dist;
    for (std::size_t i = 0; i < k; ++i) {
        long double s = 0;
        for (std::size_t j = 0; j < d; ++j) s += (h(i, j) - proto[j]) * (h(i, j) - proto[j]);
        dist.push_back({std::sqrt(s), i});
    }
    std::stable_sort(dist.begin(), dist.end(), [](auto& x, auto& y) { return x.first > y.first; });
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < q; ++i) out.push_back(dist[i].second);
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace oracle
