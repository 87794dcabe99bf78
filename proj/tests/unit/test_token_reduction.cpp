#include <gtest/gtest.h>

#include <random>

#include "air/error.hpp"
#include "air/token_reduction.hpp"
#include "oracles.hpp"

using air::Matrix;
using Idx = std::vector<std::size_t>;

TEST(Prototype, Examples) {
    EXPECT_EQ(air::compute_prototype(Matrix::from_rows({{1, 0}, {0, 1}})), (std::vector<double>{0.5, 0.5}));
    EXPECT_EQ(air::compute_prototype(Matrix::from_rows({{3, 4}})), (std::vector<double>{3, 4}));
    EXPECT_EQ(air::compute_prototype(Matrix::from_rows({{1, 1}, {-1, -1}})), (std::vector<double>{0, 0}));
    EXPECT_THROW(air::compute_prototype(Matrix(0, 2)), air::Error);
}

TEST(TopQ, Examples) {
    const auto h = Matrix::from_rows({{0, 0}, {10, 0}, {0, 1}});
    const auto all = air::select_top_q(h, 3);
    EXPECT_EQ(all.selected_indices, (Idx{0, 1, 2}));
    EXPECT_EQ(all.h_prime, h);
    EXPECT_EQ(air::select_top_q(h, 1).selected_indices, (Idx{1}));
    EXPECT_EQ(air::select_top_q(Matrix::from_rows({{1, 0}, {-1, 0}}), 1).selected_indices, (Idx{0}));
}

TEST(TopQ, OutOfRange) {
    const auto h = Matrix::from_rows({{0, 0}, {1, 0}});
    EXPECT_THROW(air::select_top_q(h, 0), air::Error);
    EXPECT_THROW(air::select_top_q(h, 3), air::Error);
    bool clamped = false;
    EXPECT_EQ(air::select_top_q_clamped(h, 5, &clamped).selected_indices.size(), 2u);
    EXPECT_TRUE(clamped);
}

TEST(TopQ, MatchesSortOracleWithTies) {
    std::mt19937_64 rng(500);
    for (int t = 0; t < 500; ++t) {
        const std::size_t k = 1 + rng() % 64, d = 1 + rng() % 8;
        auto h = oracle::random_matrix(k, d, rng);
        // Duplicate rows give exactly equal distances.
        for (std::size_t r = 0; r < k / 3; ++r) {
            const std::size_t src = rng() % k, dst = rng() % k;
            for (std::size_t j = 0; j < d; ++j) h(dst, j) = h(src, j);
        }
        const std::size_t q = 1 + rng() % k;
        const auto got = air::select_top_q(h, q);
        EXPECT_EQ(got.selected_indices, oracle::brute_top_q(h, q));
        EXPECT_EQ(got.h_prime, air::gather_rows(h, got.selected_indices));
    }
}

TEST(TopQ, TranslationInvariance) {
    std::mt19937_64 rng(501);
    for (int t = 0; t < 100; ++t) {
        const std::size_t k = 2 + rng() % 40;
        const auto h = oracle::random_matrix(k, 6, rng);
        auto shifted = h;
        // Power-of-two shifts keep the float arithmetic exact.
        const float shift = static_cast<float>(std::ldexp(1.0, static_cast<int>(rng() % 4)));
        for (std::size_t i = 0; i < k; ++i)
            for (auto& x : shifted.row(i)) x += shift;
        const std::size_t q = 1 + rng() % k;
        EXPECT_EQ(air::select_top_q(h, q).selected_indices, air::select_top_q(shifted, q).selected_indices);
    }
}

TEST(TopQ, NestedInQ) {
    std::mt19937_64 rng(502);
    const auto h = oracle::random_matrix(40, 5, rng);
    for (std::size_t q = 1; q < 40; ++q) {
        const auto a = air::select_top_q(h, q).selected_indices;
        const auto b = air::select_top_q(h, q + 1).selected_indices;
        EXPECT_TRUE(std::includes(b.begin(), b.end(), a.begin(), a.end()));
    }
}
