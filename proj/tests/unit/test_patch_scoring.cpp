#include <gtest/gtest.h>

#include <random>

#include "air/error.hpp"
#include "air/parallel.hpp"
#include "air/patch_scoring.hpp"
#include "oracles.hpp"

using air::Matrix;
using Idx = std::vector<std::size_t>;

namespace {

std::vector<air::PatchScore> scores_of(std::initializer_list<double> d) {
    std::vector<air::PatchScore> s;
    std::size_t i = 0;
    for (double x : d) s.push_back({i++, x, x, true, 0.1, 1});
    return s;
}

}  // namespace

TEST(ScorePatch, IdenticalRowsGiveZeroDistance) {
    std::mt19937_64 rng(1);
    const auto h = oracle::random_matrix(6, 8, rng);
    air::ScoringOptions o;
    o.epsilon = air::EpsilonSpec::relative_to_mean(1e-3);
    const auto s = air::score_patch(h, {0, h}, o);
    EXPECT_NEAR(s.d_ot, 0.0, 1e-4);
    EXPECT_GE(s.d_cos, 0.0);
    EXPECT_LE(s.d_ot, s.d_cos + 1e-9);
}

TEST(ScorePatch, OrthogonalPatch) {
    const auto h = Matrix::from_rows({{1, 0, 0, 0}, {2, 0, 0, 0}});
    const auto p = Matrix::from_rows({{0, 1, 0, 0}, {0, 0, 3, 0}, {0, 0, 0, 1}});
    const auto s = air::score_patch(h, {4, p});
    EXPECT_NEAR(s.d_ot, 1.0, 1e-7);
    EXPECT_NEAR(s.d_cos, 1.0, 1e-7);
    EXPECT_EQ(s.index, 4u);
}

TEST(ScorePatch, AgreesWithReferenceSinkhorn) {
    std::mt19937_64 rng(20240);
    const auto h = oracle::random_matrix(8, 16, rng);
    const auto p = oracle::random_matrix(8, 16, rng);
    std::vector<double> c(64);
    for (std::size_t i = 0; i < 8; ++i)
        for (std::size_t j = 0; j < 8; ++j) c[i * 8 + j] = float(oracle::naive_cosine_cost(h, i, p, j));
    const auto ref = oracle::reference_sinkhorn(c, 8, 8, 0.05, 1e-10);
    ASSERT_LE(ref.error, 1e-10);
    air::ScoringOptions o;
    o.epsilon = air::EpsilonSpec::absolute(0.05);
    o.sinkhorn.tol = 1e-10;
    o.sinkhorn.max_iter = 100000;
    const auto s = air::score_patch(h, {0, p}, o);
    EXPECT_TRUE(s.converged);
    EXPECT_NEAR(s.d_ot, ref.cost, 1e-6);
}

TEST(ScorePatch, ShapeMismatch) {
    try {
        air::score_patch(Matrix(2, 3), {0, Matrix(2, 4)});
        FAIL();
    } catch (const air::Error& e) {
        EXPECT_EQ(e.code(), air::ErrorCode::Shape);
    }
}

TEST(ScorePatch, PositiveScaleInvariance) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.1, 10.0);
    for (int t = 0; t < 20; ++t) {
        const auto h = oracle::random_matrix(10, 12, rng);
        const auto p = oracle::random_matrix(7, 12, rng);
        auto hs = h, ps = p;
        for (std::size_t i = 0; i < hs.rows(); ++i) {
            const float k = float(u(rng));
            for (auto& x : hs.row(i)) x *= k;
        }
        for (std::size_t i = 0; i < ps.rows(); ++i) {
            const float k = float(u(rng));
            for (auto& x : ps.row(i)) x *= k;
        }
        const auto a = air::score_patch(h, {0, p}), b = air::score_patch(hs, {0, ps});
        EXPECT_NEAR(a.d_ot, b.d_ot, 1e-6);
        EXPECT_NEAR(a.d_cos, b.d_cos, 1e-6);
    }
}

TEST(ScorePatches, ParallelMatchesSerialBitwise) {
    std::mt19937_64 rng(4);
    const auto h = oracle::random_matrix(20, 16, rng);
    std::vector<air::PatchEmbedding> patches;
    for (std::size_t m = 0; m < 9; ++m) patches.push_back({m, oracle::random_matrix(5 + m, 16, rng)});
    const auto ref = air::serial::score_patches(h, patches);
    for (int threads : {1, 3, 8}) {
        air::ThreadScope scope(threads);
        const auto got = air::score_patches(h, patches);
        ASSERT_EQ(got.size(), ref.size());
        for (std::size_t i = 0; i < ref.size(); ++i) {
            EXPECT_EQ(got[i].d_ot, ref[i].d_ot);
            EXPECT_EQ(got[i].d_cos, ref[i].d_cos);
            EXPECT_LE(got[i].d_ot, got[i].d_cos + 1e-9);
        }
    }
}

TEST(SelectPatches, Examples) {
    const auto s = scores_of({0.03, 0.08, 0.05});
    EXPECT_EQ(air::select_patches(s, 0.06), (Idx{0, 2}));
    EXPECT_TRUE(air::select_patches(s, -1).empty());
    EXPECT_EQ(air::select_patches(s, 2), (Idx{0, 1, 2}));
    EXPECT_EQ(air::select_patches(s, 0.05), (Idx{0, 2}));
}

TEST(SelectPatches, MonotoneInTau) {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(0.0, 0.3);
    for (int t = 0; t < 100; ++t) {
        std::vector<air::PatchScore> s(1 + rng() % 20);
        for (std::size_t i = 0; i < s.size(); ++i) s[i] = {i, u(rng), 1.0, true, 0.1, 1};
        std::vector<double> taus(8);
        for (auto& x : taus) x = u(rng);
        std::sort(taus.begin(), taus.end());
        for (std::size_t k = 1; k < taus.size(); ++k) {
            const auto a = air::select_patches(s, taus[k - 1]), b = air::select_patches(s, taus[k]);
            EXPECT_TRUE(std::includes(b.begin(), b.end(), a.begin(), a.end()));
        }
    }
}

TEST(FusePatches, Examples) {
    const std::vector<air::PatchEmbedding> p{{0, Matrix::from_rows({{1, 1}, {2, 2}})},
                                             {1, Matrix::from_rows({{3, 3}, {4, 4}, {5, 5}})}};
    EXPECT_EQ(air::fuse_patches(p, Idx{1}, 2), p[1].tokens);
    const auto none = air::fuse_patches(p, Idx{}, 2);
    EXPECT_EQ(none.rows(), 0u);
    EXPECT_EQ(none.cols(), 2u);
    const auto both = air::fuse_patches(p, Idx{0, 1}, 2);
    EXPECT_EQ(both.rows(), 5u);
    EXPECT_EQ(both(0, 0), 1.0f);
    EXPECT_EQ(both(4, 0), 5.0f);
    EXPECT_THROW(air::fuse_patches(p, Idx{7}, 2), air::Error);
}
