#include "raptor/reduction.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace raptor;
using raptor::testing::random_tensor;

TEST(Projection, EntriesFollowTheProjectionStream) {
    const auto r = gen_projection(3, 5, 17);
    const CounterRng rng(17, RngStream::Projection);
    for (std::size_t k = 0; k < 3; ++k)
        for (std::size_t l = 0; l < 5; ++l)
            EXPECT_FLOAT_EQ(r(k, l), static_cast<float>(rng.normal(k * 5 + l) / std::sqrt(3.0)));
    const auto u = gen_projection(3, 5, 17, ScaleMode::Unit);
    EXPECT_FLOAT_EQ(u(2, 4), static_cast<float>(rng.normal(14)));
}

TEST(Projection, RejectsZeroShape) {
    EXPECT_THROW(gen_projection(0, 4, 0), Error);
    EXPECT_THROW(gen_projection(4, 0, 0), Error);
}

TEST(Projection, ScaleModeParsing) {
    EXPECT_EQ(parse_scale_mode("unit"), ScaleMode::Unit);
    EXPECT_EQ(parse_scale_mode("invsqrtk"), ScaleMode::InvSqrtK);
    EXPECT_THROW(parse_scale_mode("half"), Error);
}

TEST(MeanPool, AveragesOverSlices) {
    const auto t = random_tensor(Axis::Axial, 4, 2, 3, 1);
    const auto p = mean_pool(t);
    for (std::size_t q = 0; q < 4; ++q)
        for (std::size_t c = 0; c < 3; ++c) {
            double s = 0;
            for (std::size_t j = 0; j < 4; ++j) s += t.at(j, q, c);
            EXPECT_NEAR(p.at(q, c), s / 4, 1e-6);
        }
}

TEST(Project, AppliesRToEveryPatch) {
    const auto p = mean_pool(random_tensor(Axis::Axial, 2, 3, 6, 2));
    const auto r = gen_projection(4, 6, 3);
    const auto out = project(p, r);
    ASSERT_EQ(out.values.size(), 9u * 4);
    for (std::size_t q = 0; q < 9; ++q)
        for (std::size_t k = 0; k < 4; ++k) {
            double s = 0;
            for (std::size_t l = 0; l < 6; ++l) s += static_cast<double>(r(k, l)) * p.at(q, l);
            EXPECT_NEAR(out.at(k, q), s, 1e-5);
        }
    EXPECT_THROW(project(p, gen_projection(4, 5, 3)), Error);
}

// Averaging then projecting equals projecting each slice then averaging.
TEST(Project, CommutesWithMeanPooling) {
    double worst = 0;
    for (std::uint64_t s = 0; s < 50; ++s) {
        const auto t = random_tensor(Axis::Coronal, 8, 2, 32, s);
        const auto r = gen_projection(10, 32, s + 100);
        const auto pooled_then = project(mean_pool(t), r);
        std::vector<double> acc(pooled_then.values.size(), 0.0);
        for (std::uint32_t j = 0; j < t.slices; ++j) {
            TokenTensor one(t.axis, 1, t.grid, t.dim, {});
            std::copy(t.slice(j).begin(), t.slice(j).end(), one.values.begin());
            const auto pj = project(mean_pool(one), r);
            for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += pj.values[i] / 8.0;
        }
        double num = 0, den = 0;
        for (std::size_t i = 0; i < acc.size(); ++i) {
            num += (acc[i] - pooled_then.values[i]) * (acc[i] - pooled_then.values[i]);
            den += acc[i] * acc[i];
        }
        worst = std::max(worst, std::sqrt(num / den));
    }
    EXPECT_LE(worst, 1e-5);
}

TEST(Embedding, LengthIsAxesTimesKTimesPatches) {
    EXPECT_EQ(embedding_length(AxisMask::all(), 100, 16), 76800u);
    EXPECT_EQ(embedding_length(AxisMask::parse("a"), 100, 16), 25600u);
    EXPECT_EQ(embedding_length(AxisMask::parse("cs"), 10, 4), 320u);
}

TEST(Embedding, FlattensAxisThenPatchThenComponent) {
    std::vector<TokenTensor> ts;
    for (Axis a : kAllAxes) ts.push_back(random_tensor(a, 3, 2, 5, 10 + axis_index(a)));
    const auto r = gen_projection(4, 5, 1);
    const auto e = raptor_embed(ts, r, AxisMask::parse("as"), "v");
    ASSERT_EQ(e.vector.size(), 2u * 4 * 4);
    EXPECT_EQ(e.meta.volume_id, "v");
    EXPECT_EQ(e.meta.k, 4u);
    EXPECT_EQ(e.meta.grid, 2u);
    const auto sag = project(mean_pool(ts[2]), r);
    for (std::size_t q = 0; q < 4; ++q)
        for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(e.vector[16 + q * 4 + k], sag.at(k, q));
}

TEST(Embedding, IdentityProjectionReturnsPooledTokens) {
    const auto t = random_tensor(Axis::Axial, 3, 2, 4, 5);
    const auto e = raptor_embed(std::span(&t, 1), ProjectionMatrix::identity(4), AxisMask::parse("a"));
    const auto p = mean_pool(t);
    for (std::size_t i = 0; i < p.values.size(); ++i) EXPECT_EQ(e.vector[i], p.values[i]);
}

TEST(Embedding, MissingAxisAndMismatchedShapes) {
    const auto a = random_tensor(Axis::Axial, 3, 2, 4, 5);
    const auto c = random_tensor(Axis::Coronal, 3, 3, 4, 5);
    const auto r = gen_projection(2, 4, 0);
    try {
        raptor_embed(std::span(&a, 1), r, AxisMask::parse("ac"));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::AxisMissing);
    }
    std::vector<TokenTensor> both{a, c};
    try {
        raptor_embed(both, r, AxisMask::parse("ac"));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DimMismatch);
    }
}

TEST(Pca, ScoresMatchFitAndNeedEnoughSamples) {
    std::vector<PooledTokens> set;
    for (std::uint64_t i = 0; i < 12; ++i) set.push_back(mean_pool(random_tensor(Axis::Axial, 2, 2, 6, i)));
    const auto red = pca_reduce(set, 3);
    ASSERT_EQ(red.fits.size(), 4u);
    Eigen::MatrixXd x(12, 6);
    for (int i = 0; i < 12; ++i)
        for (int c = 0; c < 6; ++c) x(i, c) = set[i].at(1, c);
    const auto scores = red.fits[1].transform(x);
    for (int i = 0; i < 12; ++i)
        for (int c = 0; c < 3; ++c) EXPECT_NEAR(red.row(i)[1 * 3 + c], scores(i, c), 1e-5);
    EXPECT_THROW(pca_reduce(std::span(set).first(2), 3), Error);
}

TEST(Pca, ComponentsAreOrthonormalAndSorted) {
    const auto x = Eigen::MatrixXd::Random(40, 5).eval();
    const auto fit = fit_pca(x, 5);
    EXPECT_TRUE((fit.components.transpose() * fit.components).isIdentity(1e-10));
    for (int i = 1; i < 5; ++i) EXPECT_GE(fit.eigenvalues(i - 1), fit.eigenvalues(i));
    EXPECT_NEAR(fit.explained_ratio(5), 1.0, 1e-12);
    EXPECT_TRUE(fit.reconstruct(fit.transform(x)).isApprox(x, 1e-10));
}

TEST(Bench, ReportsOneRowPerEdgeAndK) {
    EncoderSpec s;
    s.patch_size = 4;
    s.token_dim = 8;
    s.input_resolution = 8;
    const std::vector<std::uint32_t> edges{8, 16}, ks{2, 3};
    const auto rows = bench_embed(edges, ks, 1, s);
    ASSERT_EQ(rows.size(), 4u);
    EXPECT_EQ(rows[3].volume_edge, 16u);
    EXPECT_EQ(rows[3].k, 3u);
    for (const auto& r : rows) EXPECT_NEAR(r.total_ms, r.encode_ms + r.pool_ms + r.project_ms, 1e-9);
}
