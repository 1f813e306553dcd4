#include "jcov/rng.hpp"
#include "jcov/sampling.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace jcov;

// Known-answer vectors of Philox4x32-10 (Random123 kat_vectors).
TEST(Philox, KnownAnswers) {
    using A = std::array<std::uint32_t, 4>;
    EXPECT_EQ(Philox4x32::block({0, 0, 0, 0}, {0, 0}), (A{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
    EXPECT_EQ(Philox4x32::block({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}),
              (A{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
    EXPECT_EQ(Philox4x32::block({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}),
              (A{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(Philox, StreamsAreDistinctAndRepeatable) {
    auto a = substream(42, 3, 7), b = substream(42, 3, 7);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(a(), b());
    auto e = substream(42, 3, 7);
    auto f = substream(42, 3, 8);
    auto g = substream(43, 3, 7);
    int same_f = 0, same_g = 0;
    for (int i = 0; i < 64; ++i) {
        const auto x = e();
        same_f += x == f();
        same_g += x == g();
    }
    EXPECT_LT(same_f, 2);
    EXPECT_LT(same_g, 2);
    auto h = substream(1, 0, 0);
    h.discard(5);
    auto k = substream(1, 0, 0);
    for (int i = 0; i < 5; ++i) k();
    EXPECT_EQ(h(), k());
}

TEST(Gaussian, EmpiricalCovarianceOfIdentity) {
    const Index p = 4, n = 100000;
    const Matrix x = sample_gaussian(SymmetricMatrix::identity(p), n, 5);
    const Matrix c = x * x.transpose() / static_cast<double>(n);
    const double band = 5.0 * std::sqrt(2.0 / static_cast<double>(n));
    EXPECT_LE((c - Matrix::Identity(p, p)).cwiseAbs().maxCoeff(), band);
}

TEST(Gaussian, EdgeCasesAndDeterminism) {
    const auto q = SymmetricMatrix::identity(3);
    EXPECT_EQ(sample_gaussian(q, 0, 1).cols(), 0);
    EXPECT_EQ(sample_gaussian(q, 10, 9), sample_gaussian(q, 10, 9));
    Matrix bad = Matrix::Identity(2, 2);
    bad(1, 1) = -1;
    EXPECT_THROW(sample_gaussian(SymmetricMatrix::from_dense(bad), 5, 1), std::domain_error);
}

TEST(Scm, Cases) {
    Vector x(3);
    x << 1, 2, 3;
    EXPECT_TRUE(scm(Matrix(x)).matrix().isApprox(x * x.transpose()));
    const Index p = 4;
    const Matrix cols = std::sqrt(static_cast<double>(p)) * Matrix::Identity(p, p);
    EXPECT_TRUE(scm(cols).matrix().isApprox(Matrix::Identity(p, p)));
    EXPECT_THROW(scm(Matrix(3, 0)), std::invalid_argument);
}

TEST(Scm, BartlettMatchesDirectMoments) {
    // Same first two moments as the direct SCM: E S = Q and E||S||_F^2.
    Matrix a(3, 3);
    a << 2, 0.5, 0.1, 0.5, 1, 0.3, 0.1, 0.3, 1.5;
    const auto q = SymmetricMatrix::from_dense(a);
    const Index n = 7, draws = 20000;
    auto eng = substream(3, 0, 0);
    Matrix mean = Matrix::Zero(3, 3);
    double power = 0.0;
    for (Index t = 0; t < draws; ++t) {
        const auto s = sample_scm(q, n, eng);
        EXPECT_GE(s.eigenvalues()[0], -1e-12);
        mean += s.matrix();
        power += s.frobenius_sq();
    }
    mean /= static_cast<double>(draws);
    power /= static_cast<double>(draws);
    const double nn = static_cast<double>(n);
    const double expect = (nn + 1.0) / nn * q.frobenius_sq() + q.trace() * q.trace() / nn;
    EXPECT_LE((mean - a).cwiseAbs().maxCoeff(), 0.05);
    EXPECT_NEAR(power / expect, 1.0, 0.03);
}

TEST(ToeplitzScenario, Properties) {
    const auto sc = toeplitz_scenario(10, 55, 17);
    EXPECT_EQ(sc.model.r(), 9);
    EXPECT_EQ(static_cast<Index>(sc.covariances.size()), 55);
    const auto full = toeplitz_model(10);
    for (const auto& q : sc.covariances) {
        EXPECT_GT(q.eigenvalues()[0], 0.0);
        const Vector v = vech(q).values();
        EXPECT_LE((sc.model.project_vech(v) - v).norm(), 1e-10);
        EXPECT_LE((full.project_vech(v) - v).norm(), 1e-10);
        EXPECT_DOUBLE_EQ(q(0, 0), 1.0);
    }
    EXPECT_GE(sc.lambda_min(), 0.0);
    EXPECT_EQ(numeric_rank(Matrix(sc.measurement_matrix().colwise() - sc.model.offset())), 9);
    // Determinism.
    const auto again = toeplitz_scenario(10, 55, 17);
    EXPECT_EQ(again.measurement_matrix(), sc.measurement_matrix());
}

TEST(StructuredScenario, LiesInModel) {
    const auto sc = structured_scenario(banded_model(5, 1), 12, 4);
    for (const auto& q : sc.covariances) {
        const Vector v = vech(q).values();
        EXPECT_LE((sc.model.project_vech(v) - v).norm(), 1e-10);
        EXPECT_GT(q.eigenvalues()[0], 0.0);
    }
}

TEST(Dgp, ExtremeBetas) {
    auto s0 = dgp_initial(3, 0.0);
    s0.h(0, 0) = 2.0;
    const auto s1 = dgp_step(s0, std::uint64_t{1});
    EXPECT_TRUE(s1.h.isApprox(s0.h / s0.h.norm(), 1e-14));

    // beta = 1 forgets the past: H_1 = M M^H / ||M M^H||_F for the step's own M.
    const auto t = dgp_step(dgp_initial(3, 1.0), std::uint64_t{2});
    EXPECT_NEAR(t.h.norm(), 1.0, 1e-12);
    auto eng = substream(2, 0, slot::dgp);
    std::normal_distribution<double> z(0.0, 1.0);
    Eigen::MatrixXcd m(3, 3);
    for (Index j = 0; j < 3; ++j)
        for (Index i = 0; i < 3; ++i) {
            const double re = z(eng);
            const double im = z(eng);
            m(i, j) = {re, im};
        }
    const Eigen::MatrixXcd mm = m * m.adjoint();
    EXPECT_TRUE(t.h.isApprox(mm / mm.norm(), 1e-12));
}

TEST(Dgp, InvariantsOverManySteps) {
    auto s = dgp_initial(4, 0.01);
    EXPECT_NEAR(s.h.norm(), 1.0, 1e-15);
    auto eng = substream(9, 0, slot::dgp);
    for (int t = 0; t < 10000; ++t) {
        s = dgp_step(s, eng);
        if (t % 500 == 0 || t == 9999) {
            EXPECT_NEAR(s.h.norm(), 1.0, 1e-12);
            EXPECT_LE((s.h - s.h.adjoint()).norm(), 1e-14);
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(s.h);
            EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);
        }
    }
    EXPECT_EQ(s.t, 10000);
}

TEST(ComplexSamples, PropernessAndRealEmbedding) {
    const Index n = 100000;
    const auto x = sample_complex(Eigen::MatrixXcd::Identity(2, 2), n, std::uint64_t{3});
    const Eigen::MatrixXcd herm = x * x.adjoint() / static_cast<double>(n);
    const Eigen::MatrixXcd pseudo = x * x.transpose() / static_cast<double>(n);
    const double band = 5.0 / std::sqrt(static_cast<double>(n));
    EXPECT_LE((herm - Eigen::MatrixXcd::Identity(2, 2)).cwiseAbs().maxCoeff(), band);
    EXPECT_LE(pseudo.cwiseAbs().maxCoeff(), band);

    Eigen::MatrixXcd h(2, 2);
    h << 1.0, std::complex<double>(0.3, 0.4), std::complex<double>(0.3, -0.4), 0.8;
    const Matrix r = real_samples(sample_complex(h, n, std::uint64_t{4}));
    const Matrix c = r * r.transpose() / static_cast<double>(n);
    EXPECT_LE((c - real_embed(h).matrix()).cwiseAbs().maxCoeff(), band);
    EXPECT_EQ(sample_complex(h, 5, std::uint64_t{8}), sample_complex(h, 5, std::uint64_t{8}));
}

TEST(SamplesCsv, RoundTrip) {
    std::vector<Matrix> groups{sample_gaussian(SymmetricMatrix::identity(3), 4, 1),
                               sample_gaussian(SymmetricMatrix::identity(3), 2, 2)};
    std::ostringstream out;
    write_samples_csv(out, groups);
    EXPECT_EQ(out.str().substr(0, 48), "group,sample_index,component_1,component_2,compo");
    std::istringstream in(out.str());
    const auto back = read_samples_csv(in);
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0], groups[0]);
    EXPECT_EQ(back[1], groups[1]);
}
