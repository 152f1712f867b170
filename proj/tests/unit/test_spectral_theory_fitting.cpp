#include "brickdesign/fitting.hpp"
#include "brickdesign/spectral.hpp"
#include "brickdesign/theory.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace brickdesign;

namespace {

// Dense matrix of a reduced channel, column by column.
CMatrix dense_reduced(const ReducedChannel& ch) {
    const auto n = static_cast<Eigen::Index>(ch.dimension());
    CMatrix m(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        CVector e = CVector::Zero(n);
        e[j] = 1.0;
        ch.apply(e.data());
        m.col(j) = e;
    }
    return m;
}

double dense_deflated_lambda1(const CMatrix& b, const CMatrix& fixed) {
    // Orthonormal basis of the fixed space, then (1-Π) B (1-Π).
    Eigen::JacobiSVD<CMatrix> svd(fixed, Eigen::ComputeThinU);
    Eigen::Index r = 0;
    for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
        if (svd.singularValues()[i] > 1e-10 * svd.singularValues()[0]) ++r;
    const CMatrix q = svd.matrixU().leftCols(r);
    const CMatrix proj = CMatrix::Identity(b.rows(), b.cols()) - q * q.adjoint();
    Eigen::ComplexEigenSolver<CMatrix> es(proj * b * proj, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

std::vector<double> rayleigh_samples(std::size_t n, double sigma, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> g(0.0, sigma);
    std::vector<double> out(n);
    for (auto& v : out) v = std::hypot(g(rng), g(rng));
    return out;
}

}  // namespace

TEST(Spectral, MatchesDenseEigenvaluesOnSyntheticOperator) {
    // B = S diag(1, 1, λ...) S^{-1} with the unit eigenvectors given as deflation.
    Rng rng(3);
    std::normal_distribution<double> n;
    const int dim = 60;
    CMatrix s(dim, dim);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) s(i, j) = Complex(n(rng), n(rng));
    // Make the unit eigenvectors orthogonal to the rest so deflation is exact.
    Eigen::HouseholderQR<CMatrix> qr(s);
    const CMatrix q = qr.householderQ();
    CVector diag(dim);
    diag[0] = diag[1] = 1.0;
    for (int i = 2; i < dim; ++i) diag[i] = 0.9 * std::pow(0.93, i - 2) * std::exp(Complex(0, 0.7 * i));
    CMatrix upper = CMatrix::Zero(dim, dim);
    for (int i = 2; i < dim; ++i)
        for (int j = i + 1; j < dim; ++j) upper(i, j) = 0.05 * Complex(n(rng), n(rng));
    const CMatrix b = q * (CMatrix(diag.asDiagonal()) + upper) * q.adjoint();
    std::vector<CVector> unit{q.col(0), q.col(1)};
    const DenseSpan span(unit);
    LinearOp op = [&](const CVector& in, CVector& out) { out = b * in; };
    SpectralOptions opts;
    opts.krylov_dim = 30;
    const SpectralResult r = subleading_eigenvalue(op, span, dim, opts);
    EXPECT_TRUE(r.converged);
    EXPECT_EQ(r.unit_multiplicity, 2);
    EXPECT_NEAR(r.lambda1, 0.9, 1e-8);
}

TEST(Spectral, SchurReorderingKeepsSimilarity) {
    Rng rng(4);
    std::normal_distribution<double> n;
    CMatrix a(8, 8);
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) a(i, j) = Complex(n(rng), n(rng));
    Eigen::ComplexSchur<CMatrix> schur(a);
    CMatrix t = schur.matrixT(), z = schur.matrixU();
    detail::sort_schur(t, z);
    EXPECT_LT((z * t * z.adjoint() - a).norm(), 1e-10);
    for (int i = 0; i + 1 < 8; ++i) EXPECT_GE(std::abs(t(i, i)) + 1e-12, std::abs(t(i + 1, i + 1)));
    EXPECT_LT(CMatrix(t.triangularView<Eigen::StrictlyLower>()).norm(), 1e-12);
}

TEST(Spectral, ReducedSpectrumMatchesDenseOracle) {
    for (double p : {0.3, 0.7}) {
        const ReducedChannel ch = uniform_reduced_channel(averaged_du_gate(2, p), 3);
        const CMatrix dense = dense_reduced(ch);
        const ProductSpan span = fixed_point_span(ch.basis, ch.L);
        CMatrix fixed(dense.rows(), span.size());
        for (int i = 0; i < span.size(); ++i) fixed.col(i) = span.basis_vector(i);
        const double oracle = dense_deflated_lambda1(dense, fixed);
        const SpectralResult r = reduced_spectrum(ch);
        EXPECT_TRUE(r.converged);
        EXPECT_EQ(r.unit_multiplicity, 2);
        EXPECT_NEAR(r.lambda1, oracle, 1e-8) << "p=" << p;
    }
}

TEST(Spectral, PerfectTensorThirdMomentSmallSystem) {
    // d = 3, k = 3, L = 2 perfect tensor: |λ1| = 1/8.
    const Gate g = build_perfect_tensor(3);
    const ReducedChannel ch = uniform_reduced_channel(average_gate(g, build_perm_basis(3, 3)), 2);
    const SpectralResult r = reduced_spectrum(ch);
    EXPECT_TRUE(r.converged);
    EXPECT_NEAR(r.lambda1, 0.125, 1e-6);
    EXPECT_EQ(r.unit_multiplicity, 6);
}

TEST(Spectral, PredictedLambda) {
    EXPECT_NEAR(predicted_lambda1(2, 0.2, 2), 0.64, 1e-15);
    EXPECT_NEAR(predicted_lambda1(2, 0.8, 2), 0.25, 1e-15);
    EXPECT_NEAR(predicted_lambda1(3, 0.0, 3, 0.2), 0.2, 1e-15);
    EXPECT_THROW(predicted_lambda1(3, 0.0, 3), std::invalid_argument);
}

TEST(Spectral, RejectsEmptyDeflation) {
    LinearOp op = [](const CVector& in, CVector& out) { out = in; };
    EXPECT_THROW(subleading_eigenvalue(op, DenseSpan({}), 4), std::invalid_argument);
}

TEST(Theory, HaarFramePotential) {
    EXPECT_NEAR(theory::haar_frame_potential(2, 1, 1), 0.25, 1e-15);
    EXPECT_NEAR(theory::haar_frame_potential(2, 1, 2), 0.1, 1e-15);
    EXPECT_EQ(theory::haar_frame_potential_inverse(2, 4, 2), theory::BigInt(257 * 256 / 2));
    EXPECT_THROW(theory::haar_frame_potential(1, 1, 1), std::invalid_argument);
    // The exact potential approaches k! d^{-2kL} from below.
    for (int L : {10, 12}) {
        const double exact = theory::haar_frame_potential(2, L, 2);
        const double asym = theory::gamma_moment(std::pow(2.0, -L), 2, 2, 4);
        EXPECT_LT(std::abs(exact / asym - 1.0), 1e-3);
    }
}

TEST(Theory, HaarMonteCarloFramePotential) {
    Rng rng(77);
    std::normal_distribution<double> n;
    const int samples = 10000;
    std::vector<CVector> states(samples);
    for (auto& s : states) {
        s.resize(4);
        for (int i = 0; i < 4; ++i) s[i] = Complex(n(rng), n(rng));
        s.normalize();
    }
    for (int k = 1; k <= 3; ++k) {
        double sum = 0.0, sum2 = 0.0;
        for (int i = 0; i + 1 < samples; i += 2) {
            const double v = std::pow(std::norm(states[i].dot(states[i + 1])), k);
            sum += v;
            sum2 += v * v;
        }
        const double m = samples / 2.0, mean = sum / m;
        const double se = std::sqrt((sum2 / m - mean * mean) / m);
        EXPECT_NEAR(mean, theory::haar_frame_potential(2, 1, k), 3.0 * se) << "k=" << k;
    }
}

TEST(Theory, TraceMomentsAndCatalan) {
    const int catalan[] = {1, 1, 2, 5, 14, 42, 132};
    for (int k = 1; k <= 6; ++k) {
        EXPECT_EQ(theory::catalan(k), theory::BigInt(catalan[k]));
        EXPECT_EQ(theory::trace_moment_exact(2, k), theory::catalan(k));
    }
    for (int k = 1; k <= 4; ++k)
        for (int d = k; d <= 6; ++d) EXPECT_EQ(theory::trace_moment_exact(d, k), theory::factorial(k));
}

TEST(Theory, Rates) {
    EXPECT_NEAR(theory::haar_circuit_rate(2), 0.892574, 5e-7);
    EXPECT_NEAR(theory::du_early_rate(theory::EarlyCase::PauliBoundary, 2, 2), std::log(4.0), 1e-15);
    EXPECT_NEAR(theory::du_early_rate(theory::EarlyCase::HaarBoundary, 2, 2), std::log(8.0), 1e-12);
    for (int d : {2, 3, 4})
        for (int k = 1; k <= 5; ++k)
            EXPECT_GE(theory::du_early_rate(theory::EarlyCase::HaarBoundary, d, k) + 1e-12,
                      theory::du_early_rate(theory::EarlyCase::HaarBoundary, d, 1));
}

TEST(Theory, GammaMomentsAndDesignTime) {
    EXPECT_NEAR(theory::gamma_moment(1, 2, 2, 2), 1.0, 1e-14);
    EXPECT_NEAR(theory::gamma_moment(3, 1.5, 2.5, 0), 1.0, 1e-14);
    const double a = std::pow(2.0, -3);
    for (int k = 1; k <= 3; ++k)
        EXPECT_NEAR(theory::gamma_moment(a, 2, 2, 2 * k) / (std::tgamma(k + 1.0) * std::pow(2.0, -6.0 * k)), 1.0,
                    1e-12);
    EXPECT_THROW(theory::gamma_moment(-1, 2, 2, 1), std::invalid_argument);
    const double t = theory::design_time(1e-3, 2, 8, 2, 0.5);
    EXPECT_NEAR(t, (32 * std::log(2.0) - std::log(1e-3)) / (2 * std::log(2.0)), 1e-12);
    EXPECT_THROW(theory::design_time(1e-3, 2, 8, 2, 1.5), std::invalid_argument);
}

TEST(Fitting, SyntheticTwoSlopeRecovered) {
    std::vector<double> t, y;
    for (int i = 0; i <= 30; ++i) {
        t.push_back(i);
        const double ln = i <= 10 ? 12.0 - 1.4 * i : 12.0 - 14.0 - 0.6 * (i - 10);
        y.push_back(std::exp(ln));
    }
    const TwoStepFit f = fit_two_step(t, y);
    EXPECT_TRUE(f.breakpoint);
    EXPECT_NEAR(f.r1, 1.4, 1e-9);
    EXPECT_NEAR(f.c1, 12.0, 1e-9);
    EXPECT_NEAR(f.r2, 0.6, 1e-9);
    EXPECT_NEAR(f.t_star, 10.0, 1e-12);
}

TEST(Fitting, SingleSlopeHasNoBreakpoint) {
    std::vector<double> t, y;
    for (int i = 0; i < 12; ++i) {
        t.push_back(i);
        y.push_back(std::exp(3.0 - 0.8 * i));
    }
    const TwoStepFit f = fit_two_step(t, y);
    EXPECT_FALSE(f.breakpoint);
    EXPECT_NEAR(f.r1, 0.8, 1e-10);
    EXPECT_NEAR(f.r2, 0.8, 1e-10);
}

TEST(Fitting, NoiseFloorAndMinimumPoints) {
    std::vector<double> t, y;
    for (int i = 0; i < 20; ++i) {
        t.push_back(i);
        y.push_back(i < 8 ? std::exp(-2.0 * i) : 1e-14);
    }
    TwoStepOptions opts;
    opts.noise_floor = 1e-10;
    const TwoStepFit f = fit_two_step(t, y, {}, opts);
    EXPECT_EQ(f.used_points, 8u);
    EXPECT_NEAR(f.r1, 2.0, 1e-10);
    y.assign(20, 1e-20);
    EXPECT_THROW(fit_two_step(t, y, {}, opts), std::invalid_argument);
    opts.t_min = 2.0;
    y.clear();
    for (int i = 0; i < 20; ++i) y.push_back(i < 2 ? 1e6 : std::exp(-0.5 * i));
    const TwoStepFit g = fit_two_step(t, y, {}, opts);
    EXPECT_NEAR(g.r1, 0.5, 1e-10);
}

TEST(Fitting, RayleighSamplesGiveTwoTwo) {
    const auto x = rayleigh_samples(100000, 0.3, 5);
    const GammaFit f = fit_overlap_distribution(x);
    EXPECT_TRUE(f.converged);
    EXPECT_LT(f.iterations, 100);
    EXPECT_NEAR(f.p, 2.0, 0.05);
    EXPECT_NEAR(f.q, 2.0, 0.05);
    EXPECT_NEAR(f.a, 0.3 * std::sqrt(2.0), 0.01);
    EXPECT_LT(f.ks, 0.01);
}

TEST(Fitting, FittedMomentsMatchEmpirical) {
    // A non-Rayleigh law: |X| of a real Gaussian is generalized gamma with p = 2, q = 1.
    Rng rng(6);
    std::normal_distribution<double> g(0.0, 2.0);
    std::vector<double> x(50000);
    for (auto& v : x) v = std::abs(g(rng));
    const GammaFit f = fit_overlap_distribution(x);
    EXPECT_NEAR(f.p, 2.0, 0.05);
    EXPECT_NEAR(f.q, 1.0, 0.05);
    for (int r : {2, 4}) {
        double sum = 0.0, sum2 = 0.0;
        for (double v : x) {
            const double m = std::pow(v, r);
            sum += m;
            sum2 += m * m;
        }
        const double n = static_cast<double>(x.size());
        const double mean = sum / n, se = std::sqrt((sum2 / n - mean * mean) / n);
        EXPECT_NEAR(theory::gamma_moment(f.a, f.p, f.q, r), mean, 3.0 * se) << "r=" << r;
    }
}

TEST(Fitting, GammaPdfNormalizedAndCdfConsistent) {
    const double a = 0.7, p = 1.6, q = 2.4;
    double integral = 0.0;
    const double h = 1e-4;
    for (double x = h / 2; x < 8.0; x += h) integral += gamma_pdf(x, a, p, q) * h;
    EXPECT_NEAR(integral, 1.0, 1e-6);
    EXPECT_NEAR(gamma_cdf(8.0, a, p, q), 1.0, 1e-8);
    double partial = 0.0;
    for (double x = h / 2; x < 0.9; x += h) partial += gamma_pdf(x, a, p, q) * h;
    EXPECT_NEAR(gamma_cdf(0.9, a, p, q), partial, 1e-6);
}

TEST(Fitting, GammaFitRejectsBadInput) {
    EXPECT_THROW(fit_overlap_distribution(std::vector<double>(500, 0.1)), std::invalid_argument);
    EXPECT_THROW(fit_overlap_distribution(std::vector<double>(2000, 0.1)), std::invalid_argument);
    std::vector<double> with_zero = rayleigh_samples(2000, 1.0, 1);
    with_zero[3] = 0.0;
    EXPECT_THROW(fit_overlap_distribution(with_zero), std::invalid_argument);
}

TEST(Fitting, RateVersusDeltaRecoversExponential) {
    std::vector<double> delta{0.0, 0.05, 0.1, 0.15, 0.2, 0.25};
    std::vector<double> rate;
    for (double d : delta) rate.push_back(std::exp(-4.53 * d + 0.3));
    const RateTrend tr = rate_vs_delta(delta, rate);
    EXPECT_NEAR(tr.slope, -4.53, 1e-10);
    EXPECT_NEAR(tr.intercept, 0.3, 1e-10);
    EXPECT_EQ(tr.n_points, 5u);
    ASSERT_EQ(tr.excluded.size(), 1u);
    EXPECT_LT(tr.slope_ci, 1e-8);
    EXPECT_THROW(rate_vs_delta({0.1, 0.2}, {1.0, 0.5}), std::invalid_argument);
}

TEST(Series, CsvRoundTrip) {
    std::vector<MomentRow> rows{{0, 2, 1.0, 0.0, 527.0, "enumerate", 1},
                                {1, 2, 0.1234567890123456789, 1e-5, 0.5, "sample", 1000}};
    std::ostringstream os;
    write_series_csv(os, rows);
    std::istringstream is(os.str());
    const auto back = read_series_csv(is);
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[1].F, rows[1].F);
    EXPECT_EQ(back[1].method, "sample");
    EXPECT_EQ(back[1].n_samples, 1000u);
    std::istringstream bad("t,k,F,F_stderr,delta2,method,n_samples\n0,2,1,0,x,perm,0\n");
    try {
        read_series_csv(bad);
        FAIL() << "expected an error";
    } catch (const std::exception& e) {
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
    }
}
