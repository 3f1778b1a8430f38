#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "ddlab/covariance.hpp"
#include "ddlab/surrogate.hpp"
#include "oracles.hpp"

using namespace ddlab;

namespace {

Spectrum random_spectrum(Index d, std::uint64_t seed) {
    random::Engine eng(seed);
    std::uniform_real_distribution<double> logu(-3.0, 1.0);
    std::vector<double> e(static_cast<std::size_t>(d));
    for (double& v : e) v = std::pow(10.0, logu(eng));
    return Spectrum(std::move(e));
}

Vector random_vector(Index d, std::uint64_t seed) {
    return oracle::gaussian_matrix(d, 1, seed).col(0);
}

}  // namespace

TEST(SolveLambda, IsotropicClosedForm) {
    EXPECT_NEAR(solve_lambda(Spectrum::isotropic(100), 50.0), 1.0, 1e-12);
    for (double n : {1.0, 10.0, 37.5, 99.0}) {
        EXPECT_NEAR(solve_lambda(Spectrum::isotropic(100), n), 100.0 / n - 1.0, 1e-10 * (100.0 / n));
    }
}

TEST(SolveLambda, TwoEigenvalueQuadratic) {
    // 1/(1+l) + 2/(2+l) = 1  <=>  l^2 = 2.
    EXPECT_NEAR(solve_lambda(Spectrum({1.0, 2.0}), 1.0), std::sqrt(2.0), 1e-12);
}

TEST(SolveLambda, ResidualAndBisectionOracleProperty) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const Index d = 2 + static_cast<Index>(seed % 60);
        const Spectrum s = random_spectrum(d, seed);
        for (double frac : {0.05, 0.3, 0.5, 0.9, 0.999}) {
            const double n = std::max(0.5, frac * static_cast<double>(d));
            if (n >= static_cast<double>(d)) continue;
            const double l = solve_lambda(s, n);
            EXPECT_LT(std::abs(effective_dimension(s, l) - n), 1e-10 * n);
            const std::vector<double> eig(s.eigenvalues().begin(), s.eigenvalues().end());
            EXPECT_NEAR(l, oracle::bisect_lambda(eig, n), 1e-10 * l + 1e-300);
        }
    }
}

TEST(SolveLambda, DomainErrors) {
    EXPECT_THROW(solve_lambda(Spectrum::isotropic(5), 5.0), DomainError);
    EXPECT_THROW(solve_lambda(Spectrum::isotropic(5), 7.0), DomainError);
    EXPECT_THROW(solve_lambda(Spectrum::isotropic(5), 0.0), DomainError);
}

TEST(SurrogateParams, ThreeRegimes) {
    const Spectrum id = Spectrum::isotropic(100);
    const SurrogateParams under = surrogate_params(id, 50);
    EXPECT_NEAR(under.gamma_n, 1.0, 1e-12);
    EXPECT_NEAR(under.lambda_n, 1.0, 1e-12);
    EXPECT_NEAR(under.log_alpha_n, 100.0 * std::log(0.5), 1e-9);
    EXPECT_NEAR(under.alpha_n / std::pow(0.5, 100), 1.0, 1e-10);
    EXPECT_EQ(under.regime, Regime::under);

    const SurrogateParams at = surrogate_params(id, 100);
    EXPECT_EQ(at.lambda_n, 0.0);
    EXPECT_EQ(at.alpha_n, 1.0);
    EXPECT_EQ(at.regime, Regime::boundary);

    const SurrogateParams over = surrogate_params(id, 101);
    EXPECT_EQ(over.gamma_n, 1.0);
    EXPECT_NEAR(over.beta_n, std::exp(-1.0), 1e-16);
    EXPECT_EQ(over.regime, Regime::over);
}

TEST(SurrogateParams, InvariantsUnderRandomSpectra) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Spectrum s = random_spectrum(30, 900 + seed);
        const SurrogateParams p = surrogate_params(s, 12);
        EXPECT_NEAR(p.lambda_n * p.gamma_n, 1.0, 1e-14);
        double prod = 1.0;
        for (double t : s.eigenvalues()) prod *= t / (t + p.lambda_n);
        EXPECT_NEAR(p.alpha_n / prod, 1.0, 1e-10);
        EXPECT_GE(p.alpha_n, 0.0);
        EXPECT_LE(p.alpha_n, 1.0);
    }
}

TEST(SurrogateMse, PeakEqualsSigmaSquaredTraceInverse) {
    const Spectrum s = scale_trace_inverse(Spectrum::isotropic(100), 100.0);
    const RegressionProblem p(s, uniform_w_star(100), 1.0);
    EXPECT_NEAR(surrogate_mse(p, 100), 100.0, 1e-12);
    EXPECT_NEAR(surrogate_mse(p, 101), 100.0 * (1.0 - std::exp(-1.0)), 1e-12);
}

TEST(SurrogateMse, NoiselessIsotropicIsPureShrinkageBias) {
    const Index d = 40;
    const Vector w = random_vector(d, 3);
    const RegressionProblem p(Spectrum::isotropic(d, 2.5), w, 0.0);
    for (Index n = 1; n < d; ++n) {
        const double expected = (1.0 - static_cast<double>(n) / static_cast<double>(d)) * w.squaredNorm();
        EXPECT_NEAR(surrogate_mse(p, static_cast<double>(n)), expected, 1e-12 * w.squaredNorm());
    }
}

TEST(VarianceBias, IsotropicValues) {
    const Spectrum id = Spectrum::isotropic(100);
    EXPECT_NEAR(variance_term(id, 50), 1.0 - std::pow(2.0, -100), 1e-14);
    const Vector b = bias_factors(id, 50);
    for (Index i = 0; i < 100; ++i) EXPECT_NEAR(b(i), 0.5, 1e-14);
}

TEST(VarianceBias, RecombineToSurrogateMseOnRandomProblems) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const Index d = 3 + static_cast<Index>(seed % 50);
        const Spectrum s = random_spectrum(d, 2000 + seed);
        const Vector w = random_vector(d, 3000 + seed);
        const double sigma2 = 0.1 + static_cast<double>(seed % 7);
        const RegressionProblem p(s, w, sigma2);
        const double n = static_cast<double>(1 + seed % static_cast<std::uint64_t>(d - 1));
        const double m = surrogate_mse(p, n);
        const double recombined = sigma2 * variance_term(s, n) + w.dot(bias_factors(s, n).cwiseProduct(w));
        EXPECT_NEAR(recombined, m, 1e-12 * std::abs(m));
    }
}

TEST(VarianceBias, FiniteAndPositiveJustBelowD) {
    const double v = variance_term(Spectrum::isotropic(100), 99);
    EXPECT_TRUE(std::isfinite(v));
    EXPECT_GT(v, 0.0);
}

TEST(VarianceBias, IsotropicShrinkageIsLinearInN) {
    for (Index n = 1; n < 64; ++n) {
        const Vector b = bias_factors(Spectrum::isotropic(64, 0.3), static_cast<double>(n));
        for (Index i = 0; i < 64; ++i) EXPECT_NEAR(b(i), 1.0 - n / 64.0, 1e-12);
    }
}

TEST(VarianceBias, RequireUnderdetermined) {
    EXPECT_THROW(variance_term(Spectrum::isotropic(4), 4), DomainError);
    EXPECT_THROW(bias_factors(Spectrum::isotropic(4), 6), DomainError);
}

TEST(SurrogateMse, DoubleDescentPeakIsGlobalMaximum) {
    for (ProfileKind k : {ProfileKind::isotropic, ProfileKind::diag_exp, ProfileKind::diag_poly}) {
        const Index d = 60;
        const Spectrum s = scale_trace_inverse(make_profile_kappa(k, d, 1e4), static_cast<double>(d));
        const RegressionProblem p(s, uniform_w_star(d), 1.0);
        const double peak = surrogate_mse(p, static_cast<double>(d));
        EXPECT_NEAR(peak, static_cast<double>(d), 1e-9);
        EXPECT_LT(surrogate_mse(p, d + 1.0), peak);
        for (Index n = 1; n <= 2 * d; ++n) {
            if (n != d) EXPECT_LT(surrogate_mse(p, static_cast<double>(n)), peak) << "n = " << n;
        }
    }
}

TEST(ImplicitMean, IsotropicShrinkageIsLinear) {
    const Index d = 50;
    const Vector w = random_vector(d, 9);
    const RegressionProblem p(Spectrum::isotropic(d), w, 1.0);
    for (Index n = 1; n < d; ++n) {
        const Vector m = implicit_reg_mean(p, static_cast<double>(n));
        EXPECT_LE(oracle::max_abs(m - (static_cast<double>(n) / d) * w), 1e-12);
    }
    EXPECT_LE(oracle::max_abs(implicit_reg_mean(p, 50) - w), 1e-15);
    EXPECT_LE(oracle::max_abs(implicit_reg_mean(p, 75) - w), 1e-15);
}

TEST(ImplicitMean, OverdeterminedRecoversWStar) {
    const Spectrum s = random_spectrum(7, 10);
    const Vector w = random_vector(7, 11);
    const RegressionProblem p(s, w, 1.0);
    EXPECT_LE(oracle::max_abs(implicit_reg_mean(p, 9) - w), 1e-14);
}

TEST(ImplicitMean, TwoDimensionalHandEvaluation) {
    const RegressionProblem p(Spectrum({1.0, 2.0}), Vector::Ones(2), 1.0);
    const Vector m = implicit_reg_mean(p, 1.0);
    const double l = std::sqrt(2.0);
    // Spectrum stores eigenvalues descending: (2, 1).
    EXPECT_NEAR(m(0), 2.0 / (2.0 + l), 1e-12);
    EXPECT_NEAR(m(1), 1.0 / (1.0 + l), 1e-12);
}

TEST(SizePmf, IsotropicTwoDimensions) {
    const auto pmf = surrogate_size_pmf(MeasureSpec{Spectrum::isotropic(2)}, 1);
    ASSERT_EQ(pmf.size(), 3u);
    EXPECT_NEAR(pmf[0], 0.25, 1e-15);
    EXPECT_NEAR(pmf[1], 0.5, 1e-15);
    EXPECT_NEAR(pmf[2], 0.25, 1e-15);
}

TEST(SizePmf, MatchesElementarySymmetricFormAndHasMeanN) {
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
        const Index d = 2 + static_cast<Index>(seed % 10);
        const Spectrum s = random_spectrum(d, 4000 + seed);
        const Index n = 1 + static_cast<Index>(seed % static_cast<std::uint64_t>(d - 1));
        const auto pmf = surrogate_size_pmf(MeasureSpec{s}, n);
        const double g = surrogate_params(s, static_cast<double>(n)).gamma_n;
        const auto e = elem_sym_polys(s.eigenvalues(), static_cast<std::size_t>(d));
        double norm = 1.0;
        for (double t : s.eigenvalues()) norm *= 1.0 + g * t;
        double total = 0.0, mean = 0.0;
        for (std::size_t k = 0; k < pmf.size(); ++k) {
            EXPECT_NEAR(pmf[k], std::pow(g, static_cast<double>(k)) * e[k] / norm, 1e-10);
            total += pmf[k];
            mean += static_cast<double>(k) * pmf[k];
        }
        EXPECT_NEAR(total, 1.0, 1e-10);
        EXPECT_NEAR(mean, static_cast<double>(n), 1e-8);
        const double top = std::exp(static_cast<double>(d) * std::log(g) + s.log_det()) / norm;
        EXPECT_NEAR(pmf.back() / top, 1.0, 1e-9);
        EXPECT_GT(pmf.back(), 0.0);
    }
}

TEST(SizePmf, HighDimensionStaysNormalized) {
    const Spectrum s = scale_trace_inverse(make_profile(ProfileKind::diag_exp, 300), 300.0);
    const auto pmf = surrogate_size_pmf(MeasureSpec{s}, 120);
    const double total = std::accumulate(pmf.begin(), pmf.end(), 0.0);
    double mean = 0.0;
    for (std::size_t k = 0; k < pmf.size(); ++k) mean += static_cast<double>(k) * pmf[k];
    EXPECT_NEAR(total, 1.0, 1e-10);
    EXPECT_NEAR(mean, 120.0, 1e-8);
}

TEST(SizePmf, RejectsNonGaussianAndOverdetermined) {
    EXPECT_THROW(surrogate_size_pmf(MeasureSpec{Spectrum::isotropic(4), EntryLaw::rademacher}, 2),
                 UnsupportedMeasure);
    EXPECT_THROW(surrogate_size_pmf(MeasureSpec{Spectrum::isotropic(4)}, 4), DomainError);
}
