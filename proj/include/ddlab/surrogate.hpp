#pragma once

// Closed-form surrogate-design quantities: the implicit ridge parameter lambda_n, the
// scalars gamma_n / alpha_n / beta_n, the surrogate MSE and its variance/bias split,
// the implicit-regularization mean and the surrogate sample-size distribution.
//
// All expressions are evaluated in the eigenbasis of Sigma, so every (Sigma + lambda I)^{-1}
// is a per-eigenvalue scalar operation. Vectors (w*, v) are expressed in that basis too.

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "ddlab/covariance.hpp"
#include "ddlab/errors.hpp"
#include "ddlab/linalg.hpp"
#include "ddlab/measure.hpp"

namespace ddlab {

enum class Regime { under, boundary, over };

inline Regime regime_of(double n, Index d) {
    const double dd = static_cast<double>(d);
    if (n < dd) return Regime::under;
    if (n > dd) return Regime::over;
    return Regime::boundary;
}

struct SurrogateParams {
    double n = 0.0;
    Index d = 0;
    double gamma_n = 0.0;   // 1/lambda_n below d, n - d above, 0 at n = d (K = d is fixed)
    double lambda_n = 0.0;  // 0 for n >= d
    double alpha_n = 1.0;   // det(Sigma (Sigma + lambda_n I)^{-1}); 1 for n >= d
    double log_alpha_n = 0.0;
    double beta_n = 1.0;    // e^{d - n} for n > d; 1 otherwise
    Regime regime = Regime::boundary;
};

/// Linear regression problem with homoscedastic noise. w_star lives in the eigenbasis.
struct RegressionProblem {
    Spectrum spectrum;
    Vector w_star;
    double sigma2 = 0.0;

    RegressionProblem(Spectrum s, Vector w, double noise)
        : spectrum(std::move(s)), w_star(std::move(w)), sigma2(noise) {
        if (w_star.size() != spectrum.dim()) {
            throw InvalidInput("RegressionProblem: w_star has dimension " +
                               std::to_string(w_star.size()) + ", spectrum has " +
                               std::to_string(spectrum.dim()));
        }
        if (!(sigma2 >= 0.0) || !std::isfinite(sigma2)) {
            throw InvalidInput("RegressionProblem: sigma2 must be finite and >= 0");
        }
        if (!w_star.allFinite()) throw InvalidInput("RegressionProblem: non-finite w_star");
    }

    Index dim() const { return spectrum.dim(); }
    /// v = Sigma w*, the population cross-moment under a linear response model.
    Vector cross_moment() const { return spectrum.as_vector().cwiseProduct(w_star); }
};

/// w* = (1/sqrt(d)) 1, the unit-norm all-equal model used by the bundled presets.
inline Vector uniform_w_star(Index d) {
    return Vector::Constant(d, 1.0 / std::sqrt(static_cast<double>(d)));
}

/// Effective dimension tr(Sigma (Sigma + lambda I)^{-1}).
inline double effective_dimension(const Spectrum& s, double lambda) {
    double acc = 0.0;
    for (double t : s.eigenvalues()) acc += t / (t + lambda);
    return acc;
}

/// The unique lambda >= 0 with effective dimension n, for 0 < n < d.
///
/// The effective dimension is strictly decreasing and convex in lambda, so Newton steps
/// started left of the root approach it monotonically; the bisection bracket
/// [0, d tau_max / n] catches any step that would leave it.
inline double solve_lambda(const Spectrum& s, double n) {
    const auto d = static_cast<double>(s.dim());
    if (!(n > 0.0)) throw DomainError("solve_lambda: n must be positive");
    if (!(n < d)) {
        throw DomainError("solve_lambda: n = " + std::to_string(n) + " must be below d = " +
                          std::to_string(s.dim()));
    }
    const auto eig = s.eigenvalues();
    double lo = 0.0;
    double hi = d * eig.front() / n;
    double lambda = 0.0;
    for (int iter = 0; iter < 500; ++iter) {
        double f = -n;
        double fp = 0.0;
        for (double t : eig) {
            const double r = t / (t + lambda);
            f += r;
            fp -= r / (t + lambda);
        }
        if (f > 0.0) {
            lo = lambda;
        } else {
            hi = lambda;
        }
        if (std::abs(f) <= 1e-15 * n || hi - lo <= 1e-14 * hi) break;
        double next = lambda - f / fp;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (next == lambda) break;
        lambda = next;
    }
    return lambda;
}

inline SurrogateParams surrogate_params(const Spectrum& s, double n) {
    if (!(n >= 1.0)) throw InvalidInput("surrogate_params: n must be >= 1");
    SurrogateParams p;
    p.n = n;
    p.d = s.dim();
    p.regime = regime_of(n, p.d);
    const auto d = static_cast<double>(p.d);
    switch (p.regime) {
        case Regime::under: {
            p.lambda_n = solve_lambda(s, n);
            p.gamma_n = 1.0 / p.lambda_n;
            double log_alpha = 0.0;
            for (double t : s.eigenvalues()) log_alpha += std::log(t / (t + p.lambda_n));
            p.log_alpha_n = log_alpha;
            p.alpha_n = std::exp(log_alpha);
            break;
        }
        case Regime::boundary: break;
        case Regime::over:
            p.gamma_n = n - d;
            p.beta_n = std::exp(d - n);
            break;
    }
    return p;
}

/// V(Sigma, n) = (1 - alpha_n) / lambda_n, for n < d.
inline double variance_term(const Spectrum& s, double n) {
    const SurrogateParams p = surrogate_params(s, n);
    if (p.regime != Regime::under) throw DomainError("variance_term: requires n < d");
    return -std::expm1(p.log_alpha_n) / p.lambda_n;
}

/// Eigen-factors lambda_n / (tau_i + lambda_n) of B(Sigma, n) = lambda_n (Sigma + lambda_n I)^{-1}.
inline Vector bias_factors(const Spectrum& s, double n) {
    const SurrogateParams p = surrogate_params(s, n);
    if (p.regime != Regime::under) throw DomainError("bias_factors: requires n < d");
    Vector b(s.dim());
    for (Index i = 0; i < s.dim(); ++i) b(i) = p.lambda_n / (s[i] + p.lambda_n);
    return b;
}

/// Surrogate MSE M(Sigma, w*, sigma^2, n).
inline double surrogate_mse(const RegressionProblem& prob, double n) {
    const Spectrum& s = prob.spectrum;
    const SurrogateParams p = surrogate_params(s, n);
    const double tr_inv = s.trace_inverse();
    switch (p.regime) {
        case Regime::under: {
            // sigma^2 tr((S+lI)^{-1}) (1-alpha)/(d-n) + w^T (S+lI)^{-1} w (d-n) / tr((S+lI)^{-1})
            double tr_res = 0.0;
            double quad = 0.0;
            for (Index i = 0; i < s.dim(); ++i) {
                const double r = 1.0 / (s[i] + p.lambda_n);
                tr_res += r;
                quad += prob.w_star(i) * prob.w_star(i) * r;
            }
            const double gap = static_cast<double>(p.d) - n;
            return prob.sigma2 * tr_res * (-std::expm1(p.log_alpha_n)) / gap + quad * gap / tr_res;
        }
        case Regime::boundary: return prob.sigma2 * tr_inv;
        case Regime::over: {
            const double gap = n - static_cast<double>(p.d);
            return prob.sigma2 * tr_inv * (-std::expm1(-gap)) / gap;
        }
    }
    return std::numeric_limits<double>::quiet_NaN();
}

/// E[X^+ y] under the surrogate design for a general response model with cross-moment v.
inline Vector implicit_reg_mean(const Spectrum& s, const Vector& v, double n) {
    if (v.size() != s.dim()) throw InvalidInput("implicit_reg_mean: v has the wrong dimension");
    const SurrogateParams p = surrogate_params(s, n);
    Vector out(s.dim());
    for (Index i = 0; i < s.dim(); ++i) out(i) = v(i) / (s[i] + p.lambda_n);
    return out;
}

/// E[X^+ y] with v = Sigma w* (homoscedastic linear responses).
inline Vector implicit_reg_mean(const RegressionProblem& prob, double n) {
    return implicit_reg_mean(prob.spectrum, prob.cross_moment(), n);
}

/// Distribution of the surrogate sample size for n < d: P(k) = gamma^k e_k / det(I + gamma Sigma).
///
/// Evaluated as a Poisson-binomial law with success probabilities
/// p_i = gamma tau_i / (1 + gamma tau_i), which is the same generating function
/// prod(1 - p_i + p_i z) and keeps every intermediate in [0, 1].
inline std::vector<double> size_pmf_from_spectrum(const Spectrum& s, Index n) {
    const SurrogateParams p = surrogate_params(s, static_cast<double>(n));
    if (p.regime != Regime::under) throw DomainError("surrogate_size_pmf: requires n < d");
    const auto d = static_cast<std::size_t>(s.dim());
    std::vector<double> pmf(d + 1, 0.0);
    pmf[0] = 1.0;
    std::size_t seen = 0;
    for (double t : s.eigenvalues()) {
        const double q = t / (t + p.lambda_n);
        ++seen;
        for (std::size_t k = seen; k >= 1; --k) pmf[k] = pmf[k] * (1.0 - q) + pmf[k - 1] * q;
        pmf[0] *= (1.0 - q);
    }
    return pmf;
}

/// Surrogate size pmf for a Gaussian background measure.
inline std::vector<double> surrogate_size_pmf(const MeasureSpec& m, Index n) {
    if (!m.is_gaussian()) {
        throw UnsupportedMeasure("surrogate_size_pmf: the closed-form size law is only provided for "
                                 "Gaussian measures (got " +
                                 std::string(to_string(m.entry_law)) + ")");
    }
    return size_pmf_from_spectrum(m.spectrum, n);
}

}  // namespace ddlab
