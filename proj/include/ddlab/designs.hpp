#pragma once

// Random designs: i.i.d. rows from mu, responses under homoscedastic noise, the
// self-normalized importance-weighting oracle for surrogate-design expectations, and
// Metropolis samplers that produce actual surrogate-design draws.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <type_traits>
#include <vector>

#include "ddlab/covariance.hpp"
#include "ddlab/errors.hpp"
#include "ddlab/linalg.hpp"
#include "ddlab/measure.hpp"
#include "ddlab/random.hpp"
#include "ddlab/surrogate.hpp"

namespace ddlab {

struct DesignSample {
    Matrix x;  // k x d
    Vector y;  // k, empty when no response model is attached
    Index k = 0;
};

/// Monte Carlo estimate of a scalar, vector (d x 1) or matrix functional.
struct MonteCarloEstimate {
    Matrix mean;
    Matrix std_error;
    std::int64_t trials = 0;
    double effective_sample_size = 0.0;

    double value() const { return mean(0, 0); }
    double se() const { return std_error(0, 0); }
};

/// Draws k rows x^T = z^T Sigma^{1/2} using `eng`.
inline Matrix draw_rows(const MeasureSpec& m, Index k, random::Engine& eng) {
    const Index d = m.dim();
    Matrix z(k, d);
    for (Index i = 0; i < k; ++i)
        for (Index j = 0; j < d; ++j) z(i, j) = draw_entry(m.entry_law, eng);
    return apply_sqrt(m.spectrum, z);
}

inline Matrix sample_iid(const MeasureSpec& m, Index n, std::uint64_t seed) {
    if (n < 0) throw InvalidInput("sample_iid: n must be >= 0");
    auto eng = random::make_engine(seed, random::stream::kDesign, 0);
    return draw_rows(m, n, eng);
}

/// y = X w* + xi with xi ~ N(0, sigma2) i.i.d.
inline Vector gen_responses(const Matrix& x, const Vector& w_star, double sigma2, std::uint64_t seed) {
    if (x.cols() != w_star.size()) throw InvalidInput("gen_responses: dimension mismatch");
    if (!(sigma2 >= 0.0)) throw InvalidInput("gen_responses: sigma2 must be >= 0");
    Vector y = x * w_star;
    if (sigma2 > 0.0) {
        auto eng = random::make_engine(seed, random::stream::kResponse, 0);
        const double sd = std::sqrt(sigma2);
        for (Index i = 0; i < y.size(); ++i) y(i) += sd * random::standard_normal(eng);
    }
    return y;
}

namespace detail {

inline Matrix as_matrix(double v) { return Matrix::Constant(1, 1, v); }
template <typename Derived>
Matrix as_matrix(const Eigen::MatrixBase<Derived>& m) {
    return m;
}

template <typename F>
Matrix call_functional(F& f, const Matrix& x, random::Engine& eng) {
    if constexpr (std::is_invocable_v<F&, const Matrix&, random::Engine&>) {
        return as_matrix(f(x, eng));
    } else {
        return as_matrix(f(x));
    }
}

// Weighted sums for one batch, all weights scaled by exp(-shift).
struct WeightedBatch {
    double shift = -std::numeric_limits<double>::infinity();
    double sw = 0.0;
    double sw2 = 0.0;
    Matrix swf, sw2f, sw2f2;
    bool shaped = false;

    void rescale(double new_shift) {
        if (new_shift == shift) return;
        const double c = std::exp(shift - new_shift);
        sw *= c;
        sw2 *= c * c;
        if (shaped) {
            swf *= c;
            sw2f *= c * c;
            sw2f2 *= c * c;
        }
        shift = new_shift;
    }

    void add(double log_w, const Matrix& f) {
        if (!shaped) {
            swf = Matrix::Zero(f.rows(), f.cols());
            sw2f = swf;
            sw2f2 = swf;
            shaped = true;
        } else if (f.rows() != swf.rows() || f.cols() != swf.cols()) {
            throw InvalidInput("oracle functional changed output shape between trials");
        }
        if (log_w > shift) rescale(log_w);
        const double w = std::exp(log_w - shift);
        sw += w;
        sw2 += w * w;
        swf += w * f;
        sw2f += (w * w) * f;
        sw2f2 += (w * w) * f.cwiseProduct(f);
    }

    void merge(WeightedBatch other) {
        if (!other.shaped) return;
        const double s = std::max(shift, other.shift);
        rescale(s);
        other.rescale(s);
        if (!shaped) {
            swf = Matrix::Zero(other.swf.rows(), other.swf.cols());
            sw2f = swf;
            sw2f2 = swf;
            shaped = true;
        }
        sw += other.sw;
        sw2 += other.sw2;
        swf += other.swf;
        sw2f += other.sw2f;
        sw2f2 += other.sw2f2;
    }
};

inline constexpr std::int64_t kBatch = 2048;

}  // namespace detail

/// log of the surrogate weight for a K x d draw: log det(XX^T) below d, log det(X^T X)
/// above d, log det(X)^2 at n = d. Returns -inf where the determinant vanishes.
inline double surrogate_log_weight(Regime regime, const Matrix& x) {
    const Index k = x.rows();
    const Index d = x.cols();
    switch (regime) {
        case Regime::under: return k > d ? -std::numeric_limits<double>::infinity() : linalg::log_det_gram(x);
        case Regime::over: return k < d ? -std::numeric_limits<double>::infinity() : linalg::log_det_cross(x);
        case Regime::boundary: return linalg::log_det_gram(x);
    }
    return -std::numeric_limits<double>::infinity();
}

/// E[F(Xbar)] for Xbar ~ S_mu^n via self-normalized importance weighting of i.i.d. designs
/// X ~ mu^K: K ~ Poisson(gamma_n) (untruncated; the weight vanishes outside the valid
/// range) for n != d and K = d at n = d. `f` maps a design to a scalar, vector or matrix,
/// optionally taking the trial's engine as a second argument.
///
/// Standard errors use the delta method for the ratio estimator.
template <typename F>
MonteCarloEstimate surrogate_expectation_oracle(F&& f, const MeasureSpec& m, double n,
                                                std::int64_t trials, std::uint64_t seed,
                                                unsigned threads = 1) {
    if (trials < 100) throw InvalidInput("surrogate_expectation_oracle: need at least 100 trials");
    const SurrogateParams p = surrogate_params(m.spectrum, n);
    const Index d = m.dim();
    const std::int64_t nbatch = (trials + detail::kBatch - 1) / detail::kBatch;
    std::vector<detail::WeightedBatch> batches(static_cast<std::size_t>(nbatch));

    random::parallel_for(nbatch, threads, [&](std::int64_t b) {
        detail::WeightedBatch acc;
        const std::int64_t first = b * detail::kBatch;
        const std::int64_t last = std::min(trials, first + detail::kBatch);
        for (std::int64_t t = first; t < last; ++t) {
            auto eng = random::make_engine(seed, random::stream::kOracle, static_cast<std::uint64_t>(t));
            const Index k = p.regime == Regime::boundary ? d : random::poisson(eng, p.gamma_n);
            if (p.regime == Regime::under && k > d) continue;
            if (p.regime == Regime::over && k < d) continue;
            const Matrix x = draw_rows(m, k, eng);
            const double lw = surrogate_log_weight(p.regime, x);
            if (!std::isfinite(lw)) continue;
            acc.add(lw, detail::call_functional(f, x, eng));
        }
        batches[static_cast<std::size_t>(b)] = std::move(acc);
    });

    detail::WeightedBatch total;
    for (auto& b : batches) total.merge(std::move(b));
    if (!total.shaped || !(total.sw > 0.0)) {
        throw NumericalFailure("surrogate_expectation_oracle: every trial had zero weight");
    }
    MonteCarloEstimate est;
    est.trials = trials;
    est.mean = total.swf / total.sw;
    const Matrix& r = est.mean;
    Matrix var = (total.sw2f2 - 2.0 * r.cwiseProduct(total.sw2f) + total.sw2 * r.cwiseProduct(r)) /
                 (total.sw * total.sw);
    est.std_error = var.cwiseMax(0.0).cwiseSqrt();
    est.effective_sample_size = total.sw * total.sw / total.sw2;
    return est;
}

/// Result of a Metropolis surrogate sampler.
struct SurrogateDraw {
    Matrix x;
    std::int64_t steps = 0;
    std::int64_t accepted = 0;
    std::vector<bool> from_block;  // n > d only: row came from the determinantal d x d block

    Index k() const { return x.rows(); }
    double acceptance_rate() const {
        return steps > 0 ? static_cast<double>(accepted) / static_cast<double>(steps) : 1.0;
    }
};

/// min(1, det(X'X'^T) / det(XX^T)) for a row-replacement proposal.
inline double chain_acceptance(const Matrix& current, const Matrix& proposed) {
    const double lp = linalg::log_det_gram(proposed);
    if (!std::isfinite(lp)) return 0.0;
    const double lc = linalg::log_det_gram(current);
    if (!std::isfinite(lc)) return 1.0;
    return std::min(1.0, std::exp(lp - lc));
}

namespace detail {

// Metropolis chain on k x d matrices (k <= d) targeting det(XX^T) prod mu(x_i).
// Proposals replace one uniformly chosen row by a fresh mu draw, so the mu factors cancel.
inline SurrogateDraw run_det_chain(const MeasureSpec& m, Index k, std::int64_t steps,
                                   random::Engine& eng) {
    SurrogateDraw out;
    if (k == 0) {
        out.x.resize(0, m.dim());
        return out;
    }
    Matrix x;
    double ld = -std::numeric_limits<double>::infinity();
    for (int attempt = 0; attempt < 1000 && !std::isfinite(ld); ++attempt) {
        x = draw_rows(m, k, eng);
        ld = linalg::log_det_gram(x);
    }
    if (!std::isfinite(ld)) {
        throw NumericalFailure("surrogate chain: could not draw a full-rank starting design");
    }
    std::uniform_int_distribution<Index> pick(0, k - 1);
    Matrix row(1, m.dim());
    for (std::int64_t s = 0; s < steps; ++s) {
        const Index i = pick(eng);
        row = draw_rows(m, 1, eng);
        Matrix prop = x;
        prop.row(i) = row.row(0);
        const double lp = linalg::log_det_gram(prop);
        const double u = random::uniform01(eng);
        ++out.steps;
        if (std::isfinite(lp) && std::log(u) < lp - ld) {
            x = std::move(prop);
            ld = lp;
            ++out.accepted;
        }
    }
    out.x = std::move(x);
    return out;
}

}  // namespace detail

/// Surrogate design draw for n < d: size k from the closed-form size law, then a
/// determinant-weighted row-replacement chain. chain_steps = 0 selects 100 k steps.
inline SurrogateDraw sample_surrogate_under(const MeasureSpec& m, Index n, std::int64_t chain_steps,
                                            std::uint64_t seed) {
    if (!m.is_gaussian()) {
        throw UnsupportedMeasure("sample_surrogate_under: requires a Gaussian measure");
    }
    if (n >= m.dim()) throw DomainError("sample_surrogate_under: requires n < d");
    const std::vector<double> pmf = surrogate_size_pmf(m, n);
    auto eng = random::make_engine(seed, random::stream::kChain, 0);
    std::discrete_distribution<Index> size_law(pmf.begin(), pmf.end());
    const Index k = size_law(eng);
    const std::int64_t steps = chain_steps > 0 ? chain_steps : 100 * static_cast<std::int64_t>(k);
    return detail::run_det_chain(m, k, steps, eng);
}

/// Surrogate design draw for n > d: a d x d block from S_mu^d (chain targeting det(X)^2),
/// plus Poisson(n - d) i.i.d. rows, in uniformly random order.
inline SurrogateDraw sample_surrogate_over(const MeasureSpec& m, double n, std::int64_t chain_steps,
                                           std::uint64_t seed) {
    const Index d = m.dim();
    if (!(n > static_cast<double>(d))) throw DomainError("sample_surrogate_over: requires n > d");
    auto eng = random::make_engine(seed, random::stream::kChain, 0);
    const std::int64_t steps = chain_steps > 0 ? chain_steps : 100 * static_cast<std::int64_t>(d);
    SurrogateDraw block = detail::run_det_chain(m, d, steps, eng);
    const Index extra = random::poisson(eng, n - static_cast<double>(d));
    const Matrix tail = draw_rows(m, extra, eng);

    std::vector<Index> order(static_cast<std::size_t>(d + extra));
    std::iota(order.begin(), order.end(), Index{0});
    std::shuffle(order.begin(), order.end(), eng);

    SurrogateDraw out;
    out.steps = block.steps;
    out.accepted = block.accepted;
    out.x.resize(d + extra, d);
    out.from_block.resize(order.size());
    for (std::size_t r = 0; r < order.size(); ++r) {
        const Index src = order[r];
        out.from_block[r] = src < d;
        if (src < d) {
            out.x.row(static_cast<Index>(r)) = block.x.row(src);
        } else {
            out.x.row(static_cast<Index>(r)) = tail.row(src - d);
        }
    }
    return out;
}

/// Dispatches on the regime: chain sampler below d, exact d x d block at d, decomposition above.
inline SurrogateDraw sample_surrogate(const MeasureSpec& m, Index n, std::int64_t chain_steps,
                                      std::uint64_t seed) {
    if (n < m.dim()) return sample_surrogate_under(m, n, chain_steps, seed);
    if (n > m.dim()) return sample_surrogate_over(m, static_cast<double>(n), chain_steps, seed);
    auto eng = random::make_engine(seed, random::stream::kChain, 0);
    const std::int64_t steps = chain_steps > 0 ? chain_steps : 100 * static_cast<std::int64_t>(n);
    SurrogateDraw out = detail::run_det_chain(m, n, steps, eng);
    out.from_block.assign(static_cast<std::size_t>(n), true);
    return out;
}

}  // namespace ddlab
