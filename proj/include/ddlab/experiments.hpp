#pragma once

// Monte Carlo protocol for the i.i.d. design: Rao-Blackwellized MSE estimates, variance and
// bias discrepancies against the surrogate closed forms, adaptive trial escalation and
// log-log slope fits across dimensions.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ddlab/bootstrap.hpp"
#include "ddlab/covariance.hpp"
#include "ddlab/designs.hpp"
#include "ddlab/errors.hpp"
#include "ddlab/linalg.hpp"
#include "ddlab/measure.hpp"
#include "ddlab/random.hpp"
#include "ddlab/surrogate.hpp"

namespace ddlab::experiments {

// ---------------------------------------------------------------------------------------------
// Per-design kernels

/// tr((X^T X)^+) and ||(I - X^+ X) w||^2 for one design.
struct DesignMoments {
    double trace_pinv = 0.0;
    double residual_sq = 0.0;
};

namespace detail {

// Cholesky of a Gram matrix is accepted only when its diagonal ratio stays far from the
// rank cutoff; anything closer goes through the SVD.
inline bool well_conditioned(const Eigen::LLT<Matrix>& llt) {
    if (llt.info() != Eigen::Success) return false;
    const auto diag = llt.matrixLLT().diagonal();
    const double lo = diag.minCoeff();
    const double hi = diag.maxCoeff();
    return lo > 0.0 && lo > 1e-6 * hi;
}

inline DesignMoments moments_svd(const Matrix& x, const Vector& w) {
    const linalg::ThinSvd svd = linalg::thin_svd(x);
    DesignMoments out;
    for (Index i = 0; i < svd.rank; ++i) out.trace_pinv += 1.0 / (svd.s(i) * svd.s(i));
    const auto vr = svd.v.leftCols(svd.rank);
    const Vector r = w - vr * (vr.transpose() * w);
    out.residual_sq = r.squaredNorm();
    return out;
}

}  // namespace detail

inline DesignMoments design_moments(const Matrix& x, const Vector& w) {
    const Index n = x.rows();
    const Index d = x.cols();
    if (w.size() != d) throw InvalidInput("design_moments: dimension mismatch");
    if (n == 0) return {0.0, w.squaredNorm()};
    if (n < d) {
        Eigen::LLT<Matrix> llt(x * x.transpose());
        if (!detail::well_conditioned(llt)) return detail::moments_svd(x, w);
        DesignMoments out;
        const Matrix linv = llt.matrixL().solve(Matrix::Identity(n, n));
        out.trace_pinv = linv.squaredNorm();
        const Vector proj = x.transpose() * llt.solve(x * w);
        out.residual_sq = (w - proj).squaredNorm();
        return out;
    }
    Eigen::LLT<Matrix> llt(x.transpose() * x);
    if (!detail::well_conditioned(llt)) return detail::moments_svd(x, w);
    DesignMoments out;
    const Matrix linv = llt.matrixL().solve(Matrix::Identity(d, d));
    out.trace_pinv = linv.squaredNorm();
    out.residual_sq = 0.0;
    return out;
}

/// Adds X^+ X (the projection onto the row span) into `acc`.
inline void accumulate_row_projection(const Matrix& x, Matrix& acc) {
    const Index n = x.rows();
    const Index d = x.cols();
    if (n == 0) return;
    if (n < d) {
        Eigen::LLT<Matrix> llt(x * x.transpose());
        if (detail::well_conditioned(llt)) {
            const Matrix m = llt.matrixL().solve(x);  // L^{-1} X, so M^T M = X^T (XX^T)^{-1} X
            acc.selfadjointView<Eigen::Lower>().rankUpdate(m.transpose());
            return;
        }
    }
    const linalg::ThinSvd svd = linalg::thin_svd(x);
    acc.selfadjointView<Eigen::Lower>().rankUpdate(svd.v.leftCols(svd.rank));
}

// ---------------------------------------------------------------------------------------------
// MSE of the minimum-norm estimator under the i.i.d. design

struct MseEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    stats::Interval ci;
    double median = 0.0;
    double trimmed_mean = 0.0;
    std::int64_t trials = 0;
};

/// w* in the standard basis (the problem stores it in Sigma's eigenbasis).
inline Vector standard_basis_w(const RegressionProblem& p) {
    if (p.spectrum.basis()) return *p.spectrum.basis() * p.w_star;
    return p.w_star;
}

/// Per-trial values of sigma^2 tr((X^T X)^+) + ||(I - X^+ X) w*||^2, the MSE integrated over
/// the noise exactly, for X ~ mu^n.
inline std::vector<double> mse_trial_values(const RegressionProblem& p, const MeasureSpec& m, Index n,
                                            std::int64_t trials, std::uint64_t seed, unsigned threads = 1) {
    if (m.dim() != p.dim()) throw InvalidInput("mse_monte_carlo_iid: measure/problem dimension mismatch");
    const Vector w = standard_basis_w(p);
    std::vector<double> vals(static_cast<std::size_t>(trials));
    random::parallel_for(trials, threads, [&](std::int64_t t) {
        auto eng = random::make_engine(seed, random::stream::kDesign, static_cast<std::uint64_t>(t));
        const Matrix x = draw_rows(m, n, eng);
        const DesignMoments dm = design_moments(x, w);
        vals[static_cast<std::size_t>(t)] = p.sigma2 * dm.trace_pinv + dm.residual_sq;
    });
    return vals;
}

inline MseEstimate summarize(const std::vector<double>& vals, std::uint64_t seed) {
    MseEstimate e;
    e.trials = static_cast<std::int64_t>(vals.size());
    e.mean = stats::mean(vals);
    e.std_error = stats::standard_error(vals);
    e.median = stats::median(vals);
    e.trimmed_mean = stats::trimmed_mean(vals, 0.1);
    e.ci = vals.size() >= stats::kMinBootstrapSamples ? stats::bootstrap_ci(vals, 2000, 0.95, seed)
                                                      : stats::Interval{e.mean, e.mean};
    return e;
}

inline MseEstimate mse_monte_carlo_iid(const RegressionProblem& p, const MeasureSpec& m, Index n,
                                       std::int64_t trials, std::uint64_t seed, unsigned threads = 1) {
    if (trials < 30) throw InvalidInput("mse_monte_carlo_iid: need at least 30 trials");
    return summarize(mse_trial_values(p, m, n, trials, seed, threads), seed);
}

// ---------------------------------------------------------------------------------------------
// Discrepancies

enum class DiscrepancyKind { variance, bias };

inline std::string_view to_string(DiscrepancyKind k) {
    return k == DiscrepancyKind::variance ? "variance" : "bias";
}

struct DiscrepancyPoint {
    Index d = 0;
    Index n = 0;
    double aspect = 0.0;
    DiscrepancyKind kind = DiscrepancyKind::variance;
    double value = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    std::int64_t trials_used = 0;
    bool flagged = false;
    std::string flag;  // why the point is flagged, empty otherwise

    double relative_half_width() const {
        const double hw = 0.5 * (ci_high - ci_low);
        if (hw == 0.0) return 0.0;
        return value > 0.0 ? hw / value : std::numeric_limits<double>::infinity();
    }
};

inline Index sample_size_for(Index d, double aspect) {
    const auto n = static_cast<Index>(std::llround(aspect * static_cast<double>(d)));
    if (n < 1 || n >= d) {
        throw InvalidInput("discrepancy: aspect " + std::to_string(aspect) + " at d = " + std::to_string(d) +
                           " gives n = " + std::to_string(n) + ", need 1 <= n < d");
    }
    return n;
}

/// |estimate / reference - 1| for a scalar estimate with CI mapped through the same map.
inline DiscrepancyPoint discrepancy_from_estimate(double estimate, stats::Interval ci, double reference) {
    DiscrepancyPoint pt;
    pt.value = std::abs(estimate / reference - 1.0);
    const double lo = ci.low / reference - 1.0;
    const double hi = ci.high / reference - 1.0;
    pt.ci_low = (lo <= 0.0 && hi >= 0.0) ? 0.0 : std::min(std::abs(lo), std::abs(hi));
    pt.ci_high = std::max(std::abs(lo), std::abs(hi));
    pt.ci_low = std::min(pt.ci_low, pt.value);
    pt.ci_high = std::max(pt.ci_high, pt.value);
    return pt;
}

/// Incremental estimator of the variance discrepancy |E tr((X^T X)^+) / V(Sigma, n) - 1|.
/// Extending to more trials keeps earlier trials, since trial t always uses the same seed.
class VarianceDiscrepancy {
public:
    VarianceDiscrepancy(Spectrum s, double aspect, std::uint64_t seed, unsigned threads = 1,
                        EntryLaw law = EntryLaw::gaussian)
        : m_{std::move(s), law}, aspect_(aspect), seed_(seed), threads_(threads) {
        n_ = sample_size_for(m_.dim(), aspect_);
        reference_ = variance_term(m_.spectrum, static_cast<double>(n_));
    }

    Index n() const { return n_; }
    double reference() const { return reference_; }
    const std::vector<double>& samples() const { return samples_; }

    DiscrepancyPoint run(std::int64_t trials) {
        if (trials < static_cast<std::int64_t>(stats::kMinBootstrapSamples)) {
            throw InvalidInput("variance discrepancy: need at least 30 trials");
        }
        const auto have = static_cast<std::int64_t>(samples_.size());
        if (trials > have) {
            samples_.resize(static_cast<std::size_t>(trials));
            const Vector zero = Vector::Zero(m_.dim());
            random::parallel_for(trials - have, threads_, [&](std::int64_t i) {
                const std::int64_t t = have + i;
                auto eng = random::make_engine(seed_, random::stream::kDesign, static_cast<std::uint64_t>(t));
                const Matrix x = draw_rows(m_, n_, eng);
                samples_[static_cast<std::size_t>(t)] = design_moments(x, zero).trace_pinv;
            });
        }
        const std::span<const double> used(samples_.data(), static_cast<std::size_t>(trials));
        const double est = stats::mean(used);
        const stats::Interval ci = stats::bootstrap_ci(used, 2000, 0.95, seed_);
        DiscrepancyPoint pt = discrepancy_from_estimate(est, ci, reference_);
        pt.d = m_.dim();
        pt.n = n_;
        pt.aspect = aspect_;
        pt.kind = DiscrepancyKind::variance;
        pt.trials_used = trials;
        return pt;
    }

private:
    MeasureSpec m_;
    double aspect_;
    std::uint64_t seed_;
    unsigned threads_;
    Index n_ = 0;
    double reference_ = 0.0;
    std::vector<double> samples_;
};

/// Incremental estimator of the bias discrepancy
/// || B^{-1/2} E[I - X^+ X] B^{-1/2} - I ||_2 with B = lambda_n (Sigma + lambda_n I)^{-1}.
///
/// Trials are grouped into contiguous batches of projection sums; the operator-norm CI
/// bootstraps over batches (at most kMaxBatches, merged pairwise as trials grow).
class BiasDiscrepancy {
public:
    static constexpr std::int64_t kInitialBatch = 32;
    static constexpr std::size_t kMaxBatches = 256;

    BiasDiscrepancy(Spectrum s, double aspect, std::uint64_t seed, unsigned threads = 1,
                    EntryLaw law = EntryLaw::gaussian)
        : m_{std::move(s), law}, aspect_(aspect), seed_(seed), threads_(threads) {
        if (m_.spectrum.basis()) {
            throw InvalidInput("bias discrepancy: expects a diagonal covariance (rotation invariant)");
        }
        n_ = sample_size_for(m_.dim(), aspect_);
        whitening_ = bias_factors(m_.spectrum, static_cast<double>(n_)).array().rsqrt();
    }

    Index n() const { return n_; }

    /// The discrepancy for a given mean of I - X^+ X.
    double discrepancy_of(const Matrix& mean_complement) const {
        const Index d = m_.dim();
        Matrix dev = whitening_.asDiagonal() * mean_complement * whitening_.asDiagonal();
        dev -= Matrix::Identity(d, d);
        return stats::spectral_norm(dev);
    }

    DiscrepancyPoint run(std::int64_t trials) {
        if (trials < 64) throw InvalidInput("bias discrepancy: need at least 64 trials");
        extend(trials);
        const Index d = m_.dim();
        // Mean projection and whitened per-batch deviations.
        Matrix total = Matrix::Zero(d, d);
        for (const auto& b : batches_) total += b.sum;
        const Matrix mean_proj = symmetrize(total) / static_cast<double>(done_);
        const Matrix mean_comp = Matrix::Identity(d, d) - mean_proj;

        DiscrepancyPoint pt;
        pt.value = discrepancy_of(mean_comp);
        pt.d = d;
        pt.n = n_;
        pt.aspect = aspect_;
        pt.kind = DiscrepancyKind::bias;
        pt.trials_used = done_;

        std::vector<Matrix> devs;
        std::vector<double> counts;
        devs.reserve(batches_.size());
        for (const auto& b : batches_) {
            const Matrix comp = Matrix::Identity(d, d) - symmetrize(b.sum) / static_cast<double>(b.count);
            Matrix dev = whitening_.asDiagonal() * comp * whitening_.asDiagonal();
            dev -= Matrix::Identity(d, d);
            devs.push_back(std::move(dev));
            counts.push_back(static_cast<double>(b.count));
        }
        const stats::Interval ci = weighted_opnorm_ci(devs, counts);
        pt.ci_low = std::min(ci.low, pt.value);
        pt.ci_high = std::max(ci.high, pt.value);
        return pt;
    }

private:
    struct Batch {
        Matrix sum;  // lower triangle of sum of X^+ X
        std::int64_t count = 0;
    };

    static Matrix symmetrize(const Matrix& lower) {
        Matrix full = lower.selfadjointView<Eigen::Lower>();
        return full;
    }

    void extend(std::int64_t trials) {
        const Index d = m_.dim();
        while (done_ < trials) {
            // Fill new batches of the current size in parallel; batch contents depend only
            // on trial indices.
            const std::int64_t remaining = trials - done_;
            const std::int64_t nb = (remaining + batch_size_ - 1) / batch_size_;
            std::vector<Batch> fresh(static_cast<std::size_t>(nb));
            const std::int64_t start = done_;
            random::parallel_for(nb, threads_, [&](std::int64_t b) {
                Batch out;
                out.sum = Matrix::Zero(d, d);
                const std::int64_t first = start + b * batch_size_;
                const std::int64_t last = std::min(trials, first + batch_size_);
                for (std::int64_t t = first; t < last; ++t) {
                    auto eng = random::make_engine(seed_, random::stream::kDesign, static_cast<std::uint64_t>(t));
                    const Matrix x = draw_rows(m_, n_, eng);
                    accumulate_row_projection(x, out.sum);
                }
                out.count = last - first;
                fresh[static_cast<std::size_t>(b)] = std::move(out);
            });
            for (auto& b : fresh) batches_.push_back(std::move(b));
            done_ = trials;
            while (batches_.size() > kMaxBatches) {
                std::vector<Batch> merged;
                merged.reserve(batches_.size() / 2 + 1);
                for (std::size_t i = 0; i < batches_.size(); i += 2) {
                    Batch b = std::move(batches_[i]);
                    if (i + 1 < batches_.size()) {
                        b.sum += batches_[i + 1].sum;
                        b.count += batches_[i + 1].count;
                    }
                    merged.push_back(std::move(b));
                }
                batches_ = std::move(merged);
                batch_size_ *= 2;
            }
        }
    }

    // Percentile bootstrap over batches for the norm of the count-weighted mean deviation.
    stats::Interval weighted_opnorm_ci(const std::vector<Matrix>& devs, const std::vector<double>& counts) const {
        const std::size_t nb = devs.size();
        if (nb < 2) return {0.0, std::numeric_limits<double>::infinity()};
        auto eng = random::make_engine(seed_, random::stream::kBootstrap, 2);
        std::uniform_int_distribution<std::size_t> pick(0, nb - 1);
        constexpr int kResamples = 2000;
        std::vector<double> norms(kResamples);
        Matrix acc(devs[0].rows(), devs[0].cols());
        for (auto& v : norms) {
            acc.setZero();
            double w = 0.0;
            for (std::size_t i = 0; i < nb; ++i) {
                const std::size_t j = pick(eng);
                acc += counts[j] * devs[j];
                w += counts[j];
            }
            v = stats::spectral_norm(acc / w);
        }
        std::sort(norms.begin(), norms.end());
        return {stats::sorted_quantile(norms, 0.025), stats::sorted_quantile(norms, 0.975)};
    }

    MeasureSpec m_;
    double aspect_;
    std::uint64_t seed_;
    unsigned threads_;
    Index n_ = 0;
    Vector whitening_;
    std::vector<Batch> batches_;
    std::int64_t batch_size_ = kInitialBatch;
    std::int64_t done_ = 0;
};

inline DiscrepancyPoint variance_discrepancy(const Spectrum& s, double aspect, std::int64_t trials,
                                             std::uint64_t seed, unsigned threads = 1) {
    VarianceDiscrepancy v(s, aspect, seed, threads);
    return v.run(trials);
}

inline DiscrepancyPoint bias_discrepancy(const Spectrum& s, double aspect, std::int64_t trials,
                                         std::uint64_t seed, unsigned threads = 1) {
    BiasDiscrepancy b(s, aspect, seed, threads);
    return b.run(trials);
}

/// Doubles the trial count until the CI half-width is within `target_rel_halfwidth` of the
/// value, or `cap` is reached (the point is then flagged, not failed).
inline DiscrepancyPoint adaptive_trials(const std::function<DiscrepancyPoint(std::int64_t)>& procedure,
                                        std::int64_t min_trials, std::int64_t cap,
                                        double target_rel_halfwidth = 0.125) {
    if (min_trials < 1 || cap < 1) throw InvalidInput("adaptive_trials: bad trial bounds");
    std::int64_t trials = std::min(min_trials, cap);
    for (;;) {
        DiscrepancyPoint pt = procedure(trials);
        if (pt.relative_half_width() <= target_rel_halfwidth) return pt;
        if (trials >= cap) {
            pt.flagged = true;
            pt.flag = "cap_reached";
            return pt;
        }
        trials = std::min(cap, 2 * trials);
    }
}

struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    std::size_t used = 0;
    std::size_t excluded = 0;
};

/// Least-squares fit of log(value) on log(d); non-positive values are excluded.
inline SlopeFit loglog_slope(const std::vector<DiscrepancyPoint>& points) {
    std::vector<double> xs, ys;
    SlopeFit fit;
    for (const auto& p : points) {
        if (p.value > 0.0 && std::isfinite(p.value) && p.d > 0) {
            xs.push_back(std::log(static_cast<double>(p.d)));
            ys.push_back(std::log(p.value));
        } else {
            ++fit.excluded;
        }
    }
    if (xs.size() < 3) throw InvalidInput("loglog_slope: need at least 3 points with positive values");
    const double mx = stats::mean(xs);
    const double my = stats::mean(ys);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    if (sxx == 0.0) throw InvalidInput("loglog_slope: all points share the same d");
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    fit.used = xs.size();
    return fit;
}

// ---------------------------------------------------------------------------------------------
// Double descent curves

struct CurvePoint {
    Index n = 0;
    Index d = 0;
    double mse_surrogate = 0.0;
    std::optional<MseEstimate> mse_mc;
    double lambda_n = 0.0;
    double alpha_or_beta = 1.0;
    double norm_implicit_mean = 0.0;
};

inline CurvePoint surrogate_point(const RegressionProblem& p, Index n) {
    CurvePoint c;
    c.n = n;
    c.d = p.dim();
    const SurrogateParams sp = surrogate_params(p.spectrum, static_cast<double>(n));
    c.mse_surrogate = surrogate_mse(p, static_cast<double>(n));
    c.lambda_n = sp.lambda_n;
    c.alpha_or_beta = sp.regime == Regime::under ? sp.alpha_n : (sp.regime == Regime::over ? sp.beta_n : 1.0);
    c.norm_implicit_mean = implicit_reg_mean(p, static_cast<double>(n)).norm();
    return c;
}

inline std::uint64_t point_seed(std::uint64_t seed, Index n, Index d) {
    return random::derive_seed(seed, random::stream::kAuxiliary,
                               static_cast<std::uint64_t>(n) * 1000003ULL + static_cast<std::uint64_t>(d));
}

/// n-sweep at fixed d. trials = 0 skips the Monte Carlo column.
inline std::vector<CurvePoint> curve_double_descent(const RegressionProblem& p, const MeasureSpec& m,
                                                    const std::vector<Index>& n_values, std::int64_t trials,
                                                    std::uint64_t seed, unsigned threads = 1) {
    std::vector<CurvePoint> out;
    out.reserve(n_values.size());
    for (Index n : n_values) {
        if (n < 1) throw InvalidInput("curve: n must be >= 1");
        CurvePoint c = surrogate_point(p, n);
        if (trials > 0) c.mse_mc = mse_monte_carlo_iid(p, m, n, trials, point_seed(seed, n, p.dim()), threads);
        out.push_back(std::move(c));
    }
    return out;
}

/// Problem used by the bundled presets: profile with condition number kappa, scaled to
/// tr(Sigma^{-1}) = d, w* = 1/sqrt(d) 1 and sigma^2 = ||w*||^2 / snr.
inline RegressionProblem preset_problem(ProfileKind kind, Index d, double kappa, double snr) {
    Spectrum s = scale_trace_inverse(make_profile_kappa(kind, d, kappa), static_cast<double>(d));
    Vector w = uniform_w_star(d);
    const double sigma2 = w.squaredNorm() / snr;
    return RegressionProblem(std::move(s), std::move(w), sigma2);
}

/// d-sweep at fixed n, rebuilding the preset problem for every d.
inline std::vector<CurvePoint> curve_dimension_sweep(ProfileKind kind, double kappa, double snr, Index n,
                                                     const std::vector<Index>& d_values, std::int64_t trials,
                                                     std::uint64_t seed, unsigned threads = 1,
                                                     EntryLaw law = EntryLaw::gaussian) {
    std::vector<CurvePoint> out;
    out.reserve(d_values.size());
    for (Index d : d_values) {
        const RegressionProblem p = preset_problem(kind, d, kappa, snr);
        CurvePoint c = surrogate_point(p, n);
        if (trials > 0) {
            c.mse_mc = mse_monte_carlo_iid(p, MeasureSpec{p.spectrum, law}, n, trials, point_seed(seed, n, d), threads);
        }
        out.push_back(std::move(c));
    }
    return out;
}

}  // namespace ddlab::experiments
