#pragma once

// Percentile bootstrap for scalar means and for the spectral norm of a matrix mean,
// plus small descriptive statistics used by the experiment runners.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "ddlab/errors.hpp"
#include "ddlab/linalg.hpp"
#include "ddlab/random.hpp"

namespace ddlab::stats {

struct Interval {
    double low = 0.0;
    double high = 0.0;
    double half_width() const { return 0.5 * (high - low); }
    bool contains(double v) const { return low <= v && v <= high; }
};

inline double mean(std::span<const double> xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

inline double standard_error(std::span<const double> xs) {
    const std::size_t n = xs.size();
    if (n < 2) return 0.0;
    const double m = mean(xs);
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n));
}

/// Linear-interpolated quantile of already sorted data.
inline double sorted_quantile(std::span<const double> sorted, double q) {
    if (sorted.empty()) return 0.0;
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

inline double median(std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    return sorted_quantile(xs, 0.5);
}

/// Mean after dropping `fraction` of the samples from each tail.
inline double trimmed_mean(std::vector<double> xs, double fraction = 0.1) {
    if (xs.empty()) return 0.0;
    std::sort(xs.begin(), xs.end());
    const auto cut = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(xs.size())));
    if (2 * cut >= xs.size()) return sorted_quantile(xs, 0.5);
    return mean(std::span<const double>(xs).subspan(cut, xs.size() - 2 * cut));
}

inline constexpr std::size_t kMinBootstrapSamples = 30;

/// Percentile bootstrap CI for the mean.
inline Interval bootstrap_ci(std::span<const double> samples, int resamples = 2000, double level = 0.95,
                             std::uint64_t seed = 0) {
    if (samples.size() < kMinBootstrapSamples) {
        throw InvalidInput("bootstrap_ci: need at least 30 samples");
    }
    if (resamples < 1 || !(level > 0.0 && level < 1.0)) throw InvalidInput("bootstrap_ci: bad parameters");
    auto eng = random::make_engine(seed, random::stream::kBootstrap, 0);
    const std::size_t n = samples.size();
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::vector<double> means(static_cast<std::size_t>(resamples));
    for (auto& m : means) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += samples[pick(eng)];
        m = s / static_cast<double>(n);
    }
    std::sort(means.begin(), means.end());
    const double a = 0.5 * (1.0 - level);
    return {sorted_quantile(means, a), sorted_quantile(means, 1.0 - a)};
}

/// Spectral norm; symmetric inputs use the eigen-solver, others the SVD.
inline double spectral_norm(const Matrix& a) {
    if (a.size() == 0) return 0.0;
    if (a.rows() == a.cols() && (a - a.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + a.cwiseAbs().maxCoeff())) {
        Eigen::SelfAdjointEigenSolver<Matrix> es(a, Eigen::EigenvaluesOnly);
        return es.eigenvalues().cwiseAbs().maxCoeff();
    }
    Eigen::JacobiSVD<Matrix> svd(a);
    return svd.singularValues()(0);
}

/// Percentile bootstrap CI for ||mean of samples||_2 over i.i.d. matrix-valued samples.
inline Interval bootstrap_opnorm_ci(std::span<const Matrix> samples, int resamples = 2000,
                                    double level = 0.95, std::uint64_t seed = 0) {
    if (samples.size() < kMinBootstrapSamples) {
        throw InvalidInput("bootstrap_opnorm_ci: need at least 30 samples");
    }
    if (resamples < 1 || !(level > 0.0 && level < 1.0)) {
        throw InvalidInput("bootstrap_opnorm_ci: bad parameters");
    }
    auto eng = random::make_engine(seed, random::stream::kBootstrap, 1);
    const std::size_t n = samples.size();
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::vector<double> norms(static_cast<std::size_t>(resamples));
    Matrix acc(samples[0].rows(), samples[0].cols());
    for (auto& v : norms) {
        acc.setZero();
        for (std::size_t i = 0; i < n; ++i) acc += samples[pick(eng)];
        v = spectral_norm(acc / static_cast<double>(n));
    }
    std::sort(norms.begin(), norms.end());
    const double a = 0.5 * (1.0 - level);
    return {sorted_quantile(norms, a), sorted_quantile(norms, 1.0 - a)};
}

}  // namespace ddlab::stats
