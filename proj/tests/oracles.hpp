#pragma once

// Test-only reference computations. Each one takes a different route from the library
// code it checks (brute-force enumeration, direct determinants, plain bisection).

#include <algorithm>
#include <numeric>
#include <cmath>
#include <cstdint>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include <Eigen/Dense>

#include "ddlab/random.hpp"

namespace oracle {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline Matrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
    ddlab::random::Engine eng(seed);
    std::normal_distribution<double> n01;
    Matrix a(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) a(i, j) = n01(eng);
    return a;
}

/// det via LU of the explicit product.
inline double direct_gram_det(const Matrix& x) {
    return (x * x.transpose()).fullPivLu().determinant();
}

/// Elementary symmetric polynomial e_k by enumerating all k-subsets.
inline double brute_elem_sym(const std::vector<double>& v, std::size_t k) {
    const std::size_t n = v.size();
    double total = 0.0;
    for (std::uint64_t mask = 0; mask < (1ULL << n); ++mask) {
        if (static_cast<std::size_t>(__builtin_popcountll(mask)) != k) continue;
        double prod = 1.0;
        for (std::size_t i = 0; i < n; ++i)
            if (mask & (1ULL << i)) prod *= v[i];
        total += prod;
    }
    return total;
}

/// lambda with sum t/(t+lambda) = n by plain bisection (no Newton steps).
inline double bisect_lambda(const std::vector<double>& eig, double n) {
    double lo = 0.0, hi = 1.0;
    auto f = [&](double l) {
        double s = 0.0;
        for (double t : eig) s += t / (t + l);
        return s - n;
    };
    while (f(hi) > 0) hi *= 2.0;
    for (int i = 0; i < 400; ++i) {
        const double mid = 0.5 * (lo + hi);
        (f(mid) > 0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

inline double max_abs(const Matrix& a) { return a.size() ? a.cwiseAbs().maxCoeff() : 0.0; }

/// Two-sample Kolmogorov-Smirnov p-value from the asymptotic Kolmogorov series with the
/// usual small-sample correction of the statistic.
inline double ks_two_sample_pvalue(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::size_t i = 0, j = 0;
    double dmax = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        dmax = std::max(dmax, std::abs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
    }
    const double ne = static_cast<double>(a.size()) * b.size() / (a.size() + b.size());
    const double lam = (std::sqrt(ne) + 0.12 + 0.11 / std::sqrt(ne)) * dmax;
    if (lam < 1e-3) return 1.0;
    double q = 0.0;
    for (int k = 1; k <= 200; ++k) {
        const double term = std::exp(-2.0 * k * k * lam * lam);
        q += (k % 2 ? 2.0 : -2.0) * term;
        if (term < 1e-16) break;
    }
    return std::clamp(q, 0.0, 1.0);
}

/// Pearson chi-square goodness-of-fit p-value; cells with expected count below 5 are pooled
/// into their neighbour.
inline double chi_square_pvalue(const std::vector<long>& observed, const std::vector<double>& probs) {
    const double total = static_cast<double>(std::accumulate(observed.begin(), observed.end(), 0L));
    std::vector<double> obs, expct;
    double o = 0.0, e = 0.0;
    for (std::size_t k = 0; k < observed.size(); ++k) {
        o += static_cast<double>(observed[k]);
        e += probs[k] * total;
        if (e >= 5.0) {
            obs.push_back(o);
            expct.push_back(e);
            o = e = 0.0;
        }
    }
    if (!expct.empty()) {
        obs.back() += o;
        expct.back() += e;
    }
    double stat = 0.0;
    for (std::size_t k = 0; k < obs.size(); ++k) stat += (obs[k] - expct[k]) * (obs[k] - expct[k]) / expct[k];
    if (obs.size() < 2) return 1.0;
    boost::math::chi_squared_distribution<double> dist(static_cast<double>(obs.size() - 1));
    return boost::math::cdf(boost::math::complement(dist, stat));
}

}  // namespace oracle
