#pragma once

// Statistical harness for determinant-preserving random matrices: compares the Monte Carlo
// mean of det(A_{I,J}) with the determinant of the Monte Carlo mean of A_{I,J}, the latter
// estimated on an independent stream so the two estimates are uncorrelated.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "ddlab/designs.hpp"
#include "ddlab/errors.hpp"
#include "ddlab/linalg.hpp"
#include "ddlab/measure.hpp"
#include "ddlab/random.hpp"

namespace ddlab::dp {

/// Named procedure producing i.i.d. draws of a random square matrix.
struct MatrixGenerator {
    std::string name;
    Index dim = 0;
    std::function<Matrix(random::Engine&)> draw;
};

inline MatrixGenerator fixed(Matrix a, std::string name = "fixed") {
    const Index d = a.rows();
    return {std::move(name), d, [a = std::move(a)](random::Engine&) { return a; }};
}

inline MatrixGenerator gaussian_entries(Index d) {
    return {"gaussian_entries", d, [d](random::Engine& eng) {
                Matrix a(d, d);
                for (Index j = 0; j < d; ++j)
                    for (Index i = 0; i < d; ++i) a(i, j) = random::standard_normal(eng);
                return a;
            }};
}

/// s Z with s uniform on `support`.
inline MatrixGenerator scaled(Matrix z, std::vector<double> support, std::string name = "scaled") {
    const Index d = z.rows();
    return {std::move(name), d, [z = std::move(z), support = std::move(support)](random::Engine& eng) {
                std::uniform_int_distribution<std::size_t> pick(0, support.size() - 1);
                return Matrix(support[pick(eng)] * z);
            }};
}

/// A fixed d x d matrix of the given rank (sum of `rank` integer outer products).
inline Matrix fixed_rank_matrix(Index d, Index rank) {
    Matrix z = Matrix::Zero(d, d);
    for (Index r = 0; r < rank; ++r) {
        Vector u(d), v(d);
        for (Index i = 0; i < d; ++i) {
            u(i) = static_cast<double>(((i + 1) * (r + 2)) % 5) - 1.5;
            v(i) = static_cast<double>(((i + 2) * (r + 3)) % 7) - 2.5;
        }
        z += u * v.transpose();
    }
    return z;
}

/// The scaled example with s uniform on {0, 2}: d.p. for rank 1, not for rank >= 2.
inline MatrixGenerator rank_scaled(Index d, Index rank) {
    return scaled(fixed_rank_matrix(d, rank), {0.0, 2.0}, "rank" + std::to_string(rank) + "_scaled");
}

inline MatrixGenerator sum(MatrixGenerator a, MatrixGenerator b) {
    if (a.dim != b.dim) throw InvalidInput("dp::sum: dimension mismatch");
    const Index d = a.dim;
    return {a.name + "+" + b.name, d, [fa = std::move(a.draw), fb = std::move(b.draw)](random::Engine& eng) {
                Matrix x = fa(eng);
                x += fb(eng);
                return x;
            }};
}

inline MatrixGenerator product(MatrixGenerator a, MatrixGenerator b) {
    if (a.dim != b.dim) throw InvalidInput("dp::product: dimension mismatch");
    const Index d = a.dim;
    return {a.name + "*" + b.name, d, [fa = std::move(a.draw), fb = std::move(b.draw)](random::Engine& eng) {
                Matrix x = fa(eng);
                Matrix y = fb(eng);
                return Matrix(x * y);
            }};
}

/// X^T X with X ~ mu^K, K ~ Poisson(gamma); with fixed_k >= 0 the row count is fixed instead.
inline MatrixGenerator poisson_gram(MeasureSpec m, double gamma, long fixed_k = -1) {
    const Index d = m.dim();
    std::string name = fixed_k >= 0 ? "fixed_k_gram" : "poisson_gram";
    return {std::move(name), d, [m = std::move(m), gamma, fixed_k](random::Engine& eng) {
                const long k = fixed_k >= 0 ? fixed_k : random::poisson(eng, gamma);
                const Matrix x = draw_rows(m, k, eng);
                return Matrix(x.transpose() * x);
            }};
}

struct MinorRecord {
    std::vector<Index> rows;  // 0-based
    std::vector<Index> cols;
    Index size = 0;
    double mc_mean = 0.0;
    double mc_se = 0.0;
    double det_of_mean = 0.0;
    double det_of_mean_se = 0.0;
    double z = 0.0;
};

enum class Verdict { consistent, violated };

inline std::string_view to_string(Verdict v) {
    return v == Verdict::consistent ? "consistent" : "violated";
}

struct DpReport {
    std::string generator;
    Index dim = 0;
    std::int64_t trials = 0;
    std::vector<MinorRecord> records;
    double threshold = 0.0;  // Bonferroni-corrected |z| cutoff
    double max_abs_z = 0.0;
    Verdict verdict = Verdict::consistent;
    double target = std::numeric_limits<double>::quiet_NaN();  // closed-form full-minor value, if any
    std::string note;
};

inline constexpr double kFamilyLevel = 0.01;

/// |z| cutoff for `tests` two-sided tests at family-wise level `level`.
inline double bonferroni_threshold(std::size_t tests, double level = kFamilyLevel) {
    boost::math::normal_distribution<double> n01;
    const double tail = level / (2.0 * static_cast<double>(std::max<std::size_t>(tests, 1)));
    return boost::math::quantile(boost::math::complement(n01, tail));
}

namespace detail {

inline void subsets_of_size(Index d, Index s, std::vector<std::vector<Index>>& out) {
    std::vector<Index> cur;
    std::function<void(Index)> rec = [&](Index start) {
        if (static_cast<Index>(cur.size()) == s) {
            out.push_back(cur);
            return;
        }
        for (Index i = start; i < d; ++i) {
            cur.push_back(i);
            rec(i + 1);
            cur.pop_back();
        }
    };
    rec(0);
}

inline Matrix submatrix(const Matrix& a, const std::vector<Index>& rows, const std::vector<Index>& cols) {
    Matrix out(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < cols.size(); ++j) out(i, j) = a(rows[i], cols[j]);
    return out;
}

inline double det(const Matrix& a) {
    switch (a.rows()) {
        case 0: return 1.0;
        case 1: return a(0, 0);
        case 2: return a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
        default: return a.partialPivLu().determinant();
    }
}

/// Cofactor matrix: C(i, j) = (-1)^{i+j} det(A without row i and column j).
inline Matrix cofactors(const Matrix& a) {
    const Index s = a.rows();
    Matrix c(s, s);
    if (s == 1) {
        c(0, 0) = 1.0;
        return c;
    }
    for (Index i = 0; i < s; ++i) {
        for (Index j = 0; j < s; ++j) {
            Matrix m(s - 1, s - 1);
            for (Index r = 0, rr = 0; r < s; ++r) {
                if (r == i) continue;
                for (Index q = 0, qq = 0; q < s; ++q) {
                    if (q == j) continue;
                    m(rr, qq++) = a(r, q);
                }
                ++rr;
            }
            c(i, j) = (((i + j) % 2) ? -1.0 : 1.0) * det(m);
        }
    }
    return c;
}

}  // namespace detail

inline constexpr Index kExhaustiveMaxDim = 6;
inline constexpr std::size_t kSampledPairsPerSize = 64;
inline constexpr std::int64_t kMinDpTrials = 10000;

/// Checks E[det(A_{I,J})] = det(E[A_{I,J}]) over all index pairs of the requested sizes
/// (all sizes 1..d when minor_sizes is empty). Beyond d = 6 pairs are subsampled.
inline DpReport verify_dp(const MatrixGenerator& g, const std::vector<Index>& minor_sizes,
                          std::int64_t trials, std::uint64_t seed, unsigned threads = 1) {
    if (trials < kMinDpTrials) throw InvalidInput("verify_dp: need at least 10000 trials");
    const Index d = g.dim;
    std::vector<Index> sizes = minor_sizes;
    if (sizes.empty())
        for (Index s = 1; s <= d; ++s) sizes.push_back(s);

    struct Pair {
        std::vector<Index> rows, cols;
    };
    std::vector<Pair> pairs;
    auto pick_eng = random::make_engine(seed, random::stream::kAuxiliary, 0);
    for (Index s : sizes) {
        if (s < 1 || s > d) throw InvalidInput("verify_dp: minor size out of range");
        std::vector<std::vector<Index>> subs;
        detail::subsets_of_size(d, s, subs);
        if (d <= kExhaustiveMaxDim) {
            for (const auto& r : subs)
                for (const auto& c : subs) pairs.push_back({r, c});
        } else {
            std::uniform_int_distribution<std::size_t> pick(0, subs.size() - 1);
            for (std::size_t k = 0; k < kSampledPairsPerSize; ++k) {
                pairs.push_back({subs[pick(pick_eng)], subs[pick(pick_eng)]});
            }
        }
    }
    const std::size_t np = pairs.size();
    const Index d2 = d * d;

    // Per-batch partial sums, combined in batch order for thread-count invariance.
    constexpr std::int64_t kBatch = 1024;
    const std::int64_t nbatch = (trials + kBatch - 1) / kBatch;
    struct Partial {
        std::vector<double> s1, s2;  // det sums per pair
        Vector m1;                   // sum of vec(A)
        Matrix m2;                   // sum of vec(A) vec(A)^T
    };
    std::vector<Partial> parts(static_cast<std::size_t>(nbatch));
    random::parallel_for(nbatch, threads, [&](std::int64_t b) {
        Partial p;
        p.s1.assign(np, 0.0);
        p.s2.assign(np, 0.0);
        p.m1 = Vector::Zero(d2);
        p.m2 = Matrix::Zero(d2, d2);
        const std::int64_t first = b * kBatch;
        const std::int64_t last = std::min(trials, first + kBatch);
        for (std::int64_t t = first; t < last; ++t) {
            auto eng = random::make_engine(seed, random::stream::kDpMinor, static_cast<std::uint64_t>(t));
            const Matrix a = g.draw(eng);
            for (std::size_t q = 0; q < np; ++q) {
                const double v = detail::det(detail::submatrix(a, pairs[q].rows, pairs[q].cols));
                p.s1[q] += v;
                p.s2[q] += v * v;
            }
            auto eng2 = random::make_engine(seed, random::stream::kDpMean, static_cast<std::uint64_t>(t));
            const Matrix a2 = g.draw(eng2);
            const Eigen::Map<const Vector> va(a2.data(), d2);
            p.m1 += va;
            p.m2.selfadjointView<Eigen::Lower>().rankUpdate(va);
        }
        parts[static_cast<std::size_t>(b)] = std::move(p);
    });

    std::vector<double> s1(np, 0.0), s2(np, 0.0);
    Vector m1 = Vector::Zero(d2);
    Matrix m2 = Matrix::Zero(d2, d2);
    for (const auto& p : parts) {
        for (std::size_t q = 0; q < np; ++q) {
            s1[q] += p.s1[q];
            s2[q] += p.s2[q];
        }
        m1 += p.m1;
        m2 += p.m2;
    }
    const double nt = static_cast<double>(trials);
    const Vector mean_vec = m1 / nt;
    Matrix cov = m2.selfadjointView<Eigen::Lower>();
    cov = (cov - nt * mean_vec * mean_vec.transpose()) / (nt - 1.0);
    const Matrix mean_mat = Eigen::Map<const Matrix>(mean_vec.data(), d, d);

    DpReport rep;
    rep.generator = g.name;
    rep.dim = d;
    rep.trials = trials;
    rep.threshold = bonferroni_threshold(np);
    for (std::size_t q = 0; q < np; ++q) {
        MinorRecord r;
        r.rows = pairs[q].rows;
        r.cols = pairs[q].cols;
        r.size = static_cast<Index>(r.rows.size());
        r.mc_mean = s1[q] / nt;
        const double var = std::max(0.0, (s2[q] - nt * r.mc_mean * r.mc_mean) / (nt - 1.0));
        r.mc_se = std::sqrt(var / nt);
        const Matrix sub = detail::submatrix(mean_mat, r.rows, r.cols);
        r.det_of_mean = detail::det(sub);
        // Delta method: gradient of det is the cofactor matrix; vec index is column-major.
        const Matrix cof = detail::cofactors(sub);
        double gvar = 0.0;
        for (Index j1 = 0; j1 < r.size; ++j1)
            for (Index i1 = 0; i1 < r.size; ++i1)
                for (Index j2 = 0; j2 < r.size; ++j2)
                    for (Index i2 = 0; i2 < r.size; ++i2) {
                        const Index v1 = r.cols[j1] * d + r.rows[i1];
                        const Index v2 = r.cols[j2] * d + r.rows[i2];
                        gvar += cof(i1, j1) * cof(i2, j2) * cov(v1, v2);
                    }
        r.det_of_mean_se = std::sqrt(std::max(0.0, gvar) / nt);
        const double diff = r.mc_mean - r.det_of_mean;
        const double se = std::hypot(r.mc_se, r.det_of_mean_se);
        const double scale = 1.0 + std::abs(r.mc_mean) + std::abs(r.det_of_mean);
        if (se > 1e-12 * scale) {
            r.z = diff / se;
        } else {
            r.z = std::abs(diff) <= 1e-9 * scale ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), diff);
        }
        rep.max_abs_z = std::max(rep.max_abs_z, std::abs(r.z));
        rep.records.push_back(std::move(r));
    }
    rep.verdict = rep.max_abs_z > rep.threshold ? Verdict::violated : Verdict::consistent;
    return rep;
}

enum class Combine { sum, product };

/// Runs verify_dp on A + B or AB. Both inputs are assumed independent and individually d.p.
inline DpReport verify_closure(MatrixGenerator a, MatrixGenerator b, Combine mode,
                               std::int64_t trials, std::uint64_t seed, unsigned threads = 1) {
    MatrixGenerator g = mode == Combine::sum ? sum(std::move(a), std::move(b))
                                             : product(std::move(a), std::move(b));
    DpReport rep = verify_dp(g, {}, trials, seed, threads);
    rep.note = "closure check assumes independent, individually d.p. inputs";
    return rep;
}

/// X^T X with X ~ mu^K, K ~ Poisson(gamma): every minor should match det(E[.]) and the full
/// determinant should equal det(gamma Sigma). fixed_k >= 0 replaces K with a constant
/// (a control that is expected to fail for fixed_k = d).
inline DpReport verify_poisson_identity(const MeasureSpec& m, double gamma, std::int64_t trials,
                                        std::uint64_t seed, unsigned threads = 1, long fixed_k = -1) {
    if (!(gamma > 0.0)) throw InvalidInput("verify_poisson_identity: gamma must be positive");
    DpReport rep = verify_dp(poisson_gram(m, gamma, fixed_k), {}, trials, seed, threads);
    rep.target = std::exp(static_cast<double>(m.dim()) * std::log(gamma) + m.spectrum.log_det());
    if (fixed_k >= 0) rep.note = "fixed K = " + std::to_string(fixed_k) + " control";
    return rep;
}

struct NormalizationCheck {
    MonteCarloEstimate estimate;
    double target = 0.0;
    double z = 0.0;
};

/// Monte Carlo E[det(X X^T)] for X ~ mu^K, K ~ Poisson(gamma), against e^{-gamma} det(I + gamma Sigma).
/// det(X X^T) is exactly 0 for K > d and 1 for K = 0.
inline NormalizationCheck verify_normalization(const MeasureSpec& m, double gamma, std::int64_t trials,
                                               std::uint64_t seed, unsigned threads = 1) {
    if (!(gamma >= 0.0)) throw InvalidInput("verify_normalization: gamma must be >= 0");
    if (trials < 100) throw InvalidInput("verify_normalization: need at least 100 trials");
    const Index d = m.dim();
    std::vector<double> vals(static_cast<std::size_t>(trials));
    random::parallel_for(trials, threads, [&](std::int64_t t) {
        auto eng = random::make_engine(seed, random::stream::kOracle, static_cast<std::uint64_t>(t));
        const long k = random::poisson(eng, gamma);
        double v = 0.0;
        if (k <= d) {
            const Matrix x = draw_rows(m, k, eng);
            v = std::exp(linalg::log_det_gram(x));
        }
        vals[static_cast<std::size_t>(t)] = v;
    });
    double s1 = 0.0, s2 = 0.0;
    for (double v : vals) {
        s1 += v;
        s2 += v * v;
    }
    const double nt = static_cast<double>(trials);
    NormalizationCheck out;
    out.estimate.trials = trials;
    out.estimate.mean = Matrix::Constant(1, 1, s1 / nt);
    const double var = std::max(0.0, (s2 - nt * (s1 / nt) * (s1 / nt)) / (nt - 1.0));
    out.estimate.std_error = Matrix::Constant(1, 1, std::sqrt(var / nt));
    out.estimate.effective_sample_size = nt;
    double log_t = -gamma;
    for (double t : m.spectrum.eigenvalues()) log_t += std::log1p(gamma * t);
    out.target = std::exp(log_t);
    const double se = out.estimate.se();
    const double diff = out.estimate.value() - out.target;
    out.z = se > 0 ? diff / se : (std::abs(diff) <= 1e-12 * (1 + out.target) ? 0.0 : std::numeric_limits<double>::infinity());
    return out;
}

}  // namespace ddlab::dp
