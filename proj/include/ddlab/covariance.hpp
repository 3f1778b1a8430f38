#pragma once

// Population covariance spectra: eigenvalue decay profiles, trace normalization,
// elementary symmetric polynomials and the Sigma^{1/2} map used by the samplers.
//
// Formula-level code consumes eigenvalues only. The optional orthogonal basis matters
// solely when drawing rows x = Sigma^{1/2} z.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ddlab/errors.hpp"
#include "ddlab/linalg.hpp"
#include "ddlab/random.hpp"

namespace ddlab {

enum class ProfileKind { isotropic, diag_linear, diag_exp, diag_poly, diag_poly_2 };

inline std::string_view to_string(ProfileKind k) {
    switch (k) {
        case ProfileKind::isotropic: return "isotropic";
        case ProfileKind::diag_linear: return "diag_linear";
        case ProfileKind::diag_exp: return "diag_exp";
        case ProfileKind::diag_poly: return "diag_poly";
        case ProfileKind::diag_poly_2: return "diag_poly_2";
    }
    return "?";
}

inline ProfileKind parse_profile(std::string_view name) {
    if (name == "isotropic" || name == "identity") return ProfileKind::isotropic;
    if (name == "diag_linear") return ProfileKind::diag_linear;
    if (name == "diag_exp") return ProfileKind::diag_exp;
    if (name == "diag_poly") return ProfileKind::diag_poly;
    if (name == "diag_poly_2") return ProfileKind::diag_poly_2;
    throw InvalidInput("unknown eigenvalue profile '" + std::string(name) + "'");
}

/// Eigenvalues of a positive definite covariance, sorted descending, with an optional
/// orthogonal eigenbasis.
class Spectrum {
public:
    Spectrum() = default;

    explicit Spectrum(std::vector<double> eigenvalues, std::optional<Matrix> basis = std::nullopt)
        : eig_(std::move(eigenvalues)), basis_(std::move(basis)) {
        if (eig_.empty()) throw InvalidInput("Spectrum: no eigenvalues");
        for (double t : eig_) {
            if (!(t > 0.0) || !std::isfinite(t)) {
                throw InvalidInput("Spectrum: eigenvalues must be finite and positive");
            }
        }
        if (basis_) {
            const auto d = static_cast<Index>(eig_.size());
            if (basis_->rows() != d || basis_->cols() != d) {
                throw InvalidInput("Spectrum: basis must be d x d");
            }
            const double err =
                (basis_->transpose() * *basis_ - Matrix::Identity(d, d)).cwiseAbs().maxCoeff();
            if (err > 1e-10) throw InvalidInput("Spectrum: basis is not orthogonal");
            // Keep columns paired with their eigenvalues while sorting.
            std::vector<Index> order(eig_.size());
            for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<Index>(i);
            std::stable_sort(order.begin(), order.end(),
                             [&](Index a, Index b) { return eig_[a] > eig_[b]; });
            std::vector<double> sorted(eig_.size());
            Matrix q(d, d);
            for (Index j = 0; j < d; ++j) {
                sorted[j] = eig_[order[j]];
                q.col(j) = basis_->col(order[j]);
            }
            eig_ = std::move(sorted);
            basis_ = std::move(q);
        } else {
            std::sort(eig_.begin(), eig_.end(), std::greater<>());
        }
    }

    static Spectrum isotropic(Index d, double value = 1.0) {
        return Spectrum(std::vector<double>(static_cast<std::size_t>(d), value));
    }

    Index dim() const { return static_cast<Index>(eig_.size()); }
    std::span<const double> eigenvalues() const { return eig_; }
    double operator[](Index i) const { return eig_[static_cast<std::size_t>(i)]; }
    Vector as_vector() const { return Eigen::Map<const Vector>(eig_.data(), dim()); }
    const std::optional<Matrix>& basis() const { return basis_; }
    double condition_number() const { return eig_.front() / eig_.back(); }
    double trace() const {
        double t = 0.0;
        for (double v : eig_) t += v;
        return t;
    }
    double trace_inverse() const {
        double t = 0.0;
        for (double v : eig_) t += 1.0 / v;
        return t;
    }
    double log_det() const {
        double t = 0.0;
        for (double v : eig_) t += std::log(v);
        return t;
    }

    /// Sigma as a dense matrix (Q diag(eig) Q^T, or diagonal).
    Matrix dense() const {
        const Vector e = as_vector();
        if (!basis_) return e.asDiagonal();
        return *basis_ * e.asDiagonal() * basis_->transpose();
    }

    Spectrum scaled(double c) const {
        std::vector<double> e = eig_;
        for (double& v : e) v *= c;
        return Spectrum(std::move(e), basis_);
    }

    Spectrum with_basis(Matrix q) const { return Spectrum(eig_, std::move(q)); }

private:
    std::vector<double> eig_;
    std::optional<Matrix> basis_;
};

/// Eigenvalue profile with endpoints pinned to lambda_max (i = 1) and lambda_min (i = d).
///   diag_linear  b - a i
///   diag_exp     b 10^{-a i}
///   diag_poly    (b - a i)^2
///   diag_poly_2  b i^{-a}
inline Spectrum make_profile(ProfileKind kind, Index d, double lambda_max = 1.0,
                             double lambda_min = 1e-4) {
    if (kind == ProfileKind::isotropic) {
        if (d < 1) throw InvalidInput("make_profile: d must be positive");
        return Spectrum::isotropic(d, lambda_max);
    }
    if (d < 2) throw InvalidInput("make_profile: d must be at least 2");
    if (!(lambda_max > lambda_min) || !(lambda_min > 0.0)) {
        throw InvalidInput("make_profile: need lambda_max > lambda_min > 0");
    }
    const double dm1 = static_cast<double>(d - 1);
    std::vector<double> e(static_cast<std::size_t>(d));
    switch (kind) {
        case ProfileKind::diag_linear: {
            const double a = (lambda_max - lambda_min) / dm1;
            const double b = lambda_max + a;
            for (Index i = 1; i <= d; ++i) e[i - 1] = b - a * static_cast<double>(i);
            break;
        }
        case ProfileKind::diag_exp: {
            const double a = std::log10(lambda_max / lambda_min) / dm1;
            for (Index i = 1; i <= d; ++i) {
                e[i - 1] = lambda_max * std::pow(10.0, -a * static_cast<double>(i - 1));
            }
            break;
        }
        case ProfileKind::diag_poly: {
            const double a = (std::sqrt(lambda_max) - std::sqrt(lambda_min)) / dm1;
            const double b = std::sqrt(lambda_max) + a;
            for (Index i = 1; i <= d; ++i) {
                const double r = b - a * static_cast<double>(i);
                e[i - 1] = r * r;
            }
            break;
        }
        case ProfileKind::diag_poly_2: {
            const double a = std::log(lambda_max / lambda_min) / std::log(static_cast<double>(d));
            for (Index i = 1; i <= d; ++i) {
                e[i - 1] = lambda_max * std::pow(static_cast<double>(i), -a);
            }
            break;
        }
        case ProfileKind::isotropic: break;
    }
    // Pin the endpoints exactly; the closed forms above can be off by an ulp.
    e.front() = lambda_max;
    e.back() = lambda_min;
    return Spectrum(std::move(e));
}

/// Profile parameterized by condition number with lambda_max = 1; kappa = 1 is isotropic.
inline Spectrum make_profile_kappa(ProfileKind kind, Index d, double kappa) {
    if (!(kappa >= 1.0)) throw InvalidInput("condition number must be >= 1");
    if (kind == ProfileKind::isotropic || kappa == 1.0) return Spectrum::isotropic(d);
    return make_profile(kind, d, 1.0, 1.0 / kappa);
}

/// c * s with c chosen so that tr((c Sigma)^{-1}) = target.
inline Spectrum scale_trace_inverse(const Spectrum& s, double target) {
    if (!(target > 0.0)) throw InvalidInput("scale_trace_inverse: target must be positive");
    return s.scaled(s.trace_inverse() / target);
}

/// e_0..e_k of the given values via the one-value-at-a-time recursion.
inline std::vector<double> elem_sym_polys(std::span<const double> values, std::size_t up_to) {
    if (up_to > values.size()) throw InvalidInput("elem_sym_polys: up_to exceeds length");
    std::vector<double> e(up_to + 1, 0.0);
    e[0] = 1.0;
    std::size_t seen = 0;
    for (double t : values) {
        ++seen;
        const std::size_t top = std::min(seen, up_to);
        for (std::size_t k = top; k >= 1; --k) e[k] += t * e[k - 1];
    }
    return e;
}

/// Z Sigma^{1/2}.
inline Matrix apply_sqrt(const Spectrum& s, const Matrix& z) {
    if (z.cols() != s.dim()) {
        throw InvalidInput("apply_sqrt: Z has " + std::to_string(z.cols()) + " columns, expected " +
                           std::to_string(s.dim()));
    }
    const Vector root = s.as_vector().array().sqrt();
    if (!s.basis()) return z * root.asDiagonal();
    const Matrix& q = *s.basis();
    return (z * q) * root.asDiagonal() * q.transpose();
}

/// Haar-distributed orthogonal matrix (QR of a Gaussian matrix with sign fix).
inline Matrix random_orthogonal(Index d, random::Engine& eng) {
    Matrix g(d, d);
    for (Index j = 0; j < d; ++j)
        for (Index i = 0; i < d; ++i) g(i, j) = random::standard_normal(eng);
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ() * Matrix::Identity(d, d);
    const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Index j = 0; j < d; ++j) {
        if (r(j, j) < 0) q.col(j) = -q.col(j);
    }
    return q;
}

// Plain-text spectrum format: one eigenvalue per line in decimal notation.
// Blank lines and lines starting with '#' are ignored.

inline void write_spectrum(std::ostream& os, const Spectrum& s) {
    char buf[64];
    for (double v : s.eigenvalues()) {
        auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
        os.write(buf, res.ptr - buf);
        os.put('\n');
    }
}

inline Spectrum read_spectrum(std::istream& is) {
    std::vector<double> values;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        const auto last = line.find_last_not_of(" \t\r");
        const std::string_view tok(line.data() + first, last - first + 1);
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc() || ptr != tok.data() + tok.size()) {
            throw InvalidInput("spectrum line " + std::to_string(lineno) + ": not a number");
        }
        values.push_back(v);
    }
    return Spectrum(std::move(values));
}

}  // namespace ddlab
