#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "axb/matrix.hpp"

namespace axb {

/// Thin SVD: M = U · diag(singular_values) · Vᵀ with U (m×r), V (p×r),
/// r = min(m, p), singular values sorted nonincreasing.
struct SvdFactors {
    DenseMatrix U;
    std::vector<double> singular_values;
    DenseMatrix V;
    size_t numeric_rank = 0;

    double sigma_max() const { return singular_values.empty() ? 0.0 : singular_values.front(); }

    /// Smallest singular value counted into the numeric rank; 0 if rank 0.
    double sigma_min_positive() const {
        return numeric_rank == 0 ? 0.0 : singular_values[numeric_rank - 1];
    }
};

/// Machine-precision rank cutoff: 8 · max(m,n) · σ_max · 2⁻⁵².
inline double default_rank_tol(size_t rows, size_t cols, double sigma_max) {
    return 8.0 * static_cast<double>(std::max(rows, cols)) * sigma_max *
           std::ldexp(1.0, -52);
}

namespace detail {

// Fills columns [from, r) of U with vectors orthonormal to columns [0, from).
// Used when the input is rank-deficient and Jacobi leaves null columns.
inline void complete_orthonormal_columns(DenseMatrix& u, size_t from) {
    const size_t m = u.rows(), r = u.cols();
    size_t next_basis = 0;
    for (size_t j = from; j < r; ++j) {
        for (; next_basis <= m; ++next_basis) {
            if (next_basis == m)
                throw DecompositionError("svd: failed to complete orthonormal basis");
            std::vector<double> cand(m, 0.0);
            cand[next_basis] = 1.0;
            for (int pass = 0; pass < 2; ++pass) {  // twice-is-enough Gram-Schmidt
                for (size_t c = 0; c < j; ++c) {
                    double dot = 0.0;
                    for (size_t i = 0; i < m; ++i) dot += cand[i] * u(i, c);
                    for (size_t i = 0; i < m; ++i) cand[i] -= dot * u(i, c);
                }
            }
            double nrm = 0.0;
            for (double v : cand) nrm += v * v;
            nrm = std::sqrt(nrm);
            if (nrm > 0.5) {  // candidate not (numerically) inside the span
                for (size_t i = 0; i < m; ++i) u(i, j) = cand[i] / nrm;
                ++next_basis;
                break;
            }
        }
    }
}

// One-sided Jacobi on a tall matrix (rows >= cols): orthogonalizes columns,
// accumulating the right rotations into V. Columns whose mass has collapsed
// to roundoff level are left alone, otherwise exactly rank-deficient inputs
// keep rotating their noise subspace forever.
inline void jacobi_factor(DenseMatrix& w, DenseMatrix& v, size_t max_sweeps) {
    const size_t m = w.rows(), n = w.cols();
    const double tol = 1e-15;
    const double null_sq = frobenius_sq(w) * 1e-30;
    for (size_t sweep = 0; sweep < max_sweeps; ++sweep) {
        bool rotated = false;
        for (size_t p = 0; p + 1 < n; ++p) {
            for (size_t q = p + 1; q < n; ++q) {
                double app = 0.0, aqq = 0.0, apq = 0.0;
                for (size_t i = 0; i < m; ++i) {
                    double wp = w(i, p), wq = w(i, q);
                    app += wp * wp;
                    aqq += wq * wq;
                    apq += wp * wq;
                }
                if (app <= null_sq || aqq <= null_sq) continue;
                if (std::abs(apq) <= tol * std::sqrt(app * aqq)) continue;
                rotated = true;
                double zeta = (aqq - app) / (2.0 * apq);
                double t = std::copysign(1.0, zeta) /
                           (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                double c = 1.0 / std::sqrt(1.0 + t * t);
                double s = c * t;
                for (size_t i = 0; i < m; ++i) {
                    double wp = w(i, p), wq = w(i, q);
                    w(i, p) = c * wp - s * wq;
                    w(i, q) = s * wp + c * wq;
                }
                for (size_t i = 0; i < n; ++i) {
                    double vp = v(i, p), vq = v(i, q);
                    v(i, p) = c * vp - s * vq;
                    v(i, q) = s * vp + c * vq;
                }
            }
        }
        if (!rotated) return;
    }
    throw DecompositionError("svd: Jacobi sweeps exceeded cap");
}

}  // namespace detail

inline SvdFactors svd(const DenseMatrix& input, size_t max_sweeps = 64) {
    if (input.rows() == 0 || input.cols() == 0) throw ShapeError("svd: empty matrix");
    const bool wide = input.rows() < input.cols();
    DenseMatrix w = wide ? transpose(input) : input;
    const size_t m = w.rows(), n = w.cols();
    DenseMatrix v = DenseMatrix::identity(n);
    detail::jacobi_factor(w, v, max_sweeps);

    std::vector<double> sigma(n);
    for (size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (size_t i = 0; i < m; ++i) s += w(i, j) * w(i, j);
        sigma[j] = std::sqrt(s);
    }
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return sigma[a] > sigma[b]; });

    SvdFactors f;
    f.singular_values.resize(n);
    f.U = DenseMatrix(m, n);
    f.V = DenseMatrix(n, n);
    for (size_t j = 0; j < n; ++j) {
        size_t src = order[j];
        f.singular_values[j] = sigma[src];
        for (size_t i = 0; i < n; ++i) f.V(i, j) = v(i, src);
    }
    const double cutoff = default_rank_tol(input.rows(), input.cols(), f.singular_values[0]);
    size_t solid = 0;
    for (size_t j = 0; j < n; ++j) {
        size_t src = order[j];
        if (f.singular_values[j] > cutoff) {
            for (size_t i = 0; i < m; ++i) f.U(i, j) = w(i, src) / f.singular_values[j];
            solid = j + 1;
        }
    }
    // Columns below the cutoff carry no reliable direction; rebuild them so
    // U stays orthonormal.
    detail::complete_orthonormal_columns(f.U, solid);
    f.numeric_rank = solid;

    if (wide) std::swap(f.U, f.V);
    return f;
}

/// Moore-Penrose pseudoinverse via SVD. rank_tol < 0 selects the default
/// machine-precision cutoff.
inline DenseMatrix pseudoinverse(const DenseMatrix& m, double rank_tol = -1.0) {
    SvdFactors f = svd(m);
    if (rank_tol < 0.0) rank_tol = default_rank_tol(m.rows(), m.cols(), f.sigma_max());
    const size_t r = f.singular_values.size();
    DenseMatrix p(m.cols(), m.rows());
    for (size_t k = 0; k < r; ++k) {
        double s = f.singular_values[k];
        if (s <= rank_tol) continue;
        double inv = 1.0 / s;
        for (size_t i = 0; i < m.cols(); ++i) {
            double vik = f.V(i, k) * inv;
            if (vik == 0.0) continue;
            for (size_t j = 0; j < m.rows(); ++j) p(i, j) += vik * f.U(j, k);
        }
    }
    return p;
}

inline DenseMatrix pseudoinverse(const Matrix& m, double rank_tol = -1.0) {
    return pseudoinverse(to_dense(m), rank_tol);
}

// ---------------------------------------------------------------------------
// Spectral norm by power iteration on the smaller Gram operator.

namespace detail {

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

template <class M>
std::vector<double> gram_apply(const M& m, std::span<const double> x, bool use_mtm) {
    if (use_mtm) {
        auto y = matvec(m, x);
        return matvec_transposed(m, y);
    }
    auto y = matvec_transposed(m, x);
    return matvec(m, y);
}

}  // namespace detail

template <class M>
double spectral_norm(const M& m, double tol = 1e-10, size_t max_iter = 5000) {
    const double fro_sq = frobenius_sq(m);
    if (fro_sq == 0.0) throw DomainError("spectral_norm: zero matrix");
    const bool use_mtm = m.cols() <= m.rows();
    const size_t dim = use_mtm ? m.cols() : m.rows();

    // All-ones start plus a fixed seeded perturbation so the start vector is
    // never orthogonal to the dominant eigenvector.
    std::vector<double> v(dim);
    uint64_t h = 0x6b8f9a37c1d2e4f5ULL;
    for (size_t i = 0; i < dim; ++i) {
        h = detail::splitmix64(h);
        v[i] = 1.0 + 1e-3 * (static_cast<double>(h >> 11) * 0x1.0p-53 - 0.5);
    }
    double nrm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
    for (double& x : v) x /= nrm;

    double lambda = 0.0;
    for (size_t it = 0; it < max_iter; ++it) {
        auto w = detail::gram_apply(m, v, use_mtm);
        double rayleigh = std::inner_product(v.begin(), v.end(), w.begin(), 0.0);
        double wn = std::sqrt(std::inner_product(w.begin(), w.end(), w.begin(), 0.0));
        if (wn == 0.0) return 0.0;  // start landed in the null space entirely
        for (size_t i = 0; i < dim; ++i) v[i] = w[i] / wn;
        if (it > 0 && std::abs(rayleigh - lambda) <= 0.5 * tol * std::abs(rayleigh)) {
            return std::sqrt(rayleigh);
        }
        lambda = rayleigh;
    }
    throw ConvergenceError("spectral_norm: power iteration did not converge",
                           std::sqrt(std::abs(lambda)));
}

inline double spectral_norm(const Matrix& m, double tol = 1e-10, size_t max_iter = 5000) {
    return std::visit([&](const auto& x) { return spectral_norm(x, tol, max_iter); }, m);
}

// ---------------------------------------------------------------------------
// Dense linear solve (partial-pivot LU), used by the full-rank reference paths.

/// Solves A X = B for square A.
inline DenseMatrix lu_solve(DenseMatrix a, DenseMatrix b) {
    if (a.rows() != a.cols()) throw ShapeError("lu_solve: matrix not square");
    if (a.rows() != b.rows()) throw ShapeError("lu_solve: rhs rows mismatch");
    const size_t n = a.rows(), k = b.cols();
    for (size_t col = 0; col < n; ++col) {
        size_t piv = col;
        for (size_t i = col + 1; i < n; ++i)
            if (std::abs(a(i, col)) > std::abs(a(piv, col))) piv = i;
        if (a(piv, col) == 0.0) throw DecompositionError("lu_solve: singular matrix");
        if (piv != col) {
            for (size_t j = 0; j < n; ++j) std::swap(a(col, j), a(piv, j));
            for (size_t j = 0; j < k; ++j) std::swap(b(col, j), b(piv, j));
        }
        double d = a(col, col);
        for (size_t i = col + 1; i < n; ++i) {
            double f = a(i, col) / d;
            if (f == 0.0) continue;
            for (size_t j = col; j < n; ++j) a(i, j) -= f * a(col, j);
            for (size_t j = 0; j < k; ++j) b(i, j) -= f * b(col, j);
        }
    }
    for (size_t col = n; col-- > 0;) {
        double d = a(col, col);
        for (size_t j = 0; j < k; ++j) {
            double s = b(col, j);
            for (size_t t = col + 1; t < n; ++t) s -= a(col, t) * b(t, j);
            b(col, j) = s / d;
        }
    }
    return b;
}

}  // namespace axb
