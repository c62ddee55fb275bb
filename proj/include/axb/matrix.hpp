#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <variant>
#include <vector>

#include "axb/errors.hpp"

namespace axb {

using std::size_t;

namespace detail {

inline void require_finite(std::span<const double> xs, const char* what) {
    for (double x : xs) {
        if (!std::isfinite(x)) throw DomainError(std::string(what) + ": non-finite entry");
    }
}

inline std::string shape_str(size_t r, size_t c) {
    return std::to_string(r) + "x" + std::to_string(c);
}

}  // namespace detail

/// Row-major dense matrix of 64-bit reals. Entries are validated finite on
/// construction from external data; element writes through operator() are not
/// re-validated (solvers guard divergence separately).
class DenseMatrix {
public:
    DenseMatrix() = default;

    DenseMatrix(size_t rows, size_t cols)
        : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

    DenseMatrix(size_t rows, size_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (data_.size() != rows_ * cols_)
            throw ShapeError("dense data length " + std::to_string(data_.size()) +
                             " != " + detail::shape_str(rows_, cols_));
        detail::require_finite(data_, "DenseMatrix");
    }

    /// Rectangular identity: ones on the main diagonal, zero elsewhere.
    static DenseMatrix identity(size_t rows, size_t cols) {
        DenseMatrix m(rows, cols);
        for (size_t i = 0; i < std::min(rows, cols); ++i) m(i, i) = 1.0;
        return m;
    }
    static DenseMatrix identity(size_t n) { return identity(n, n); }

    size_t rows() const { return rows_; }
    size_t cols() const { return cols_; }
    size_t size() const { return data_.size(); }

    double& operator()(size_t i, size_t j) { return data_[i * cols_ + j]; }
    double operator()(size_t i, size_t j) const { return data_[i * cols_ + j]; }

    std::span<const double> row(size_t i) const {
        return {data_.data() + i * cols_, cols_};
    }
    std::span<double> row_mut(size_t i) { return {data_.data() + i * cols_, cols_}; }

    std::span<const double> data() const { return data_; }
    std::span<double> data_mut() { return data_; }

    bool all_finite() const {
        for (double x : data_)
            if (!std::isfinite(x)) return false;
        return true;
    }

    friend bool operator==(const DenseMatrix& a, const DenseMatrix& b) {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
    }

private:
    size_t rows_ = 0;
    size_t cols_ = 0;
    std::vector<double> data_;
};

/// Compressed sparse row matrix. Read-optimized; construction validates the
/// CSR invariants (nondecreasing row_ptr, strictly increasing column indices
/// per row, finite nonzero values).
class SparseMatrix {
public:
    SparseMatrix() : row_ptr_(1, 0) {}

    SparseMatrix(size_t rows, size_t cols, std::vector<size_t> row_ptr,
                 std::vector<size_t> col_idx, std::vector<double> values)
        : rows_(rows), cols_(cols), row_ptr_(std::move(row_ptr)),
          col_idx_(std::move(col_idx)), values_(std::move(values)) {
        validate();
    }

    /// Builds CSR from (row, col, value) triplets: duplicates are summed,
    /// entries that cancel to exact zero are dropped.
    static SparseMatrix from_triplets(size_t rows, size_t cols,
                                      std::vector<std::tuple<size_t, size_t, double>> trips) {
        std::sort(trips.begin(), trips.end(), [](const auto& a, const auto& b) {
            return std::tie(std::get<0>(a), std::get<1>(a)) <
                   std::tie(std::get<0>(b), std::get<1>(b));
        });
        std::vector<size_t> rp(rows + 1, 0), ci;
        std::vector<double> vals;
        ci.reserve(trips.size());
        vals.reserve(trips.size());
        size_t t = 0;
        for (size_t r = 0; r < rows; ++r) {
            while (t < trips.size() && std::get<0>(trips[t]) == r) {
                size_t c = std::get<1>(trips[t]);
                double v = 0.0;
                while (t < trips.size() && std::get<0>(trips[t]) == r &&
                       std::get<1>(trips[t]) == c) {
                    v += std::get<2>(trips[t]);
                    ++t;
                }
                if (v != 0.0) {
                    ci.push_back(c);
                    vals.push_back(v);
                }
            }
            rp[r + 1] = ci.size();
        }
        return SparseMatrix(rows, cols, std::move(rp), std::move(ci), std::move(vals));
    }

    size_t rows() const { return rows_; }
    size_t cols() const { return cols_; }
    size_t nnz() const { return values_.size(); }

    std::span<const size_t> row_ptr() const { return row_ptr_; }
    std::span<const size_t> row_indices(size_t i) const {
        return {col_idx_.data() + row_ptr_[i], row_ptr_[i + 1] - row_ptr_[i]};
    }
    std::span<const double> row_values(size_t i) const {
        return {values_.data() + row_ptr_[i], row_ptr_[i + 1] - row_ptr_[i]};
    }

private:
    void validate() const {
        if (row_ptr_.size() != rows_ + 1)
            throw ShapeError("CSR row_ptr length != rows+1");
        if (row_ptr_.front() != 0 || row_ptr_.back() != values_.size() ||
            col_idx_.size() != values_.size())
            throw ShapeError("CSR row_ptr/col_idx/values sizes inconsistent");
        for (size_t i = 0; i < rows_; ++i) {
            if (row_ptr_[i] > row_ptr_[i + 1])
                throw ShapeError("CSR row_ptr not nondecreasing");
            for (size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
                if (col_idx_[k] >= cols_) throw ShapeError("CSR column index out of range");
                if (k > row_ptr_[i] && col_idx_[k] <= col_idx_[k - 1])
                    throw ShapeError("CSR column indices not strictly increasing in row " +
                                     std::to_string(i));
                if (!std::isfinite(values_[k]) || values_[k] == 0.0)
                    throw DomainError("CSR stored value must be finite and nonzero");
            }
        }
    }

    size_t rows_ = 0;
    size_t cols_ = 0;
    std::vector<size_t> row_ptr_;
    std::vector<size_t> col_idx_;
    std::vector<double> values_;
};

/// Either storage for problem matrices; solver entry points dispatch on it.
using Matrix = std::variant<DenseMatrix, SparseMatrix>;

inline size_t rows(const Matrix& m) {
    return std::visit([](const auto& x) { return x.rows(); }, m);
}
inline size_t cols(const Matrix& m) {
    return std::visit([](const auto& x) { return x.cols(); }, m);
}

/// Non-owning view of one matrix row. Dense rows iterate every column;
/// sparse rows iterate stored nonzeros only.
class RowView {
public:
    RowView(const DenseMatrix& m, size_t i) : vals_(m.row(i)), cols_(m.cols()) {}
    RowView(const SparseMatrix& m, size_t i)
        : idx_(m.row_indices(i)), vals_(m.row_values(i)), cols_(m.cols()), sparse_(true) {}

    size_t size() const { return cols_; }
    size_t nnz() const { return vals_.size(); }
    bool sparse() const { return sparse_; }

    double sq_norm() const {
        double s = 0.0;
        for (double v : vals_) s += v * v;
        return s;
    }

    /// Calls f(col, value) for each stored entry.
    template <class F>
    void for_each(F&& f) const {
        if (sparse_) {
            for (size_t k = 0; k < vals_.size(); ++k) f(idx_[k], vals_[k]);
        } else {
            for (size_t j = 0; j < vals_.size(); ++j) f(j, vals_[j]);
        }
    }

    double dot(std::span<const double> dense) const {
        double s = 0.0;
        if (sparse_) {
            for (size_t k = 0; k < vals_.size(); ++k) s += vals_[k] * dense[idx_[k]];
        } else {
            for (size_t j = 0; j < vals_.size(); ++j) s += vals_[j] * dense[j];
        }
        return s;
    }

private:
    std::span<const size_t> idx_;
    std::span<const double> vals_;
    size_t cols_ = 0;
    bool sparse_ = false;
};

inline RowView row_view(const DenseMatrix& m, size_t i) { return {m, i}; }
inline RowView row_view(const SparseMatrix& m, size_t i) { return {m, i}; }
inline RowView row_view(const Matrix& m, size_t i) {
    return std::visit([&](const auto& x) { return RowView(x, i); }, m);
}

// ---------------------------------------------------------------------------
// Conversions

inline DenseMatrix to_dense(const SparseMatrix& s) {
    DenseMatrix d(s.rows(), s.cols());
    for (size_t i = 0; i < s.rows(); ++i) {
        auto idx = s.row_indices(i);
        auto val = s.row_values(i);
        for (size_t k = 0; k < idx.size(); ++k) d(i, idx[k]) = val[k];
    }
    return d;
}

inline DenseMatrix to_dense(const DenseMatrix& d) { return d; }

inline DenseMatrix to_dense(const Matrix& m) {
    return std::visit([](const auto& x) { return to_dense(x); }, m);
}

/// Dense to CSR; exact zeros are not stored.
inline SparseMatrix to_sparse(const DenseMatrix& d) {
    std::vector<size_t> rp(d.rows() + 1, 0), ci;
    std::vector<double> vals;
    for (size_t i = 0; i < d.rows(); ++i) {
        for (size_t j = 0; j < d.cols(); ++j) {
            if (d(i, j) != 0.0) {
                ci.push_back(j);
                vals.push_back(d(i, j));
            }
        }
        rp[i + 1] = ci.size();
    }
    return SparseMatrix(d.rows(), d.cols(), std::move(rp), std::move(ci), std::move(vals));
}

// ---------------------------------------------------------------------------
// Norms

inline double frobenius_sq(const DenseMatrix& m) {
    double s = 0.0;
    for (double v : m.data()) s += v * v;
    return s;
}

inline double frobenius_sq(const SparseMatrix& m) {
    double s = 0.0;
    for (size_t i = 0; i < m.rows(); ++i)
        for (double v : m.row_values(i)) s += v * v;
    return s;
}

inline double frobenius_sq(const Matrix& m) {
    return std::visit([](const auto& x) { return frobenius_sq(x); }, m);
}

template <class M>
double frobenius_norm(const M& m) {
    return std::sqrt(frobenius_sq(m));
}

/// Entry i is the squared 2-norm of row i; the sum equals the squared
/// Frobenius norm up to reassociation.
template <class M>
std::vector<double> row_sq_norms(const M& m) {
    if (m.rows() == 0 || m.cols() == 0) throw ShapeError("row_sq_norms: empty matrix");
    std::vector<double> out(m.rows());
    for (size_t i = 0; i < m.rows(); ++i) out[i] = RowView(m, i).sq_norm();
    return out;
}

inline std::vector<double> row_sq_norms(const Matrix& m) {
    return std::visit([](const auto& x) { return row_sq_norms(x); }, m);
}

// ---------------------------------------------------------------------------
// Products

namespace detail {

inline void check_mul(size_t lc, size_t rr, const char* op) {
    if (lc != rr)
        throw ShapeError(std::string(op) + ": inner dimensions " + std::to_string(lc) +
                         " and " + std::to_string(rr) + " differ");
}

}  // namespace detail

inline DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
    detail::check_mul(a.cols(), b.rows(), "matmul");
    DenseMatrix c(a.rows(), b.cols());
    for (size_t i = 0; i < a.rows(); ++i) {
        auto ci = c.row_mut(i);
        for (size_t k = 0; k < a.cols(); ++k) {
            double v = a(i, k);
            if (v == 0.0) continue;
            auto bk = b.row(k);
            for (size_t j = 0; j < b.cols(); ++j) ci[j] += v * bk[j];
        }
    }
    return c;
}

inline DenseMatrix matmul(const SparseMatrix& a, const DenseMatrix& b) {
    detail::check_mul(a.cols(), b.rows(), "matmul");
    DenseMatrix c(a.rows(), b.cols());
    for (size_t i = 0; i < a.rows(); ++i) {
        auto idx = a.row_indices(i);
        auto val = a.row_values(i);
        auto ci = c.row_mut(i);
        for (size_t k = 0; k < idx.size(); ++k) {
            double v = val[k];
            auto bk = b.row(idx[k]);
            for (size_t j = 0; j < b.cols(); ++j) ci[j] += v * bk[j];
        }
    }
    return c;
}

inline DenseMatrix matmul(const DenseMatrix& a, const SparseMatrix& b) {
    detail::check_mul(a.cols(), b.rows(), "matmul");
    DenseMatrix c(a.rows(), b.cols());
    for (size_t i = 0; i < a.rows(); ++i) {
        auto ci = c.row_mut(i);
        for (size_t k = 0; k < a.cols(); ++k) {
            double v = a(i, k);
            if (v == 0.0) continue;
            auto idx = b.row_indices(k);
            auto val = b.row_values(k);
            for (size_t t = 0; t < idx.size(); ++t) ci[idx[t]] += v * val[t];
        }
    }
    return c;
}

inline DenseMatrix matmul(const SparseMatrix& a, const SparseMatrix& b) {
    detail::check_mul(a.cols(), b.rows(), "matmul");
    DenseMatrix c(a.rows(), b.cols());
    for (size_t i = 0; i < a.rows(); ++i) {
        auto idx = a.row_indices(i);
        auto val = a.row_values(i);
        auto ci = c.row_mut(i);
        for (size_t k = 0; k < idx.size(); ++k) {
            double v = val[k];
            auto bidx = b.row_indices(idx[k]);
            auto bval = b.row_values(idx[k]);
            for (size_t t = 0; t < bidx.size(); ++t) ci[bidx[t]] += v * bval[t];
        }
    }
    return c;
}

inline DenseMatrix matmul(const Matrix& a, const Matrix& b) {
    return std::visit([](const auto& x, const auto& y) { return matmul(x, y); }, a, b);
}
inline DenseMatrix matmul(const Matrix& a, const DenseMatrix& b) {
    return std::visit([&](const auto& x) { return matmul(x, b); }, a);
}
inline DenseMatrix matmul(const DenseMatrix& a, const Matrix& b) {
    return std::visit([&](const auto& y) { return matmul(a, y); }, b);
}

/// y = M x.
inline std::vector<double> matvec(const DenseMatrix& m, std::span<const double> x) {
    detail::check_mul(m.cols(), x.size(), "matvec");
    std::vector<double> y(m.rows());
    for (size_t i = 0; i < m.rows(); ++i) {
        auto ri = m.row(i);
        double s = 0.0;
        for (size_t j = 0; j < ri.size(); ++j) s += ri[j] * x[j];
        y[i] = s;
    }
    return y;
}

inline std::vector<double> matvec(const SparseMatrix& m, std::span<const double> x) {
    detail::check_mul(m.cols(), x.size(), "matvec");
    std::vector<double> y(m.rows());
    for (size_t i = 0; i < m.rows(); ++i) y[i] = RowView(m, i).dot(x);
    return y;
}

/// y = Mᵀ x.
inline std::vector<double> matvec_transposed(const DenseMatrix& m, std::span<const double> x) {
    detail::check_mul(m.rows(), x.size(), "matvec_transposed");
    std::vector<double> y(m.cols(), 0.0);
    for (size_t i = 0; i < m.rows(); ++i) {
        double v = x[i];
        if (v == 0.0) continue;
        auto ri = m.row(i);
        for (size_t j = 0; j < ri.size(); ++j) y[j] += v * ri[j];
    }
    return y;
}

inline std::vector<double> matvec_transposed(const SparseMatrix& m, std::span<const double> x) {
    detail::check_mul(m.rows(), x.size(), "matvec_transposed");
    std::vector<double> y(m.cols(), 0.0);
    for (size_t i = 0; i < m.rows(); ++i) {
        double v = x[i];
        if (v == 0.0) continue;
        auto idx = m.row_indices(i);
        auto val = m.row_values(i);
        for (size_t k = 0; k < idx.size(); ++k) y[idx[k]] += v * val[k];
    }
    return y;
}

// ---------------------------------------------------------------------------
// Transpose

inline DenseMatrix transpose(const DenseMatrix& m) {
    DenseMatrix t(m.cols(), m.rows());
    for (size_t i = 0; i < m.rows(); ++i)
        for (size_t j = 0; j < m.cols(); ++j) t(j, i) = m(i, j);
    return t;
}

inline SparseMatrix transpose(const SparseMatrix& m) {
    std::vector<size_t> rp(m.cols() + 1, 0);
    for (size_t i = 0; i < m.rows(); ++i)
        for (size_t c : m.row_indices(i)) ++rp[c + 1];
    for (size_t j = 0; j < m.cols(); ++j) rp[j + 1] += rp[j];
    std::vector<size_t> ci(m.nnz());
    std::vector<double> vals(m.nnz());
    std::vector<size_t> cursor(rp.begin(), rp.end() - 1);
    for (size_t i = 0; i < m.rows(); ++i) {
        auto idx = m.row_indices(i);
        auto val = m.row_values(i);
        for (size_t k = 0; k < idx.size(); ++k) {
            size_t pos = cursor[idx[k]]++;
            ci[pos] = i;  // ascending in i per column, so rows stay sorted
            vals[pos] = val[k];
        }
    }
    return SparseMatrix(m.cols(), m.rows(), std::move(rp), std::move(ci), std::move(vals));
}

inline Matrix transpose(const Matrix& m) {
    return std::visit([](const auto& x) { return Matrix(transpose(x)); }, m);
}

/// G = M Mᵀ in the same representation as M. Symmetric, so row i doubles as
/// column i; solvers rely on that for the residual recurrence.
inline DenseMatrix gram_mmt(const DenseMatrix& m) {
    DenseMatrix g(m.rows(), m.rows());
    for (size_t i = 0; i < m.rows(); ++i) {
        auto ri = m.row(i);
        for (size_t j = i; j < m.rows(); ++j) {
            auto rj = m.row(j);
            double s = 0.0;
            for (size_t k = 0; k < ri.size(); ++k) s += ri[k] * rj[k];
            g(i, j) = s;
            g(j, i) = s;
        }
    }
    return g;
}

inline SparseMatrix gram_mmt(const SparseMatrix& m) {
    // Gustavson-style accumulation of M·Mᵀ using Mᵀ in CSR form. Occupancy is
    // tracked separately from the accumulator value; a partial sum passing
    // through exact zero must not re-register the slot.
    SparseMatrix mt = transpose(m);
    std::vector<double> acc(m.rows(), 0.0);
    std::vector<char> seen(m.rows(), 0);
    std::vector<size_t> touched;
    std::vector<size_t> rp(m.rows() + 1, 0), ci;
    std::vector<double> vals;
    for (size_t i = 0; i < m.rows(); ++i) {
        auto idx = m.row_indices(i);
        auto val = m.row_values(i);
        for (size_t k = 0; k < idx.size(); ++k) {
            double v = val[k];
            auto tidx = mt.row_indices(idx[k]);
            auto tval = mt.row_values(idx[k]);
            for (size_t t = 0; t < tidx.size(); ++t) {
                size_t j = tidx[t];
                if (!seen[j]) {
                    seen[j] = 1;
                    touched.push_back(j);
                }
                acc[j] += v * tval[t];
            }
        }
        std::sort(touched.begin(), touched.end());
        for (size_t j : touched) {
            if (acc[j] != 0.0) {
                ci.push_back(j);
                vals.push_back(acc[j]);
            }
            acc[j] = 0.0;
            seen[j] = 0;
        }
        touched.clear();
        rp[i + 1] = ci.size();
    }
    return SparseMatrix(m.rows(), m.rows(), std::move(rp), std::move(ci), std::move(vals));
}

// ---------------------------------------------------------------------------
// Stacking (column stacking and Kronecker products are test-scale helpers)

/// Column-stacking vectorization: columns concatenated top to bottom.
inline std::vector<double> vec(const DenseMatrix& m) {
    std::vector<double> v(m.rows() * m.cols());
    size_t t = 0;
    for (size_t j = 0; j < m.cols(); ++j)
        for (size_t i = 0; i < m.rows(); ++i) v[t++] = m(i, j);
    return v;
}

/// Inverse of vec for a given shape.
inline DenseMatrix unvec(std::span<const double> v, size_t rows, size_t cols) {
    if (v.size() != rows * cols) throw ShapeError("unvec: length mismatch");
    DenseMatrix m(rows, cols);
    size_t t = 0;
    for (size_t j = 0; j < cols; ++j)
        for (size_t i = 0; i < rows; ++i) m(i, j) = v[t++];
    return m;
}

inline constexpr size_t kKronGuard = 1000000;

/// Kronecker product, guarded to desk scale.
inline DenseMatrix kron(const DenseMatrix& a, const DenseMatrix& b) {
    size_t r = a.rows() * b.rows(), c = a.cols() * b.cols();
    if (r * c > kKronGuard)
        throw CapacityError("kron: result " + detail::shape_str(r, c) + " exceeds guard");
    DenseMatrix k(r, c);
    for (size_t i = 0; i < a.rows(); ++i)
        for (size_t j = 0; j < a.cols(); ++j) {
            double v = a(i, j);
            if (v == 0.0) continue;
            for (size_t p = 0; p < b.rows(); ++p)
                for (size_t q = 0; q < b.cols(); ++q)
                    k(i * b.rows() + p, j * b.cols() + q) = v * b(p, q);
        }
    return k;
}

inline DenseMatrix kron(const Matrix& a, const Matrix& b) {
    return kron(to_dense(a), to_dense(b));
}

// ---------------------------------------------------------------------------
// Small helpers shared across modules

inline DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("add: shape mismatch");
    DenseMatrix c = a;
    auto cd = c.data_mut();
    auto bd = b.data();
    for (size_t i = 0; i < cd.size(); ++i) cd[i] += bd[i];
    return c;
}

inline DenseMatrix sub(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("sub: shape mismatch");
    DenseMatrix c = a;
    auto cd = c.data_mut();
    auto bd = b.data();
    for (size_t i = 0; i < cd.size(); ++i) cd[i] -= bd[i];
    return c;
}

inline DenseMatrix scale(const DenseMatrix& a, double s) {
    DenseMatrix c = a;
    for (double& v : c.data_mut()) v *= s;
    return c;
}

inline double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ShapeError("max_abs_diff: shape mismatch");
    double m = 0.0;
    auto ad = a.data();
    auto bd = b.data();
    for (size_t i = 0; i < ad.size(); ++i) m = std::max(m, std::abs(ad[i] - bd[i]));
    return m;
}

inline double frobenius_dist(const DenseMatrix& a, const DenseMatrix& b) {
    return frobenius_norm(sub(a, b));
}

}  // namespace axb
