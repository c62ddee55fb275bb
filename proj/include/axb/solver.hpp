#pragma once

#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "axb/decomp.hpp"
#include "axb/matrix.hpp"
#include "axb/rng.hpp"

namespace axb {

enum class MethodTag { BK, RBK, GRBK, RGRBK, MWRBK };

/// Row-selection strategy. theta is the relaxation factor and is only
/// meaningful for RGRBK (strictly inside (0,1)).
struct Method {
    MethodTag tag = MethodTag::RBK;
    std::optional<double> theta;

    static Method bk() { return {MethodTag::BK, {}}; }
    static Method rbk() { return {MethodTag::RBK, {}}; }
    static Method grbk() { return {MethodTag::GRBK, {}}; }
    static Method rgrbk(double theta) { return {MethodTag::RGRBK, theta}; }
    static Method mwrbk() { return {MethodTag::MWRBK, {}}; }

    void validate() const {
        if (tag == MethodTag::RGRBK) {
            if (!theta) throw ConfigError("rgrbk requires theta");
            if (!(*theta > 0.0 && *theta < 1.0))
                throw ConfigError("theta must lie strictly in (0, 1)");
        } else if (theta) {
            throw ConfigError("theta is only valid for rgrbk");
        }
    }

    std::string label() const {
        switch (tag) {
            case MethodTag::BK: return "bk";
            case MethodTag::RBK: return "rbk";
            case MethodTag::GRBK: return "grbk";
            case MethodTag::RGRBK: return "rgrbk";
            case MethodTag::MWRBK: return "mwrbk";
        }
        return "?";
    }

    static Method parse(const std::string& name, std::optional<double> theta = {}) {
        if (name == "bk") return bk();
        if (name == "rbk") return rbk();
        if (name == "grbk") return grbk();
        if (name == "mwrbk") return mwrbk();
        if (name == "rgrbk") {
            if (!theta) throw ConfigError("rgrbk requires theta");
            return rgrbk(*theta);
        }
        throw ConfigError("unknown method '" + name + "'");
    }
};

/// Step size policy. Safe keeps alpha strictly inside the stability bound;
/// Paper uses 1/‖B‖₂ which may land outside it (run proceeds with a warning
/// flag and the divergence guard armed); Fixed takes alpha_value verbatim and
/// is rejected when outside the bound.
enum class AlphaRule { Safe, Paper, Fixed };

inline std::string alpha_rule_label(AlphaRule r) {
    switch (r) {
        case AlphaRule::Safe: return "safe";
        case AlphaRule::Paper: return "paper";
        case AlphaRule::Fixed: return "fixed";
    }
    return "?";
}

struct StopRule {
    enum class Kind { SolutionRrn, ResidualRel };
    Kind kind = Kind::ResidualRel;
    double tol = 1e-6;
    std::optional<DenseMatrix> reference;  // SolutionRrn only

    static StopRule solution_rrn(double tol, DenseMatrix reference) {
        StopRule s;
        s.kind = Kind::SolutionRrn;
        s.tol = tol;
        s.reference = std::move(reference);
        return s;
    }
    static StopRule residual_rel(double tol) {
        StopRule s;
        s.kind = Kind::ResidualRel;
        s.tol = tol;
        return s;
    }
};

struct SolveConfig {
    Method method = Method::rbk();
    AlphaRule alpha_rule = AlphaRule::Safe;
    double alpha_value = 0.0;  // Fixed rule only
    StopRule stop = StopRule::residual_rel(1e-6);
    size_t max_iter = 200000;
    uint64_t seed = 0;
    bool record_trace = false;
    size_t refresh_interval = 1000;  // residual drift checkpoint; 0 disables
};

struct TracePoint {
    size_t k;
    double rrn;           // the configured stopping metric after step k
    double residual_rel;  // ‖R‖_F / ‖C‖_F after step k
    size_t selected_row;
};

enum class Terminated { Tolerance, MaxIter };

struct SolveReport {
    size_t iterations = 0;
    double wall_seconds = 0.0;
    double final_rrn = 0.0;           // exact stop metric at termination
    double final_residual_rel = 0.0;  // exact relative residual at termination
    Terminated terminated_by = Terminated::MaxIter;
    std::vector<TracePoint> trace;
    DenseMatrix X;
    double alpha = 0.0;
    uint64_t seed = 0;
    std::string method_label;
    bool alpha_outside_bound = false;
    size_t skipped_zero_rows = 0;
};

/// Trace is dense for the first 10^4 steps, then decimated to every 10th.
inline bool trace_point_due(size_t k) { return k < 10000 || k % 10 == 0; }

inline constexpr double kDriftGuardScale = 1e-8;

/// Row-action iteration engine for A·X·B = C. A and B may each be dense or
/// CSR. One instance runs one solve; step() applies a single row update and
/// keeps the residual R = C − A·X·B plus its row norms incrementally current.
template <class AMat, class BMat>
class Solver {
public:
    Solver(AMat A, BMat B, DenseMatrix C, DenseMatrix X0, SolveConfig cfg)
        : a_(std::move(A)), b_(std::move(B)), c_(std::move(C)), x_(std::move(X0)),
          cfg_(std::move(cfg)), rng_(cfg_.seed) {
        cfg_.method.validate();
        const size_t m = a_.rows(), p = a_.cols(), q = b_.rows(), n = b_.cols();
        if (x_.rows() != p || x_.cols() != q)
            throw ShapeError("solve: X0 must be " + std::to_string(p) + "x" + std::to_string(q));
        if (c_.rows() != m || c_.cols() != n)
            throw ShapeError("solve: C must be " + std::to_string(m) + "x" + std::to_string(n));

        a_sq_ = row_sq_norms(a_);
        a_fro_sq_ = 0.0;
        for (double v : a_sq_) a_fro_sq_ += v;
        if (a_fro_sq_ == 0.0) throw DomainError("solve: A is the zero matrix");

        rbk_cumsum_.resize(m);
        double cum = 0.0;
        for (size_t i = 0; i < m; ++i) {
            cum += a_sq_[i];
            rbk_cumsum_[i] = cum;
        }

        b_spec_ = spectral_norm(b_);
        resolve_alpha();

        gram_ = gram_mmt(a_);
        btb_ = matmul(transpose(b_), b_);
        r_ = sub(c_, matmul(matmul(a_, x_), b_));
        r_sq_ = row_sq_norms_of_r();
        r_fro_sq_ = 0.0;
        for (double v : r_sq_) r_fro_sq_ += v;
        r_fro_peak_ = r_fro_sq_;

        c_fro_ = frobenius_norm(c_);
        if (cfg_.stop.kind == StopRule::Kind::SolutionRrn) {
            if (!cfg_.stop.reference)
                throw ConfigError("solution_rrn stopping needs a reference solution");
            const DenseMatrix& ref = *cfg_.stop.reference;
            if (ref.rows() != p || ref.cols() != q)
                throw ShapeError("reference solution shape mismatch");
            ref_sq_ = frobenius_sq(ref);
            if (ref_sq_ == 0.0) throw DomainError("solution_rrn: zero reference");
            err_sq_ = frobenius_sq(sub(x_, ref));
        }
        y_.resize(q);
        z_.resize(n);
    }

    // -- selection rules -----------------------------------------------------

    /// Cyclic sweep, zero rows skipped.
    size_t select_cyclic() {
        const size_t m = a_.rows();
        for (size_t tries = 0; tries < m; ++tries) {
            size_t i = cyclic_pos_;
            cyclic_pos_ = (cyclic_pos_ + 1) % m;
            if (a_sq_[i] > 0.0) return i;
            ++skipped_zero_rows_;
        }
        throw DomainError("select_cyclic: no nonzero row");
    }

    /// Random row with probability proportional to ‖A_i‖₂².
    size_t select_rbk() { return rng_.categorical_cdf(rbk_cumsum_); }

    /// Shared greedy threshold; theta = 1/2 yields the plain greedy rule.
    double greedy_threshold(double theta) const {
        if (!(r_fro_sq_ > 0.0)) throw DomainError("greedy threshold: zero residual");
        double max_ratio = max_residual_ratio().second;
        return theta * (max_ratio / r_fro_sq_) + (1.0 - theta) / a_fro_sq_;
    }
    double grbk_threshold() const { return greedy_threshold(0.5); }
    double rgrbk_threshold(double theta) const {
        if (!(theta > 0.0 && theta < 1.0)) throw ConfigError("theta must lie in (0, 1)");
        return greedy_threshold(theta);
    }

    /// Member rows of the greedy candidate set at the current residual. The
    /// argmax row is a member by construction (it satisfies the inequality in
    /// exact arithmetic, so roundoff may not evict it).
    std::vector<size_t> greedy_index_set(double theta) const {
        const double zeta = greedy_threshold(theta);
        const size_t argmax_row = max_residual_ratio().first;
        std::vector<size_t> members;
        for (size_t i = 0; i < a_.rows(); ++i) {
            if (a_sq_[i] <= 0.0) continue;
            if (i == argmax_row || r_sq_[i] >= zeta * a_sq_[i] * r_fro_sq_)
                members.push_back(i);
        }
        if (members.empty()) throw InvariantError("greedy index set is empty");
        return members;
    }

    /// Greedy randomized selection: membership by the threshold inequality,
    /// then a draw weighted by residual row mass within the member set.
    size_t select_greedy(double theta) {
        members_ = greedy_index_set(theta);
        member_cum_.clear();
        double cum = 0.0;
        for (size_t i : members_) {
            cum += r_sq_[i];
            member_cum_.push_back(cum);
        }
        if (!(cum > 0.0))
            throw DomainError(
                "greedy selection: residual mass sits on zero rows of A only; "
                "the system is inconsistent");
        return members_[rng_.categorical_cdf(member_cum_)];
    }
    size_t select_grbk() { return select_greedy(0.5); }

    /// Deterministic maximal-weighted-residual selection, smallest index on ties.
    size_t select_mwrbk() const { return max_residual_ratio().first; }

    // -- kernel ----------------------------------------------------------------

    /// Applies the row update for row i with the configured step size and
    /// maintains R, its row norms, and the solution-error tracker.
    void update_row(size_t i) {
        if (!(a_sq_[i] > 0.0)) throw DomainError("update_row: zero row selected");
        const double coef = alpha_ / a_sq_[i];
        auto r_i = r_.row(i);

        // y = R_i Bᵀ, reading B by rows.
        matvec_into(b_, r_i, y_);
        const bool track = cfg_.stop.kind == StopRule::Kind::SolutionRrn;
        RowView arow(a_, i);
        arow.for_each([&](size_t t, double v) {
            const double f = coef * v;
            auto xrow = x_.row_mut(t);
            if (track) {
                auto ref_row = cfg_.stop.reference->row(t);
                double delta = 0.0;
                for (size_t j = 0; j < xrow.size(); ++j) {
                    const double d0 = xrow[j] - ref_row[j];
                    xrow[j] += f * y_[j];
                    const double d1 = xrow[j] - ref_row[j];
                    delta += d1 * d1 - d0 * d0;
                }
                err_sq_ += delta;
            } else {
                for (size_t j = 0; j < xrow.size(); ++j) xrow[j] += f * y_[j];
            }
        });
        if (err_sq_ < 0.0) err_sq_ = 0.0;

        // z = R_i BᵀB; BᵀB is symmetric so a plain matvec serves.
        matvec_into(btb_, r_i, z_);
        RowView grow(gram_, i);
        grow.for_each([&](size_t l, double g) {
            const double f = coef * g;
            auto rrow = r_.row_mut(l);
            double ns = 0.0;
            for (size_t j = 0; j < rrow.size(); ++j) {
                rrow[j] -= f * z_[j];
                ns += rrow[j] * rrow[j];
            }
            r_fro_sq_ += ns - r_sq_[l];
            r_sq_[l] = ns;
        });
        if (r_fro_sq_ < 0.0) r_fro_sq_ = 0.0;
        if (!std::isfinite(r_fro_sq_)) throw DivergenceError(k_, std::sqrt(std::abs(r_fro_sq_)));
        // The running sum accumulates cancellation residue; once it has
        // decayed far below its peak, re-sum the (individually fresh) row
        // norms so near-zero residuals read as zero instead of stale junk.
        if (r_fro_sq_ < 1e-12 * r_fro_peak_) {
            r_fro_sq_ = 0.0;
            for (double v : r_sq_) r_fro_sq_ += v;
            r_fro_peak_ = r_fro_sq_;
        } else if (r_fro_sq_ > r_fro_peak_) {
            r_fro_peak_ = r_fro_sq_;
        }
    }

    /// One iteration: select per the configured method, update, advance k.
    size_t step() {
        size_t i = 0;
        switch (cfg_.method.tag) {
            case MethodTag::BK: i = select_cyclic(); break;
            case MethodTag::RBK: i = select_rbk(); break;
            case MethodTag::GRBK: i = select_greedy(0.5); break;
            case MethodTag::RGRBK: i = select_greedy(*cfg_.method.theta); break;
            case MethodTag::MWRBK: i = select_mwrbk(); break;
        }
        update_row(i);
        ++k_;
        return i;
    }

    // -- driver ----------------------------------------------------------------

    SolveReport run() {
        SolveReport rep;
        rep.alpha = alpha_;
        rep.seed = cfg_.seed;
        rep.method_label = cfg_.method.label();
        rep.alpha_outside_bound = alpha_outside_bound_;

        bool converged = exact_metric() <= cfg_.stop.tol;
        const auto t0 = std::chrono::steady_clock::now();
        while (!converged && k_ < cfg_.max_iter) {
            if (!(r_fro_sq_ > 0.0)) break;  // exact fixed point, nothing to select
            const size_t i = step();
            if (cfg_.record_trace && trace_point_due(k_ - 1))
                rep.trace.push_back({k_ - 1, current_metric(), current_residual_rel(), i});
            if (current_metric() <= cfg_.stop.tol) {
                // confirm against a full recompute before declaring success
                if (exact_metric() <= cfg_.stop.tol) {
                    converged = true;
                } else {
                    resync();
                }
            }
            if (!converged && cfg_.refresh_interval > 0 && k_ % cfg_.refresh_interval == 0)
                checkpoint();
        }
        const auto t1 = std::chrono::steady_clock::now();

        rep.iterations = k_;
        rep.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
        rep.terminated_by = converged ? Terminated::Tolerance : Terminated::MaxIter;
        rep.final_rrn = exact_metric();
        rep.final_residual_rel = exact_residual_rel();
        rep.skipped_zero_rows = skipped_zero_rows_;
        rep.X = std::move(x_);
        return rep;
    }

    // -- state accessors ---------------------------------------------------------

    size_t iteration() const { return k_; }
    double alpha() const { return alpha_; }
    double spectral_norm_b() const { return b_spec_; }
    bool alpha_outside_bound() const { return alpha_outside_bound_; }
    const DenseMatrix& X() const { return x_; }
    const DenseMatrix& R() const { return r_; }
    std::span<const double> residual_row_sq() const { return r_sq_; }
    std::span<const double> a_row_sq() const { return a_sq_; }
    double a_fro_sq() const { return a_fro_sq_; }
    double residual_fro_sq() const { return r_fro_sq_; }

    std::pair<size_t, double> max_residual_ratio() const {
        size_t best = a_.rows();
        double best_ratio = -std::numeric_limits<double>::infinity();
        for (size_t i = 0; i < a_.rows(); ++i) {
            if (a_sq_[i] <= 0.0) continue;
            const double ratio = r_sq_[i] / a_sq_[i];
            if (ratio > best_ratio) {
                best_ratio = ratio;
                best = i;
            }
        }
        if (best == a_.rows()) throw DomainError("no nonzero row in A");
        return {best, best_ratio};
    }

    /// Incrementally tracked stop metric.
    double current_metric() const {
        if (cfg_.stop.kind == StopRule::Kind::SolutionRrn) return err_sq_ / ref_sq_;
        return current_residual_rel();
    }
    double current_residual_rel() const {
        return std::sqrt(std::max(r_fro_sq_, 0.0)) / (c_fro_ > 0.0 ? c_fro_ : 1.0);
    }

    /// Stop metric recomputed from scratch.
    double exact_metric() const {
        if (cfg_.stop.kind == StopRule::Kind::SolutionRrn)
            return frobenius_sq(sub(x_, *cfg_.stop.reference)) / ref_sq_;
        return exact_residual_rel();
    }
    double exact_residual_rel() const {
        return frobenius_norm(exact_residual()) / (c_fro_ > 0.0 ? c_fro_ : 1.0);
    }
    DenseMatrix exact_residual() const { return sub(c_, matmul(matmul(a_, x_), b_)); }

    /// Frobenius distance between the maintained R and a full recompute.
    double residual_drift() const { return frobenius_dist(r_, exact_residual()); }

    /// Drift checkpoint: verify the recurrence stayed within the guard, then
    /// adopt the recomputed residual.
    void checkpoint() {
        if (!x_.all_finite())
            throw DivergenceError(k_, std::sqrt(std::max(r_fro_sq_, 0.0)));
        DenseMatrix exact = exact_residual();
        const double drift = frobenius_dist(r_, exact);
        if (drift > kDriftGuardScale * (1.0 + c_fro_))
            throw InvariantError("residual drift guard tripped at iteration " +
                                 std::to_string(k_));
        adopt_residual(std::move(exact));
    }

private:
    void resolve_alpha() {
        const double b2 = b_spec_ * b_spec_;
        switch (cfg_.alpha_rule) {
            case AlphaRule::Safe:
                alpha_ = 1.0 / b2;
                break;
            case AlphaRule::Paper:
                alpha_ = 1.0 / b_spec_;
                alpha_outside_bound_ = !(alpha_ < 2.0 / b2);
                break;
            case AlphaRule::Fixed:
                alpha_ = cfg_.alpha_value;
                if (!(alpha_ > 0.0) || !(alpha_ < 2.0 / b2))
                    throw ConfigError("fixed alpha " + std::to_string(alpha_) +
                                      " outside (0, 2/‖B‖₂²)");
                break;
        }
    }

    std::vector<double> row_sq_norms_of_r() const {
        std::vector<double> out(r_.rows());
        for (size_t i = 0; i < r_.rows(); ++i) {
            double s = 0.0;
            for (double v : r_.row(i)) s += v * v;
            out[i] = s;
        }
        return out;
    }

    void adopt_residual(DenseMatrix exact) {
        r_ = std::move(exact);
        r_sq_ = row_sq_norms_of_r();
        r_fro_sq_ = 0.0;
        for (double v : r_sq_) r_fro_sq_ += v;
        r_fro_peak_ = r_fro_sq_;
        if (cfg_.stop.kind == StopRule::Kind::SolutionRrn)
            err_sq_ = frobenius_sq(sub(x_, *cfg_.stop.reference));
    }

    void resync() { adopt_residual(exact_residual()); }

    static void matvec_into(const DenseMatrix& m, std::span<const double> x,
                            std::vector<double>& out) {
        for (size_t i = 0; i < m.rows(); ++i) {
            auto ri = m.row(i);
            double s = 0.0;
            for (size_t j = 0; j < ri.size(); ++j) s += ri[j] * x[j];
            out[i] = s;
        }
    }
    static void matvec_into(const SparseMatrix& m, std::span<const double> x,
                            std::vector<double>& out) {
        for (size_t i = 0; i < m.rows(); ++i) out[i] = RowView(m, i).dot(x);
    }

    using GramType = decltype(gram_mmt(std::declval<const AMat&>()));

    AMat a_;
    BMat b_;
    DenseMatrix c_;
    DenseMatrix x_;
    SolveConfig cfg_;
    RngStream rng_;

    GramType gram_;
    DenseMatrix btb_;
    DenseMatrix r_;
    std::vector<double> a_sq_, r_sq_, rbk_cumsum_;
    double a_fro_sq_ = 0.0, r_fro_sq_ = 0.0, r_fro_peak_ = 0.0;
    double b_spec_ = 0.0, alpha_ = 0.0, c_fro_ = 0.0;
    double ref_sq_ = 0.0, err_sq_ = 0.0;
    bool alpha_outside_bound_ = false;
    size_t k_ = 0, cyclic_pos_ = 0, skipped_zero_rows_ = 0;
    std::vector<double> y_, z_;
    std::vector<size_t> members_;
    std::vector<double> member_cum_;
};

/// Convenience entry point dispatching on storage.
inline SolveReport solve(const Matrix& A, const Matrix& B, const DenseMatrix& C,
                         const DenseMatrix& X0, const SolveConfig& cfg) {
    return std::visit(
        [&](const auto& a, const auto& b) {
            Solver solver(a, b, C, X0, cfg);
            return solver.run();
        },
        A, B);
}

inline SolveReport solve(const DenseMatrix& A, const DenseMatrix& B, const DenseMatrix& C,
                         const DenseMatrix& X0, const SolveConfig& cfg) {
    Solver solver(A, B, C, X0, cfg);
    return solver.run();
}

}  // namespace axb
