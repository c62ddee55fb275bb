#pragma once

#include <atomic>
#include <cmath>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "axb/decomp.hpp"
#include "axb/matrix.hpp"
#include "axb/solver.hpp"

namespace axb {

inline constexpr double kConsistencyGuardScale = 1e-8;

enum class ReferenceCase { UniqueFullRank, LeastNormFullRowCol, LeastNormGeneral, BkLimit };

inline std::string reference_case_label(ReferenceCase c) {
    switch (c) {
        case ReferenceCase::UniqueFullRank: return "unique_full_rank";
        case ReferenceCase::LeastNormFullRowCol: return "least_norm_full_row_col";
        case ReferenceCase::LeastNormGeneral: return "least_norm_general";
        case ReferenceCase::BkLimit: return "bk_limit";
    }
    return "?";
}

struct ReferenceSolution {
    DenseMatrix X_star;
    ReferenceCase kind = ReferenceCase::LeastNormGeneral;
    double residual_check = 0.0;  // ‖A·X_star·B − C‖_F
};

namespace detail {

// X (M)⁻¹ for symmetric M via the transposed solve.
inline DenseMatrix right_solve_sym(const DenseMatrix& x, const DenseMatrix& m) {
    return transpose(lu_solve(m, transpose(x)));
}

}  // namespace detail

/// Solves A·X·B = C directly, picking the cheapest exact route the ranks
/// allow. Full-rank cases go through normal-equation solves; the general case
/// uses SVD pseudoinverses and yields the least-norm solution.
inline ReferenceSolution reference_solution(const Matrix& A, const Matrix& B,
                                            const DenseMatrix& C, double rank_tol = -1.0) {
    const DenseMatrix Ad = to_dense(A);
    const DenseMatrix Bd = to_dense(B);
    SvdFactors fa = svd(Ad);
    SvdFactors fb = svd(Bd);
    auto rank_of = [&](const SvdFactors& f, const DenseMatrix& m) {
        if (rank_tol < 0.0) return f.numeric_rank;
        size_t r = 0;
        for (double s : f.singular_values)
            if (s > rank_tol) ++r;
        (void)m;
        return r;
    };
    const size_t rank_a = rank_of(fa, Ad), rank_b = rank_of(fb, Bd);
    const bool a_full_col = rank_a == Ad.cols();
    const bool a_full_row = rank_a == Ad.rows();
    const bool b_full_col = rank_b == Bd.cols();
    const bool b_full_row = rank_b == Bd.rows();

    ReferenceSolution out;
    const DenseMatrix At = transpose(Ad);
    const DenseMatrix Bt = transpose(Bd);
    if (a_full_col && b_full_row) {
        // (AᵀA)⁻¹ Aᵀ C Bᵀ (BBᵀ)⁻¹
        DenseMatrix y = lu_solve(matmul(At, Ad), matmul(matmul(At, C), Bt));
        out.X_star = detail::right_solve_sym(y, matmul(Bd, Bt));
        out.kind = ReferenceCase::UniqueFullRank;
    } else if (a_full_row && b_full_col) {
        // Aᵀ (AAᵀ)⁻¹ C (BᵀB)⁻¹ Bᵀ
        DenseMatrix w = lu_solve(matmul(Ad, At), C);
        DenseMatrix z = detail::right_solve_sym(w, matmul(Bt, Bd));
        out.X_star = matmul(matmul(At, z), Bt);
        out.kind = ReferenceCase::LeastNormFullRowCol;
    } else {
        out.X_star = matmul(matmul(pseudoinverse(Ad, rank_tol), C), pseudoinverse(Bd, rank_tol));
        out.kind = ReferenceCase::LeastNormGeneral;
    }
    out.residual_check = frobenius_dist(matmul(matmul(Ad, out.X_star), Bd), C);
    if (out.residual_check > kConsistencyGuardScale * (1.0 + frobenius_norm(C)))
        throw DomainError("reference_solution: system is not consistent (residual " +
                          std::to_string(out.residual_check) + ")");
    return out;
}

/// Point the cyclic method converges to from initial guess X0:
/// A⁺CB⁺ + X⁰ − A⁺AX⁰BB⁺.
inline DenseMatrix bk_limit(const Matrix& A, const Matrix& B, const DenseMatrix& C,
                            const DenseMatrix& X0) {
    const DenseMatrix Ad = to_dense(A);
    const DenseMatrix Bd = to_dense(B);
    const DenseMatrix Ap = pseudoinverse(Ad);
    const DenseMatrix Bp = pseudoinverse(Bd);
    DenseMatrix x_star = matmul(matmul(Ap, C), Bp);
    DenseMatrix proj = matmul(matmul(Ap, matmul(matmul(Ad, X0), Bd)), Bp);
    return add(x_star, sub(X0, proj));
}

/// Squared relative solution error ‖Xk − ref‖²_F / ‖ref‖²_F.
inline double rrn(const DenseMatrix& xk, const DenseMatrix& reference) {
    const double ref_sq = frobenius_sq(reference);
    if (ref_sq == 0.0) throw DomainError("rrn: zero reference");
    return frobenius_sq(sub(xk, reference)) / ref_sq;
}

// ---------------------------------------------------------------------------
// Convergence-factor diagnostics

/// Spectral quantities of a system that the factor bounds reuse across
/// iterations. sigma_min values are the smallest positive singular values;
/// rank_deficient flags when that differs from the plain smallest.
struct SpectralSummary {
    double sigma_min_a = 0.0;
    double sigma_min_b = 0.0;
    double b_spec = 0.0;
    double a_fro_sq = 0.0;
    double b_fro_sq = 0.0;
    std::vector<double> a_row_sq;
    bool rank_deficient = false;
};

inline SpectralSummary spectral_summary(const Matrix& A, const Matrix& B) {
    SpectralSummary s;
    const DenseMatrix Ad = to_dense(A);
    const DenseMatrix Bd = to_dense(B);
    SvdFactors fa = svd(Ad);
    SvdFactors fb = svd(Bd);
    if (fa.numeric_rank == 0 || fb.numeric_rank == 0)
        throw DomainError("factor bounds: zero matrix");
    s.sigma_min_a = fa.sigma_min_positive();
    s.sigma_min_b = fb.sigma_min_positive();
    s.rank_deficient = fa.numeric_rank < std::min(Ad.rows(), Ad.cols()) ||
                       fb.numeric_rank < std::min(Bd.rows(), Bd.cols());
    s.b_spec = fb.sigma_max();
    s.a_fro_sq = frobenius_sq(Ad);
    s.b_fro_sq = frobenius_sq(Bd);
    s.a_row_sq = row_sq_norms(Ad);
    return s;
}

struct FactorBounds {
    double rho = 0.0;           // baseline expected contraction factor
    double rho_k = 0.0;         // greedy per-step factor
    double rho_k_theta = 0.0;   // relaxed greedy factor at the given theta
    double rho_tilde_k = 0.0;   // deterministic argmax factor
    double gamma_k = 0.0;
    std::vector<size_t> omega_k;
    double sigma_min_a = 0.0;
    double sigma_min_b = 0.0;
    bool rank_deficient_note = false;
};

/// Factor bounds from cached spectra and the residual row norms at step k.
/// ‖Bᵀ⊗A‖_F = ‖A‖_F·‖B‖_F and σ_min(Bᵀ⊗A) = σ_min(A)·σ_min(B) keep the
/// Kronecker operator implicit.
inline FactorBounds factor_bounds(const SpectralSummary& s, double alpha, double theta,
                                  std::span<const double> r_row_sq, double r_fro) {
    if (!(theta > 0.0 && theta < 1.0)) throw ConfigError("theta must lie in (0, 1)");
    FactorBounds f;
    f.sigma_min_a = s.sigma_min_a;
    f.sigma_min_b = s.sigma_min_b;
    f.rank_deficient_note = s.rank_deficient;

    const double floor = 1e-14 * r_fro;
    double omega_mass = 0.0;
    for (size_t i = 0; i < r_row_sq.size(); ++i) {
        if (std::sqrt(r_row_sq[i]) <= floor) {
            f.omega_k.push_back(i);
            omega_mass += s.a_row_sq[i];
        }
    }
    f.gamma_k = s.a_fro_sq - omega_mass;
    if (!(f.gamma_k > 0.0))
        throw DomainError("factor bounds: every residual row is zero");

    const double d = 2.0 * alpha - alpha * alpha * s.b_spec * s.b_spec;
    const double sig_sq = s.sigma_min_a * s.sigma_min_a * s.sigma_min_b * s.sigma_min_b;
    const double kron_fro_sq = s.a_fro_sq * s.b_fro_sq;
    const double kappa_sq = kron_fro_sq / sig_sq;

    f.rho = 1.0 - d * sig_sq / s.a_fro_sq;
    const double phi_k = kron_fro_sq / (2.0 * f.gamma_k) + s.b_fro_sq / 2.0;
    f.rho_k = 1.0 - d * phi_k / kappa_sq;
    const double phi_k_theta = theta * kron_fro_sq / f.gamma_k + (1.0 - theta) * s.b_fro_sq;
    f.rho_k_theta = 1.0 - d * phi_k_theta / kappa_sq;
    f.rho_tilde_k = 1.0 - d * sig_sq / f.gamma_k;
    return f;
}

inline FactorBounds factor_bounds(const Matrix& A, const Matrix& B, double alpha,
                                  double theta, const DenseMatrix& rk) {
    SpectralSummary s = spectral_summary(A, B);
    std::vector<double> r_sq = row_sq_norms(rk);
    return factor_bounds(s, alpha, theta, r_sq, frobenius_norm(rk));
}

// ---------------------------------------------------------------------------
// Benchmark harness

struct BenchProblem {
    std::string id;
    Matrix A;
    Matrix B;
    DenseMatrix C;
};

struct BenchmarkOptions {
    size_t trials = 20;
    AlphaRule alpha_rule = AlphaRule::Safe;
    double alpha_value = 0.0;
    StopRule::Kind stop_kind = StopRule::Kind::SolutionRrn;
    double tol = 1e-6;
    size_t max_iter = 1000000;
    uint64_t seed = 1;
    size_t jobs = 0;  // 0 = hardware concurrency
};

struct BenchmarkRow {
    std::string problem_id;
    std::string method;
    std::optional<double> theta;
    std::string alpha_rule;
    size_t trials = 0;
    double it_mean = 0.0;
    double it_std = 0.0;
    double wall_mean_s = 0.0;
    std::optional<double> speed_up_vs_rbk;
    size_t failures = 0;
};

namespace detail {

struct BenchTask {
    size_t problem = 0, method = 0, trial = 0;
};

struct BenchOutcome {
    double iterations = 0.0;
    double wall = 0.0;
    bool failed = false;
};

}  // namespace detail

/// Runs every (problem, method, trial) combination with shared per-trial
/// substreams, averages IT and wall time, and reports speed-up against the
/// RBK row of the same problem. Divergent trials are excluded and counted.
inline std::vector<BenchmarkRow> benchmark(const std::vector<BenchProblem>& problems,
                                           const std::vector<Method>& methods,
                                           const BenchmarkOptions& opt) {
    if (opt.trials < 1) throw ConfigError("benchmark: trials must be >= 1");
    for (const Method& m : methods) m.validate();

    std::vector<DenseMatrix> references;
    references.reserve(problems.size());
    for (const auto& pb : problems)
        references.push_back(reference_solution(pb.A, pb.B, pb.C).X_star);

    std::vector<detail::BenchTask> tasks;
    for (size_t p = 0; p < problems.size(); ++p)
        for (size_t m = 0; m < methods.size(); ++m)
            for (size_t t = 0; t < opt.trials; ++t) tasks.push_back({p, m, t});
    std::vector<detail::BenchOutcome> outcomes(tasks.size());

    auto run_task = [&](const detail::BenchTask& task, detail::BenchOutcome& out) {
        const auto& pb = problems[task.problem];
        SolveConfig cfg;
        cfg.method = methods[task.method];
        cfg.alpha_rule = opt.alpha_rule;
        cfg.alpha_value = opt.alpha_value;
        cfg.max_iter = opt.max_iter;
        cfg.seed = RngStream(opt.seed).substream(task.trial).seed();
        cfg.stop = opt.stop_kind == StopRule::Kind::SolutionRrn
                       ? StopRule::solution_rrn(opt.tol, references[task.problem])
                       : StopRule::residual_rel(opt.tol);
        DenseMatrix x0(cols(pb.A), rows(pb.B));
        try {
            SolveReport rep = solve(pb.A, pb.B, pb.C, x0, cfg);
            out.iterations = static_cast<double>(rep.iterations);
            out.wall = rep.wall_seconds;
            // budget exhaustion is a failed trial too; means cover converged runs only
            out.failed = rep.terminated_by == Terminated::MaxIter;
        } catch (const DivergenceError&) {
            out.failed = true;
        }
    };

    size_t jobs = opt.jobs > 0 ? opt.jobs : std::max(1u, std::thread::hardware_concurrency());
    jobs = std::min(jobs, tasks.size());
    if (jobs <= 1) {
        for (size_t t = 0; t < tasks.size(); ++t) run_task(tasks[t], outcomes[t]);
    } else {
        std::atomic<size_t> next{0};
        std::vector<std::thread> workers;
        workers.reserve(jobs);
        for (size_t w = 0; w < jobs; ++w) {
            workers.emplace_back([&] {
                for (;;) {
                    size_t t = next.fetch_add(1);
                    if (t >= tasks.size()) return;
                    run_task(tasks[t], outcomes[t]);
                }
            });
        }
        for (auto& w : workers) w.join();
    }

    std::vector<BenchmarkRow> rows;
    std::vector<double> rbk_wall(problems.size(), -1.0);
    for (size_t p = 0; p < problems.size(); ++p) {
        for (size_t m = 0; m < methods.size(); ++m) {
            BenchmarkRow row;
            row.problem_id = problems[p].id;
            row.method = methods[m].label();
            row.theta = methods[m].theta;
            row.alpha_rule = alpha_rule_label(opt.alpha_rule);
            row.trials = opt.trials;
            double sum_it = 0.0, sum_wall = 0.0;
            std::vector<double> its;
            for (size_t t = 0; t < opt.trials; ++t) {
                const auto& out = outcomes[(p * methods.size() + m) * opt.trials + t];
                if (out.failed) {
                    ++row.failures;
                    continue;
                }
                its.push_back(out.iterations);
                sum_it += out.iterations;
                sum_wall += out.wall;
            }
            if (!its.empty()) {
                row.it_mean = sum_it / static_cast<double>(its.size());
                row.wall_mean_s = sum_wall / static_cast<double>(its.size());
                double var = 0.0;
                for (double v : its) var += (v - row.it_mean) * (v - row.it_mean);
                row.it_std = its.size() > 1 ? std::sqrt(var / static_cast<double>(its.size() - 1))
                                            : 0.0;
            }
            if (methods[m].tag == MethodTag::RBK && !its.empty()) rbk_wall[p] = row.wall_mean_s;
            rows.push_back(std::move(row));
        }
    }
    for (auto& row : rows) {
        for (size_t p = 0; p < problems.size(); ++p) {
            if (problems[p].id == row.problem_id && rbk_wall[p] > 0.0 && row.wall_mean_s > 0.0)
                row.speed_up_vs_rbk = rbk_wall[p] / row.wall_mean_s;
        }
    }
    return rows;
}

}  // namespace axb
