// Command-line front end: generate test systems, run the row-action solvers,
// benchmark method families, and drive the color-image restoration pipeline.

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "axb/analysis.hpp"
#include "axb/imaging.hpp"
#include "axb/png_io.hpp"
#include "axb/problems.hpp"
#include "axb/report.hpp"
#include "axb/solver.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitBudget = 3;
constexpr int kExitDivergence = 4;
constexpr int kExitIo = 5;

std::string default_out_dir() {
    const char* env = std::getenv("AXBSOLVE_OUT_DIR");
    return env && *env ? env : ".";
}

std::string iso_timestamp() {
    std::time_t now = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    return buf;
}

void write_manifest(const fs::path& out_dir, const std::string& command,
                    const std::vector<std::string>& argv, const json& config) {
    json m;
    m["tool"] = "axbsolve";
    m["version"] = axb::kToolVersion;
    m["command"] = command;
    m["argv"] = argv;
    m["config"] = config;
    m["timestamp"] = iso_timestamp();  // excluded from replay comparisons
    axb::write_text_file((out_dir / "manifest.json").string(), m.dump(2) + "\n");
}

struct SolveFlags {
    std::string method = "grbk";
    double theta = -1.0;  // unset sentinel; rgrbk requires an explicit value
    std::string alpha_rule = "safe";
    double alpha = 0.0;
    std::string stop = "rrn";
    double tol = 1e-6;
    std::size_t max_iter = 1000000;
    std::uint64_t seed = 0;
    std::size_t refresh = 1000;
    bool trace = false;

    void attach(CLI::App* cmd) {
        cmd->add_option("--method", method, "bk|rbk|grbk|rgrbk|mwrbk")
            ->check(CLI::IsMember({"bk", "rbk", "grbk", "rgrbk", "mwrbk"}));
        cmd->add_option("--theta", theta, "relaxation factor for rgrbk, in (0,1)");
        cmd->add_option("--alpha-rule", alpha_rule, "safe|paper|fixed")
            ->check(CLI::IsMember({"safe", "paper", "fixed"}));
        cmd->add_option("--alpha", alpha, "step size for --alpha-rule fixed");
        cmd->add_option("--tol", tol, "stopping tolerance");
        cmd->add_option("--max-iter", max_iter, "iteration budget");
        cmd->add_option("--seed", seed, "rng seed");
        cmd->add_option("--refresh", refresh, "residual drift checkpoint interval (0 = off)");
    }

    axb::Method make_method() const {
        if (method == "rgrbk") {
            if (theta < 0.0) throw axb::ConfigError("--method rgrbk requires --theta");
            return axb::Method::rgrbk(theta);
        }
        if (theta >= 0.0)
            throw axb::ConfigError("--theta is only meaningful with --method rgrbk");
        return axb::Method::parse(method);
    }

    axb::AlphaRule make_alpha_rule() const {
        if (alpha_rule == "safe") return axb::AlphaRule::Safe;
        if (alpha_rule == "paper") return axb::AlphaRule::Paper;
        return axb::AlphaRule::Fixed;
    }

    json echo() const {
        json j;
        j["method"] = method;
        if (theta >= 0.0) j["theta"] = theta;
        j["alpha_rule"] = alpha_rule;
        if (alpha_rule == "fixed") j["alpha"] = alpha;
        j["stop"] = stop;
        j["tol"] = tol;
        j["max_iter"] = max_iter;
        j["seed"] = seed;
        j["refresh"] = refresh;
        return j;
    }
};

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw axb::IoError("cannot open '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw axb::ParseError(std::string("bad JSON in '") + path + "': " + e.what());
    }
    return j;
}

// -- generate ---------------------------------------------------------------

int cmd_generate(const std::string& spec_path, const std::string& out,
                 const std::vector<std::string>& argv) {
    axb::ProblemSpec spec = axb::spec_from_json(load_json_file(spec_path));
    axb::ProblemInstance inst = axb::generate(spec);
    fs::path dir(out);
    fs::create_directories(dir);
    axb::save_matrix_market((dir / "A.mtx").string(), inst.A);
    axb::save_matrix_market((dir / "B.mtx").string(), inst.B);
    axb::save_matrix_market((dir / "C.mtx").string(), inst.C);
    axb::save_matrix_market((dir / "Xtrue.mtx").string(), inst.X_true);

    json cfg;
    cfg["spec"] = axb::spec_to_json(spec);
    cfg["density"] = {{"A", inst.a_density.density},
                      {"B", inst.b_density.density},
                      {"X", inst.x_density.density},
                      {"C", inst.c_density.density}};
    write_manifest(dir, "generate", argv, cfg);
    std::cout << "generated " << axb::rows(inst.A) << "x" << axb::cols(inst.A) << " * "
              << inst.X_true.rows() << "x" << inst.X_true.cols() << " * " << axb::rows(inst.B)
              << "x" << axb::cols(inst.B) << " system in " << dir.string() << "\n";
    return kExitOk;
}

// -- solve ------------------------------------------------------------------

int cmd_solve(const std::string& spec_path, const std::string& a_path,
              const std::string& b_path, const std::string& c_path, const std::string& x0_kind,
              double x0_scale, const SolveFlags& flags, const std::string& out,
              const std::vector<std::string>& argv) {
    axb::Matrix A, B;
    axb::DenseMatrix C;
    if (!spec_path.empty()) {
        axb::ProblemInstance inst = axb::generate(axb::spec_from_json(load_json_file(spec_path)));
        A = std::move(inst.A);
        B = std::move(inst.B);
        C = std::move(inst.C);
    } else {
        if (a_path.empty() || b_path.empty() || c_path.empty())
            throw axb::ConfigError("solve needs --spec or all of --a/--b/--c");
        A = axb::load_matrix_market(a_path);
        B = axb::load_matrix_market(b_path);
        C = axb::to_dense(axb::load_matrix_market(c_path));
    }

    axb::DenseMatrix X0(axb::cols(A), axb::rows(B));
    if (x0_kind == "eye")
        X0 = axb::scale(axb::DenseMatrix::identity(axb::cols(A), axb::rows(B)), x0_scale);
    else if (x0_kind != "zero")
        throw axb::ConfigError("--x0 must be zero or eye");

    axb::SolveConfig cfg;
    cfg.method = flags.make_method();
    cfg.alpha_rule = flags.make_alpha_rule();
    cfg.alpha_value = flags.alpha;
    cfg.max_iter = flags.max_iter;
    cfg.seed = flags.seed;
    cfg.refresh_interval = flags.refresh;
    cfg.record_trace = flags.trace;
    if (flags.stop == "rrn") {
        axb::DenseMatrix reference =
            cfg.method.tag == axb::MethodTag::BK
                ? axb::bk_limit(A, B, C, X0)
                : axb::reference_solution(A, B, C).X_star;
        cfg.stop = axb::StopRule::solution_rrn(flags.tol, std::move(reference));
    } else if (flags.stop == "residual") {
        cfg.stop = axb::StopRule::residual_rel(flags.tol);
    } else {
        throw axb::ConfigError("--stop must be rrn or residual");
    }

    axb::SolveReport rep = axb::solve(A, B, C, X0, cfg);
    if (rep.alpha_outside_bound)
        std::cerr << "warning: alpha " << rep.alpha
                  << " lies outside (0, 2/||B||_2^2); convergence is not guaranteed\n";

    fs::path dir(out);
    fs::create_directories(dir);
    json rj = axb::solve_report_to_json(rep);
    rj["stop"] = flags.stop;
    rj["tol"] = flags.tol;
    axb::write_text_file((dir / "report.json").string(), rj.dump(2) + "\n");
    if (flags.trace)
        axb::write_text_file((dir / "trace.csv").string(), axb::trace_to_csv(rep.trace));

    json cfg_echo = flags.echo();
    cfg_echo["x0"] = x0_kind;
    cfg_echo["x0_scale"] = x0_scale;
    if (!spec_path.empty()) cfg_echo["spec_file"] = spec_path;
    write_manifest(dir, "solve", argv, cfg_echo);

    std::cout << rep.method_label << ": " << rep.iterations << " iterations, final metric "
              << rep.final_rrn << ", "
              << (rep.terminated_by == axb::Terminated::Tolerance ? "converged"
                                                                  : "budget exhausted")
              << "\n";
    return rep.terminated_by == axb::Terminated::Tolerance ? kExitOk : kExitBudget;
}

// -- benchmark ----------------------------------------------------------------

int cmd_benchmark(const std::string& registry, const std::string& problems_path,
                  const std::string& methods_csv, double theta, std::size_t trials,
                  const SolveFlags& flags, std::size_t jobs, const std::string& format,
                  const std::string& out, const std::vector<std::string>& argv) {
    std::vector<axb::BenchProblem> problems;
    if (!problems_path.empty()) {
        json j = load_json_file(problems_path);
        for (const auto& e : j.at("problems")) {
            axb::ProblemInstance inst = axb::generate(axb::spec_from_json(e.at("spec")));
            problems.push_back({e.at("id").get<std::string>(), std::move(inst.A),
                                std::move(inst.B), std::move(inst.C)});
        }
    } else if (registry == "mini") {
        problems = axb::materialize_registry(axb::mini_registry());
    } else {
        throw axb::ConfigError("unknown registry '" + registry + "' (available: mini)");
    }

    std::vector<axb::Method> methods;
    std::stringstream ss(methods_csv);
    std::string name;
    while (std::getline(ss, name, ',')) {
        if (name.empty()) continue;
        methods.push_back(name == "rgrbk" ? axb::Method::rgrbk(theta)
                                          : axb::Method::parse(name));
    }
    if (methods.empty()) throw axb::ConfigError("no methods given");

    axb::BenchmarkOptions opt;
    opt.trials = trials;
    opt.alpha_rule = flags.make_alpha_rule();
    opt.alpha_value = flags.alpha;
    opt.stop_kind = flags.stop == "residual" ? axb::StopRule::Kind::ResidualRel
                                             : axb::StopRule::Kind::SolutionRrn;
    opt.tol = flags.tol;
    opt.max_iter = flags.max_iter;
    opt.seed = flags.seed == 0 ? 1 : flags.seed;
    opt.jobs = jobs;

    auto rows = axb::benchmark(problems, methods, opt);

    fs::path dir(out);
    fs::create_directories(dir);
    if (format == "json")
        axb::write_text_file((dir / "benchmark.json").string(),
                             axb::benchmark_to_json(rows).dump(2) + "\n");
    else
        axb::write_text_file((dir / "benchmark.csv").string(), axb::benchmark_to_csv(rows));

    json cfg_echo = flags.echo();
    cfg_echo["registry"] = registry;
    if (!problems_path.empty()) cfg_echo["problems_file"] = problems_path;
    cfg_echo["methods"] = methods_csv;
    cfg_echo["trials"] = trials;
    cfg_echo["format"] = format;
    write_manifest(dir, "benchmark", argv, cfg_echo);

    size_t total_failures = 0, total_rows = 0;
    for (const auto& r : rows) {
        std::cout << r.problem_id << " " << r.method << ": IT " << r.it_mean;
        if (r.speed_up_vs_rbk) std::cout << ", speed-up " << *r.speed_up_vs_rbk;
        if (r.failures) std::cout << ", failures " << r.failures;
        std::cout << "\n";
        total_failures += r.failures;
        ++total_rows;
    }
    const bool all_failed = total_failures == total_rows * trials && total_rows > 0;
    return all_failed ? kExitDivergence : kExitOk;
}

// -- restore ------------------------------------------------------------------

int cmd_restore(const std::string& image_path, bool fixture, std::size_t fixture_size,
                std::size_t kernel_size, double kernel_sigma, std::size_t iters,
                const SolveFlags& flags, bool save_blurred, const std::string& out,
                const std::vector<std::string>& argv) {
    axb::ColorImage original =
        fixture ? axb::synthetic_test_image(fixture_size, fixture_size)
                : axb::read_png(image_path);
    if (std::min(original.height, original.width) < 11)
        throw axb::ConfigError("image must be at least 11 pixels on each side");

    axb::BlurModel model =
        axb::make_blur_model(original.height, original.width, kernel_size, kernel_sigma);
    axb::ChannelStack x = axb::stack_channels(original);
    axb::ChannelStack observed = axb::forward_blur(model, x);
    axb::ColorImage blurred = axb::unstack_channels(observed);

    axb::SolveConfig cfg;
    cfg.method = flags.make_method();
    cfg.alpha_rule = flags.make_alpha_rule();
    cfg.alpha_value = flags.alpha;
    cfg.max_iter = iters;
    cfg.seed = flags.seed;
    cfg.refresh_interval = flags.refresh;
    cfg.stop = axb::StopRule::residual_rel(flags.stop == "residual" ? flags.tol : 0.0);

    auto [restored_stack, rep] = axb::restore(model, observed, cfg);
    axb::ColorImage restored = axb::unstack_channels(restored_stack);

    fs::path dir(out);
    fs::create_directories(dir);
    axb::write_png((dir / "restored.png").string(), restored);
    if (save_blurred) axb::write_png((dir / "blurred.png").string(), blurred);

    axb::RestoreMetricsRow row;
    row.image = fixture ? "fixture" : image_path;
    row.method = rep.method_label;
    row.theta = cfg.method.theta;
    row.iterations = rep.iterations;
    row.psnr_blurred = axb::psnr(original, blurred);
    row.psnr_restored = axb::psnr(original, restored);
    row.ssim_blurred = axb::ssim(original, blurred);
    row.ssim_restored = axb::ssim(original, restored);
    axb::write_text_file((dir / "metrics.csv").string(), axb::restore_metrics_to_csv({row}));

    json cfg_echo = flags.echo();
    cfg_echo["image"] = row.image;
    cfg_echo["kernel_size"] = kernel_size;
    cfg_echo["kernel_sigma"] = kernel_sigma;
    cfg_echo["iters"] = iters;
    write_manifest(dir, "restore", argv, cfg_echo);

    std::cout << "psnr blurred " << row.psnr_blurred << " -> restored " << row.psnr_restored
              << ", ssim " << row.ssim_blurred << " -> " << row.ssim_restored << "\n";
    const bool budget_mode = flags.stop != "residual" || flags.tol <= 0.0;
    if (!budget_mode && rep.terminated_by == axb::Terminated::MaxIter) return kExitBudget;
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<std::string> argv_copy(argv, argv + argc);
    CLI::App app{"Row-action solvers for the matrix equation A·X·B = C"};
    app.require_subcommand(1);

    // generate
    auto* gen = app.add_subcommand("generate", "materialize a problem spec to .mtx files");
    std::string gen_spec, gen_out = default_out_dir();
    gen->add_option("--spec", gen_spec, "problem spec JSON file")->required();
    gen->add_option("--out", gen_out, "output directory");

    // solve
    auto* sol = app.add_subcommand("solve", "run one solver on a system");
    std::string sol_spec, sol_a, sol_b, sol_c, sol_x0 = "zero", sol_out = default_out_dir();
    double sol_x0_scale = 1e-5;
    SolveFlags sol_flags;
    sol->add_option("--spec", sol_spec, "problem spec JSON file");
    sol->add_option("--a", sol_a, "A matrix (.mtx)");
    sol->add_option("--b", sol_b, "B matrix (.mtx)");
    sol->add_option("--c", sol_c, "C matrix (.mtx)");
    sol->add_option("--x0", sol_x0, "initial guess: zero|eye");
    sol->add_option("--x0-scale", sol_x0_scale, "scale for --x0 eye");
    sol->add_option("--stop", sol_flags.stop, "rrn|residual");
    sol->add_flag("--trace", sol_flags.trace, "record and write the iteration trace");
    sol->add_option("--out", sol_out, "output directory");
    sol_flags.attach(sol);

    // benchmark
    auto* ben = app.add_subcommand("benchmark", "compare methods over a problem set");
    std::string ben_registry = "mini", ben_problems, ben_methods = "rbk,grbk,rgrbk,mwrbk";
    std::string ben_format = "csv", ben_out = default_out_dir();
    double ben_theta = 0.8;
    std::size_t ben_trials = 20, ben_jobs = 0;
    SolveFlags ben_flags;
    ben->add_option("--registry", ben_registry, "shipped problem registry name");
    ben->add_option("--problems", ben_problems, "problem list JSON file");
    ben->add_option("--methods", ben_methods, "comma-separated method list");
    ben->add_option("--trials", ben_trials, "trials per (problem, method)");
    ben->add_option("--jobs", ben_jobs, "worker threads (0 = hardware)");
    ben->add_option("--format", ben_format, "csv|json")
        ->check(CLI::IsMember({"csv", "json"}));
    ben->add_option("--out", ben_out, "output directory");
    ben->add_option("--stop", ben_flags.stop, "rrn|residual");
    ben->add_option("--theta", ben_theta, "theta used for rgrbk entries");
    ben->add_option("--alpha-rule", ben_flags.alpha_rule, "safe|paper|fixed")
        ->check(CLI::IsMember({"safe", "paper", "fixed"}));
    ben->add_option("--alpha", ben_flags.alpha, "step size for fixed rule");
    ben->add_option("--tol", ben_flags.tol, "stopping tolerance");
    ben->add_option("--max-iter", ben_flags.max_iter, "iteration budget per trial");
    ben->add_option("--seed", ben_flags.seed, "base seed for trial substreams");

    // restore
    auto* res = app.add_subcommand("restore", "blur and restore a color image");
    std::string res_image, res_out = default_out_dir();
    bool res_fixture = false, res_save_blurred = false;
    std::size_t res_fixture_size = 32, res_kernel = 5, res_iters = 20000;
    double res_sigma = 6.0;
    SolveFlags res_flags;
    res_flags.stop = "budget";
    res->add_option("--image", res_image, "input PNG (treated as the clean original)");
    res->add_flag("--fixture", res_fixture, "use the shipped synthetic test image");
    res->add_option("--fixture-size", res_fixture_size, "fixture side length");
    res->add_option("--kernel-size", res_kernel, "Gaussian kernel size (odd)");
    res->add_option("--kernel-sigma", res_sigma, "Gaussian kernel sigma");
    res->add_option("--iters", res_iters, "iteration budget");
    res->add_flag("--save-blurred", res_save_blurred, "also write blurred.png");
    res->add_option("--stop", res_flags.stop, "budget|residual");
    res->add_option("--out", res_out, "output directory");
    res_flags.attach(res);

    try {
        app.parse(argc, argv);
        if (gen->parsed()) return cmd_generate(gen_spec, gen_out, argv_copy);
        if (sol->parsed())
            return cmd_solve(sol_spec, sol_a, sol_b, sol_c, sol_x0, sol_x0_scale, sol_flags,
                             sol_out, argv_copy);
        if (ben->parsed())
            return cmd_benchmark(ben_registry, ben_problems, ben_methods, ben_theta, ben_trials,
                                 ben_flags, ben_jobs, ben_format, ben_out, argv_copy);
        if (res->parsed()) {
            if (res_image.empty() && !res_fixture)
                throw axb::ConfigError("restore needs --image or --fixture");
            return cmd_restore(res_image, res_fixture, res_fixture_size, res_kernel, res_sigma,
                               res_iters, res_flags, res_save_blurred, res_out, argv_copy);
        }
        return kExitConfig;
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitConfig;
    } catch (const axb::DivergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDivergence;
    } catch (const axb::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const axb::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const axb::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const axb::ShapeError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const axb::DomainError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const axb::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
}
