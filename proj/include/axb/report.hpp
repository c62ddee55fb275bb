#pragma once

#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "axb/analysis.hpp"
#include "axb/solver.hpp"

namespace axb {

inline constexpr const char* kToolVersion = "1.0.0";

// ---------------------------------------------------------------------------
// CSV (RFC-4180 quoting; numbers printed with 17 significant digits so
// replays are byte-identical)

namespace csv {

inline std::string escape(const std::string& field) {
    if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += "\"";
    return out;
}

inline std::string num(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string row(const std::vector<std::string>& fields) {
    std::string out;
    for (size_t i = 0; i < fields.size(); ++i) {
        if (i) out += ",";
        out += escape(fields[i]);
    }
    out += "\r\n";
    return out;
}

}  // namespace csv

inline std::string trace_to_csv(const std::vector<TracePoint>& trace) {
    std::string out = csv::row({"k", "rrn", "residual_rel", "row"});
    for (const auto& t : trace)
        out += csv::row({std::to_string(t.k), csv::num(t.rrn), csv::num(t.residual_rel),
                         std::to_string(t.selected_row)});
    return out;
}

inline std::string benchmark_to_csv(const std::vector<BenchmarkRow>& rows) {
    std::string out = csv::row({"problem_id", "method", "theta", "alpha_rule", "trials",
                                "it_mean", "it_std", "wall_mean_s", "speed_up_vs_rbk",
                                "failures"});
    for (const auto& r : rows) {
        out += csv::row({r.problem_id, r.method, r.theta ? csv::num(*r.theta) : "",
                         r.alpha_rule, std::to_string(r.trials), csv::num(r.it_mean),
                         csv::num(r.it_std), csv::num(r.wall_mean_s),
                         r.speed_up_vs_rbk ? csv::num(*r.speed_up_vs_rbk) : "",
                         std::to_string(r.failures)});
    }
    return out;
}

struct RestoreMetricsRow {
    std::string image;
    std::string method;
    std::optional<double> theta;
    size_t iterations = 0;
    double psnr_blurred = 0.0;
    double psnr_restored = 0.0;
    double ssim_blurred = 0.0;
    double ssim_restored = 0.0;
};

inline std::string restore_metrics_to_csv(const std::vector<RestoreMetricsRow>& rows) {
    std::string out = csv::row({"image", "method", "theta", "iterations", "psnr_blurred",
                                "psnr_restored", "ssim_blurred", "ssim_restored"});
    for (const auto& r : rows)
        out += csv::row({r.image, r.method, r.theta ? csv::num(*r.theta) : "",
                         std::to_string(r.iterations), csv::num(r.psnr_blurred),
                         csv::num(r.psnr_restored), csv::num(r.ssim_blurred),
                         csv::num(r.ssim_restored)});
    return out;
}

// ---------------------------------------------------------------------------
// JSON reports

inline nlohmann::json solve_report_to_json(const SolveReport& rep) {
    nlohmann::json j;
    j["iterations"] = rep.iterations;
    j["wall_seconds"] = rep.wall_seconds;
    j["final_rrn"] = rep.final_rrn;
    j["final_residual_rel"] = rep.final_residual_rel;
    j["terminated_by"] = rep.terminated_by == Terminated::Tolerance ? "tolerance" : "max_iter";
    j["method"] = rep.method_label;
    j["alpha"] = rep.alpha;
    j["seed"] = rep.seed;
    j["alpha_outside_bound"] = rep.alpha_outside_bound;
    j["skipped_zero_rows"] = rep.skipped_zero_rows;
    j["x_rows"] = rep.X.rows();
    j["x_cols"] = rep.X.cols();
    return j;
}

inline nlohmann::json benchmark_to_json(const std::vector<BenchmarkRow>& rows) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : rows) {
        nlohmann::json j;
        j["problem_id"] = r.problem_id;
        j["method"] = r.method;
        if (r.theta) j["theta"] = *r.theta;
        j["alpha_rule"] = r.alpha_rule;
        j["trials"] = r.trials;
        j["it_mean"] = r.it_mean;
        j["it_std"] = r.it_std;
        j["wall_mean_s"] = r.wall_mean_s;
        if (r.speed_up_vs_rbk) j["speed_up_vs_rbk"] = *r.speed_up_vs_rbk;
        j["failures"] = r.failures;
        arr.push_back(std::move(j));
    }
    return arr;
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << text;
    if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace axb
