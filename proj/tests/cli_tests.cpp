// End-to-end tests driving the installed CLI binary through its subcommands,
// checking exit codes, output files, replayability, and the report schema.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "axb/png_io.hpp"
#include "axb/problems.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::string kCli = AXB_CLI_PATH;

struct TempDir {
    fs::path path;
    TempDir() {
        static int counter = 0;
        path = fs::temp_directory_path() /
               ("axb_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string sub(const std::string& name) const { return (path / name).string(); }
};

int run_cli(const std::string& args, const TempDir& dir) {
    std::string cmd = kCli + " " + args + " >" + dir.sub("stdout.txt") + " 2>" +
                      dir.sub("stderr.txt");
    int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

// Minimal validator for the subset of JSON Schema the shipped schema uses:
// type, required, properties, enum.
bool validates(const json& doc, const json& schema) {
    if (schema.contains("type")) {
        const std::string t = schema["type"];
        if (t == "object" && !doc.is_object()) return false;
        if (t == "integer" && !doc.is_number_integer() && !doc.is_number_unsigned()) return false;
        if (t == "number" && !doc.is_number()) return false;
        if (t == "string" && !doc.is_string()) return false;
        if (t == "boolean" && !doc.is_boolean()) return false;
    }
    if (schema.contains("enum")) {
        bool hit = false;
        for (const auto& v : schema["enum"]) hit |= (v == doc);
        if (!hit) return false;
    }
    if (schema.contains("required"))
        for (const auto& key : schema["required"])
            if (!doc.contains(key.get<std::string>())) return false;
    if (schema.contains("properties"))
        for (const auto& [key, sub] : schema["properties"].items())
            if (doc.contains(key) && !validates(doc[key], sub)) return false;
    return true;
}

// RFC-4180 field splitter for one CSV document.
std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false;
    for (size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (quoted) {
            if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') {
                field += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            row.push_back(field);
            field.clear();
        } else if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
            row.push_back(field);
            field.clear();
            rows.push_back(row);
            row.clear();
            ++i;
        } else {
            field += c;
        }
    }
    if (!field.empty() || !row.empty()) {
        row.push_back(field);
        rows.push_back(row);
    }
    return rows;
}

std::string tiny_spec_json() {
    return R"({
        "a": {"kind": "gaussian", "rows": 30, "cols": 5},
        "b": {"kind": "gaussian", "rows": 6, "cols": 35},
        "seed": 42
    })";
}

json strip_volatile(json j) {
    j.erase("wall_seconds");
    return j;
}

}  // namespace

TEST_CASE("generate writes loadable, reproducible matrices") {
    TempDir dir;
    write_file(dir.sub("spec.json"), tiny_spec_json());
    CHECK(run_cli("generate --spec " + dir.sub("spec.json") + " --out " + dir.sub("g1"), dir) ==
          0);
    for (const char* f : {"A.mtx", "B.mtx", "C.mtx", "Xtrue.mtx", "manifest.json"})
        CHECK(fs::exists(dir.path / "g1" / f));

    axb::Matrix A = axb::load_matrix_market(dir.sub("g1/A.mtx"));
    axb::Matrix B = axb::load_matrix_market(dir.sub("g1/B.mtx"));
    axb::DenseMatrix C = axb::to_dense(axb::load_matrix_market(dir.sub("g1/C.mtx")));
    axb::DenseMatrix X = axb::to_dense(axb::load_matrix_market(dir.sub("g1/Xtrue.mtx")));
    CHECK(axb::frobenius_dist(axb::matmul(axb::matmul(A, X), B), C) <=
          1e-12 * (1.0 + axb::frobenius_norm(C)));

    // determinism: a second run writes byte-identical matrices
    CHECK(run_cli("generate --spec " + dir.sub("spec.json") + " --out " + dir.sub("g2"), dir) ==
          0);
    CHECK(slurp(dir.sub("g1/A.mtx")) == slurp(dir.sub("g2/A.mtx")));
    CHECK(slurp(dir.sub("g1/C.mtx")) == slurp(dir.sub("g2/C.mtx")));
}

TEST_CASE("generate rejects invalid specs with exit 2 and missing files with exit 5") {
    TempDir dir;
    write_file(dir.sub("bad.json"), R"({"a": {"kind": "martian"}, "b": {"kind": "gaussian"}})");
    CHECK(run_cli("generate --spec " + dir.sub("bad.json") + " --out " + dir.sub("out"), dir) ==
          2);
    CHECK(run_cli("generate --spec " + dir.sub("missing.json") + " --out " + dir.sub("out"),
                  dir) == 5);
}

TEST_CASE("solve converges, validates against the schema, and replays byte-identically") {
    TempDir dir;
    write_file(dir.sub("spec.json"), tiny_spec_json());
    REQUIRE(run_cli("generate --spec " + dir.sub("spec.json") + " --out " + dir.sub("g"), dir) ==
            0);
    const std::string solve_args = "solve --a " + dir.sub("g/A.mtx") + " --b " +
                                   dir.sub("g/B.mtx") + " --c " + dir.sub("g/C.mtx") +
                                   " --method grbk --stop rrn --tol 1e-6 --seed 3 --trace";
    CHECK(run_cli(solve_args + " --out " + dir.sub("s1"), dir) == 0);

    json report = json::parse(slurp(dir.sub("s1/report.json")));
    CHECK(report["final_rrn"].get<double>() <= 1e-6);
    CHECK(report["terminated_by"] == "tolerance");
    json schema = json::parse(slurp(std::string(AXB_SCHEMA_PATH)));
    CHECK(validates(report, schema));

    // trace is well-formed CSV with the four trace columns
    auto rows = parse_csv(slurp(dir.sub("s1/trace.csv")));
    REQUIRE(rows.size() >= 2);
    CHECK(rows[0] == std::vector<std::string>{"k", "rrn", "residual_rel", "row"});
    for (const auto& r : rows) CHECK(r.size() == 4);

    // replay: identical outputs apart from wall time
    CHECK(run_cli(solve_args + " --out " + dir.sub("s2"), dir) == 0);
    CHECK(strip_volatile(json::parse(slurp(dir.sub("s1/report.json")))) ==
          strip_volatile(json::parse(slurp(dir.sub("s2/report.json")))));
    CHECK(slurp(dir.sub("s1/trace.csv")) == slurp(dir.sub("s2/trace.csv")));
}

TEST_CASE("solve exit codes: budget, config, io") {
    TempDir dir;
    write_file(dir.sub("spec.json"), tiny_spec_json());
    REQUIRE(run_cli("generate --spec " + dir.sub("spec.json") + " --out " + dir.sub("g"), dir) ==
            0);
    const std::string paths = " --a " + dir.sub("g/A.mtx") + " --b " + dir.sub("g/B.mtx") +
                              " --c " + dir.sub("g/C.mtx");

    CHECK(run_cli("solve" + paths + " --method rbk --stop rrn --tol 1e-12 --max-iter 1 --out " +
                      dir.sub("s_budget"),
                  dir) == 3);
    CHECK(run_cli("solve" + paths + " --method rgrbk --out " + dir.sub("s_cfg"), dir) == 2);
    CHECK(run_cli("solve" + paths + " --method grbk --theta 0.4 --out " + dir.sub("s_cfg2"),
                  dir) == 2);
    CHECK(run_cli("solve --a " + dir.sub("g/nope.mtx") + " --b " + dir.sub("g/B.mtx") +
                      " --c " + dir.sub("g/C.mtx") + " --out " + dir.sub("s_io"),
                  dir) == 5);
}

TEST_CASE("benchmark emits csv, is deterministic for mwrbk, normalizes the rbk row") {
    TempDir dir;
    write_file(dir.sub("problems.json"), R"({"problems": [
        {"id": "tiny", "spec": {
            "a": {"kind": "gaussian", "rows": 25, "cols": 4},
            "b": {"kind": "gaussian", "rows": 5, "cols": 30},
            "seed": 7
        }}
    ]})");
    const std::string args = "benchmark --problems " + dir.sub("problems.json") +
                             " --methods rbk,mwrbk --trials 3 --seed 5";
    CHECK(run_cli(args + " --out " + dir.sub("b1"), dir) == 0);
    auto rows = parse_csv(slurp(dir.sub("b1/benchmark.csv")));
    REQUIRE(rows.size() == 3);  // header + 2 method rows
    CHECK(rows[0][0] == "problem_id");
    REQUIRE(rows[0].size() == 10);
    // rbk speed-up against itself is exactly 1
    CHECK(rows[1][1] == "rbk");
    CHECK(rows[1][8] == "1");
    // mwrbk is deterministic: zero iteration spread
    CHECK(rows[2][1] == "mwrbk");
    CHECK(rows[2][6] == "0");

    // replay ignoring the wall and speed-up columns
    CHECK(run_cli(args + " --out " + dir.sub("b2"), dir) == 0);
    auto rows2 = parse_csv(slurp(dir.sub("b2/benchmark.csv")));
    REQUIRE(rows2.size() == rows.size());
    for (size_t i = 0; i < rows.size(); ++i)
        for (size_t f : {0, 1, 2, 3, 4, 5, 6, 9})
            CHECK(rows[i][f] == rows2[i][f]);

    // json format variant
    CHECK(run_cli(args + " --format json --out " + dir.sub("b3"), dir) == 0);
    json bench = json::parse(slurp(dir.sub("b3/benchmark.json")));
    CHECK(bench.is_array());
    CHECK(bench.size() == 2);
}

TEST_CASE("restore writes images and metrics on the fixture") {
    TempDir dir;
    CHECK(run_cli("restore --fixture --fixture-size 16 --kernel-size 3 --kernel-sigma 1.5 "
                  "--method grbk --iters 4000 --seed 2 --save-blurred --out " +
                      dir.sub("r"),
                  dir) == 0);
    CHECK(fs::exists(dir.path / "r" / "restored.png"));
    CHECK(fs::exists(dir.path / "r" / "blurred.png"));
    auto rows = parse_csv(slurp(dir.sub("r/metrics.csv")));
    REQUIRE(rows.size() == 2);
    REQUIRE(rows[0].size() == 8);
    const double psnr_blurred = std::stod(rows[1][4]);
    const double psnr_restored = std::stod(rows[1][5]);
    CHECK(psnr_restored > psnr_blurred);

    // a zero-iteration budget still produces an export and metrics; the
    // export is the zero-initialized iterate, i.e. a black image
    CHECK(run_cli("restore --fixture --fixture-size 16 --kernel-size 3 --kernel-sigma 1.5 "
                  "--method rbk --iters 0 --out " +
                      dir.sub("r0"),
                  dir) == 0);
    auto rows0 = parse_csv(slurp(dir.sub("r0/metrics.csv")));
    REQUIRE(rows0.size() == 2);
    CHECK(std::stod(rows0[1][3]) == 0.0);  // iterations column
    axb::ColorImage blank = axb::read_png(dir.sub("r0/restored.png"));
    double mass = 0.0;
    for (const auto& plane : blank.planes)
        for (double v : plane) mass += v;
    CHECK(mass == 0.0);

    // rgrbk accepts the relaxation factor
    CHECK(run_cli("restore --fixture --fixture-size 16 --kernel-size 3 --kernel-sigma 1.5 "
                  "--method rgrbk --theta 0.8 --iters 500 --out " +
                      dir.sub("rt"),
                  dir) == 0);
}

TEST_CASE("restore rejects undersized images") {
    TempDir dir;
    CHECK(run_cli("restore --fixture --fixture-size 8 --kernel-size 3 --kernel-sigma 1.0 "
                  "--iters 10 --out " +
                      dir.sub("r"),
                  dir) == 2);
}

TEST_CASE("manifest records the exact argv for replay") {
    TempDir dir;
    write_file(dir.sub("spec.json"), tiny_spec_json());
    REQUIRE(run_cli("generate --spec " + dir.sub("spec.json") + " --out " + dir.sub("g"), dir) ==
            0);
    json manifest = json::parse(slurp(dir.sub("g/manifest.json")));
    CHECK(manifest["tool"] == "axbsolve");
    CHECK(manifest["command"] == "generate");
    REQUIRE(manifest["argv"].is_array());
    // re-run from the manifest argv (skipping argv[0]) into a new directory
    std::string replay;
    for (size_t i = 1; i < manifest["argv"].size(); ++i) {
        std::string tok = manifest["argv"][i];
        if (tok == dir.sub("g")) tok = dir.sub("g_replay");
        replay += (replay.empty() ? "" : " ") + tok;
    }
    CHECK(run_cli(replay, dir) == 0);
    CHECK(slurp(dir.sub("g/A.mtx")) == slurp(dir.sub("g_replay/A.mtx")));
}
