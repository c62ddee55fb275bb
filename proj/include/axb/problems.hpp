#pragma once

#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "axb/analysis.hpp"
#include "axb/matrix.hpp"
#include "axb/rng.hpp"

namespace axb {

// ---------------------------------------------------------------------------
// Matrix Market I/O (coordinate and array, real or integer, general or
// symmetric). Indices are 1-based on disk, 0-based in memory.

namespace mm_detail {

inline std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

struct Header {
    bool coordinate = true;
    bool symmetric = false;
};

inline Header parse_header(const std::string& line, size_t line_no) {
    std::istringstream ss(line);
    std::string banner, object, format, field, symmetry;
    ss >> banner >> object >> format >> field >> symmetry;
    if (lower(banner) != "%%matrixmarket")
        throw ParseError("not a Matrix Market file (bad banner)", line_no);
    if (lower(object) != "matrix")
        throw ParseError("unsupported Matrix Market object '" + object + "'", line_no);
    Header h;
    format = lower(format);
    if (format == "coordinate")
        h.coordinate = true;
    else if (format == "array")
        h.coordinate = false;
    else
        throw ParseError("unsupported format '" + format + "'", line_no);
    field = lower(field);
    if (field != "real" && field != "integer")
        throw ParseError("unsupported field '" + field + "'", line_no);
    symmetry = lower(symmetry);
    if (symmetry == "general")
        h.symmetric = false;
    else if (symmetry == "symmetric")
        h.symmetric = true;
    else
        throw ParseError("unsupported symmetry '" + symmetry + "'", line_no);
    return h;
}

inline bool blank(const std::string& s) {
    for (char c : s)
        if (!std::isspace(static_cast<unsigned char>(c))) return false;
    return true;
}

}  // namespace mm_detail

inline Matrix load_matrix_market(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::string line;
    size_t line_no = 0;

    if (!std::getline(in, line)) throw ParseError("empty file", 1);
    ++line_no;
    mm_detail::Header h = mm_detail::parse_header(line, line_no);

    auto next_content = [&](std::string& out) {
        while (std::getline(in, out)) {
            ++line_no;
            if (out.empty() || mm_detail::blank(out)) continue;
            if (out[0] == '%') continue;
            return true;
        }
        return false;
    };

    if (!next_content(line)) throw ParseError("missing size line", line_no);
    std::istringstream size_ss(line);

    if (h.coordinate) {
        long long m = -1, n = -1, nnz = -1;
        size_ss >> m >> n >> nnz;
        if (size_ss.fail() || m < 0 || n < 0 || nnz < 0)
            throw ParseError("bad coordinate size line", line_no);
        std::vector<std::tuple<size_t, size_t, double>> trips;
        trips.reserve(static_cast<size_t>(nnz) * (h.symmetric ? 2 : 1));
        for (long long k = 0; k < nnz; ++k) {
            if (!next_content(line)) throw ParseError("unexpected end of entries", line_no);
            std::istringstream es(line);
            long long i = 0, j = 0;
            double v = 0.0;
            es >> i >> j >> v;
            if (es.fail()) throw ParseError("bad coordinate entry", line_no);
            if (i < 1 || i > m || j < 1 || j > n)
                throw ParseError("index out of range", line_no);
            trips.emplace_back(static_cast<size_t>(i - 1), static_cast<size_t>(j - 1), v);
            if (h.symmetric && i != j)
                trips.emplace_back(static_cast<size_t>(j - 1), static_cast<size_t>(i - 1), v);
        }
        if (next_content(line)) throw ParseError("trailing data after entries", line_no);
        return SparseMatrix::from_triplets(static_cast<size_t>(m), static_cast<size_t>(n),
                                           std::move(trips));
    }

    long long m = -1, n = -1;
    size_ss >> m >> n;
    if (size_ss.fail() || m < 0 || n < 0) throw ParseError("bad array size line", line_no);
    DenseMatrix d(static_cast<size_t>(m), static_cast<size_t>(n));
    auto read_value = [&]() {
        if (!next_content(line)) throw ParseError("unexpected end of array values", line_no);
        std::istringstream vs(line);
        double v = 0.0;
        vs >> v;
        if (vs.fail()) throw ParseError("bad array value", line_no);
        return v;
    };
    if (h.symmetric) {
        if (m != n) throw ParseError("symmetric array matrix must be square", line_no);
        for (long long j = 0; j < n; ++j)
            for (long long i = j; i < m; ++i) {
                double v = read_value();
                d(static_cast<size_t>(i), static_cast<size_t>(j)) = v;
                d(static_cast<size_t>(j), static_cast<size_t>(i)) = v;
            }
    } else {
        for (long long j = 0; j < n; ++j)
            for (long long i = 0; i < m; ++i) d(static_cast<size_t>(i), static_cast<size_t>(j)) = read_value();
    }
    if (next_content(line)) throw ParseError("trailing data after values", line_no);
    return d;
}

namespace mm_detail {

inline std::string fmt17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace mm_detail

inline void save_matrix_market(const std::string& path, const SparseMatrix& m,
                               const std::string& comment = {}) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << "%%MatrixMarket matrix coordinate real general\n";
    if (!comment.empty()) out << "% " << comment << "\n";
    out << m.rows() << " " << m.cols() << " " << m.nnz() << "\n";
    for (size_t i = 0; i < m.rows(); ++i) {
        auto idx = m.row_indices(i);
        auto val = m.row_values(i);
        for (size_t k = 0; k < idx.size(); ++k)
            out << (i + 1) << " " << (idx[k] + 1) << " " << mm_detail::fmt17(val[k]) << "\n";
    }
    if (!out) throw IoError("write failed for '" + path + "'");
}

inline void save_matrix_market(const std::string& path, const DenseMatrix& m,
                               const std::string& comment = {}) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << "%%MatrixMarket matrix array real general\n";
    if (!comment.empty()) out << "% " << comment << "\n";
    out << m.rows() << " " << m.cols() << "\n";
    for (size_t j = 0; j < m.cols(); ++j)
        for (size_t i = 0; i < m.rows(); ++i) out << mm_detail::fmt17(m(i, j)) << "\n";
    if (!out) throw IoError("write failed for '" + path + "'");
}

inline void save_matrix_market(const std::string& path, const Matrix& m,
                               const std::string& comment = {}) {
    std::visit([&](const auto& x) { save_matrix_market(path, x, comment); }, m);
}

// ---------------------------------------------------------------------------
// Problem construction

/// Table-style transpose of a loaded matrix, CSR staying CSR.
inline Matrix transpose_source(const Matrix& m) { return transpose(m); }

struct GaussianSource {
    size_t rows = 0, cols = 0;
};
struct SparseGaussianSource {
    size_t rows = 0, cols = 0;
    double density = 0.0;
};
struct FileSource {
    std::string path;
};

enum class StackMode { Vertical, Horizontal };

struct BaseSource : std::variant<GaussianSource, SparseGaussianSource, FileSource> {
    using std::variant<GaussianSource, SparseGaussianSource, FileSource>::variant;
};

/// Duplicates one drawn matrix, [G; G] or [G, G]; the stacking that makes the
/// tables' rank-deficient instances.
struct StackedSource {
    BaseSource inner;
    StackMode mode = StackMode::Vertical;
};

struct MatrixSource {
    std::variant<GaussianSource, SparseGaussianSource, FileSource, StackedSource> source;
    bool transpose = false;

    MatrixSource() : source(GaussianSource{}) {}
    MatrixSource(GaussianSource s) : source(s) {}
    MatrixSource(SparseGaussianSource s) : source(s) {}
    MatrixSource(FileSource s) : source(std::move(s)) {}
    MatrixSource(StackedSource s) : source(std::move(s)) {}
};

struct ProblemSpec {
    MatrixSource a_source;
    MatrixSource b_source;
    uint64_t seed = 0;
    // Optional explicit X shape; must equal (A.cols, B.rows) when present.
    std::optional<std::pair<size_t, size_t>> x_shape;
};

struct DensityReport {
    size_t nnz = 0;
    double density = 0.0;
};

template <class M>
DensityReport density_report(const M& m);

template <>
inline DensityReport density_report(const DenseMatrix& m) {
    size_t nnz = 0;
    for (double v : m.data())
        if (v != 0.0) ++nnz;
    return {nnz, static_cast<double>(nnz) / static_cast<double>(m.rows() * m.cols())};
}

template <>
inline DensityReport density_report(const SparseMatrix& m) {
    return {m.nnz(), static_cast<double>(m.nnz()) / static_cast<double>(m.rows() * m.cols())};
}

inline DensityReport density_report(const Matrix& m) {
    return std::visit([](const auto& x) { return density_report(x); }, m);
}

struct ProblemInstance {
    Matrix A;
    Matrix B;
    DenseMatrix C;
    DenseMatrix X_true;
    ProblemSpec spec;
    DensityReport a_density, b_density, x_density, c_density;
};

namespace detail {

inline Matrix stack(const Matrix& g, StackMode mode) {
    return std::visit(
        [&](const auto& m) -> Matrix {
            if constexpr (std::is_same_v<std::decay_t<decltype(m)>, DenseMatrix>) {
                const bool v = mode == StackMode::Vertical;
                DenseMatrix out(v ? 2 * m.rows() : m.rows(), v ? m.cols() : 2 * m.cols());
                for (size_t i = 0; i < m.rows(); ++i)
                    for (size_t j = 0; j < m.cols(); ++j) {
                        out(i, j) = m(i, j);
                        if (v)
                            out(i + m.rows(), j) = m(i, j);
                        else
                            out(i, j + m.cols()) = m(i, j);
                    }
                return out;
            } else {
                std::vector<std::tuple<size_t, size_t, double>> trips;
                trips.reserve(2 * m.nnz());
                const bool v = mode == StackMode::Vertical;
                for (size_t i = 0; i < m.rows(); ++i) {
                    auto idx = m.row_indices(i);
                    auto val = m.row_values(i);
                    for (size_t k = 0; k < idx.size(); ++k) {
                        trips.emplace_back(i, idx[k], val[k]);
                        if (v)
                            trips.emplace_back(i + m.rows(), idx[k], val[k]);
                        else
                            trips.emplace_back(i, idx[k] + m.cols(), val[k]);
                    }
                }
                return SparseMatrix::from_triplets(v ? 2 * m.rows() : m.rows(),
                                                   v ? m.cols() : 2 * m.cols(),
                                                   std::move(trips));
            }
        },
        g);
}

inline Matrix materialize_base(const BaseSource& src, RngStream& stream) {
    if (const auto* g = std::get_if<GaussianSource>(&src))
        return dense_gaussian(stream, g->rows, g->cols);
    if (const auto* s = std::get_if<SparseGaussianSource>(&src))
        return sparse_gaussian(stream, s->rows, s->cols, s->density);
    return load_matrix_market(std::get<FileSource>(src).path);
}

inline Matrix materialize(const MatrixSource& src, RngStream& stream) {
    Matrix m = std::visit(
        [&](const auto& s) -> Matrix {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, StackedSource>) {
                Matrix inner = materialize_base(s.inner, stream);
                return stack(inner, s.mode);
            } else {
                BaseSource base = s;
                return materialize_base(base, stream);
            }
        },
        src.source);
    if (src.transpose) m = transpose(m);
    return m;
}

}  // namespace detail

/// Materializes a consistent instance: A and B from their sources, X_true
/// Gaussian, C = A·X_true·B.
inline ProblemInstance generate(const ProblemSpec& spec) {
    RngStream root(spec.seed);
    RngStream sa = root.substream(1);
    RngStream sb = root.substream(2);
    RngStream sx = root.substream(3);
    ProblemInstance inst;
    inst.spec = spec;
    inst.A = detail::materialize(spec.a_source, sa);
    inst.B = detail::materialize(spec.b_source, sb);
    const size_t p = cols(inst.A), q = rows(inst.B);
    if (spec.x_shape && (spec.x_shape->first != p || spec.x_shape->second != q))
        throw ConfigError("problem spec: X shape must be (A.cols, B.rows)");
    inst.X_true = dense_gaussian(sx, p, q);
    inst.C = matmul(matmul(inst.A, inst.X_true), inst.B);
    inst.a_density = density_report(inst.A);
    inst.b_density = density_report(inst.B);
    inst.x_density = density_report<DenseMatrix>(inst.X_true);
    inst.c_density = density_report<DenseMatrix>(inst.C);
    return inst;
}

// ---------------------------------------------------------------------------
// JSON problem specs

namespace detail {

inline MatrixSource source_from_json(const nlohmann::json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    MatrixSource out;
    auto base_from = [](const nlohmann::json& b) -> BaseSource {
        const std::string k = b.at("kind").get<std::string>();
        if (k == "gaussian")
            return GaussianSource{b.at("rows").get<size_t>(), b.at("cols").get<size_t>()};
        if (k == "sparse_gaussian")
            return SparseGaussianSource{b.at("rows").get<size_t>(), b.at("cols").get<size_t>(),
                                        b.at("density").get<double>()};
        if (k == "file") return FileSource{b.at("path").get<std::string>()};
        throw ConfigError("unknown matrix source kind '" + k + "'");
    };
    if (kind == "stacked") {
        StackedSource s;
        const std::string mode = j.at("mode").get<std::string>();
        if (mode == "vertical")
            s.mode = StackMode::Vertical;
        else if (mode == "horizontal")
            s.mode = StackMode::Horizontal;
        else
            throw ConfigError("stacked mode must be vertical or horizontal");
        s.inner = base_from(j.at("inner"));
        out.source = std::move(s);
    } else {
        BaseSource b = base_from(j);
        if (const auto* g = std::get_if<GaussianSource>(&b))
            out.source = *g;
        else if (const auto* s = std::get_if<SparseGaussianSource>(&b))
            out.source = *s;
        else
            out.source = std::move(std::get<FileSource>(b));
    }
    out.transpose = j.value("transpose", false);
    return out;
}

inline nlohmann::json source_to_json(const MatrixSource& src) {
    nlohmann::json j;
    auto base_to = [](const BaseSource& b) {
        nlohmann::json out;
        if (const auto* g = std::get_if<GaussianSource>(&b)) {
            out["kind"] = "gaussian";
            out["rows"] = g->rows;
            out["cols"] = g->cols;
        } else if (const auto* s = std::get_if<SparseGaussianSource>(&b)) {
            out["kind"] = "sparse_gaussian";
            out["rows"] = s->rows;
            out["cols"] = s->cols;
            out["density"] = s->density;
        } else {
            out["kind"] = "file";
            out["path"] = std::get<FileSource>(b).path;
        }
        return out;
    };
    if (const auto* st = std::get_if<StackedSource>(&src.source)) {
        j["kind"] = "stacked";
        j["mode"] = st->mode == StackMode::Vertical ? "vertical" : "horizontal";
        j["inner"] = base_to(st->inner);
    } else if (const auto* g = std::get_if<GaussianSource>(&src.source)) {
        j = base_to(BaseSource{*g});
    } else if (const auto* s = std::get_if<SparseGaussianSource>(&src.source)) {
        j = base_to(BaseSource{*s});
    } else {
        j = base_to(BaseSource{std::get<FileSource>(src.source)});
    }
    if (src.transpose) j["transpose"] = true;
    return j;
}

}  // namespace detail

inline ProblemSpec spec_from_json(const nlohmann::json& j) {
    ProblemSpec spec;
    spec.a_source = detail::source_from_json(j.at("a"));
    spec.b_source = detail::source_from_json(j.at("b"));
    spec.seed = j.value("seed", 0ULL);
    if (j.contains("x"))
        spec.x_shape = {{j["x"].at("rows").get<size_t>(), j["x"].at("cols").get<size_t>()}};
    return spec;
}

inline nlohmann::json spec_to_json(const ProblemSpec& spec) {
    nlohmann::json j;
    j["a"] = detail::source_to_json(spec.a_source);
    j["b"] = detail::source_to_json(spec.b_source);
    j["seed"] = spec.seed;
    if (spec.x_shape) j["x"] = {{"rows", spec.x_shape->first}, {"cols", spec.x_shape->second}};
    return j;
}

// ---------------------------------------------------------------------------
// Shipped registry: scaled-down analogues of the benchmark families (tall
// full-rank, wide full-rank, rank-deficient; dense and sparse variants),
// sized so the whole suite runs in seconds.

struct RegistryEntry {
    std::string id;
    ProblemSpec spec;
};

inline std::vector<RegistryEntry> mini_registry() {
    std::vector<RegistryEntry> reg;
    auto gauss = [](size_t r, size_t c) { return MatrixSource(GaussianSource{r, c}); };
    auto sp = [](size_t r, size_t c, double d) {
        return MatrixSource(SparseGaussianSource{r, c, d});
    };
    auto stacked = [](BaseSource inner, StackMode mode) {
        return MatrixSource(StackedSource{std::move(inner), mode});
    };

    ProblemSpec s1;  // A tall full column rank, B wide full row rank
    s1.a_source = gauss(90, 12);
    s1.b_source = gauss(14, 90);
    s1.seed = 101;
    reg.push_back({"dense_tall", s1});

    ProblemSpec s2;
    s2.a_source = sp(100, 12, 0.20);
    s2.b_source = sp(15, 110, 0.20);
    s2.seed = 102;
    reg.push_back({"sparse_tall", s2});

    ProblemSpec s3;  // A wide full row rank, B tall full column rank
    s3.a_source = gauss(12, 90);
    s3.b_source = gauss(90, 14);
    s3.seed = 103;
    reg.push_back({"dense_wide", s3});

    ProblemSpec s4;
    s4.a_source = sp(12, 100, 0.20);
    s4.b_source = sp(95, 15, 0.20);
    s4.seed = 104;
    reg.push_back({"sparse_wide", s4});

    ProblemSpec s5;  // both factors rank-deficient via stacking
    s5.a_source = stacked(GaussianSource{25, 60}, StackMode::Vertical);
    s5.b_source = stacked(GaussianSource{12, 40}, StackMode::Vertical);
    s5.seed = 105;
    reg.push_back({"dense_deficient", s5});

    ProblemSpec s6;
    s6.a_source = stacked(SparseGaussianSource{20, 50, 0.25}, StackMode::Vertical);
    s6.b_source = stacked(SparseGaussianSource{12, 36, 0.25}, StackMode::Vertical);
    s6.seed = 106;
    reg.push_back({"sparse_deficient", s6});
    return reg;
}

inline std::vector<BenchProblem> materialize_registry(const std::vector<RegistryEntry>& reg) {
    std::vector<BenchProblem> out;
    out.reserve(reg.size());
    for (const auto& e : reg) {
        ProblemInstance inst = generate(e.spec);
        out.push_back({e.id, std::move(inst.A), std::move(inst.B), std::move(inst.C)});
    }
    return out;
}

}  // namespace axb
