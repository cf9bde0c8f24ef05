#pragma once

// Persistence: the BMGRID 1 and BMPOLY 1 text formats, JSON report emission
// and the sweep CSV round trip. Loaders reject malformed input with line
// numbers; writers are canonical so identical data gives identical bytes.

#include "bm/convex.hpp"
#include "bm/recover.hpp"
#include "bm/suite.hpp"
#include "bm/sumset.hpp"

#include <json.hpp>

#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <string>

namespace bm {

namespace detail {

[[noreturn]] inline void parse_fail(std::size_t line, const std::string& msg) {
    throw Error(Errc::io, "line " + std::to_string(line) + ": " + msg);
}

inline std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream iss(s);
    std::string tok;
    while (iss >> tok) out.push_back(tok);
    return out;
}

inline std::string expect_kv(const std::string& line, const std::string& key, std::size_t lineno) {
    if (line.rfind(key + "=", 0) != 0) parse_fail(lineno, "expected '" + key + "=...'");
    return line.substr(key.size() + 1);
}

// Canonical float formatting: shortest round-trip via the JSON library's
// grisu-style printer, so reports are byte-stable across runs.
inline std::string fmt_double(double x) { return nlohmann::json(x).dump(); }

}  // namespace detail

// --- BMGRID 1 ----------------------------------------------------------------

inline void save_grid(std::ostream& os, const GridSet& g) {
    os << "BMGRID 1\n";
    os << "dim=" << g.dim() << "\n";
    os << "h=" << rat_str(g.cell_size()) << "\n";
    os << "origin=";
    for (int k = 0; k < g.dim(); ++k) os << (k ? " " : "") << 0;
    os << "\n";
    os << "bbox=";
    for (int k = 0; k < g.dim(); ++k) {
        if (k) os << " ";
        os << g.box().lo[k] << ".." << (g.box().lo[k] + g.box().ext[k] - 1);
    }
    os << "\n";
    g.for_each_run([&](const CoordVec& base, Coord start, std::int64_t len) {
        if (len == 1) {
            os << "c";
            for (int k = 0; k + 1 < g.dim(); ++k) os << " " << base[k];
            os << " " << start << "\n";
        } else {
            os << "r";
            for (int k = 0; k + 1 < g.dim(); ++k) os << " " << base[k];
            os << " " << start << ".." << (start + len - 1) << "\n";
        }
    });
}

inline GridSet load_grid(std::istream& is) {
    std::string line;
    std::size_t lineno = 0;
    auto next_line = [&]() -> bool {
        while (std::getline(is, line)) {
            ++lineno;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (!line.empty()) return true;
        }
        return false;
    };
    if (!next_line()) throw Error(Errc::io, "empty grid file");
    if (line != "BMGRID 1") detail::parse_fail(lineno, "unsupported header '" + line + "' (expected 'BMGRID 1')");
    if (!next_line()) detail::parse_fail(lineno, "missing dim");
    const int dim = std::stoi(detail::expect_kv(line, "dim", lineno));
    if (dim < 1 || dim > 3) detail::parse_fail(lineno, "dim must be 1, 2 or 3");
    if (!next_line()) detail::parse_fail(lineno, "missing h");
    const Rat h = parse_rat(detail::expect_kv(line, "h", lineno));
    if (h <= 0) detail::parse_fail(lineno, "h must be positive");
    if (!next_line()) detail::parse_fail(lineno, "missing origin");
    const auto origin_tok = detail::split_ws(detail::expect_kv(line, "origin", lineno));
    if (static_cast<int>(origin_tok.size()) != dim) detail::parse_fail(lineno, "origin needs one entry per axis");
    CoordVec origin{0, 0, 0};
    for (int k = 0; k < dim; ++k) origin[k] = static_cast<Coord>(std::stol(origin_tok[static_cast<std::size_t>(k)]));
    if (!next_line()) detail::parse_fail(lineno, "missing bbox");
    (void)detail::expect_kv(line, "bbox", lineno);  // informational; recomputed from cells

    std::vector<CoordVec> cells;
    std::set<std::vector<Coord>> seen;
    auto add_cell = [&](CoordVec c) {
        for (int k = 0; k < dim; ++k) c[k] = checked_coord(std::int64_t{c[k]} + origin[k]);
        std::vector<Coord> key(c.begin(), c.begin() + dim);
        if (!seen.insert(key).second) detail::parse_fail(lineno, "duplicate cell");
        cells.push_back(c);
    };
    while (next_line()) {
        const auto tok = detail::split_ws(line);
        if (tok[0] == "c") {
            if (static_cast<int>(tok.size()) != dim + 1) detail::parse_fail(lineno, "cell line needs dim indices");
            CoordVec c{0, 0, 0};
            for (int k = 0; k < dim; ++k) c[k] = static_cast<Coord>(std::stol(tok[static_cast<std::size_t>(k) + 1]));
            add_cell(c);
        } else if (tok[0] == "r") {
            if (static_cast<int>(tok.size()) != dim + 1) detail::parse_fail(lineno, "run line needs dim-1 indices and a range");
            CoordVec c{0, 0, 0};
            for (int k = 0; k + 1 < dim; ++k) c[k] = static_cast<Coord>(std::stol(tok[static_cast<std::size_t>(k) + 1]));
            const std::string& range = tok[static_cast<std::size_t>(dim)];
            const auto dots = range.find("..");
            if (dots == std::string::npos) detail::parse_fail(lineno, "run range must be lo..hi");
            const long lo = std::stol(range.substr(0, dots));
            const long hi = std::stol(range.substr(dots + 2));
            if (hi < lo) detail::parse_fail(lineno, "run range must satisfy lo <= hi");
            for (long v = lo; v <= hi; ++v) {
                c[dim - 1] = static_cast<Coord>(v);
                add_cell(c);
            }
        } else {
            detail::parse_fail(lineno, "unknown record '" + tok[0] + "'");
        }
    }
    return GridSet::from_cells(dim, h, cells);
}

// --- BMPOLY 1 ----------------------------------------------------------------

inline void save_poly(std::ostream& os, const ConvexPolytope& p) {
    os << "BMPOLY 1\n";
    os << "dim=" << p.dim << "\n";
    for (const auto& v : p.vertices) {
        os << "v";
        for (int k = 0; k < p.dim; ++k) os << " " << rat_str(v[k]);
        os << "\n";
    }
}

inline ConvexPolytope load_poly(std::istream& is) {
    std::string line;
    std::size_t lineno = 0;
    auto next_line = [&]() -> bool {
        while (std::getline(is, line)) {
            ++lineno;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (!line.empty()) return true;
        }
        return false;
    };
    if (!next_line()) throw Error(Errc::io, "empty polytope file");
    if (line != "BMPOLY 1") detail::parse_fail(lineno, "unsupported header '" + line + "' (expected 'BMPOLY 1')");
    if (!next_line()) detail::parse_fail(lineno, "missing dim");
    const int dim = std::stoi(detail::expect_kv(line, "dim", lineno));
    if (dim < 1 || dim > 3) detail::parse_fail(lineno, "dim must be 1, 2 or 3");
    std::vector<RatVec> pts;
    while (next_line()) {
        const auto tok = detail::split_ws(line);
        if (tok[0] != "v" || static_cast<int>(tok.size()) != dim + 1)
            detail::parse_fail(lineno, "expected 'v' with one rational per axis");
        RatVec v{Rat(0), Rat(0), Rat(0)};
        for (int k = 0; k < dim; ++k) v[k] = parse_rat(tok[static_cast<std::size_t>(k) + 1]);
        pts.push_back(v);
    }
    if (pts.empty()) throw Error(Errc::io, "polytope file has no vertices");
    return hull_points(dim, std::move(pts));
}

// --- JSON reports -------------------------------------------------------------

inline nlohmann::ordered_json deficit_json(const DeficitReport& rep) {
    nlohmann::ordered_json j;
    j["dim"] = rep.dim;
    j["measure_a"] = rat_str(rep.measure_a);
    j["measure_b"] = rat_str(rep.measure_b);
    j["measure_sum"] = rat_str(rep.measure_sum);
    if (rep.weight) j["weight"] = rat_str(*rep.weight);
    j["delta"] = rep.delta;
    j["equality_case"] = rep.equality_case;
    return j;
}

inline nlohmann::ordered_json trace_json(const StageTrace& t) {
    nlohmann::ordered_json j;
    j["dim"] = t.dim;
    j["delta"] = t.delta;
    j["r_base"] = rat_str(t.r_base);
    j["r_vert"] = rat_str(t.r_vert);
    j["s_bar"] = t.s_bar;
    j["gap"] = t.gap;
    j["mismatch"] = t.mismatch;
    j["level_warned"] = t.level_warned;
    j["candidates"] = t.candidates;
    j["good_cells"] = t.good_cells;
    j["retained_cells"] = t.retained_cells;
    j["fit_slope"] = {t.fit_slope[0], t.fit_slope[1]};
    j["fit_intercept"] = t.fit_intercept;
    j["fit_v_shift"] = t.fit_v_shift;
    j["fit_max_residual"] = t.fit_max_residual;
    j["skew_shift"] = {t.skew_shift[0], t.skew_shift[1]};
    j["contained_fraction_a"] = t.contained_fraction_a;
    j["contained_fraction_b"] = t.contained_fraction_b;
    j["degraded"] = t.degraded;
    if (t.degraded) j["degraded_reason"] = t.degraded_reason;
    if (t.sub) j["sub"] = trace_json(*t.sub);
    return j;
}

inline nlohmann::ordered_json recovery_json(const RecoveryResult& res) {
    nlohmann::ordered_json j;
    j["mode"] = res.mode == RecoverMode::pipeline ? "pipeline" : "hull";
    j["degraded"] = res.degraded;
    j["alpha"] = rat_str(res.alpha);
    j["beta"] = rat_str(res.beta);
    j["u"] = {rat_str(res.u[0]), rat_str(res.u[1]), rat_str(res.u[2])};
    j["v"] = {rat_str(res.v[0]), rat_str(res.v[1]), rat_str(res.v[2])};
    j["eps_a"] = res.eps_a;
    j["eps_b"] = res.eps_b;
    j["skew_shift"] = {res.skew_shift[0], res.skew_shift[1]};
    j["body_volume"] = rat_str(volume(res.body));
    nlohmann::ordered_json verts = nlohmann::ordered_json::array();
    for (const auto& v : res.body.vertices)
        verts.push_back({rat_str(v[0]), rat_str(v[1]), rat_str(v[2])});
    j["body_vertices"] = verts;
    j["trace"] = trace_json(res.trace);
    return j;
}

inline nlohmann::ordered_json suite_json(const SuiteReport& rep) {
    nlohmann::ordered_json j;
    nlohmann::ordered_json lemmas = nlohmann::ordered_json::array();
    for (const auto& c : rep.lemmas) {
        nlohmann::ordered_json row;
        row["name"] = c.name;
        row["exact"] = c.exact;
        row["pass"] = c.pass;
        row["fail"] = c.fail;
        row["worst_margin"] = c.worst_margin;
        if (!c.note.empty()) row["note"] = c.note;
        lemmas.push_back(row);
    }
    j["lemmas"] = lemmas;
    j["ok"] = rep.ok();
    return j;
}

// --- sweep CSV ------------------------------------------------------------------

inline constexpr const char* kSweepCsvHeader =
    "kind,knob,trial,mode,delta,eps_a,eps_b,gap,mismatch,degraded,drift,millis";

// include_timings=false writes a canonical artifact (timing column zeroed)
// for byte-for-byte determinism comparisons.
inline void save_sweep_csv(std::ostream& os, const SuiteReport& rep, bool include_timings = true) {
    os << kSweepCsvHeader << "\n";
    for (const auto& r : rep.rows) {
        os << r.kind << "," << detail::fmt_double(r.knob) << "," << r.trial << "," << r.mode << ","
           << detail::fmt_double(r.delta) << "," << detail::fmt_double(r.eps_a) << ","
           << detail::fmt_double(r.eps_b) << "," << detail::fmt_double(r.gap) << ","
           << detail::fmt_double(r.mismatch) << "," << (r.degraded ? 1 : 0) << ","
           << detail::fmt_double(r.drift) << ","
           << detail::fmt_double(include_timings ? r.millis : 0.0) << "\n";
    }
}

inline SuiteReport load_sweep_csv(std::istream& is) {
    SuiteReport rep;
    std::string line;
    if (!std::getline(is, line)) throw Error(Errc::io, "empty CSV");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kSweepCsvHeader) throw Error(Errc::io, "unexpected CSV header: " + line);
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (line.back() == '\r') line.pop_back();
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ',')) f.push_back(tok);
        if (f.size() != 12) detail::parse_fail(lineno, "expected 12 CSV fields");
        SweepRow r;
        r.kind = f[0];
        r.knob = std::stod(f[1]);
        r.trial = std::stoll(f[2]);
        r.mode = f[3];
        r.delta = std::stod(f[4]);
        r.eps_a = std::stod(f[5]);
        r.eps_b = std::stod(f[6]);
        r.gap = std::stod(f[7]);
        r.mismatch = std::stod(f[8]);
        r.degraded = f[9] == "1";
        r.drift = std::stod(f[10]);
        r.millis = std::stod(f[11]);
        rep.rows.push_back(std::move(r));
    }
    return rep;
}

}  // namespace bm
