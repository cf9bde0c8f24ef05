// bm: command-line front end for the discrete convex-geometry library.
//
// Exit codes: 0 all checks passed, 1 a lemma or property check failed,
// 2 usage or I/O problem.

#include "bm/io.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>

namespace {

using namespace bm;

GridSet read_grid(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::io, "cannot open grid file: " + path);
    return load_grid(in);
}

void write_grid(const std::string& path, const GridSet& g) {
    std::ofstream out(path);
    if (!out) throw Error(Errc::io, "cannot open for writing: " + path);
    save_grid(out, g);
}

ConvexPolytope read_poly(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::io, "cannot open polytope file: " + path);
    return load_poly(in);
}

std::pair<std::int64_t, std::int64_t> parse_weight(const std::string& s) {
    const Rat t = parse_rat(s);
    if (t <= 0 || t >= 1) throw Error(Errc::contract, "weight must lie in (0,1): " + s);
    return {numerator(t).convert_to<std::int64_t>(), denominator(t).convert_to<std::int64_t>()};
}

std::vector<double> parse_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(std::stod(tok));
    if (out.empty()) throw Error(Errc::io, "empty list: " + s);
    return out;
}

int resolve_threads(int cli_threads) {
    if (cli_threads > 0) return cli_threads;
    if (const char* env = std::getenv("BM_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"discrete Brunn-Minkowski geometry toolkit"};
    app.require_subcommand(1);

    std::uint64_t seed = 1;
    int threads = 0;
    bool json = false;
    app.add_option("--seed", seed, "random seed (propagated to subcommands)");
    app.add_option("--threads", threads, "worker threads (or BM_THREADS; default 1)");
    app.add_flag("--json", json, "emit JSON where applicable");

    // --- gen ---
    auto* gen = app.add_subcommand("gen", "generate a scenario pair");
    std::string gen_family = "ball", gen_h = "1/32", gen_ratio = "1", gen_out_a, gen_out_b;
    int gen_dim = 2;
    double gen_del = 0.0, gen_add = 0.0;
    std::uint64_t gen_trial = 0;
    gen->add_option("--family", gen_family, "ball|cube|simplex|random-polytope|two-blocks");
    gen->add_option("--d", gen_dim, "dimension (1..3)")->check(CLI::Range(1, 3));
    gen->add_option("--h", gen_h, "cell size p/q");
    gen->add_option("--ratio", gen_ratio, "homothety ratio for the partner set");
    gen->add_option("--del", gen_del, "deletion fraction");
    gen->add_option("--add", gen_add, "addition fraction");
    gen->add_option("--trial", gen_trial, "trial index within the seed stream");
    gen->add_option("--out-a", gen_out_a, "output grid for A")->required();
    gen->add_option("--out-b", gen_out_b, "output grid for B")->required();

    // --- sum ---
    auto* sum = app.add_subcommand("sum", "Minkowski or combination sum");
    std::string sum_a, sum_b, sum_t, sum_out;
    sum->add_option("--a", sum_a)->required();
    sum->add_option("--b", sum_b)->required();
    sum->add_option("--t", sum_t, "weight p/q for t A + (1-t) B");
    sum->add_option("--out", sum_out)->required();

    // --- symmetrize ---
    auto* sym = app.add_subcommand("symmetrize", "Steiner/Schwarz/natural symmetrization");
    std::string sym_in, sym_mode = "natural", sym_out;
    bool sym_raw = false;
    sym->add_option("--in", sym_in)->required();
    sym->add_option("--mode", sym_mode, "steiner|schwarz|natural");
    sym->add_flag("--raw-parity", sym_raw, "skip the even refinement");
    sym->add_option("--out", sym_out)->required();

    // --- deficit ---
    auto* def = app.add_subcommand("deficit", "Brunn-Minkowski deficit report");
    std::string def_a, def_b, def_t;
    def->add_option("--a", def_a)->required();
    def->add_option("--b", def_b)->required();
    def->add_option("--t", def_t, "weight p/q for the combination form");

    // --- hull ---
    auto* hl = app.add_subcommand("hull", "convex hull of a grid set");
    std::string hull_in, hull_out;
    hl->add_option("--in", hull_in)->required();
    hl->add_option("--out", hull_out)->required();

    // --- rasterize ---
    auto* ras = app.add_subcommand("rasterize", "outer rasterization of a polytope");
    std::string ras_in, ras_h = "1/32", ras_out;
    ras->add_option("--in", ras_in)->required();
    ras->add_option("--h", ras_h, "cell size p/q");
    ras->add_option("--out", ras_out)->required();

    // --- recover ---
    auto* rec = app.add_subcommand("recover", "recover a homothetic convex pair");
    std::string rec_a, rec_b, rec_t = "1/2", rec_mode = "pipeline", rec_sched;
    rec->add_option("--a", rec_a)->required();
    rec->add_option("--b", rec_b)->required();
    rec->add_option("--t", rec_t, "combination weight p/q");
    rec->add_option("--mode", rec_mode, "pipeline|hull");
    rec->add_option("--delta-schedule", rec_sched, "eps=R,rho=R,eta=R (rationals)");

    // --- lemmas ---
    auto* lem = app.add_subcommand("lemmas", "run the lemma verification suite");
    std::string lem_family = "random-polytope", lem_h = "1/16";
    int lem_dim = 2, lem_trials = 50;
    lem->add_option("--family", lem_family);
    lem->add_option("--d", lem_dim)->check(CLI::Range(2, 3));
    lem->add_option("--h", lem_h);
    lem->add_option("--trials", lem_trials);

    // --- sweep ---
    auto* swp = app.add_subcommand("sweep", "deletion-fraction stability sweep (CSV)");
    std::string swp_family = "ball", swp_h = "1/32", swp_fracs = "0,0.01,0.02,0.05,0.1", swp_out;
    int swp_dim = 2, swp_trials = 20;
    bool swp_no_timings = false;
    swp->add_option("--family", swp_family);
    swp->add_option("--d", swp_dim)->check(CLI::Range(1, 3));
    swp->add_option("--h", swp_h);
    swp->add_option("--trials", swp_trials);
    swp->add_option("--fractions", swp_fracs, "comma-separated deletion fractions");
    swp->add_option("--out", swp_out, "output CSV path (default stdout)");
    swp->add_flag("--no-timings", swp_no_timings, "canonical output: zero the timing column");

    // --- rotate ---
    auto* rot = app.add_subcommand("rotate", "simultaneous-rotation sweep (CSV)");
    std::string rot_family = "cube", rot_h = "1/32",
                rot_angles = "0,0.19634954,0.39269908,0.58904862,0.78539816", rot_out;
    int rot_dim = 2;
    double rot_del = 0.0;
    rot->add_option("--family", rot_family, "cube|simplex|random-polytope");
    rot->add_option("--d", rot_dim)->check(CLI::Range(2, 3));
    rot->add_option("--h", rot_h);
    rot->add_option("--del", rot_del, "deletion fraction applied after rotation");
    rot->add_option("--angles", rot_angles, "comma-separated angles in radians");
    rot->add_option("--out", rot_out, "output CSV path (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*gen) {
            ScenarioConfig cfg;
            cfg.seed = seed;
            cfg.dim = gen_dim;
            cfg.h = parse_rat(gen_h);
            cfg.family = parse_family(gen_family);
            cfg.ratio = parse_rat(gen_ratio);
            cfg.delete_fraction = gen_del;
            cfg.add_fraction = gen_add;
            auto [a, b] = generate(cfg, gen_trial);
            write_grid(gen_out_a, a);
            write_grid(gen_out_b, b);
            std::cout << "A: " << a.cell_count() << " cells, measure " << rat_str(a.measure()) << "\n";
            std::cout << "B: " << b.cell_count() << " cells, measure " << rat_str(b.measure()) << "\n";
            return 0;
        }
        if (*sum) {
            const GridSet a = read_grid(sum_a), b = read_grid(sum_b);
            GridSet out(a.dim(), a.cell_size());
            if (sum_t.empty()) {
                out = minkowski_sum(a, b);
            } else {
                const auto [p, q] = parse_weight(sum_t);
                out = combo_sum(a, b, p, q);
            }
            write_grid(sum_out, out);
            std::cout << "sum: " << out.cell_count() << " cells, measure " << rat_str(out.measure())
                      << "\n";
            return 0;
        }
        if (*sym) {
            const GridSet g = read_grid(sym_in);
            SymmetrizationMode mode;
            if (sym_mode == "steiner") mode.kind = SymKind::steiner;
            else if (sym_mode == "schwarz") mode.kind = SymKind::schwarz;
            else if (sym_mode == "natural") mode.kind = SymKind::natural;
            else throw Error(Errc::contract, "unknown mode: " + sym_mode);
            mode.parity = sym_raw ? ParityPolicy::raw : ParityPolicy::even_refined;
            write_grid(sym_out, symmetrize(g, mode));
            return 0;
        }
        if (*def) {
            const GridSet a = read_grid(def_a), b = read_grid(def_b);
            DeficitReport rep;
            if (def_t.empty()) {
                rep = deficit_additive(a, b);
            } else {
                const auto [p, q] = parse_weight(def_t);
                rep = deficit_combo(a, b, p, q);
            }
            if (json) {
                std::cout << deficit_json(rep).dump(2) << "\n";
            } else {
                std::cout << "|A| = " << rat_str(rep.measure_a) << ", |B| = " << rat_str(rep.measure_b)
                          << ", |sum| = " << rat_str(rep.measure_sum) << "\n";
                std::cout << "delta = " << rep.delta << (rep.equality_case ? " (equality case)" : "")
                          << "\n";
            }
            return 0;
        }
        if (*hl) {
            const ConvexPolytope p = hull(read_grid(hull_in));
            std::ofstream out(hull_out);
            if (!out) throw Error(Errc::io, "cannot open for writing: " + hull_out);
            save_poly(out, p);
            std::cout << "hull: " << p.vertices.size() << " vertices, volume " << rat_str(volume(p))
                      << "\n";
            return 0;
        }
        if (*ras) {
            const GridSet g = rasterize(read_poly(ras_in), parse_rat(ras_h));
            write_grid(ras_out, g);
            std::cout << "raster: " << g.cell_count() << " cells, measure " << rat_str(g.measure())
                      << "\n";
            return 0;
        }
        if (*rec) {
            const GridSet a = read_grid(rec_a), b = read_grid(rec_b);
            const auto [p, q] = parse_weight(rec_t);
            PipelineParams params;
            params.t = Rat(Int(p), Int(q));
            if (!rec_sched.empty()) {
                std::stringstream ss(rec_sched);
                std::string tok;
                while (std::getline(ss, tok, ',')) {
                    const auto eq = tok.find('=');
                    if (eq == std::string::npos) throw Error(Errc::io, "bad schedule entry: " + tok);
                    const std::string key = tok.substr(0, eq);
                    const Rat val = parse_rat(tok.substr(eq + 1));
                    if (key == "eps") params.eps = val;
                    else if (key == "rho") params.rho = val;
                    else if (key == "eta") params.eta = val;
                    else throw Error(Errc::io, "unknown schedule key: " + key);
                }
            }
            const RecoverMode mode = rec_mode == "hull" ? RecoverMode::hull_baseline : RecoverMode::pipeline;
            const RecoveryResult res = recover_convex_pair(a, b, mode, params);
            std::cout << recovery_json(res).dump(2) << "\n";
            return 0;
        }
        if (*lem) {
            ScenarioConfig cfg;
            cfg.seed = seed;
            cfg.dim = lem_dim;
            cfg.h = parse_rat(lem_h);
            cfg.family = parse_family(lem_family);
            cfg.trials = lem_trials;
            cfg.threads = resolve_threads(threads);
            const SuiteReport rep = run_lemma_suite(cfg);
            if (json) {
                std::cout << suite_json(rep).dump(2) << "\n";
            } else {
                for (const auto& c : rep.lemmas) {
                    std::cout << (c.fail == 0 ? "PASS " : "FAIL ") << c.name << ": " << c.pass
                              << " pass, " << c.fail << " fail";
                    if (c.pass + c.fail > 0 && std::isfinite(c.worst_margin))
                        std::cout << ", worst margin " << c.worst_margin;
                    if (!c.note.empty()) std::cout << " (" << c.note << ")";
                    std::cout << "\n";
                }
            }
            return rep.ok() ? 0 : 1;
        }
        if (*swp) {
            ScenarioConfig cfg;
            cfg.seed = seed;
            cfg.dim = swp_dim;
            cfg.h = parse_rat(swp_h);
            cfg.family = parse_family(swp_family);
            cfg.trials = swp_trials;
            cfg.threads = resolve_threads(threads);
            const SuiteReport rep = run_delta_sweep(cfg, parse_list(swp_fracs));
            if (swp_out.empty()) {
                save_sweep_csv(std::cout, rep, !swp_no_timings);
            } else {
                std::ofstream out(swp_out);
                if (!out) throw Error(Errc::io, "cannot open for writing: " + swp_out);
                save_sweep_csv(out, rep, !swp_no_timings);
            }
            return 0;
        }
        if (*rot) {
            ScenarioConfig cfg;
            cfg.seed = seed;
            cfg.dim = rot_dim;
            cfg.h = parse_rat(rot_h);
            cfg.family = parse_family(rot_family);
            cfg.delete_fraction = rot_del;
            const SuiteReport rep = run_rotation_sweep(cfg, parse_list(rot_angles));
            if (rot_out.empty()) {
                save_sweep_csv(std::cout, rep);
            } else {
                std::ofstream out(rot_out);
                if (!out) throw Error(Errc::io, "cannot open for writing: " + rot_out);
                save_sweep_csv(out, rep);
            }
            return 0;
        }
    } catch (const bm::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
