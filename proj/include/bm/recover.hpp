#pragma once

// The stability pipeline: given a near-extremal pair (A, B), recover a
// convex body K, scales alpha, beta and anchors u, v with A ⊆ alpha K + u,
// B ⊆ beta K + v and small per-side excess.
//
// Pipeline stages for d >= 2:
//   normalization (diagonal, bookkeeping-only inside the pipeline)
//   -> level selection over s in [eta, 2 eta]
//   -> recursive recovery of the superlevel regions in dimension d-1
//   -> vertical good set (columns whose 1D combination is near-extremal)
//   -> fiber intervals and robust affine fit of their combined centers
//   -> skew-shift straightening and homothety alignment.
// Every stage failure degrades to the hull baseline and is visible in the
// trace. The d = 1 base case is interval recovery.
//
// Normalization inside the pipeline is virtual: the diagonal map enters all
// level bookkeeping through its two scale factors instead of resampling the
// grids. That keeps stage data exact and makes the conclusions invariant
// under integer skew shifts bit for bit. The standalone normalize_pair
// operation below does resample, for callers that want the mapped sets.

#include "bm/convex.hpp"
#include "bm/sumset.hpp"

#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace bm {

struct PipelineParams {
    Rat t{1, 2};  // combination weight, must be p/q in (0,1)
    Rat eps;      // level offset epsilon(delta), normalized units
    Rat rho;      // gap budget rho(delta)
    Rat eta;      // level band [eta, 2 eta]
    Rat gamma_cap{8};
    int level_scan_steps = 9;
    Rat sigma;  // measured sup level with both superlevel sets nonempty
    Rat ratio_lo{1, 4}, ratio_hi{4};
};

// Concrete schedule eps = delta^{1/2} <= rho = delta^{1/4} <= eta = delta^{1/8},
// floored so that eta^{3/2} dominates the one-cell deficits of exact
// rasterizations, and capped at a third of the fiber supremum so that the
// level band [eta, 2 eta] (plus eps) stays below the top of the sets.
inline PipelineParams default_params(double delta, const Rat& t, const Rat& h_norm,
                                     const Rat& sigma_norm) {
    PipelineParams p;
    p.t = t;
    const double d = std::min(1.0, std::max(delta, 1e-12));
    const double floor_eta = std::pow(8.0 * to_double(h_norm), 2.0 / 3.0);
    const double cap_eta = to_double(sigma_norm) / 3.0;
    double eta = std::max(std::pow(d, 0.125), floor_eta);
    eta = std::min(eta, cap_eta);
    if (eta <= 0) eta = cap_eta > 0 ? cap_eta : to_double(h_norm);
    const double eps = std::min(std::max(std::sqrt(d), to_double(h_norm)), eta / 2.0);
    const double rho = std::min(std::max(std::pow(d, 0.25), eps), eta);
    p.eps = rationalize(eps);
    p.rho = rationalize(rho);
    p.eta = rationalize(eta);
    if (p.eps <= 0) p.eps = Rat(1, 1 << 20);
    if (p.rho < p.eps) p.rho = p.eps;
    if (p.eta < p.rho) p.eta = p.rho;
    return p;
}

struct NormalizationMap {
    Rat r_base{1};  // base coordinates scale by r_base
    Rat r_vert{1};  // vertical coordinate scales by r_vert = r_base^{-(d-1)}
    Rat drift{0};   // |measure after resampling - measure before|
    Rat measure_norm, fiber_sup_norm, proj_norm;  // A-side, normalized units
};

namespace detail {

// Best small-denominator rational near x, denominator at most max_den.
inline Rat simple_rational(double x, std::int64_t max_den) {
    const auto [p, q] = best_rational(x, max_den);
    if (p <= 0) return Rat(1);
    return Rat(Int(p), Int(q));
}

}  // namespace detail

// Chooses r with r^{d-1} |pi(A)| ~= 1 (small-denominator rational) and
// checks the gamma-normalization of the mapped pair. Pure bookkeeping.
inline NormalizationMap plan_normalization(const GridSet& a, const GridSet& b, const Rat& gamma_cap) {
    if (a.dim() < 2) throw Error(Errc::dimension, "plan_normalization: requires dim >= 2");
    if (a.empty() || b.empty()) throw Error(Errc::empty_input, "plan_normalization: empty input");
    const int d = a.dim();
    NormalizationMap m;
    const Rat proj_a = a.project().measure();
    const double r = std::pow(1.0 / to_double(proj_a), 1.0 / static_cast<double>(d - 1));
    m.r_base = detail::simple_rational(r, 64);
    m.r_vert = Rat(1) / rat_pow(m.r_base, d - 1);
    const Rat base_scale = rat_pow(m.r_base, d - 1);
    m.measure_norm = a.measure();  // the map is measure preserving
    m.fiber_sup_norm = a.max_fiber_measure() * m.r_vert;
    m.proj_norm = proj_a * base_scale;
    const Rat gamma_inv = Rat(1) / gamma_cap;
    auto check = [&](const GridSet& g) {
        if (g.measure() < gamma_inv || g.max_fiber_measure() * m.r_vert > gamma_cap ||
            g.project().measure() * base_scale > gamma_cap)
            throw Error(Errc::contract, "normalization: pair violates the gamma cap after the map");
    };
    check(a);
    check(b);
    return m;
}

namespace detail {

// Outer resampling of the diagonal image (x, y) -> (r_b x, r_v y) on the
// same lattice pitch. Each cell box maps to a box; occupied target cells are
// those meeting the image.
inline GridSet resample_diagonal(const GridSet& g, const Rat& r_base, const Rat& r_vert) {
    if (g.empty()) return g;
    const int d = g.dim();
    const Rat& h = g.cell_size();
    Box box;
    for (int k = 0; k < d; ++k) {
        const Rat scale = (k == d - 1) ? r_vert : r_base;
        const Rat lo = Rat(g.box().lo[k]) * scale;
        const Rat hi = Rat(g.box().lo[k] + g.box().ext[k]) * scale;
        box.lo[k] = checked_coord(ifloor(lo));
        box.ext[k] = static_cast<std::int32_t>(iceil(hi) - box.lo[k] + 1);
    }
    GridSet::Builder bld(d, h, box);
    g.for_each_cell([&](const CoordVec& c) {
        std::array<std::pair<Coord, Coord>, kMaxDim> range;
        for (int k = 0; k < d; ++k) {
            const Rat scale = (k == d - 1) ? r_vert : r_base;
            const Rat lo = Rat(c[k]) * scale;
            const Rat hi = Rat(c[k] + 1) * scale;
            // Target cells j with [j, j+1) h meeting [lo, hi) h.
            Coord jlo = checked_coord(ifloor(lo));
            Coord jhi = checked_coord(iceil(hi) - 1);
            if (Rat(jhi) == hi) --jhi;  // half-open upper end
            range[static_cast<std::size_t>(k)] = {jlo, jhi};
        }
        CoordVec t{0, 0, 0};
        std::function<void(int)> emit = [&](int k) {
            if (k == d - 1) {
                bld.set_run(t, range[static_cast<std::size_t>(k)].first,
                            range[static_cast<std::size_t>(k)].second - range[static_cast<std::size_t>(k)].first + 1);
                return;
            }
            for (Coord i = range[static_cast<std::size_t>(k)].first; i <= range[static_cast<std::size_t>(k)].second; ++i) {
                t[k] = i;
                emit(k + 1);
            }
        };
        emit(0);
    });
    return std::move(bld).finish();
}

}  // namespace detail

// Physical normalization: applies the diagonal map by cell-box transport and
// outer resampling at the working pitch, recording the measure drift.
inline std::tuple<GridSet, GridSet, NormalizationMap> normalize_pair(const GridSet& a, const GridSet& b,
                                                                     const Rat& gamma_cap = Rat(8)) {
    NormalizationMap m = plan_normalization(a, b, gamma_cap);
    if (m.r_base == 1) return {a, b, m};
    GridSet na = detail::resample_diagonal(a, m.r_base, m.r_vert);
    GridSet nb = detail::resample_diagonal(b, m.r_base, m.r_vert);
    m.drift = rat_abs(na.measure() - a.measure()) + rat_abs(nb.measure() - b.measure());
    const Rat budget = Rat(2) * Rat(a.boundary_cell_count() + b.boundary_cell_count()) *
                       rat_pow(a.cell_size(), a.dim());
    if (m.drift > budget)
        throw Error(Errc::contract,
                    "normalize_pair: resampling drift " + rat_str(m.drift) + " exceeds budget " +
                        rat_str(budget) + "; refine the grid or adjust the map");
    return {std::move(na), std::move(nb), m};
}

struct IntervalRecovery {
    Rat i_lo, i_hi;  // smallest interval containing U
    Rat j_lo, j_hi;  // smallest interval containing V
    Rat eps;         // |U+V| - |U| - |V|
};

// 1D near-equality recovery: when eps < min(|U|,|V|), the enclosing interval
// of U has length at most |U| + eps (sharp form, checked here on every call).
inline IntervalRecovery interval_recover_1d(const GridSet& u, const GridSet& v) {
    if (u.dim() != 1 || v.dim() != 1) throw Error(Errc::dimension, "interval_recover_1d: dim 1 only");
    if (u.empty() || v.empty()) throw Error(Errc::empty_input, "interval_recover_1d: empty input");
    auto [ru, rv] = common_refine(u, v);
    const Rat sum = minkowski_sum(ru, rv).measure();
    IntervalRecovery out;
    out.eps = sum - ru.measure() - rv.measure();
    if (!(out.eps < std::min(ru.measure(), rv.measure())))
        throw Error(Errc::contract,
                    "interval_recover_1d: deficit " + rat_str(out.eps) +
                        " is not below min(|U|,|V|); interval structure is not guaranteed");
    const Rat& h = ru.cell_size();
    out.i_lo = Rat(ru.box().lo[0]) * h;
    out.i_hi = Rat(ru.box().lo[0] + ru.box().ext[0]) * h;
    out.j_lo = Rat(rv.box().lo[0]) * h;
    out.j_hi = Rat(rv.box().lo[0] + rv.box().ext[0]) * h;
    if (out.i_hi - out.i_lo > ru.measure() + out.eps || out.j_hi - out.j_lo > rv.measure() + out.eps)
        throw Error(Errc::contract, "interval_recover_1d: sharp interval bound violated (counterexample)");
    return out;
}

struct LevelSelection {
    Rat s_bar;  // normalized units
    GridSet region_a, region_b;
    double gap = 0.0;
    double measure_mismatch = 0.0;  // normalized units
    bool mismatch_ok = true;
    bool warned = false;
    Rat sigma;
};

// Deterministic scan of s in [eta, 2 eta]: picks the level minimizing
// |t A(s+eps) + (1-t) B(s)| - |A(s+eps)|^t |B(s)|^{1-t} subject to the
// measure-mismatch constraint <= 2 eps^{1/2}.
inline LevelSelection select_level(const GridSet& a, const GridSet& b, const PipelineParams& params,
                                   const NormalizationMap& nmap) {
    const int d = a.dim();
    if (d < 2) throw Error(Errc::dimension, "select_level: requires dim >= 2");
    const std::int64_t p = numerator(params.t).convert_to<std::int64_t>();
    const std::int64_t q = denominator(params.t).convert_to<std::int64_t>();
    const Rat base_scale = rat_pow(nmap.r_base, d - 1);
    const double mismatch_cap = 2.0 * std::sqrt(to_double(params.eps));

    LevelSelection best;
    bool have_any = false, have_feasible = false;
    const int steps = std::max(2, params.level_scan_steps);
    const Rat sigma_a = a.max_fiber_measure() * nmap.r_vert - params.eps;
    const Rat sigma_b = b.max_fiber_measure() * nmap.r_vert;
    for (int j = 0; j < steps; ++j) {
        const Rat s = params.eta + params.eta * Rat(j, steps - 1);
        const GridSet ra = a.superlevel((s + params.eps) / nmap.r_vert);
        const GridSet rb = b.superlevel(s / nmap.r_vert);
        if (ra.empty() || rb.empty()) continue;
        const Rat ma = ra.measure() * base_scale;
        const Rat mb = rb.measure() * base_scale;
        double gap;
        if (d - 1 == 1) {
            // In one base dimension the geometric mean bound appears in its
            // additive form t|A| + (1-t)|B|, exact.
            const Rat combo = combo_sum(ra, rb, p, q).measure() * base_scale;
            gap = to_double(combo - params.t * ma - (Rat(1) - params.t) * mb);
        } else {
            const Rat combo = combo_sum(ra, rb, p, q).measure() * base_scale;
            gap = to_double(combo) -
                  std::pow(to_double(ma), to_double(params.t)) *
                      std::pow(to_double(mb), 1.0 - to_double(params.t));
        }
        const double mism = std::abs(to_double(ma - mb));
        const bool feasible = mism <= mismatch_cap;
        const bool better = !have_any || (feasible && !have_feasible) ||
                            (feasible == have_feasible && gap < best.gap);
        if (better) {
            best.s_bar = s;
            best.region_a = ra;
            best.region_b = rb;
            best.gap = gap;
            best.measure_mismatch = mism;
            best.mismatch_ok = feasible;
            have_any = true;
            have_feasible = have_feasible || feasible;
        }
    }
    if (!have_any)
        throw Error(Errc::contract,
                    "select_level: no level in [eta, 2 eta] has both superlevel sets nonempty "
                    "(input too thin; the sigma cap is exceeded)");
    best.warned = !best.mismatch_ok;
    best.sigma = std::min(sigma_a, sigma_b);
    return best;
}

struct GoodSet {
    std::vector<CoordVec> cells;    // D: base cells passing the fiber-deficit test
    std::vector<CoordVec> refined;  // D#: retained by the affine fit
    std::int64_t candidate_count = 0;
};

// D = { x in region_a ∩ region_b : |S_x| - t|A_x| - (1-t)|B_x| <= eta^{3/2} },
// with S_x read off the combination sum's refined columns over cell x (the
// minimum over subcolumns, each of which dominates the per-fiber combination).
inline GoodSet vertical_good_set(const GridSet& a, const GridSet& b, const PipelineParams& params,
                                 const LevelSelection& level, const NormalizationMap& nmap) {
    const int d = a.dim();
    const std::int64_t p = numerator(params.t).convert_to<std::int64_t>();
    const std::int64_t q = denominator(params.t).convert_to<std::int64_t>();
    auto [ra, rb] = common_refine(a, b);
    const GridSet s = combo_sum(ra, rb, p, q);
    const Rat& h = ra.cell_size();
    const Rat eta3 = rat_pow(params.eta, 3);

    GoodSet out;
    const GridSet candidates = intersect(level.region_a, level.region_b);
    out.candidate_count = candidates.cell_count();
    candidates.for_each_cell([&](const CoordVec& x) {
        const Rat fa = ra.fiber(x).measure();
        const Rat fb = rb.fiber(x).measure();
        if (fa == 0 || fb == 0) return;
        // Min fiber of S over the q^{d-1} subcolumns of cell x.
        Rat fs;
        bool first = true;
        CoordVec sub{0, 0, 0};
        const int base_dims = d - 1;
        std::array<int, kMaxDim> rep{0, 0, 0};
        while (true) {
            for (int k = 0; k < base_dims; ++k)
                sub[k] = checked_coord(std::int64_t{x[k]} * q + rep[k]);
            const std::int64_t col = s.col_id(sub);
            const Rat val = col >= 0 ? Rat(s.column_popcount(col)) * s.cell_size() : Rat(0);
            if (first || val < fs) fs = val;
            first = false;
            int k = 0;
            for (; k < base_dims; ++k) {
                if (++rep[k] < q) break;
                rep[k] = 0;
            }
            if (k == base_dims) break;
        }
        const Rat deficit = (fs - params.t * fa - (Rat(1) - params.t) * fb) * nmap.r_vert;
        if (deficit < 0)
            throw Error(Errc::contract, "vertical_good_set: negative fiber deficit (internal)");
        if (deficit * deficit <= eta3) out.cells.push_back(x);
    });
    (void)h;
    return out;
}

struct FiberInterval {
    CoordVec x;
    Rat center_a, center_b;  // interval centers (grid units)
    Rat len_a, len_b;        // interval lengths
    Rat zeta;                // t center_a + (1-t) center_b
};

inline std::vector<FiberInterval> fiber_intervals(const GridSet& a, const GridSet& b, const Rat& t,
                                                  const GoodSet& good) {
    std::vector<FiberInterval> out;
    out.reserve(good.cells.size());
    for (const CoordVec& x : good.cells) {
        const GridSet fa = a.fiber(x), fb = b.fiber(x);
        if (fa.empty() || fb.empty()) continue;
        FiberInterval fi;
        fi.x = x;
        const Rat& ha = a.cell_size();
        const Rat& hb = b.cell_size();
        fi.center_a = (Rat(2 * fa.box().lo[0]) + Rat(fa.box().ext[0])) * ha / 2;
        fi.len_a = Rat(fa.box().ext[0]) * ha;
        fi.center_b = (Rat(2 * fb.box().lo[0]) + Rat(fb.box().ext[0])) * hb / 2;
        fi.len_b = Rat(fb.box().ext[0]) * hb;
        fi.zeta = t * fi.center_a + (Rat(1) - t) * fi.center_b;
        out.push_back(std::move(fi));
    }
    return out;
}

struct AffineFit {
    std::array<double, 2> slope{0.0, 0.0};  // d-1 slopes
    double intercept = 0.0;
    double v_shift = 0.0;  // median of center_b - center_a over retained
    double max_retained_residual = 0.0;
    std::vector<CoordVec> retained;
};

// Two-pass robust least squares of zeta(x) against the base cell centers:
// fit, trim residuals above the 90th percentile, refit.
inline AffineFit affine_center_fit(const std::vector<FiberInterval>& fibers, const Rat& h, int base_dims) {
    const std::size_t n = fibers.size();
    if (n <= static_cast<std::size_t>(base_dims + 1))
        throw Error(Errc::contract, "affine_center_fit: not enough good columns to determine an affine map");
    const int vars = base_dims + 1;

    std::vector<std::array<double, 3>> xs(n);
    std::vector<double> ys(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (int k = 0; k < base_dims; ++k)
            xs[i][static_cast<std::size_t>(k)] = (static_cast<double>(fibers[i].x[k]) + 0.5) * to_double(h);
        xs[i][static_cast<std::size_t>(base_dims)] = 1.0;
        ys[i] = to_double(fibers[i].zeta);
    }

    auto solve = [&](const std::vector<std::size_t>& idx) {
        double m[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
        double rhs[3] = {0, 0, 0};
        for (const std::size_t i : idx) {
            for (int r = 0; r < vars; ++r) {
                for (int c = 0; c < vars; ++c)
                    m[r][c] += xs[i][static_cast<std::size_t>(r)] * xs[i][static_cast<std::size_t>(c)];
                rhs[r] += xs[i][static_cast<std::size_t>(r)] * ys[i];
            }
        }
        // Gaussian elimination with partial pivoting on the small system.
        std::array<double, 3> sol{0, 0, 0};
        int perm[3] = {0, 1, 2};
        for (int col = 0; col < vars; ++col) {
            int piv = col;
            for (int r = col + 1; r < vars; ++r)
                if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
            if (std::abs(m[piv][col]) < 1e-12)
                throw Error(Errc::degenerate, "affine_center_fit: degenerate column geometry");
            std::swap(m[col], m[piv]);
            std::swap(rhs[col], rhs[piv]);
            std::swap(perm[col], perm[piv]);
            for (int r = col + 1; r < vars; ++r) {
                const double f = m[r][col] / m[col][col];
                for (int c = col; c < vars; ++c) m[r][c] -= f * m[col][c];
                rhs[r] -= f * rhs[col];
            }
        }
        for (int r = vars - 1; r >= 0; --r) {
            double acc = rhs[r];
            for (int c = r + 1; c < vars; ++c) acc -= m[r][c] * sol[static_cast<std::size_t>(c)];
            sol[static_cast<std::size_t>(r)] = acc / m[r][r];
        }
        (void)perm;
        return sol;
    };

    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    const std::array<double, 3> first = solve(all);

    std::vector<double> resid(n);
    for (std::size_t i = 0; i < n; ++i) {
        double pred = 0;
        for (int k = 0; k < vars; ++k) pred += first[static_cast<std::size_t>(k)] * xs[i][static_cast<std::size_t>(k)];
        resid[i] = std::abs(ys[i] - pred);
    }
    std::vector<double> sorted = resid;
    std::sort(sorted.begin(), sorted.end());
    const double cutoff = sorted[static_cast<std::size_t>(0.9 * (static_cast<double>(n) - 1.0))];
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < n; ++i)
        if (resid[i] <= cutoff) keep.push_back(i);

    const std::array<double, 3> final_sol = solve(keep);
    AffineFit fit;
    for (int k = 0; k < base_dims; ++k) fit.slope[static_cast<std::size_t>(k)] = final_sol[static_cast<std::size_t>(k)];
    fit.intercept = final_sol[static_cast<std::size_t>(base_dims)];
    std::vector<double> shifts;
    shifts.reserve(keep.size());
    for (const std::size_t i : keep) {
        shifts.push_back(to_double(fibers[i].center_b - fibers[i].center_a));
        double pred = 0;
        for (int k = 0; k < vars; ++k) pred += final_sol[static_cast<std::size_t>(k)] * xs[i][static_cast<std::size_t>(k)];
        fit.max_retained_residual = std::max(fit.max_retained_residual, std::abs(ys[i] - pred));
        fit.retained.push_back(fibers[i].x);
    }
    std::sort(shifts.begin(), shifts.end());
    fit.v_shift = shifts[shifts.size() / 2];
    return fit;
}

enum class RecoverMode { pipeline, hull_baseline };

struct StageTrace {
    int dim = 0;
    double delta = 0.0;
    Rat r_base{1}, r_vert{1};
    double s_bar = 0.0, gap = 0.0, mismatch = 0.0;
    bool level_warned = false;
    std::int64_t candidates = 0, good_cells = 0, retained_cells = 0;
    std::array<double, 2> fit_slope{0.0, 0.0};
    double fit_intercept = 0.0, fit_v_shift = 0.0, fit_max_residual = 0.0;
    bool degraded = false;
    std::string degraded_reason;
    std::array<Coord, kMaxDim - 1> skew_shift{0, 0};
    double contained_fraction_a = 1.0, contained_fraction_b = 1.0;
    std::shared_ptr<StageTrace> sub;
};

struct RecoveryResult {
    ConvexPolytope body;
    Rat alpha, beta;
    RatVec u{Rat(0), Rat(0), Rat(0)}, v{Rat(0), Rat(0), Rat(0)};
    double eps_a = 0.0, eps_b = 0.0;
    std::array<Coord, kMaxDim - 1> skew_shift{0, 0};  // straightening applied to both sets
    RecoverMode mode = RecoverMode::hull_baseline;
    bool degraded = false;
    StageTrace trace;
};

namespace detail {

// Measure of the cells of g lying entirely inside alpha K + u, column by
// column: each face plane bounds the vertical index range linearly.
inline Rat inside_measure(const GridSet& g, const ConvexPolytope& k, const Rat& alpha, const RatVec& u) {
    const int d = g.dim();
    const Rat& h = g.cell_size();

    // Half spaces of alpha K + u: n.(x - u) <= alpha off.
    struct HS {
        RatVec n;
        Rat off;
    };
    std::vector<HS> hs;
    if (d == 1) {
        hs.push_back({{Rat(1), Rat(0), Rat(0)}, k.vertices.back()[0] * alpha + u[0]});
        hs.push_back({{Rat(-1), Rat(0), Rat(0)}, -(k.vertices.front()[0] * alpha + u[0])});
    } else if (d == 2) {
        const auto& v = k.vertices;
        for (std::size_t i = 0; i < v.size(); ++i) {
            const RatVec e = rv_sub(v[(i + 1) % v.size()], v[i]);
            const RatVec n{e[1], -e[0], Rat(0)};  // outward for a CCW cycle
            hs.push_back({n, rv_dot(n, v[i]) * alpha + n[0] * u[0] + n[1] * u[1]});
        }
    } else {
        for (const auto& f : k.faces)
            hs.push_back({f.plane.n, f.plane.off * alpha + rv_dot(f.plane.n, u)});
    }

    Rat total = 0;
    for (std::int64_t c = 0; c < g.columns(); ++c) {
        if (g.column_popcount(c) == 0) continue;
        const CoordVec base = g.col_base(c);
        // Feasible vertical range for whole cells: for each half space,
        // max over the base corners of n_base . x + max(n_d z, n_d (z+h)) <= off.
        bool empty = false;
        Rat zlo_r, zhi_r;  // allowed z in grid units (cell index bounds)
        bool zlo_set = false, zhi_set = false;
        for (const auto& f : hs) {
            Rat base_max;
            bool first = true;
            const int base_dims = d - 1;
            for (int mask = 0; mask < (1 << base_dims); ++mask) {
                Rat val = 0;
                for (int kk = 0; kk < base_dims; ++kk)
                    val += f.n[kk] * Rat(base[kk] + ((mask >> kk) & 1)) * h;
                if (first || val > base_max) base_max = val;
                first = false;
            }
            const Rat& nz = f.n[d - 1];
            if (nz == 0) {
                if (base_max > f.off) {
                    empty = true;
                    break;
                }
                continue;
            }
            // nz * z * h <= off - base_max for both cell ends.
            const Rat bound = (f.off - base_max) / (nz * h);
            if (nz > 0) {
                const Rat zmax = bound - 1;  // z+1 <= bound
                if (!zhi_set || zmax < zhi_r) zhi_r = zmax;
                zhi_set = true;
            } else {
                // nz < 0: z >= bound
                if (!zlo_set || bound > zlo_r) zlo_r = bound;
                zlo_set = true;
            }
        }
        if (empty) continue;
        const Coord zlo = zlo_set ? checked_coord(iceil(zlo_r)) : g.vert_lo();
        const Coord zhi = zhi_set ? checked_coord(ifloor(zhi_r)) : g.vert_lo() + g.vert_ext() - 1;
        if (zhi < zlo) continue;
        // Count occupied cells of the column within [zlo, zhi].
        const std::uint64_t* w = g.col_words(c);
        for (Coord z = std::max(zlo, g.vert_lo());
             z <= std::min<Coord>(zhi, g.vert_lo() + g.vert_ext() - 1); ++z) {
            const std::int64_t v = z - g.vert_lo();
            if ((w[v >> 6] >> (v & 63)) & 1) total += 1;
        }
    }
    return total * rat_pow(h, d);
}

inline RecoveryResult finish_with_bodies(const GridSet& a, const GridSet& b, const ConvexPolytope& body_a,
                                         const ConvexPolytope& body_b, RecoverMode mode) {
    const HomothetyFit fit = homothety_align(body_a, body_b);
    RecoveryResult res;
    res.body = fit.body;
    res.alpha = fit.alpha;
    res.beta = fit.beta;
    res.u = fit.u;
    res.v = fit.v;
    res.mode = mode;
    const Rat max_measure = std::max(a.measure(), b.measure());
    const Rat inside_a = inside_measure(a, res.body, res.alpha, res.u);
    const Rat inside_b = inside_measure(b, res.body, res.beta, res.v);
    res.eps_a = to_double((rat_pow(res.alpha, a.dim()) * volume(res.body) - inside_a) / max_measure);
    res.eps_b = to_double((rat_pow(res.beta, b.dim()) * volume(res.body) - inside_b) / max_measure);
    res.trace.contained_fraction_a = to_double(inside_a / a.measure());
    res.trace.contained_fraction_b = to_double(inside_b / b.measure());
    return res;
}

}  // namespace detail

inline RecoveryResult recover_convex_pair(const GridSet& a, const GridSet& b,
                                          RecoverMode mode = RecoverMode::pipeline,
                                          std::optional<PipelineParams> params = std::nullopt);

namespace detail {

inline RecoveryResult hull_baseline(const GridSet& a, const GridSet& b) {
    RecoveryResult res = finish_with_bodies(a, b, hull(a), hull(b), RecoverMode::hull_baseline);
    return res;
}

inline RecoveryResult pipeline_recover(const GridSet& a_in, const GridSet& b_in,
                                       std::optional<PipelineParams> params_in) {
    // Stage bookkeeping (region intersections, per-column combinations)
    // wants both operands on one lattice, and the region intersection wants
    // the pair translation-aligned; the theorem allows independent lattice
    // translations, which are restored in the reported anchors.
    {
        const Rat ratio = a_in.measure() / b_in.measure();
        const Rat lo = params_in ? params_in->ratio_lo : Rat(1, 4);
        const Rat hi = params_in ? params_in->ratio_hi : Rat(4);
        if (ratio < lo || ratio > hi)
            throw Error(Errc::contract, "recover_convex_pair: measure ratio outside the configured range");
    }
    auto [a0, b0] = common_refine(a_in, b_in);

    // The structural stages assume a near-unit pair, so bring B close to
    // A's measure with a small-denominator rational homothety, which is
    // exact on a refined lattice. The reported beta undoes it.
    Rat pre_scale_b = 1;
    {
        const int dd = a0.dim();
        const double s = root_d(a0.measure(), dd) / root_d(b0.measure(), dd);
        if (s < 0.8 || s > 1.25) {
            const auto [sp, sq] = detail::best_rational(s, 6);
            const std::int64_t g = boost::multiprecision::gcd(Int(sp), Int(sq)).convert_to<std::int64_t>();
            const std::int64_t p = sp / g, q = sq / g;
            if (p >= 1 && q >= 1 && p != q && p <= 8 && q <= 8) {
                pre_scale_b = Rat(Int(p), Int(q));
                const Rat fine = a0.cell_size() / q;
                a0 = q == 1 ? a0 : a0.refine(static_cast<int>(q));
                b0 = b0.scale_indices(static_cast<int>(p), fine);
            }
        }
    }

    auto center_of = [](const GridSet& g) {
        CoordVec c{0, 0, 0};
        for (int k = 0; k < g.dim(); ++k) c[k] = g.box().lo[k] + g.box().ext[k] / 2;
        return c;
    };
    const CoordVec ca_shift = center_of(a0), cb_shift = center_of(b0);
    const GridSet a = translate(a0, CoordVec{static_cast<Coord>(-ca_shift[0]), static_cast<Coord>(-ca_shift[1]),
                                             static_cast<Coord>(-ca_shift[2])});
    const GridSet b = translate(b0, CoordVec{static_cast<Coord>(-cb_shift[0]), static_cast<Coord>(-cb_shift[1]),
                                             static_cast<Coord>(-cb_shift[2])});
    const int d = a.dim();
    StageTrace trace;
    trace.dim = d;
    const double delta = deficit_additive(a, b).delta;
    trace.delta = delta;

    if (d == 1) {
        // Base case: interval recovery, falling back to plain hulls when the
        // deficit precondition fails.
        RecoveryResult res;
        try {
            (void)interval_recover_1d(a, b);
        } catch (const Error& e) {
            if (e.code() == Errc::capacity || e.code() == Errc::io) throw;
            trace.degraded = true;
            trace.degraded_reason = e.what();
        }
        res = finish_with_bodies(a, b, hull(a), hull(b), RecoverMode::pipeline);
        res.degraded = trace.degraded;
        const auto keep_contained = res.trace;
        res.trace = trace;
        res.trace.contained_fraction_a = keep_contained.contained_fraction_a;
        res.trace.contained_fraction_b = keep_contained.contained_fraction_b;
        return res;
    }

    NormalizationMap nmap;
    LevelSelection level;
    GoodSet good;
    AffineFit fit;
    try {
        nmap = plan_normalization(a, b, params_in ? params_in->gamma_cap : Rat(8));
        trace.r_base = nmap.r_base;
        trace.r_vert = nmap.r_vert;
        const Rat h_norm = a.cell_size() * nmap.r_vert;
        const Rat sigma_norm = std::min(a.max_fiber_measure(), b.max_fiber_measure()) * nmap.r_vert;
        PipelineParams params = params_in ? *params_in : default_params(delta, Rat(1, 2), h_norm, sigma_norm);
        if (params_in && params_in->eps == 0) {
            // Caller supplied weights but no schedule: derive it.
            PipelineParams derived = default_params(delta, params_in->t, h_norm, sigma_norm);
            derived.gamma_cap = params_in->gamma_cap;
            derived.level_scan_steps = params_in->level_scan_steps;
            derived.ratio_lo = params_in->ratio_lo;
            derived.ratio_hi = params_in->ratio_hi;
            params = derived;
        }
        level = select_level(a, b, params, nmap);
        trace.s_bar = to_double(level.s_bar);
        trace.gap = level.gap;
        trace.mismatch = level.measure_mismatch;
        trace.level_warned = level.warned;

        // Recursive recovery of the region pair in dimension d-1.
        try {
            RecoveryResult sub = recover_convex_pair(level.region_a, level.region_b, RecoverMode::pipeline);
            trace.sub = std::make_shared<StageTrace>(sub.trace);
        } catch (const Error& e) {
            if (e.code() == Errc::capacity || e.code() == Errc::io) throw;
            auto subtrace = std::make_shared<StageTrace>();
            subtrace->dim = d - 1;
            subtrace->degraded = true;
            subtrace->degraded_reason = e.what();
            trace.sub = subtrace;
        }

        good = vertical_good_set(a, b, params, level, nmap);
        trace.candidates = good.candidate_count;
        trace.good_cells = static_cast<std::int64_t>(good.cells.size());

        const std::vector<FiberInterval> fibers = fiber_intervals(a, b, params.t, good);
        fit = affine_center_fit(fibers, a.cell_size(), d - 1);
        good.refined = fit.retained;
        trace.retained_cells = static_cast<std::int64_t>(fit.retained.size());
        trace.fit_slope = fit.slope;
        trace.fit_intercept = fit.intercept;
        trace.fit_v_shift = fit.v_shift;
        trace.fit_max_residual = fit.max_retained_residual;

        // Straighten by the integer part of the fitted skew shift. The
        // discrete shear is grid-exact and measure preserving, and rounding
        // commutes with integer slope offsets: shearing both inputs by w
        // shifts the fitted slope by exactly w, so the straightened frame is
        // bit-identical either way. The residual sub-integer tilt stays in
        // the body. Results are reported in the straightened frame; the
        // trace records the applied shift.
        std::array<Coord, kMaxDim - 1> skew{0, 0};
        bool nonzero_skew = false;
        for (int k = 0; k + 1 < d; ++k) {
            skew[static_cast<std::size_t>(k)] =
                checked_coord(-std::llround(fit.slope[static_cast<std::size_t>(k)]));
            nonzero_skew = nonzero_skew || skew[static_cast<std::size_t>(k)] != 0;
        }
        const GridSet astr = nonzero_skew ? a.shear(skew) : a;
        const GridSet bstr = nonzero_skew ? b.shear(skew) : b;
        trace.skew_shift = skew;

        std::vector<RatVec> pa, pb;
        const Rat& h = a.cell_size();
        std::map<std::array<Coord, 2>, const FiberInterval*> by_cell;
        for (const auto& fi : fibers) by_cell[{fi.x[0], fi.x[1]}] = &fi;
        for (const CoordVec& x : good.refined) {
            const FiberInterval* fi = by_cell.at({x[0], x[1]});
            // Vertical shift of this column under the discrete shear.
            Rat shift = 0;
            for (int k = 0; k + 1 < d; ++k) shift += Rat(skew[static_cast<std::size_t>(k)]) * Rat(x[k]) * h;
            for (int mask = 0; mask < (1 << (d - 1)); ++mask) {
                RatVec corner{Rat(0), Rat(0), Rat(0)};
                for (int k = 0; k + 1 < d; ++k) corner[k] = Rat(x[k] + ((mask >> k) & 1)) * h;
                corner[d - 1] = fi->center_a + shift - fi->len_a / 2;
                pa.push_back(corner);
                corner[d - 1] = fi->center_a + shift + fi->len_a / 2;
                pa.push_back(corner);
                corner[d - 1] = fi->center_b + shift - fi->len_b / 2;
                pb.push_back(corner);
                corner[d - 1] = fi->center_b + shift + fi->len_b / 2;
                pb.push_back(corner);
            }
        }
        const ConvexPolytope ka = hull_points(d, std::move(pa));
        const ConvexPolytope kb = hull_points(d, std::move(pb));
        if (ka.degenerate || kb.degenerate)
            throw Error(Errc::degenerate, "pipeline: straightened fiber hull is degenerate");

        const HomothetyFit hfit = homothety_align(ka, kb);
        RecoveryResult res;
        res.mode = RecoverMode::pipeline;
        res.body = hfit.body;
        res.alpha = hfit.alpha;
        res.beta = hfit.beta;
        // Restore the recentering translations: with S the applied skew
        // shift, S(A - c) ⊆ alpha K + u gives S(A) ⊆ alpha K + u + S(c).
        auto restore = [&](RatVec anchor, const CoordVec& c) {
            const Rat& hh = a.cell_size();
            for (int k = 0; k + 1 < d; ++k) anchor[k] += Rat(c[k]) * hh;
            Rat vert = Rat(c[d - 1]) * hh;
            for (int k = 0; k + 1 < d; ++k) vert += Rat(skew[static_cast<std::size_t>(k)]) * Rat(c[k]) * hh;
            anchor[d - 1] += vert;
            return anchor;
        };
        res.skew_shift = skew;
        const Rat max_measure = std::max(a_in.measure(), b_in.measure());
        const Rat inside_a = inside_measure(astr, res.body, res.alpha, hfit.u);
        const Rat inside_b = inside_measure(bstr, res.body, res.beta, hfit.v);
        res.u = restore(hfit.u, ca_shift);
        res.v = restore(hfit.v, cb_shift);
        const Rat excess_a = rat_pow(res.alpha, d) * volume(res.body) - inside_a;
        const Rat excess_b =
            (rat_pow(res.beta, d) * volume(res.body) - inside_b) / rat_pow(pre_scale_b, d);
        res.beta = res.beta / pre_scale_b;
        res.eps_a = to_double(excess_a / max_measure);
        res.eps_b = to_double(excess_b / max_measure);
        trace.contained_fraction_a = to_double(inside_a / a.measure());
        trace.contained_fraction_b = to_double(inside_b / b.measure());
        res.trace = trace;
        return res;
    } catch (const Error& e) {
        if (e.code() == Errc::capacity || e.code() == Errc::io || e.code() == Errc::dimension) throw;
        RecoveryResult res = hull_baseline(a, b);
        const double ca = res.trace.contained_fraction_a, cb = res.trace.contained_fraction_b;
        res.mode = RecoverMode::pipeline;
        res.degraded = true;
        trace.degraded = true;
        trace.degraded_reason = e.what();
        trace.contained_fraction_a = ca;
        trace.contained_fraction_b = cb;
        res.trace = trace;
        return res;
    }
}

}  // namespace detail

inline RecoveryResult recover_convex_pair(const GridSet& a, const GridSet& b, RecoverMode mode,
                                          std::optional<PipelineParams> params) {
    if (a.dim() != b.dim()) throw Error(Errc::dimension, "recover_convex_pair: dimension mismatch");
    if (a.empty() || b.empty())
        throw Error(Errc::empty_input, "recover_convex_pair: both sets must have positive measure");
    if (mode == RecoverMode::hull_baseline) {
        RecoveryResult res = detail::hull_baseline(a, b);
        res.trace.dim = a.dim();
        res.trace.delta = deficit_additive(a, b).delta;
        return res;
    }
    return detail::pipeline_recover(a, b, params);
}

}  // namespace bm
