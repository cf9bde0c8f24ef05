#pragma once

// Exact Minkowski sums and rational-weight combination sums on grid sets,
// plus deficit reports for |A+B|^{1/d} >= |A|^{1/d} + |B|^{1/d}.
//
// With half-open cells the pointwise sumset of two cell unions is again a
// cell union on the common lattice: cell(i) + cell(j) covers exactly the
// 2^d block of cells i + j + {0,1}^d. So the occupied index set of A + B is
// (I_A ⊕ I_B) ⊕ {0,1}^d, computed here as word-parallel shifted unions
// driven by the operand with fewer vertical runs.

#include "bm/gridset.hpp"

#include <cstring>
#include <map>
#include <optional>

namespace bm {

inline constexpr double kRootTol = 1e-12;

namespace detail {

// OR-shift a whole word buffer left by `bits` (in place, buffer n words).
inline void shl_or_inplace(std::uint64_t* buf, std::int64_t n, std::int64_t bits) {
    const std::int64_t ws = bits >> 6, bs = bits & 63;
    for (std::int64_t i = n - 1; i >= 0; --i) {
        std::uint64_t v = 0;
        if (i - ws >= 0) v = buf[i - ws] << bs;
        if (bs != 0 && i - ws - 1 >= 0) v |= buf[i - ws - 1] >> (64 - bs);
        buf[i] |= v;
    }
}

// Column array sharing a grid's base geometry but with its own vertical span.
struct ColumnStack {
    const GridSet* base_geom;
    Coord vlo;
    std::int64_t vext;
    std::int64_t wpc;
    std::vector<std::uint64_t> w;

    ColumnStack(const GridSet& g, std::int64_t extra)
        : base_geom(&g), vlo(g.vert_lo()), vext(g.vert_ext() + extra), wpc((vext + 63) / 64) {
        w.assign(static_cast<std::size_t>(g.columns() * wpc), 0);
        for (std::int64_t c = 0; c < g.columns(); ++c)
            std::memcpy(w.data() + c * wpc, g.col_words(c), static_cast<std::size_t>(g.words_per_col()) * 8);
    }

    // Vertical dilation by a run of length len: bits |= bits << t, doubling.
    void smear(std::int64_t len) {
        for (std::int64_t c = 0; c < base_geom->columns(); ++c) {
            std::uint64_t* col = w.data() + c * wpc;
            std::int64_t remaining = len - 1, step = 1;
            while (remaining > 0) {
                const std::int64_t t = std::min(step, remaining);
                shl_or_inplace(col, wpc, t);
                remaining -= t;
                step *= 2;
            }
        }
    }
};

}  // namespace detail

// Exact voxel Minkowski sum. A sumset is empty if either summand is empty;
// `was_empty` reports that the convention fired.
inline GridSet minkowski_sum(const GridSet& a_in, const GridSet& b_in, bool* was_empty = nullptr) {
    if (a_in.dim() != b_in.dim()) throw Error(Errc::dimension, "minkowski_sum: dimension mismatch");
    if (was_empty) *was_empty = a_in.empty() || b_in.empty();
    if (a_in.empty() || b_in.empty()) return GridSet(a_in.dim(), a_in.cell_size());
    auto [a, b] = common_refine(a_in, b_in);
    const int d = a.dim();

    const GridSet& driver = a.run_count() <= b.run_count() ? a : b;
    const GridSet& other = a.run_count() <= b.run_count() ? b : a;

    // Box of the index sum dilated by {0,1}^d: ext grows by the other ext,
    // plus one per axis for the dilation.
    Box box;
    for (int k = 0; k < d; ++k) {
        box.lo[k] = checked_coord(std::int64_t{driver.box().lo[k]} + other.box().lo[k]);
        box.ext[k] = static_cast<std::int32_t>(std::int64_t{driver.box().ext[k]} + other.box().ext[k]);
    }
    GridSet::Builder bld(d, a.cell_size(), box);

    std::map<std::int64_t, detail::ColumnStack> smear_cache;
    auto smeared = [&](std::int64_t len) -> const detail::ColumnStack& {
        auto it = smear_cache.find(len);
        if (it == smear_cache.end()) {
            detail::ColumnStack cs(other, len - 1);
            cs.smear(len);
            it = smear_cache.emplace(len, std::move(cs)).first;
        }
        return it->second;
    };

    driver.for_each_run([&](const CoordVec& dbase, Coord dstart, std::int64_t dlen) {
        const detail::ColumnStack& cs = smeared(dlen);
        for (std::int64_t c = 0; c < other.columns(); ++c) {
            const CoordVec obase = other.col_base(c);
            CoordVec tbase{0, 0, 0};
            for (int k = 0; k + 1 < d; ++k) tbase[k] = checked_coord(std::int64_t{obase[k]} + dbase[k]);
            const std::int64_t dst_col = bld.col_id(tbase);
            std::uint64_t* dst = bld.w.data() + dst_col * bld.wpc;
            // Absolute vertical position of smear bit 0 in the destination.
            const std::int64_t off = std::int64_t{cs.vlo} + dstart - box.lo[d - 1];
            const std::int64_t ws = off >> 6, bs = off & 63;
            const std::uint64_t* src = cs.w.data() + c * cs.wpc;
            for (std::int64_t i = 0; i < cs.wpc; ++i) {
                if (src[i] == 0) continue;
                dst[ws + i] |= src[i] << bs;
                if (bs != 0) {
                    // High spill is zero whenever it would land out of range.
                    const std::uint64_t hi = src[i] >> (64 - bs);
                    if (hi != 0) dst[ws + i + 1] |= hi;
                }
            }
        }
    });

    // Dilation by {0,1}^d, one axis at a time. Vertical: in-column bit shift.
    for (std::int64_t c = 0; c < bld.cols; ++c)
        detail::shl_or_inplace(bld.w.data() + c * bld.wpc, bld.wpc, 1);
    // Base axes: OR each column into its +1 neighbour, descending scan.
    for (int axis = 0; axis + 1 < d; ++axis) {
        std::int64_t stride = 1;
        for (int k = axis + 1; k + 1 < d; ++k) stride *= box.ext[k];
        for (std::int64_t c = bld.cols - 1; c >= 0; --c) {
            const std::int64_t coord = (c / stride) % box.ext[axis];
            if (coord == 0) continue;
            const std::uint64_t* src = bld.w.data() + (c - stride) * bld.wpc;
            std::uint64_t* dst = bld.w.data() + c * bld.wpc;
            for (std::int64_t i = 0; i < bld.wpc; ++i) dst[i] |= src[i];
        }
    }
    return std::move(bld).finish();
}

inline constexpr int kComboDenominatorCap = 16;

// Exact tA + (1-t)B for t = p/q in (0,1): both operands move to the lattice
// of pitch h/q, A-indices fill p-blocks and B-indices (q-p)-blocks, and the
// block sets add like any other voxel sets. Memory grows like q^d.
inline GridSet combo_sum(const GridSet& a_in, const GridSet& b_in, std::int64_t p, std::int64_t q,
                         bool* was_empty = nullptr) {
    if (a_in.dim() != b_in.dim()) throw Error(Errc::dimension, "combo_sum: dimension mismatch");
    if (p <= 0 || q <= 0 || p >= q) throw Error(Errc::contract, "combo_sum: weight must satisfy 0 < p/q < 1");
    if (gcd(Int(p), Int(q)) != 1) throw Error(Errc::contract, "combo_sum: weight p/q must be in lowest terms");
    if (q > kComboDenominatorCap)
        throw Error(Errc::capacity,
                    "combo_sum: weight denominator above cap " + std::to_string(kComboDenominatorCap) +
                        " (memory grows like q^d)");
    if (was_empty) *was_empty = a_in.empty() || b_in.empty();
    if (a_in.empty() || b_in.empty()) return GridSet(a_in.dim(), a_in.cell_size() / q);
    auto [a, b] = common_refine(a_in, b_in);
    const Rat fine = a.cell_size() / q;
    const GridSet sa = a.scale_indices(static_cast<int>(p), fine);
    const GridSet sb = b.scale_indices(static_cast<int>(q - p), fine);
    return minkowski_sum(sa, sb);
}

struct DeficitReport {
    int dim = 0;
    Rat measure_a;
    Rat measure_b;
    Rat measure_sum;
    std::optional<Rat> weight;  // set for the combination form
    double delta = 0.0;
    bool equality_case = false;
};

namespace detail {
inline void require_nonempty_pair(const GridSet& a, const GridSet& b, const char* op) {
    if (a.empty() || b.empty())
        throw Error(Errc::empty_input,
                    std::string(op) +
                        ": a sumset is empty when either summand is empty, and the "
                        "Brunn-Minkowski inequality does not hold with an empty summand; "
                        "both operands must be nonempty");
}

// Best rational approximation with denominator <= max_den (Stern-Brocot walk).
inline std::pair<std::int64_t, std::int64_t> best_rational(double x, std::int64_t max_den) {
    if (x <= 0) return {0, 1};
    std::int64_t pl = 0, ql = 1, pr = 1, qr = 0;  // [0/1, 1/0)
    std::int64_t pm = 1, qm = 1;
    double best_err = std::abs(x - 1.0);
    std::int64_t bp = 1, bq = 1;
    for (int iter = 0; iter < 256; ++iter) {
        pm = pl + pr;
        qm = ql + qr;
        if (qm > max_den) break;
        const double v = static_cast<double>(pm) / static_cast<double>(qm);
        if (std::abs(x - v) < best_err) {
            best_err = std::abs(x - v);
            bp = pm;
            bq = qm;
        }
        if (v < x) {
            pl = pm;
            ql = qm;
        } else if (v > x) {
            pr = pm;
            qr = qm;
        } else {
            break;
        }
    }
    return {bp, bq};
}
}  // namespace detail

// delta = (|A+B|^{1/d} - |A|^{1/d} - |B|^{1/d}) / max(|A|,|B|)^{1/d}.
inline DeficitReport deficit_additive(const GridSet& a, const GridSet& b) {
    detail::require_nonempty_pair(a, b, "deficit_additive");
    const GridSet s = minkowski_sum(a, b);
    DeficitReport rep;
    rep.dim = a.dim();
    rep.measure_a = a.measure();
    rep.measure_b = b.measure();
    rep.measure_sum = s.measure();
    const int d = a.dim();
    const double rs = root_d(rep.measure_sum, d);
    const double ra = root_d(rep.measure_a, d);
    const double rb = root_d(rep.measure_b, d);
    const double rmax = root_d(std::max(rep.measure_a, rep.measure_b), d);
    rep.delta = (rs - ra - rb) / rmax;
    rep.equality_case = rep.delta <= kRootTol;
    return rep;
}

// delta_c = |t A' + (1-t) B'| - 1 where A', B' are A, B rescaled to unit
// measure. The rescaled combination equals mu * (t' A + (1-t') B) with
// mu = t*lam_a + (1-t)*lam_b and t' = t*lam_a / mu, so one grid combination
// at the adjusted (rationalized) weight gives the exact measure.
inline DeficitReport deficit_combo(const GridSet& a, const GridSet& b, std::int64_t p, std::int64_t q) {
    detail::require_nonempty_pair(a, b, "deficit_combo");
    if (p <= 0 || q <= 0 || p >= q) throw Error(Errc::contract, "deficit_combo: weight must be in (0,1)");
    const int d = a.dim();
    if (b.dim() != d) throw Error(Errc::dimension, "deficit_combo: dimension mismatch");
    DeficitReport rep;
    rep.dim = d;
    rep.measure_a = a.measure();
    rep.measure_b = b.measure();
    rep.weight = Rat(Int(p), Int(q));
    const double t = static_cast<double>(p) / static_cast<double>(q);
    const double lam_a = 1.0 / root_d(rep.measure_a, d);
    const double lam_b = 1.0 / root_d(rep.measure_b, d);
    const double mu = t * lam_a + (1.0 - t) * lam_b;
    const auto [ap, aq] = detail::best_rational(t * lam_a / mu, kComboDenominatorCap);
    const std::int64_t g = boost::multiprecision::gcd(Int(ap), Int(aq)).convert_to<std::int64_t>();
    const GridSet s = combo_sum(a, b, ap / g, aq / g);
    rep.measure_sum = s.measure();
    rep.delta = std::pow(mu, d) * to_double(rep.measure_sum) - 1.0;
    rep.equality_case = rep.delta <= kRootTol;
    return rep;
}

}  // namespace bm
