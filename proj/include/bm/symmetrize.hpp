#pragma once

// The three symmetrizations on grid sets: Steiner (vertical re-centering of
// every column), Schwarz (horizontal slices rearranged into canonical
// quasi-balls) and their composition.
//
// Parity: a centered run of odd length cannot be symmetric about 0 on an
// integer lattice. In even_refined mode the set is refined by 2 first, so
// every column and slice count is even and centered runs are exactly
// symmetric; this is what makes sumset monotonicity under Steiner
// symmetrization an exact rational inequality. Raw mode keeps the original
// grid and places odd runs at [-(k+1)/2, (k-1)/2], half a cell low.

#include "bm/gridset.hpp"

#include <algorithm>
#include <vector>

namespace bm {

enum class SymKind { steiner, schwarz, natural };
enum class ParityPolicy { even_refined, raw };

struct SymmetrizationMode {
    SymKind kind = SymKind::natural;
    ParityPolicy parity = ParityPolicy::even_refined;
};

namespace detail {

inline Coord centered_run_start(std::int64_t k) {
    return checked_coord(-((k + 1) / 2));
}

// First `needed` base cells in the canonical ball order: ascending squared
// distance of cell centers from the origin of R^{d-1}, ties broken
// lexicographically. Cell x has center (x + 1/2)h, so the key is
// sum_k (2 x_k + 1)^2, an integer.
inline std::vector<CoordVec> canonical_ball_order(int base_dims, std::int64_t needed) {
    std::vector<CoordVec> cells;
    if (needed <= 0) return cells;
    if (base_dims == 1) {
        // Degenerates to centering: -1, 0, -2, 1, -3, 2, ... so that any
        // prefix of length k is exactly the centered run of k cells.
        for (std::int64_t i = 0; i < needed; ++i) {
            CoordVec c{0, 0, 0};
            c[0] = (i % 2 == 0) ? checked_coord(-(i / 2 + 1)) : checked_coord((i - 1) / 2);
            cells.push_back(c);
        }
        return cells;
    }
    // Generous box: the first M cells of the full-plane order lie well inside
    // half-width ~ sqrt(M).
    const Coord r = static_cast<Coord>(std::llround(std::sqrt(static_cast<double>(needed)))) + 3;
    std::vector<std::pair<std::int64_t, CoordVec>> keyed;
    keyed.reserve(static_cast<std::size_t>(2 * r) * static_cast<std::size_t>(2 * r));
    for (Coord x = -r; x < r; ++x) {
        for (Coord y = -r; y < r; ++y) {
            const std::int64_t kx = 2 * std::int64_t{x} + 1, ky = 2 * std::int64_t{y} + 1;
            keyed.push_back({kx * kx + ky * ky, CoordVec{x, y, 0}});
        }
    }
    std::sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first < b.first;
        return a.second < b.second;
    });
    if (static_cast<std::int64_t>(keyed.size()) < needed)
        throw Error(Errc::capacity, "canonical_ball_order: slice too large");
    cells.reserve(static_cast<std::size_t>(needed));
    for (std::int64_t i = 0; i < needed; ++i) cells.push_back(keyed[static_cast<std::size_t>(i)].second);
    return cells;
}

}  // namespace detail

// Every nonempty column of k cells becomes the centered run of k cells over
// the same base point. Preserves measure and the fiber-length distribution.
inline GridSet steiner(const GridSet& g_in, ParityPolicy parity = ParityPolicy::even_refined) {
    if (g_in.dim() < 2) throw Error(Errc::dimension, "steiner: requires dim >= 2");
    const GridSet g = parity == ParityPolicy::even_refined ? g_in.refine(2) : g_in;
    if (g.empty()) return g;
    Coord vlo = 0, vhi = -1;
    for (std::int64_t c = 0; c < g.columns(); ++c) {
        const std::int64_t k = g.column_popcount(c);
        if (k == 0) continue;
        const Coord s = detail::centered_run_start(k);
        vlo = std::min(vlo, s);
        vhi = std::max(vhi, static_cast<Coord>(s + k - 1));
    }
    Box box = g.box();
    box.lo[g.dim() - 1] = vlo;
    box.ext[g.dim() - 1] = vhi - vlo + 1;
    GridSet::Builder bld(g.dim(), g.cell_size(), box);
    for (std::int64_t c = 0; c < g.columns(); ++c) {
        const std::int64_t k = g.column_popcount(c);
        if (k == 0) continue;
        bld.set_run(g.col_base(c), detail::centered_run_start(k), k);
    }
    return std::move(bld).finish();
}

// Every horizontal slice of k cells becomes the first k cells of the
// canonical ball order. Slice counts are preserved exactly.
inline GridSet schwarz(const GridSet& g_in, ParityPolicy parity = ParityPolicy::even_refined) {
    if (g_in.dim() < 2) throw Error(Errc::dimension, "schwarz: requires dim >= 2");
    const GridSet g = parity == ParityPolicy::even_refined ? g_in.refine(2) : g_in;
    if (g.empty()) return g;
    const int d = g.dim();

    // Slice counts along the vertical axis.
    std::vector<std::int64_t> slice(static_cast<std::size_t>(g.vert_ext()), 0);
    for (std::int64_t c = 0; c < g.columns(); ++c) {
        const std::uint64_t* p = g.col_words(c);
        for (std::int64_t v = 0; v < g.vert_ext(); ++v)
            slice[static_cast<std::size_t>(v)] += (p[v >> 6] >> (v & 63)) & 1;
    }
    const std::int64_t max_slice = *std::max_element(slice.begin(), slice.end());
    const std::vector<CoordVec> order = detail::canonical_ball_order(d - 1, max_slice);

    Box box;
    Coord blo[2] = {0, 0}, bhi[2] = {-1, -1};
    for (std::int64_t i = 0; i < max_slice; ++i) {
        for (int k = 0; k + 1 < d; ++k) {
            blo[k] = std::min(blo[k], order[static_cast<std::size_t>(i)][k]);
            bhi[k] = std::max(bhi[k], order[static_cast<std::size_t>(i)][k]);
        }
    }
    for (int k = 0; k + 1 < d; ++k) {
        box.lo[k] = blo[k];
        box.ext[k] = bhi[k] - blo[k] + 1;
    }
    box.lo[d - 1] = g.vert_lo();
    box.ext[d - 1] = g.vert_ext();
    GridSet::Builder bld(d, g.cell_size(), box);
    for (std::int64_t v = 0; v < g.vert_ext(); ++v) {
        const std::int64_t k = slice[static_cast<std::size_t>(v)];
        for (std::int64_t i = 0; i < k; ++i) {
            CoordVec c = order[static_cast<std::size_t>(i)];
            c[d - 1] = static_cast<Coord>(g.vert_lo() + v);
            bld.set_cell(c);
        }
    }
    return std::move(bld).finish();
}

// Steiner first, then Schwarz. The even refinement, when requested, happens
// exactly once, in the Steiner pass.
inline GridSet natural(const GridSet& g, ParityPolicy parity = ParityPolicy::even_refined) {
    return schwarz(steiner(g, parity), ParityPolicy::raw);
}

inline GridSet symmetrize(const GridSet& g, SymmetrizationMode mode) {
    switch (mode.kind) {
        case SymKind::steiner: return steiner(g, mode.parity);
        case SymKind::schwarz: return schwarz(g, mode.parity);
        case SymKind::natural: return natural(g, mode.parity);
    }
    throw Error(Errc::contract, "symmetrize: bad mode");
}

}  // namespace bm
