#pragma once

// Test-only utilities: a tiny deterministic RNG and brute-force oracles that
// stay independent of the library's optimized paths.

#include "bm/gridset.hpp"

#include <cstdint>
#include <set>
#include <vector>

namespace bmtest {

// splitmix64; good enough for generating test fixtures reproducibly.
struct Rng {
    std::uint64_t state;
    explicit Rng(std::uint64_t seed) : state(seed) {}
    std::uint64_t next() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }
    std::int64_t below(std::int64_t n) { return static_cast<std::int64_t>(next() % static_cast<std::uint64_t>(n)); }
};

inline bm::GridSet random_grid(int dim, const bm::Rat& h, int extent, double density, Rng& rng) {
    std::vector<bm::CoordVec> cells;
    const std::int64_t total = [&] {
        std::int64_t t = 1;
        for (int k = 0; k < dim; ++k) t *= extent;
        return t;
    }();
    const auto threshold = static_cast<std::uint64_t>(density * 18446744073709551615.0);
    for (std::int64_t i = 0; i < total; ++i) {
        std::int64_t rest = i;
        bm::CoordVec c{0, 0, 0};
        for (int k = dim - 1; k >= 0; --k) {
            c[k] = static_cast<bm::Coord>(rest % extent);
            rest /= extent;
        }
        if (rng.next() < threshold) cells.push_back(c);
    }
    return bm::GridSet::from_cells(dim, h, cells);
}

// Brute-force voxel Minkowski sum: all index pair sums, dilated by {0,1}^d.
inline bm::GridSet brute_minkowski(const bm::GridSet& a, const bm::GridSet& b) {
    if (a.empty() || b.empty()) return bm::GridSet(a.dim(), a.cell_size());
    auto [ra, rb] = bm::common_refine(a, b);
    std::set<bm::CoordVec> out;
    const auto ca = ra.cells(), cb = rb.cells();
    const int d = ra.dim();
    for (const auto& i : ca) {
        for (const auto& j : cb) {
            for (int e = 0; e < (1 << d); ++e) {
                bm::CoordVec c{0, 0, 0};
                for (int k = 0; k < d; ++k) c[k] = i[k] + j[k] + ((e >> k) & 1);
                out.insert(c);
            }
        }
    }
    return bm::GridSet::from_cells(d, ra.cell_size(), {out.begin(), out.end()});
}

// Brute-force tA + (1-t)B via block expansion on the q-refined lattice.
inline bm::GridSet brute_combo(const bm::GridSet& a, const bm::GridSet& b, int p, int q) {
    auto [ra, rb] = bm::common_refine(a, b);
    const bm::Rat fine = ra.cell_size() / q;
    auto expand = [&](const bm::GridSet& g, int m) {
        std::set<bm::CoordVec> cells;
        for (const auto& c : g.cells()) {
            bm::CoordVec base{0, 0, 0};
            for (int k = 0; k < g.dim(); ++k) base[k] = static_cast<bm::Coord>(c[k] * m);
            std::vector<bm::CoordVec> frontier{base};
            for (int k = 0; k < g.dim(); ++k) {
                std::vector<bm::CoordVec> next;
                for (const auto& f : frontier)
                    for (int r = 0; r < m; ++r) {
                        bm::CoordVec n = f;
                        n[k] = static_cast<bm::Coord>(n[k] + r);
                        next.push_back(n);
                    }
                frontier = std::move(next);
            }
            cells.insert(frontier.begin(), frontier.end());
        }
        return bm::GridSet::from_cells(g.dim(), fine, {cells.begin(), cells.end()});
    };
    return brute_minkowski(expand(ra, p), expand(rb, q - p));
}

}  // namespace bmtest
