#include "bm/gridset.hpp"

#include "helpers.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace bm;
using bmtest::Rng;

namespace {

GridSet cube(int dim, int side, const Rat& h) {
    std::vector<CoordVec> cells;
    std::int64_t total = 1;
    for (int k = 0; k < dim; ++k) total *= side;
    for (std::int64_t i = 0; i < total; ++i) {
        std::int64_t rest = i;
        CoordVec c{0, 0, 0};
        for (int k = dim - 1; k >= 0; --k) {
            c[k] = static_cast<Coord>(rest % side);
            rest /= side;
        }
        cells.push_back(c);
    }
    return GridSet::from_cells(dim, h, cells);
}

}  // namespace

TEST_CASE("measure is exact cell count times h^d") {
    CHECK(GridSet(2, Rat(1, 4)).measure() == 0);
    CHECK(cube(2, 4, Rat(1, 4)).measure() == 1);

    Rng rng(7);
    std::vector<CoordVec> cells;
    while (cells.size() < 37) {
        CoordVec c{static_cast<Coord>(rng.below(6)), static_cast<Coord>(rng.below(6)),
                   static_cast<Coord>(rng.below(6))};
        if (std::find(cells.begin(), cells.end(), c) == cells.end()) cells.push_back(c);
    }
    const GridSet g = GridSet::from_cells(3, Rat(1, 2), cells);
    CHECK(g.cell_count() == 37);
    CHECK(g.measure() == Rat(37, 8));
}

TEST_CASE("fiber extracts vertical columns") {
    const GridSet c3 = cube(3, 4, Rat(1, 2));
    const GridSet f = c3.fiber(CoordVec{1, 2, 0});
    CHECK(f.dim() == 1);
    CHECK(f.cell_count() == 4);
    CHECK(f.measure() == Rat(2));

    CHECK(c3.fiber(CoordVec{9, 9, 0}).empty());

    const GridSet stair = GridSet::from_cells(2, Rat(1, 3), {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}});
    const GridSet fx1 = stair.fiber(CoordVec{1, 0, 0});
    CHECK(fx1.cell_count() == 2);
    CHECK(fx1.measure() == Rat(2, 3));
}

TEST_CASE("project drops the vertical axis") {
    const GridSet c3 = cube(3, 3, Rat(1));
    const GridSet p = c3.project();
    CHECK(p.dim() == 2);
    CHECK(p.cell_count() == 9);

    CHECK(GridSet(3, Rat(1)).project().empty());

    const GridSet stair = GridSet::from_cells(2, Rat(1, 3), {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}});
    const GridSet sp = stair.project();
    CHECK(sp.cell_count() == 2);
    CHECK(sp.measure() == Rat(2, 3));
}

TEST_CASE("superlevel sets are strict and nested") {
    const int n = 5;
    const Rat h(1, 4);
    const GridSet c = cube(2, n, h);
    CHECK(c.superlevel(Rat(n - 1) * h).cell_count() == n);
    CHECK(c.superlevel(Rat(n) * h).empty());
    CHECK(c.superlevel(Rat(0)) == c.project());

    const GridSet two = GridSet::from_cells(2, Rat(1, 2), {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {1, 2, 0}});
    CHECK(two.superlevel(Rat(1)).cell_count() == 1);  // s = 2h, only the 3h column

    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const GridSet g = bmtest::random_grid(3, Rat(1, 2), 6, 0.4, rng);
        if (g.empty()) continue;
        Rat prev_measure = g.superlevel(Rat(0)).measure();
        for (int lev = 1; lev <= 6; ++lev) {
            const Rat m = g.superlevel(Rat(lev, 2)).measure();
            CHECK(m <= prev_measure);
            prev_measure = m;
        }
    }
}

TEST_CASE("distribution is the exact superlevel profile") {
    const GridSet c = cube(3, 4, Rat(1, 4));
    const StepFunction f = c.distribution();
    // Single step: 16 columns of height 1, i.e. value 1 on [0, 1), 0 after.
    CHECK(f.value_at(Rat(0)) == Rat(1));
    CHECK(f.value_at(Rat(99, 100)) == Rat(1));
    CHECK(f.value_at(Rat(1)) == Rat(0));
    CHECK(f.integral() == c.measure());

    CHECK(GridSet(2, Rat(1)).distribution() == StepFunction());

    const Rat h(1, 2);
    const GridSet two = GridSet::from_cells(2, h, {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {1, 2, 0}});
    const StepFunction g = two.distribution();
    CHECK(g.value_at(Rat(0)) == Rat(2) * h);
    CHECK(g.value_at(h - Rat(1, 100)) == Rat(2) * h);
    CHECK(g.value_at(h) == h);
    CHECK(g.value_at(Rat(3) * h - Rat(1, 100)) == h);
    CHECK(g.value_at(Rat(3) * h) == Rat(0));

    Rng rng(3);
    for (int trial = 0; trial < 10; ++trial) {
        const GridSet g3 = bmtest::random_grid(3, Rat(1, 4), 5, 0.5, rng);
        if (g3.empty()) continue;
        CHECK(g3.distribution().integral() == g3.measure());
        for (int lev = 0; lev < 6; ++lev)
            CHECK(g3.distribution().value_at(Rat(lev, 4)) == g3.superlevel(Rat(lev, 4)).measure());
    }
}

TEST_CASE("translate, shear and refine preserve measure") {
    Rng rng(23);
    const GridSet g = bmtest::random_grid(2, Rat(1, 2), 8, 0.5, rng);
    REQUIRE(!g.empty());

    const GridSet t = translate(g, CoordVec{3, -2, 0});
    CHECK(t.measure() == g.measure());
    CHECK(t.project() == translate(g.project(), CoordVec{3, 0, 0}));

    const GridSet sh = g.shear({5, 0});
    CHECK(sh.measure() == g.measure());
    CHECK(sh.distribution() == g.distribution());
    CHECK(sh.project() == g.project());

    for (int q = 2; q <= 8; ++q) {
        const GridSet r = g.refine(q);
        CHECK(r.measure() == g.measure());
        CHECK(r.cell_count() == g.cell_count() * q * q);
    }

    CHECK_THROWS_AS(translate(g, CoordVec{1 << 30, 0, 0}), Error);
}

TEST_CASE("projection times max fiber dominates measure") {
    Rng rng(5);
    for (int trial = 0; trial < 25; ++trial) {
        const int dim = 2 + static_cast<int>(rng.below(2));
        const GridSet g = bmtest::random_grid(dim, Rat(1, 2), 6, 0.45, rng);
        if (g.empty()) continue;
        CHECK(g.project().measure() * g.max_fiber_measure() >= g.measure());
    }
}

TEST_CASE("equality ignores bounding-box padding") {
    const GridSet a = GridSet::from_cells(2, Rat(1), {{0, 0, 0}, {2, 3, 0}});
    GridSet b = translate(GridSet::from_cells(2, Rat(1), {{1, 1, 0}, {3, 4, 0}}), CoordVec{-1, -1, 0});
    CHECK(a == b);
    CHECK(a != GridSet::from_cells(2, Rat(1), {{0, 0, 0}, {2, 4, 0}}));
}

TEST_CASE("common_refine matches incommensurate lattices") {
    const GridSet a = cube(2, 2, Rat(1, 2));
    const GridSet b = cube(2, 3, Rat(1, 3));
    auto [ra, rb] = common_refine(a, b);
    CHECK(ra.cell_size() == Rat(1, 6));
    CHECK(rb.cell_size() == Rat(1, 6));
    CHECK(ra.measure() == a.measure());
    CHECK(rb.measure() == b.measure());
}

TEST_CASE("set algebra on matching lattices") {
    const GridSet a = GridSet::from_cells(2, Rat(1), {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}});
    const GridSet b = GridSet::from_cells(2, Rat(1), {{1, 1, 0}, {2, 2, 0}});
    CHECK(unite(a, b).cell_count() == 4);
    CHECK(intersect(a, b).cell_count() == 1);
    CHECK(subtract(a, b).cell_count() == 2);
    CHECK(subtract(a, b) == GridSet::from_cells(2, Rat(1), {{0, 0, 0}, {1, 0, 0}}));
}

TEST_CASE("boundary cell count") {
    const GridSet c = cube(2, 3, Rat(1));
    CHECK(c.boundary_cell_count() == 8);  // all but the center
    CHECK(cube(1, 5, Rat(1)).boundary_cell_count() == 2);
}
