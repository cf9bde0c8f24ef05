#include "bm/sumset.hpp"

#include "helpers.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace bm;
using bmtest::Rng;

namespace {

GridSet block(int dim, int side, const Rat& h) {
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

GridSet line(std::initializer_list<Coord> cells, const Rat& h) {
    std::vector<CoordVec> v;
    for (Coord c : cells) v.push_back(CoordVec{c, 0, 0});
    return GridSet::from_cells(1, h, v);
}

}  // namespace

TEST_CASE("interval plus interval is an interval") {
    const int n = 6;
    const Rat h(1, 2);
    const GridSet a = line({0, 1, 2, 3, 4, 5}, h);
    const GridSet s = minkowski_sum(a, a);
    CHECK(s.cell_count() == 2 * n);
    CHECK(s.measure() == a.measure() * 2);
}

TEST_CASE("gap set squares to a full interval") {
    const GridSet a = line({0, 2}, Rat(1, 2));
    const GridSet s = minkowski_sum(a, a);
    CHECK(s == GridSet::from_cells(1, Rat(1, 2), {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {3, 0, 0}, {4, 0, 0}, {5, 0, 0}}));
    CHECK(s.measure() == Rat(3));
    CHECK(s == bmtest::brute_minkowski(a, a));
}

TEST_CASE("block plus block doubles the side") {
    const GridSet a = block(2, 5, Rat(1, 4));
    const GridSet s = minkowski_sum(a, a);
    CHECK(s.cell_count() == 10 * 10);
    CHECK(s.measure() == a.measure() * 4);  // 2^d |A|
}

TEST_CASE("voxel sum matches the exhaustive index-sum oracle") {
    Rng rng(101);
    for (int trial = 0; trial < 30; ++trial) {
        const int dim = 1 + static_cast<int>(rng.below(3));
        const GridSet a = bmtest::random_grid(dim, Rat(1, 2), 4, 0.5, rng);
        const GridSet b = bmtest::random_grid(dim, Rat(1, 2), 4, 0.5, rng);
        if (a.empty() || b.empty()) continue;
        CHECK(minkowski_sum(a, b) == bmtest::brute_minkowski(a, b));
    }
}

TEST_CASE("sum with mismatched lattices refines first") {
    const GridSet a = block(2, 2, Rat(1, 2));
    const GridSet b = block(2, 3, Rat(1, 3));
    const GridSet s = minkowski_sum(a, b);
    CHECK(s.measure() == Rat(4));  // [0,2)^2
    CHECK(s == bmtest::brute_minkowski(a, b));
}

TEST_CASE("empty summand yields the empty sumset with a flag") {
    bool was_empty = false;
    const GridSet s = minkowski_sum(GridSet(2, Rat(1)), block(2, 2, Rat(1)), &was_empty);
    CHECK(s.empty());
    CHECK(was_empty);
}

TEST_CASE("sum contains every translate of the other summand") {
    Rng rng(55);
    const GridSet a = bmtest::random_grid(2, Rat(1), 5, 0.5, rng);
    const GridSet b = bmtest::random_grid(2, Rat(1), 5, 0.5, rng);
    if (!a.empty() && !b.empty()) {
        const GridSet s = minkowski_sum(a, b);
        const auto bcells = b.cells();
        const CoordVec shift = bcells[bcells.size() / 2];
        bool all = true;
        translate(a, shift).for_each_cell([&](const CoordVec& c) { all = all && s.contains(c); });
        CHECK(all);
    }
}

TEST_CASE("single origin cell dilates by one cell per axis") {
    Rng rng(77);
    const GridSet a = bmtest::random_grid(2, Rat(1), 5, 0.6, rng);
    REQUIRE(!a.empty());
    const GridSet origin = GridSet::from_cells(2, Rat(1), {{0, 0, 0}});
    const GridSet s = minkowski_sum(a, origin);
    CHECK(s.measure() > a.measure());
    bool all = true;
    a.for_each_cell([&](const CoordVec& c) {
        for (int e = 0; e < 4; ++e)
            all = all && s.contains(CoordVec{c[0] + (e & 1), c[1] + ((e >> 1) & 1), 0});
    });
    CHECK(all);
}

TEST_CASE("combination sum of a convex block is the block") {
    const GridSet a = block(2, 4, Rat(1, 2));
    const GridSet c = combo_sum(a, a, 1, 2);
    CHECK(c.measure() == a.measure());
}

TEST_CASE("combination weight 1/3 on a 1D interval") {
    const GridSet a = line({0, 1}, Rat(1, 2));
    const GridSet c = combo_sum(a, a, 1, 3);
    CHECK(c.measure() == a.measure());  // t|A| + (1-t)|A|
}

TEST_CASE("combination sum matches the exhaustive refined-index oracle") {
    const GridSet a = line({0}, Rat(1));
    const GridSet b = line({0, 2}, Rat(1));
    // (1/2)A + (1/2)B = [0, 1/2) + ([0, 1/2) u [1, 3/2)) = [0, 2): measure 2h.
    const GridSet c = combo_sum(a, b, 1, 2);
    CHECK(c.measure() == Rat(2));
    CHECK(c == bmtest::brute_combo(a, b, 1, 2));

    Rng rng(9);
    for (int trial = 0; trial < 15; ++trial) {
        const int dim = 1 + static_cast<int>(rng.below(2));
        const GridSet u = bmtest::random_grid(dim, Rat(1, 2), 3, 0.5, rng);
        const GridSet v = bmtest::random_grid(dim, Rat(1, 2), 3, 0.5, rng);
        if (u.empty() || v.empty()) continue;
        CHECK(combo_sum(u, v, 1, 3) == bmtest::brute_combo(u, v, 1, 3));
        CHECK(combo_sum(u, v, 2, 5) == bmtest::brute_combo(u, v, 2, 5));
    }
}

TEST_CASE("combination sum measure obeys the weighted root bound") {
    Rng rng(13);
    for (int trial = 0; trial < 15; ++trial) {
        const int dim = 1 + static_cast<int>(rng.below(3));
        const GridSet u = bmtest::random_grid(dim, Rat(1), 4, 0.5, rng);
        const GridSet v = bmtest::random_grid(dim, Rat(1), 4, 0.5, rng);
        if (u.empty() || v.empty()) continue;
        const GridSet c = combo_sum(u, v, 2, 5);
        const double t = 0.4;
        const double bound =
            std::pow(t * root_d(u.measure(), dim) + (1 - t) * root_d(v.measure(), dim), dim);
        CHECK(to_double(c.measure()) >= bound - kRootTol);
    }
}

TEST_CASE("swapping combination roles yields a translate-identical set") {
    Rng rng(21);
    const GridSet u = bmtest::random_grid(2, Rat(1), 4, 0.5, rng);
    const GridSet v = bmtest::random_grid(2, Rat(1), 4, 0.6, rng);
    REQUIRE((!u.empty() && !v.empty()));
    const GridSet c1 = combo_sum(u, v, 1, 3);
    const GridSet c2 = combo_sum(v, u, 2, 3);
    CHECK(c1.measure() == c2.measure());
    CHECK(c1 == c2);  // same weights on same operands, roles swapped
}

TEST_CASE("combination rejects bad weights") {
    const GridSet a = block(1, 2, Rat(1));
    CHECK_THROWS_AS(combo_sum(a, a, 2, 2), Error);
    CHECK_THROWS_AS(combo_sum(a, a, 0, 2), Error);
    CHECK_THROWS_AS(combo_sum(a, a, 1, 99), Error);
    CHECK_THROWS_AS(combo_sum(a, a, 2, 4), Error);
}

TEST_CASE("additive deficit vanishes exactly for homothetic blocks") {
    const GridSet a = block(2, 3, Rat(1, 2));
    const GridSet b = translate(block(2, 6, Rat(1, 2)), CoordVec{10, 4, 0});
    const DeficitReport rep = deficit_additive(a, b);
    CHECK(rep.measure_sum == Rat(81, 4));  // (3/2 + 3)^2
    CHECK(std::abs(rep.delta) <= kRootTol);
    CHECK(rep.equality_case);
}

TEST_CASE("1D two-cell gap set has deficit one") {
    const GridSet a = GridSet::from_cells(1, Rat(1, 2), {{0, 0, 0}, {2, 0, 0}});
    const DeficitReport rep = deficit_additive(a, a);
    // (6h - 4h) / 2h = 1.
    CHECK(rep.delta == Catch::Approx(1.0).margin(1e-12));
    CHECK(!rep.equality_case);
}

TEST_CASE("deficit is nonnegative for random pairs") {
    Rng rng(31);
    for (int trial = 0; trial < 40; ++trial) {
        const int dim = 1 + static_cast<int>(rng.below(3));
        const GridSet a = bmtest::random_grid(dim, Rat(1, 2), 4, 0.55, rng);
        const GridSet b = bmtest::random_grid(dim, Rat(1, 2), 4, 0.55, rng);
        if (a.empty() || b.empty()) continue;
        CHECK(deficit_additive(a, b).delta >= -kRootTol);
    }
}

TEST_CASE("deficit rejects empty operands with the nonempty-summand convention") {
    const GridSet a = block(2, 2, Rat(1));
    try {
        deficit_additive(a, GridSet(2, Rat(1)));
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::empty_input);
        CHECK(std::string(e.what()).find("empty") != std::string::npos);
    }
}

TEST_CASE("combination deficit is near zero for equal blocks") {
    const GridSet a = block(2, 8, Rat(1, 8));
    const DeficitReport rep = deficit_combo(a, a, 1, 2);
    CHECK(std::abs(rep.delta) < 1e-9);
    CHECK(rep.weight.has_value());
    CHECK(*rep.weight == Rat(1, 2));
}

TEST_CASE("fiber-sup times projection bound holds for combinations") {
    Rng rng(43);
    for (int trial = 0; trial < 20; ++trial) {
        const int dim = 2 + static_cast<int>(rng.below(2));
        const GridSet a = bmtest::random_grid(dim, Rat(1, 2), 4, 0.5, rng);
        const GridSet b = bmtest::random_grid(dim, Rat(1, 2), 4, 0.5, rng);
        if (a.empty() || b.empty()) continue;
        const std::int64_t p = 1, q = 2 + static_cast<std::int64_t>(rng.below(2));
        const GridSet c = combo_sum(a, b, p, q);
        const Rat t{Int(p), Int(q)};
        const Rat lhs = a.max_fiber_measure() * b.project().measure();
        const Rat factor = (Rat(1) / t) * rat_pow(Rat(1) / (Rat(1) - t), dim - 1);
        CHECK(lhs <= factor * c.measure());
    }
}
