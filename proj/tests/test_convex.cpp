#include "bm/convex.hpp"

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

ConvexPolytope rhombus(const Rat& r, const Rat& c) {
    // |y| <= c (1 - |x|/r)
    return hull_points(2, {RatVec{-r, Rat(0), Rat(0)}, RatVec{r, Rat(0), Rat(0)},
                           RatVec{Rat(0), c, Rat(0)}, RatVec{Rat(0), -c, Rat(0)}});
}

}  // namespace

TEST_CASE("hull of a block is the exact cube") {
    for (int d = 1; d <= 3; ++d) {
        const int n = 3;
        const Rat h(1, 2);
        const ConvexPolytope p = hull(block(d, n, h));
        CHECK(!p.degenerate);
        CHECK(p.vertices.size() == static_cast<std::size_t>(1 << d));
        CHECK(volume(p) == rat_pow(Rat(n) * h, d));
    }
}

TEST_CASE("hull of a gappy 1D set is its enclosing interval") {
    const GridSet g = GridSet::from_cells(1, Rat(1, 2), {{0, 0, 0}, {2, 0, 0}});
    const ConvexPolytope p = hull(g);
    CHECK(p.vertices.front()[0] == Rat(0));
    CHECK(p.vertices.back()[0] == Rat(3, 2));
    CHECK(volume(p) == Rat(3, 2));
}

TEST_CASE("hull contains every cell corner (half-space oracle)") {
    Rng rng(19);
    for (int trial = 0; trial < 8; ++trial) {
        const int dim = 2 + static_cast<int>(rng.below(2));
        const GridSet g = bmtest::random_grid(dim, Rat(1, 2), 4, 0.5, rng);
        if (g.empty()) continue;
        const ConvexPolytope p = hull(g);
        if (p.degenerate) continue;
        bool all = true;
        g.for_each_cell([&](const CoordVec& c) {
            for (int mask = 0; mask < (1 << dim); ++mask) {
                RatVec q{Rat(0), Rat(0), Rat(0)};
                for (int k = 0; k < dim; ++k) q[k] = Rat(c[k] + ((mask >> k) & 1)) * g.cell_size();
                all = all && contains_point(p, q);
            }
        });
        CHECK(all);
        CHECK(volume(p) >= g.measure());
    }
}

TEST_CASE("hull volume equals measure exactly for convex rasters") {
    const GridSet b = block(3, 4, Rat(1, 4));
    CHECK(volume(hull(b)) == b.measure());
}

TEST_CASE("3D hull faces are merged and vertices are extreme") {
    const ConvexPolytope p = hull(block(3, 5, Rat(1)));
    CHECK(p.faces.size() == 6);
    CHECK(p.vertices.size() == 8);
    for (const auto& f : p.faces) CHECK(f.poly.size() == 4);
}

TEST_CASE("octahedron hull from its six vertices") {
    std::vector<RatVec> pts;
    for (int k = 0; k < 3; ++k)
        for (int s = -1; s <= 1; s += 2) {
            RatVec v{Rat(0), Rat(0), Rat(0)};
            v[k] = s;
            pts.push_back(v);
        }
    pts.push_back(RatVec{Rat(0), Rat(0), Rat(0)});        // interior
    pts.push_back(RatVec{Rat(1, 2), Rat(1, 4), Rat(0)});  // inside
    const ConvexPolytope p = hull_points(3, pts);
    CHECK(p.vertices.size() == 6);
    CHECK(p.faces.size() == 8);
    CHECK(volume(p) == Rat(4, 3));
}

TEST_CASE("degenerate hulls are flagged with zero volume") {
    const ConvexPolytope flat =
        hull_points(3, {RatVec{Rat(0), Rat(0), Rat(0)}, RatVec{Rat(1), Rat(0), Rat(0)},
                        RatVec{Rat(0), Rat(1), Rat(0)}, RatVec{Rat(1), Rat(1), Rat(0)}});
    CHECK(flat.degenerate);
    CHECK(volume(flat) == 0);
    CHECK(flat.vertices.size() == 4);

    const ConvexPolytope seg = hull_points(2, {RatVec{Rat(0), Rat(0), Rat(0)}, RatVec{Rat(2), Rat(2), Rat(0)},
                                               RatVec{Rat(1), Rat(1), Rat(0)}});
    CHECK(seg.degenerate);
}

TEST_CASE("triangle volume and centroid") {
    const ConvexPolytope t = hull_points(
        2, {RatVec{Rat(0), Rat(0), Rat(0)}, RatVec{Rat(1), Rat(0), Rat(0)}, RatVec{Rat(0), Rat(1), Rat(0)}});
    CHECK(volume(t) == Rat(1, 2));
    const RatVec c = centroid(t);
    CHECK(c[0] == Rat(1, 3));
    CHECK(c[1] == Rat(1, 3));
}

TEST_CASE("unit cube volume from vertices") {
    std::vector<RatVec> pts;
    for (int m = 0; m < 8; ++m)
        pts.push_back(RatVec{Rat(m & 1), Rat((m >> 1) & 1), Rat((m >> 2) & 1)});
    CHECK(volume(hull_points(3, pts)) == 1);
}

TEST_CASE("rasterize covers the polytope and converges in measure") {
    const ConvexPolytope p = rhombus(Rat(1), Rat(1, 2));
    Rat prev_gap = 0;
    bool first = true;
    for (int denom : {4, 8, 16}) {
        const Rat h(1, denom);
        const GridSet g = rasterize(p, h);
        const ConvexPolytope back = hull(g);
        for (const auto& v : p.vertices) CHECK(contains_point(back, v));
        CHECK(g.measure() >= volume(p));
        const Rat gap = g.measure() - volume(p);
        CHECK(gap <= Rat(g.boundary_cell_count()) * rat_pow(h, 2));
        if (!first) CHECK(gap < prev_gap);
        prev_gap = gap;
        first = false;
    }
}

TEST_CASE("rasterize matches a clip-area oracle on included cells") {
    const ConvexPolytope p = rhombus(Rat(3, 4), Rat(1, 2));
    const Rat h(1, 8);
    const GridSet g = rasterize(p, h);
    for (Coord x = -10; x < 10; ++x) {
        for (Coord y = -8; y < 8; ++y) {
            const ConvexPolytope cellbox =
                hull_points(2, {RatVec{Rat(x) * h, Rat(y) * h, Rat(0)}, RatVec{Rat(x + 1) * h, Rat(y) * h, Rat(0)},
                                RatVec{Rat(x) * h, Rat(y + 1) * h, Rat(0)},
                                RatVec{Rat(x + 1) * h, Rat(y + 1) * h, Rat(0)}});
            if (polygon_intersection_area(cellbox, p) > 0) CHECK(g.contains(CoordVec{x, y, 0}));
        }
    }
}

TEST_CASE("3D rasterization of a simplex stays within the boundary band") {
    const ConvexPolytope s =
        hull_points(3, {RatVec{Rat(0), Rat(0), Rat(0)}, RatVec{Rat(1), Rat(0), Rat(0)},
                        RatVec{Rat(0), Rat(1), Rat(0)}, RatVec{Rat(0), Rat(0), Rat(1)}});
    const Rat h(1, 8);
    const GridSet g = rasterize(s, h);
    CHECK(g.measure() >= volume(s));
    CHECK(g.measure() - volume(s) <= Rat(g.boundary_cell_count()) * rat_pow(h, 3));
    const ConvexPolytope back = hull(g);
    for (const auto& v : s.vertices) CHECK(contains_point(back, v));
}

TEST_CASE("tail measure of a cube is zero below the fiber height") {
    const GridSet c = block(2, 8, Rat(1, 8));
    CHECK(tail_measure(c, Rat(1, 2)) == 0);
    CHECK(tail_measure(c, Rat(1)) == c.measure());  // eps >= max fiber
    CHECK(tail_measure(c, Rat(2)) == c.measure());
}

TEST_CASE("tail of a symmetric cone scales quadratically") {
    // Fiber heights must dominate the one-cell outer-raster inflation down to
    // eps = maxfiber/32, so the body is tall and not too steep relative to h.
    const ConvexPolytope cone = rhombus(Rat(1), Rat(4));
    const GridSet g = rasterize(cone, Rat(1, 64));
    const Rat maxfiber = g.max_fiber_measure();
    std::vector<double> xs, ys;
    for (int k = 2; k <= 5; ++k) {
        const Rat eps = maxfiber / (1 << k);
        const Rat t = tail_measure(g, eps);
        REQUIRE(t > 0);
        xs.push_back(std::log(to_double(eps)));
        ys.push_back(std::log(to_double(t)));
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    const double n = static_cast<double>(xs.size());
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    CHECK(slope >= 1.8);
}

TEST_CASE("homothety alignment of a translated pair has zero excess") {
    const ConvexPolytope cube = hull(block(2, 4, Rat(1, 4)));
    const ConvexPolytope moved = translate_polytope(cube, RatVec{Rat(7, 3), Rat(-2), Rat(0)});
    const HomothetyFit fit = homothety_align(cube, moved);
    CHECK(fit.excess_a == 0);
    CHECK(fit.excess_b == 0);
    CHECK(fit.alpha == fit.beta);
    CHECK(volume(fit.body) * rat_pow(fit.alpha, 2) == volume(cube));
}

TEST_CASE("homothety alignment recovers a 1:2 scale pair") {
    const ConvexPolytope small = hull(block(2, 4, Rat(1, 4)));  // side 1
    const ConvexPolytope big = translate_polytope(hull(block(2, 8, Rat(1, 4))), RatVec{Rat(5), Rat(1), Rat(0)});
    const HomothetyFit fit = homothety_align(small, big);
    CHECK(fit.alpha / fit.beta == Rat(1, 2));
    CHECK(fit.excess_a == 0);
    CHECK(fit.excess_b == 0);
}

TEST_CASE("homothety alignment is exchange-symmetric") {
    Rng rng(61);
    const GridSet a = bmtest::random_grid(2, Rat(1, 2), 5, 0.6, rng);
    const GridSet b = bmtest::random_grid(2, Rat(1, 2), 5, 0.6, rng);
    REQUIRE((!a.empty() && !b.empty()));
    const ConvexPolytope pa = hull(a), pb = hull(b);
    if (pa.degenerate || pb.degenerate) return;
    const HomothetyFit f1 = homothety_align(pa, pb);
    const HomothetyFit f2 = homothety_align(pb, pa);
    CHECK(f1.alpha == f2.beta);
    CHECK(f1.beta == f2.alpha);
    CHECK(f1.excess_a == f2.excess_b);
    CHECK(f1.excess_b == f2.excess_a);
    CHECK(volume(f1.body) == volume(f2.body));
}

TEST_CASE("alignment containment holds for dissimilar bodies") {
    const ConvexPolytope cube = hull(block(2, 6, Rat(1, 6)));
    const ConvexPolytope tri = hull_points(
        2, {RatVec{Rat(0), Rat(0), Rat(0)}, RatVec{Rat(2), Rat(0), Rat(0)}, RatVec{Rat(0), Rat(2), Rat(0)}});
    const HomothetyFit fit = homothety_align(cube, tri);
    CHECK(fit.excess_a >= 0);
    CHECK(fit.excess_b >= 0);
    for (const auto& v : cube.vertices) {
        const RatVec local{(v[0] - fit.u[0]) / fit.alpha, (v[1] - fit.u[1]) / fit.alpha, Rat(0)};
        CHECK(contains_point(fit.body, local));
    }
    for (const auto& v : tri.vertices) {
        const RatVec local{(v[0] - fit.v[0]) / fit.beta, (v[1] - fit.v[1]) / fit.beta, Rat(0)};
        CHECK(contains_point(fit.body, local));
    }
}

TEST_CASE("affine images preserve volume for shears") {
    const ConvexPolytope cube = hull(block(3, 3, Rat(1, 3)));
    const std::array<RatVec, 3> shear{RatVec{Rat(1), Rat(0), Rat(0)}, RatVec{Rat(0), Rat(1), Rat(0)},
                                      RatVec{Rat(2), Rat(-1), Rat(1)}};
    const ConvexPolytope img = affine_image(cube, shear, RatVec{Rat(1), Rat(2), Rat(3)});
    CHECK(volume(img) == volume(cube));
    CHECK(img.vertices.size() == 8);
}

TEST_CASE("polygon intersection area") {
    const ConvexPolytope a = hull(block(2, 2, Rat(1)));  // [0,2]^2
    const ConvexPolytope b = translate_polytope(a, RatVec{Rat(1), Rat(1), Rat(0)});
    CHECK(polygon_intersection_area(a, b) == Rat(1));
    const ConvexPolytope far = translate_polytope(a, RatVec{Rat(10), Rat(0), Rat(0)});
    CHECK(polygon_intersection_area(a, far) == Rat(0));
}
