#include "bm/io.hpp"

#include "helpers.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <sstream>

using namespace bm;


TEST_CASE("grid save/load round trip is exact") {
    bmtest::Rng rng(3);
    for (int dim = 1; dim <= 3; ++dim) {
        const GridSet g = bmtest::random_grid(dim, Rat(3, 7), 5, 0.5, rng);
        std::ostringstream oss;
        save_grid(oss, g);
        std::istringstream iss(oss.str());
        const GridSet back = load_grid(iss);
        CHECK(back == g);
        // Canonical writer: a second save of the loaded set is byte-identical.
        std::ostringstream again;
        save_grid(again, back);
        CHECK(again.str() == oss.str());
    }
}

TEST_CASE("run-length rows survive the round trip") {
    std::vector<CoordVec> cells;
    for (Coord y = 0; y < 9; ++y) cells.push_back(CoordVec{2, y, 0});
    cells.push_back(CoordVec{4, 1, 0});
    const GridSet g = GridSet::from_cells(2, Rat(1, 4), cells);
    std::ostringstream oss;
    save_grid(oss, g);
    CHECK(oss.str().find("r 2 0..8") != std::string::npos);
    CHECK(oss.str().find("c 4 1") != std::string::npos);
    std::istringstream iss(oss.str());
    CHECK(load_grid(iss) == g);
}

TEST_CASE("grid loader applies the origin offset") {
    std::istringstream iss("BMGRID 1\ndim=2\nh=1/2\norigin=10 -3\nbbox=0..0 0..0\nc 0 0\n");
    const GridSet g = load_grid(iss);
    CHECK(g.cell_count() == 1);
    CHECK(g.contains(CoordVec{10, -3, 0}));
}

TEST_CASE("grid loader rejects duplicates with the line number") {
    std::istringstream iss("BMGRID 1\ndim=2\nh=1/2\norigin=0 0\nbbox=0..1 0..1\nc 0 0\nc 0 0\n");
    try {
        load_grid(iss);
        FAIL("expected duplicate-cell rejection");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::io);
        CHECK(std::string(e.what()).find("line 7") != std::string::npos);
        CHECK(std::string(e.what()).find("duplicate") != std::string::npos);
    }
}

TEST_CASE("grid loader rejects unsupported versions and malformed h") {
    std::istringstream v2("BMGRID 2\ndim=2\n");
    CHECK_THROWS_AS(load_grid(v2), Error);
    std::istringstream badh("BMGRID 1\ndim=2\nh=0.25\norigin=0 0\nbbox=0..0 0..0\nc 0 0\n");
    CHECK_THROWS_AS(load_grid(badh), Error);
    std::istringstream negh("BMGRID 1\ndim=2\nh=-1/4\norigin=0 0\nbbox=0..0 0..0\nc 0 0\n");
    CHECK_THROWS_AS(load_grid(negh), Error);
}

TEST_CASE("polytope save/load round trip") {
    const ConvexPolytope p = hull_points(
        2, {RatVec{Rat(0), Rat(0), Rat(0)}, RatVec{Rat(5, 3), Rat(0), Rat(0)}, RatVec{Rat(0), Rat(7, 2), Rat(0)}});
    std::ostringstream oss;
    save_poly(oss, p);
    std::istringstream iss(oss.str());
    const ConvexPolytope back = load_poly(iss);
    CHECK(back.vertices == p.vertices);
    CHECK(volume(back) == volume(p));
}

TEST_CASE("sweep CSV round trips through the parser") {
    ScenarioConfig cfg;
    cfg.seed = 13;
    cfg.dim = 2;
    cfg.h = Rat(1, 16);
    cfg.family = Family::ball;
    cfg.trials = 2;
    const SuiteReport rep = run_delta_sweep(cfg, {0.0, 0.05});
    std::ostringstream oss;
    save_sweep_csv(oss, rep);
    std::istringstream iss(oss.str());
    const SuiteReport back = load_sweep_csv(iss);
    REQUIRE(back.rows.size() == rep.rows.size());
    std::ostringstream oss2;
    save_sweep_csv(oss2, back);
    CHECK(oss2.str() == oss.str());
}

TEST_CASE("json reports carry exact rationals as strings") {
    bmtest::Rng rng(8);
    const GridSet g1 = bmtest::random_grid(2, Rat(1, 4), 4, 0.7, rng);
    const GridSet g2 = bmtest::random_grid(2, Rat(1, 4), 4, 0.7, rng);
    if (g1.empty() || g2.empty()) return;
    const auto rep = deficit_additive(g1, g2);
    const auto j = deficit_json(rep);
    CHECK(j["measure_a"].get<std::string>() == rat_str(rep.measure_a));
    CHECK(j["delta"].is_number());
    const auto res = recover_convex_pair(g1, g2, RecoverMode::hull_baseline);
    const auto rj = recovery_json(res);
    CHECK(rj["mode"] == "hull");
    CHECK(rj["alpha"].is_string());
}
