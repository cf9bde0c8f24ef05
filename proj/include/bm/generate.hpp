#pragma once

// Deterministic scenario generation: seeded family rasterizations, homothety
// partners, cell-level perturbations and exact rational rotations.
//
// Randomness is splitmix64. Trial k of a scenario with seed s draws from a
// generator seeded with splitmix64_mix(s, k), so trials are independent
// streams and reordering or parallelizing them cannot change any draw.

#include "bm/convex.hpp"
#include "bm/recover.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace bm {

struct Rng {
    std::uint64_t state;

    explicit Rng(std::uint64_t seed) : state(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    std::int64_t below(std::int64_t n) {
        if (n <= 0) throw Error(Errc::contract, "Rng::below: empty range");
        return static_cast<std::int64_t>(next() % static_cast<std::uint64_t>(n));
    }

    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
};

inline std::uint64_t split_stream(std::uint64_t seed, std::uint64_t index) {
    Rng r(seed ^ (0x9e3779b97f4a7c15ull * (index + 1)));
    return r.next();
}

enum class Family { ball, cube, simplex, random_polytope, two_blocks };

inline const char* family_name(Family f) {
    switch (f) {
        case Family::ball: return "ball";
        case Family::cube: return "cube";
        case Family::simplex: return "simplex";
        case Family::random_polytope: return "random-polytope";
        case Family::two_blocks: return "two-blocks";
    }
    return "?";
}

inline Family parse_family(const std::string& s) {
    if (s == "ball") return Family::ball;
    if (s == "cube") return Family::cube;
    if (s == "simplex") return Family::simplex;
    if (s == "random-polytope") return Family::random_polytope;
    if (s == "two-blocks") return Family::two_blocks;
    throw Error(Errc::io, "unknown family: " + s);
}

struct ScenarioConfig {
    std::uint64_t seed = 1;
    int dim = 2;
    Rat h{1, 32};
    Family family = Family::ball;
    double delete_fraction = 0.0;
    double add_fraction = 0.0;
    Rat ratio{1};  // homothety ratio for the partner set
    Rat t{1, 2};
    int trials = 1;
    int threads = 1;
};

// Outer rasterization of the ball |x - center| <= r: a cell is kept when the
// squared distance from the center to its closed box is at most r^2. Center
// coordinates must be multiples of h; the test then runs in integers.
inline GridSet raster_ball(int dim, const Rat& h, const RatVec& center, const Rat& radius) {
    if (radius <= 0) throw Error(Errc::contract, "raster_ball: radius must be positive");
    CoordVec c0{0, 0, 0};
    for (int k = 0; k < dim; ++k) {
        const Rat c_l = center[k] / h;
        if (denominator(c_l) != 1)
            throw Error(Errc::contract, "raster_ball: center must lie on the lattice");
        c0[k] = checked_coord(numerator(c_l).convert_to<std::int64_t>());
    }
    // radius in lattice units as a/D.
    const Rat r_l = radius / h;
    const std::int64_t a = numerator(r_l).convert_to<std::int64_t>();
    const std::int64_t D = denominator(r_l).convert_to<std::int64_t>();
    if (a > (1 << 20) || D > (1 << 15)) throw Error(Errc::capacity, "raster_ball: radius too large for the lattice");
    Box box;
    for (int k = 0; k < dim; ++k) {
        box.lo[k] = checked_coord(c0[k] + ifloor(-r_l));
        box.ext[k] = static_cast<std::int32_t>(c0[k] + iceil(r_l) - box.lo[k] + 1);
    }
    const __int128 rhs = static_cast<__int128>(a) * a;
    GridSet::Builder bld(dim, h, box);
    CoordVec c{0, 0, 0};
    std::function<void(int, std::int64_t)> scan = [&](int k, std::int64_t acc) {
        if (static_cast<__int128>(acc) * (static_cast<__int128>(D) * D) > rhs) return;
        if (k == dim) {
            bld.set_cell(c);
            return;
        }
        for (Coord i = box.lo[k]; i < box.lo[k] + box.ext[k]; ++i) {
            c[k] = i;
            const std::int64_t lo = i - c0[k], hi = lo + 1;
            std::int64_t gap = 0;
            if (lo > 0) gap = lo;
            else if (hi < 0) gap = -hi;
            scan(k + 1, acc + gap * gap);
        }
    };
    scan(0, 0);
    return std::move(bld).finish();
}

// The double cone {(x, y) : |y| <= height (1 - |x| / radius)}, rasterized
// analytically in lattice integers (its cross-section is a ball, so it is
// not a polytope in 3D).
inline GridSet raster_bicone(int dim, const Rat& h, const Rat& radius, const Rat& height) {
    if (dim < 2) throw Error(Errc::dimension, "raster_bicone: requires dim >= 2");
    // Lattice units with a common denominator: radius = a/D, height = b/D.
    const Rat r_l = radius / h, h_l = height / h;
    const Int dlcm = boost::multiprecision::lcm(denominator(r_l), denominator(h_l));
    const std::int64_t D = dlcm.convert_to<std::int64_t>();
    const std::int64_t a = (numerator(r_l) * (dlcm / denominator(r_l))).convert_to<std::int64_t>();
    const std::int64_t b = (numerator(h_l) * (dlcm / denominator(h_l))).convert_to<std::int64_t>();
    if (a > (1 << 20) || b > (1 << 20) || D > (1 << 12))
        throw Error(Errc::capacity, "raster_bicone: body too large for the lattice");
    Box box;
    for (int k = 0; k + 1 < dim; ++k) {
        box.lo[k] = checked_coord(ifloor(-r_l));
        box.ext[k] = static_cast<std::int32_t>(iceil(r_l) - box.lo[k] + 1);
    }
    box.lo[dim - 1] = checked_coord(ifloor(-h_l));
    box.ext[dim - 1] = static_cast<std::int32_t>(iceil(h_l) - box.lo[dim - 1] + 1);
    GridSet::Builder bld(dim, h, box);
    for (std::int64_t col = 0; col < bld.cols; ++col) {
        CoordVec base{0, 0, 0};
        std::int64_t rest = col;
        for (int k = dim - 2; k >= 0; --k) {
            base[k] = static_cast<Coord>(box.lo[k] + rest % box.ext[k]);
            rest /= box.ext[k];
        }
        // Nearest |x|^2 over the closed base box, in lattice units.
        std::int64_t acc = 0;
        for (int k = 0; k + 1 < dim; ++k) {
            const std::int64_t lo = base[k], hi = lo + 1;
            std::int64_t gap = 0;
            if (lo > 0) gap = lo;
            else if (hi < 0) gap = -hi;
            acc += gap * gap;
        }
        if (static_cast<__int128>(acc) * D * D > static_cast<__int128>(a) * a) continue;
        // Keep cells with min|y| * radius <= height * (radius - |x|):
        // (b a - zmin a D)^2 >= b^2 acc D^2 with the left side nonnegative.
        for (Coord z = box.lo[dim - 1]; z < box.lo[dim - 1] + box.ext[dim - 1]; ++z) {
            const std::int64_t zlo = z, zhi = z + 1;
            std::int64_t zmin = 0;
            if (zlo > 0) zmin = zlo;
            else if (zhi < 0) zmin = -zhi;
            const __int128 lhs = static_cast<__int128>(b) * a - static_cast<__int128>(zmin) * a * D;
            if (lhs < 0) continue;
            if (lhs * lhs >= static_cast<__int128>(b) * b * acc * D * D) {
                CoordVec cc = base;
                cc[dim - 1] = z;
                bld.set_cell(cc);
            }
        }
    }
    return std::move(bld).finish();
}

// Family bodies as polytopes (ball handled analytically by raster_ball).
inline ConvexPolytope family_body(Family f, int dim, Rng& rng, double scale = 1.0) {
    auto rscale = [&](double x) { return rationalize(x * scale, 1 << 12); };
    switch (f) {
        case Family::cube: {
            std::vector<RatVec> pts;
            for (int m = 0; m < (1 << dim); ++m) {
                RatVec v{Rat(0), Rat(0), Rat(0)};
                for (int k = 0; k < dim; ++k) v[k] = ((m >> k) & 1) ? rscale(0.5) : rscale(-0.5);
                pts.push_back(v);
            }
            return hull_points(dim, std::move(pts));
        }
        case Family::simplex: {
            std::vector<RatVec> pts;
            RatVec base{Rat(0), Rat(0), Rat(0)};
            for (int k = 0; k < dim; ++k) base[k] = rscale(-0.4);
            pts.push_back(base);
            for (int k = 0; k < dim; ++k) {
                RatVec v = base;
                v[k] = rscale(0.9);
                pts.push_back(v);
            }
            return hull_points(dim, std::move(pts));
        }
        case Family::random_polytope: {
            const int m = 8 + static_cast<int>(rng.below(8));
            std::vector<RatVec> pts;
            for (int i = 0; i < m; ++i) {
                RatVec v{Rat(0), Rat(0), Rat(0)};
                for (int k = 0; k < dim; ++k)
                    v[k] = Rat(rng.below(129) - 64, 128) * rationalize(scale, 1 << 12);
                pts.push_back(v);
            }
            ConvexPolytope p = hull_points(dim, std::move(pts));
            if (p.degenerate) return family_body(Family::cube, dim, rng, scale);
            return p;
        }
        default:
            throw Error(Errc::contract, "family_body: family has no polytope body");
    }
}

inline GridSet raster_family(Family f, int dim, const Rat& h, const Rat& ratio, Rng& rng,
                             bool partner) {
    switch (f) {
        case Family::ball: {
            const Rat r = Rat(1, 2) * (partner ? ratio : Rat(1));
            return raster_ball(dim, h, RatVec{Rat(0), Rat(0), Rat(0)}, r);
        }
        case Family::two_blocks: {
            const Rat r = partner ? ratio : Rat(1);
            const std::int64_t side = std::max<std::int64_t>(2, ifloor(r / (2 * h)));
            std::vector<CoordVec> cells;
            const Coord gap = static_cast<Coord>(3 * side);
            for (int blockat : {0, 1}) {
                for (std::int64_t i = 0; i < side; ++i)
                    for (std::int64_t j = 0; j < (dim >= 2 ? side : 1); ++j)
                        for (std::int64_t k = 0; k < (dim >= 3 ? side : 1); ++k) {
                            CoordVec c{static_cast<Coord>(i + blockat * gap), 0, 0};
                            if (dim >= 2) c[1] = static_cast<Coord>(j);
                            if (dim >= 3) c[2] = static_cast<Coord>(k);
                            cells.push_back(c);
                        }
            }
            return GridSet::from_cells(dim, h, cells);
        }
        default: {
            ConvexPolytope body = family_body(f, dim, rng, 1.0);
            if (partner && ratio != 1)
                body = scale_polytope(body, ratio, RatVec{Rat(0), Rat(0), Rat(0)});
            return rasterize(body, h);
        }
    }
}

// Deletes round(fraction * n) cells, then adds the same rule's worth of new
// cells drawn from the slightly dilated bounding box. Deterministic given
// the generator state.
inline GridSet perturb(const GridSet& g, double delete_fraction, double add_fraction, Rng& rng) {
    if (delete_fraction >= 1.0 || delete_fraction < 0 || add_fraction < 0)
        throw Error(Errc::contract, "perturb: fractions must lie in [0, 1)");
    std::vector<CoordVec> cells = g.cells();
    const auto n = static_cast<std::int64_t>(cells.size());
    const auto del = static_cast<std::int64_t>(std::llround(delete_fraction * static_cast<double>(n)));
    for (std::int64_t i = 0; i < del && static_cast<std::int64_t>(cells.size()) > 1; ++i) {
        const std::int64_t j = rng.below(static_cast<std::int64_t>(cells.size()));
        cells[static_cast<std::size_t>(j)] = cells.back();
        cells.pop_back();
    }
    const auto add = static_cast<std::int64_t>(std::llround(add_fraction * static_cast<double>(n)));
    if (add > 0) {
        GridSet current = GridSet::from_cells(g.dim(), g.cell_size(), cells);
        const Box& box = g.box();
        for (std::int64_t i = 0; i < add; ++i) {
            for (int attempt = 0; attempt < 64; ++attempt) {
                CoordVec c{0, 0, 0};
                for (int k = 0; k < g.dim(); ++k)
                    c[k] = static_cast<Coord>(box.lo[k] - 2 + rng.below(box.ext[k] + 4));
                if (current.contains(c)) continue;
                cells.push_back(c);
                current = GridSet::from_cells(g.dim(), g.cell_size(), cells);
                break;
            }
        }
    }
    return GridSet::from_cells(g.dim(), g.cell_size(), cells);
}

// Deterministic pair for one trial: A from the family, B a homothet of A
// (configured ratio), translated on the lattice and perturbed.
inline std::pair<GridSet, GridSet> generate(const ScenarioConfig& cfg, std::uint64_t trial) {
    Rng rng(split_stream(cfg.seed, trial));
    const GridSet a = raster_family(cfg.family, cfg.dim, cfg.h, cfg.ratio, rng, false);
    GridSet b = raster_family(cfg.family, cfg.dim, cfg.h, cfg.ratio, rng, true);
    CoordVec shift{0, 0, 0};
    for (int k = 0; k < cfg.dim; ++k) shift[k] = static_cast<Coord>(rng.below(9) - 4);
    b = translate(b, shift);
    if (cfg.delete_fraction > 0 || cfg.add_fraction > 0)
        b = perturb(b, cfg.delete_fraction, cfg.add_fraction, rng);
    if (b.empty()) b = translate(a, shift);
    return {a, b};
}

// Rational point on the unit circle near angle theta, via the half-angle
// parametrization: exactly orthogonal rotations, so polytope images keep
// their volume exactly.
inline std::pair<Rat, Rat> unit_circle_point(double theta, std::int64_t denom = 1 << 16) {
    const double half = std::tan(theta / 2.0);
    if (!std::isfinite(half) || std::abs(half) > 1e6) return {Rat(-1), Rat(0)};  // ~pi
    const Rat u = rationalize(half, denom);
    const Rat den = Rat(1) + u * u;
    return {(Rat(1) - u * u) / den, Rat(2) * u / den};
}

// Rotation in the (axis0, axis1) plane by the exact rational rotation nearest
// to theta.
inline ConvexPolytope rotate_polytope(const ConvexPolytope& p, double theta, int axis0 = 0, int axis1 = 1) {
    const auto [c, s] = unit_circle_point(theta);
    std::array<RatVec, 3> m{RatVec{Rat(1), Rat(0), Rat(0)}, RatVec{Rat(0), Rat(1), Rat(0)},
                            RatVec{Rat(0), Rat(0), Rat(1)}};
    m[static_cast<std::size_t>(axis0)][static_cast<std::size_t>(axis0)] = c;
    m[static_cast<std::size_t>(axis0)][static_cast<std::size_t>(axis1)] = -s;
    m[static_cast<std::size_t>(axis1)][static_cast<std::size_t>(axis0)] = s;
    m[static_cast<std::size_t>(axis1)][static_cast<std::size_t>(axis1)] = c;
    return affine_image(p, m, RatVec{Rat(0), Rat(0), Rat(0)});
}

// Cell-center resampling rotation for sets with no polytope provenance; the
// measure drift is the caller's to record.
inline GridSet rotate_grid_resample(const GridSet& g, double theta) {
    const auto [c, s] = unit_circle_point(theta);
    const Rat& h = g.cell_size();
    std::vector<CoordVec> cells;
    g.for_each_cell([&](const CoordVec& cell) {
        const Rat x = (Rat(2 * cell[0]) + 1) * h / 2;
        const Rat y = (Rat(2 * cell[g.dim() - 1]) + 1) * h / 2;
        const Rat rx = c * x - s * y;
        const Rat ry = s * x + c * y;
        CoordVec out = cell;
        out[0] = checked_coord(ifloor(rx / h));
        out[g.dim() - 1] = checked_coord(ifloor(ry / h));
        cells.push_back(out);
    });
    std::sort(cells.begin(), cells.end());
    cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
    return GridSet::from_cells(g.dim(), h, cells);
}

}  // namespace bm
