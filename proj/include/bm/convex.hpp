#pragma once

// Convex bodies with exact rational vertices: hulls of grid sets, exact
// volume and centroid, affine images, outer rasterization, homothety
// alignment, and the thin-fiber tail measure.
//
// The 3D hull is a randomized-order incremental triangulation with exact
// orientation predicates (double prefilter, rational fallback). Faces are
// extracted afterwards by grouping coplanar triangles, so the reported
// vertex set is exactly the set of extreme points.

#include "bm/gridset.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <unordered_map>
#include <vector>

namespace bm {

using RatVec = std::array<Rat, 3>;

inline RatVec rv_sub(const RatVec& a, const RatVec& b) {
    return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}
inline RatVec rv_add(const RatVec& a, const RatVec& b) {
    return {a[0] + b[0], a[1] + b[1], a[2] + b[2]};
}
inline RatVec rv_scale(const RatVec& a, const Rat& s) { return {a[0] * s, a[1] * s, a[2] * s}; }
inline Rat rv_dot(const RatVec& a, const RatVec& b) {
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}
inline RatVec rv_cross(const RatVec& a, const RatVec& b) {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

inline std::int64_t ifloor(const Rat& r) {
    Int q = numerator(r) / denominator(r);
    if (r < 0 && q * denominator(r) != numerator(r)) --q;
    return q.convert_to<std::int64_t>();
}
inline std::int64_t iceil(const Rat& r) { return -ifloor(-r); }

// Oriented plane n.x <= off (inside).
struct Plane {
    RatVec n{Rat(0), Rat(0), Rat(0)};
    Rat off;

    Rat eval(const RatVec& p) const { return rv_dot(n, p) - off; }

    // Scale so the first nonzero normal component has absolute value 1;
    // orientation (sign pattern) is preserved, so equal oriented planes get
    // equal canonical forms.
    Plane canonical() const {
        Rat s;
        for (const Rat& c : n)
            if (c != 0) {
                s = Rat(1) / rat_abs(c);
                break;
            }
        if (s == 0) throw Error(Errc::degenerate, "Plane: zero normal");
        return Plane{{n[0] * s, n[1] * s, n[2] * s}, off * s};
    }

    bool operator<(const Plane& o) const {
        for (int k = 0; k < 3; ++k) {
            if (n[k] != o.n[k]) return n[k] < o.n[k];
        }
        return off < o.off;
    }
};

struct ConvexPolytope {
    int dim = 0;
    bool degenerate = false;
    std::vector<RatVec> vertices;  // exact extreme points; CCW cycle when dim == 2

    struct Face {
        Plane plane;               // outward: inside satisfies n.x <= off
        std::vector<RatVec> poly;  // boundary cycle, oriented outward
    };
    std::vector<Face> faces;  // dim == 3 only
};

namespace detail {

// --- exact predicates with a double prefilter ------------------------------

struct DPoint {
    double x[3];
};

inline DPoint approx(const RatVec& p) {
    return {to_double(p[0]), to_double(p[1]), to_double(p[2])};
}

inline int sign_of(const Rat& r) { return r > 0 ? 1 : (r < 0 ? -1 : 0); }

// Orientation of d relative to plane(a,b,c): sign of det[b-a, c-a, d-a].
inline int orient3d(const RatVec& a, const RatVec& b, const RatVec& c, const RatVec& d,
                    const DPoint& da, const DPoint& db, const DPoint& dc, const DPoint& dd) {
    double m[3][3], am[3][3];
    for (int k = 0; k < 3; ++k) {
        m[0][k] = db.x[k] - da.x[k];
        m[1][k] = dc.x[k] - da.x[k];
        m[2][k] = dd.x[k] - da.x[k];
        am[0][k] = std::abs(m[0][k]);
        am[1][k] = std::abs(m[1][k]);
        am[2][k] = std::abs(m[2][k]);
    }
    const double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                       m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                       m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    const double perm = am[0][0] * (am[1][1] * am[2][2] + am[1][2] * am[2][1]) +
                        am[0][1] * (am[1][0] * am[2][2] + am[1][2] * am[2][0]) +
                        am[0][2] * (am[1][0] * am[2][1] + am[1][1] * am[2][0]);
    const double bound = 1e-13 * perm;
    if (det > bound) return 1;
    if (det < -bound) return -1;
    const RatVec u = rv_sub(b, a), v = rv_sub(c, a), w = rv_sub(d, a);
    return sign_of(rv_dot(rv_cross(u, v), w));
}

inline int orient2d(const RatVec& a, const RatVec& b, const RatVec& c) {
    const double ax = to_double(a[0]), ay = to_double(a[1]);
    const double bx = to_double(b[0]), by = to_double(b[1]);
    const double cx = to_double(c[0]), cy = to_double(c[1]);
    const double det = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax);
    const double perm = std::abs((bx - ax) * (cy - ay)) + std::abs((by - ay) * (cx - ax));
    if (det > 1e-13 * perm) return 1;
    if (det < -1e-13 * perm) return -1;
    return sign_of((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]));
}

// --- 2D hull ----------------------------------------------------------------

// Monotone chain; collinear points dropped, result CCW.
inline std::vector<RatVec> hull2d_points(std::vector<RatVec> pts) {
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    const std::size_t n = pts.size();
    if (n <= 2) return pts;
    std::vector<RatVec> h(2 * n);
    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i) {
        while (k >= 2 && orient2d(h[k - 2], h[k - 1], pts[i]) <= 0) --k;
        h[k++] = pts[i];
    }
    const std::size_t lower = k + 1;
    for (std::size_t i = n - 1; i-- > 0;) {
        while (k >= lower && orient2d(h[k - 2], h[k - 1], pts[i]) <= 0) --k;
        h[k++] = pts[i];
    }
    h.resize(k - 1);
    return h;
}

// 2D hull of coplanar 3D points, in the plane with the given normal; returns
// the cycle oriented so that it is CCW seen from the normal side.
inline std::vector<RatVec> hull_in_plane(const std::vector<RatVec>& pts, const RatVec& normal) {
    // Drop the dominant axis of the normal.
    int drop = 0;
    Rat best = rat_abs(normal[0]);
    for (int k = 1; k < 3; ++k)
        if (rat_abs(normal[k]) > best) {
            best = rat_abs(normal[k]);
            drop = k;
        }
    const int u = (drop + 1) % 3, v = (drop + 2) % 3;
    std::map<std::pair<Rat, Rat>, RatVec> back;
    std::vector<RatVec> flat;
    flat.reserve(pts.size());
    for (const auto& p : pts) {
        back[{p[u], p[v]}] = p;
        flat.push_back(RatVec{p[u], p[v], Rat(0)});
    }
    std::vector<RatVec> cycle2 = hull2d_points(std::move(flat));
    std::vector<RatVec> cycle;
    cycle.reserve(cycle2.size());
    for (const auto& q : cycle2) cycle.push_back(back.at({q[0], q[1]}));
    // hull2d is CCW in (u, v); that is CCW seen from +axis(drop). Flip if the
    // normal points the other way.
    if (normal[drop] < 0) std::reverse(cycle.begin(), cycle.end());
    return cycle;
}

// --- 3D incremental hull -----------------------------------------------------

struct Hull3 {
    struct Tri {
        int a, b, c;
        Plane plane;
        double dn[3], doff, dmag;
        bool alive = true;
    };

    const std::vector<RatVec>& pts;
    std::vector<DPoint> dpts;
    std::vector<Tri> tris;
    RatVec interior{Rat(0), Rat(0), Rat(0)};

    explicit Hull3(const std::vector<RatVec>& points) : pts(points) {
        dpts.reserve(pts.size());
        for (const auto& p : pts) dpts.push_back(approx(p));
    }

    // +1 above (outside), 0 on, -1 below.
    int side(const Tri& t, int q) const {
        const DPoint& d = dpts[static_cast<std::size_t>(q)];
        const double val = t.dn[0] * d.x[0] + t.dn[1] * d.x[1] + t.dn[2] * d.x[2] - t.doff;
        const double bound =
            1e-12 * (std::abs(t.dn[0] * d.x[0]) + std::abs(t.dn[1] * d.x[1]) +
                     std::abs(t.dn[2] * d.x[2]) + std::abs(t.doff) + t.dmag);
        if (val > bound) return 1;
        if (val < -bound) return -1;
        return sign_of(t.plane.eval(pts[static_cast<std::size_t>(q)]));
    }

    Tri make_tri(int a, int b, int c) {
        Tri t{a, b, c, {}, {0, 0, 0}, 0, 0, true};
        const RatVec n = rv_cross(rv_sub(pts[static_cast<std::size_t>(b)], pts[static_cast<std::size_t>(a)]),
                                  rv_sub(pts[static_cast<std::size_t>(c)], pts[static_cast<std::size_t>(a)]));
        Rat off = rv_dot(n, pts[static_cast<std::size_t>(a)]);
        const Rat at_interior = rv_dot(n, interior) - off;
        if (at_interior == 0) throw Error(Errc::degenerate, "hull3d: interior point on facet plane");
        if (at_interior > 0) {
            t.plane.n = {-n[0], -n[1], -n[2]};
            t.plane.off = -off;
            std::swap(t.b, t.c);
        } else {
            t.plane.n = n;
            t.plane.off = off;
        }
        for (int k = 0; k < 3; ++k) t.dn[k] = to_double(t.plane.n[k]);
        t.doff = to_double(t.plane.off);
        t.dmag = std::abs(t.dn[0]) + std::abs(t.dn[1]) + std::abs(t.dn[2]) + std::abs(t.doff);
        return t;
    }

    void run() {
        const int n = static_cast<int>(pts.size());
        // Initial affinely independent quadruple.
        int i1 = -1, i2 = -1, i3 = -1;
        for (int i = 1; i < n && i1 < 0; ++i)
            if (pts[static_cast<std::size_t>(i)] != pts[0]) i1 = i;
        if (i1 < 0) throw Error(Errc::degenerate, "hull3d: all points equal");
        for (int i = i1 + 1; i < n && i2 < 0; ++i) {
            const RatVec cr = rv_cross(rv_sub(pts[static_cast<std::size_t>(i1)], pts[0]),
                                       rv_sub(pts[static_cast<std::size_t>(i)], pts[0]));
            if (cr[0] != 0 || cr[1] != 0 || cr[2] != 0) i2 = i;
        }
        if (i2 < 0) throw Error(Errc::degenerate, "hull3d: points are collinear");
        for (int i = i2 + 1; i < n && i3 < 0; ++i) {
            if (orient3d(pts[0], pts[static_cast<std::size_t>(i1)], pts[static_cast<std::size_t>(i2)],
                         pts[static_cast<std::size_t>(i)], dpts[0], dpts[static_cast<std::size_t>(i1)],
                         dpts[static_cast<std::size_t>(i2)], dpts[static_cast<std::size_t>(i)]) != 0)
                i3 = i;
        }
        if (i3 < 0) throw Error(Errc::degenerate, "hull3d: points are coplanar");

        for (int k = 0; k < 3; ++k)
            interior[k] = (pts[0][k] + pts[static_cast<std::size_t>(i1)][k] +
                           pts[static_cast<std::size_t>(i2)][k] + pts[static_cast<std::size_t>(i3)][k]) /
                          4;
        tris.push_back(make_tri(0, i1, i2));
        tris.push_back(make_tri(0, i1, i3));
        tris.push_back(make_tri(0, i2, i3));
        tris.push_back(make_tri(i1, i2, i3));

        // assigned[p] = index of a live triangle p is strictly above; -1 done.
        std::vector<int> assigned(static_cast<std::size_t>(n), -1);
        auto find_above = [&](int p) -> int {
            for (std::size_t t = 0; t < tris.size(); ++t)
                if (tris[t].alive && side(tris[t], p) > 0) return static_cast<int>(t);
            return -1;
        };
        std::vector<int> pending;
        for (int p = 0; p < n; ++p) {
            if (p == 0 || p == i1 || p == i2 || p == i3) continue;
            assigned[static_cast<std::size_t>(p)] = find_above(p);
            if (assigned[static_cast<std::size_t>(p)] >= 0) pending.push_back(p);
        }

        while (!pending.empty()) {
            // Farthest pending point from its triangle (double estimate).
            std::size_t pick = 0;
            double best = -1;
            for (std::size_t i = 0; i < pending.size(); ++i) {
                const int p = pending[i];
                const Tri& t = tris[static_cast<std::size_t>(assigned[static_cast<std::size_t>(p)])];
                const DPoint& d = dpts[static_cast<std::size_t>(p)];
                const double v =
                    (t.dn[0] * d.x[0] + t.dn[1] * d.x[1] + t.dn[2] * d.x[2] - t.doff) / (t.dmag + 1e-300);
                if (v > best) {
                    best = v;
                    pick = i;
                }
            }
            const int q = pending[pick];
            pending.erase(pending.begin() + static_cast<std::ptrdiff_t>(pick));

            // Visible triangles (full scan is sound regardless of adjacency).
            std::vector<int> visible;
            for (std::size_t t = 0; t < tris.size(); ++t)
                if (tris[t].alive && side(tris[t], q) > 0) visible.push_back(static_cast<int>(t));
            if (visible.empty()) {
                assigned[static_cast<std::size_t>(q)] = -1;
                continue;
            }

            // Horizon: directed edges of visible triangles whose twin is not visible.
            std::map<std::pair<int, int>, int> edge_vis;  // directed edge -> count
            auto mark = [&](int a, int b) { ++edge_vis[{a, b}]; };
            for (const int t : visible) {
                mark(tris[static_cast<std::size_t>(t)].a, tris[static_cast<std::size_t>(t)].b);
                mark(tris[static_cast<std::size_t>(t)].b, tris[static_cast<std::size_t>(t)].c);
                mark(tris[static_cast<std::size_t>(t)].c, tris[static_cast<std::size_t>(t)].a);
            }
            std::vector<std::pair<int, int>> horizon;
            for (const auto& [e, cnt] : edge_vis) {
                (void)cnt;
                if (edge_vis.find({e.second, e.first}) == edge_vis.end()) horizon.push_back(e);
            }
            for (const int t : visible) tris[static_cast<std::size_t>(t)].alive = false;
            std::vector<int> fresh;
            for (const auto& [a, b] : horizon) {
                fresh.push_back(static_cast<int>(tris.size()));
                tris.push_back(make_tri(q, a, b));
            }

            // Reassign orphans: try fresh triangles first, then everything.
            std::vector<int> still;
            for (const int p : pending) {
                int& slot = assigned[static_cast<std::size_t>(p)];
                if (tris[static_cast<std::size_t>(slot)].alive && side(tris[static_cast<std::size_t>(slot)], p) > 0) {
                    still.push_back(p);
                    continue;
                }
                slot = -1;
                for (const int t : fresh)
                    if (side(tris[static_cast<std::size_t>(t)], p) > 0) {
                        slot = t;
                        break;
                    }
                if (slot < 0) slot = find_above(p);
                if (slot >= 0) still.push_back(p);
            }
            pending = std::move(still);
        }
    }
};

inline ConvexPolytope finish_hull3(const std::vector<RatVec>& pts, Hull3& hull) {
    ConvexPolytope out;
    out.dim = 3;
    std::map<Plane, std::vector<RatVec>> groups;
    for (const auto& t : hull.tris) {
        if (!t.alive) continue;
        auto& g = groups[t.plane.canonical()];
        for (const int v : {t.a, t.b, t.c}) g.push_back(pts[static_cast<std::size_t>(v)]);
    }
    std::vector<RatVec> verts;
    for (auto& [plane, members] : groups) {
        std::sort(members.begin(), members.end());
        members.erase(std::unique(members.begin(), members.end()), members.end());
        ConvexPolytope::Face face;
        face.plane = plane;
        face.poly = hull_in_plane(members, plane.n);
        verts.insert(verts.end(), face.poly.begin(), face.poly.end());
        out.faces.push_back(std::move(face));
    }
    std::sort(verts.begin(), verts.end());
    verts.erase(std::unique(verts.begin(), verts.end()), verts.end());
    out.vertices = std::move(verts);
    return out;
}

}  // namespace detail

// Convex hull of a point set, exact. Degenerate inputs (all points equal /
// collinear / coplanar in 3D) come back flagged with zero volume and the
// lower-dimensional extreme set.
inline ConvexPolytope hull_points(int dim, std::vector<RatVec> pts) {
    if (pts.empty()) throw Error(Errc::empty_input, "hull_points: empty input");
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    ConvexPolytope out;
    out.dim = dim;
    if (dim == 1) {
        out.vertices = {pts.front(), pts.back()};
        if (pts.front() == pts.back()) {
            out.vertices = {pts.front()};
            out.degenerate = true;
        }
        return out;
    }
    if (dim == 2) {
        out.vertices = detail::hull2d_points(std::move(pts));
        if (out.vertices.size() <= 2) out.degenerate = true;
        return out;
    }
    if (pts.size() > 200000) throw Error(Errc::capacity, "hull_points: too many candidate points");
    try {
        detail::Hull3 h(pts);
        h.run();
        return detail::finish_hull3(pts, h);
    } catch (const Error& e) {
        if (e.code() != Errc::degenerate) throw;
        // Collinear or coplanar: salvage the planar extreme set.
        out.degenerate = true;
        RatVec n{Rat(0), Rat(0), Rat(0)};
        for (std::size_t i = 1; i < pts.size() && n == RatVec{Rat(0), Rat(0), Rat(0)}; ++i)
            for (std::size_t j = i + 1; j < pts.size(); ++j) {
                n = rv_cross(rv_sub(pts[i], pts[0]), rv_sub(pts[j], pts[0]));
                if (n != RatVec{Rat(0), Rat(0), Rat(0)}) break;
            }
        if (n == RatVec{Rat(0), Rat(0), Rat(0)}) {
            out.vertices = {pts.front(), pts.back()};  // collinear (or single)
            if (pts.size() == 1) out.vertices = {pts.front()};
        } else {
            out.vertices = detail::hull_in_plane(pts, n);
        }
        return out;
    }
}

// Convex hull of a grid set: hull of all 2^d cell corners. Only the top and
// bottom corner layers of each column can be extreme, which keeps the
// candidate set small.
inline ConvexPolytope hull(const GridSet& g) {
    if (g.empty()) throw Error(Errc::empty_input, "hull: empty grid set");
    const int d = g.dim();
    const Rat& h = g.cell_size();
    std::vector<RatVec> pts;
    for (std::int64_t c = 0; c < g.columns(); ++c) {
        const std::uint64_t* w = g.col_words(c);
        std::int64_t vmin = -1, vmax = -1;
        for (std::int64_t word = 0; word < g.words_per_col(); ++word) {
            if (w[word] == 0) continue;
            if (vmin < 0) vmin = word * 64 + std::countr_zero(w[word]);
            vmax = word * 64 + 63 - std::countl_zero(w[word]);
        }
        if (vmin < 0) continue;
        const CoordVec base = g.col_base(c);
        const Coord lo = static_cast<Coord>(g.vert_lo() + vmin);
        const Coord hi = static_cast<Coord>(g.vert_lo() + vmax + 1);
        // Corners of the bottom and top cells of the column.
        const int base_dims = d - 1;
        for (int mask = 0; mask < (1 << base_dims); ++mask) {
            RatVec p{Rat(0), Rat(0), Rat(0)};
            for (int k = 0; k < base_dims; ++k) p[k] = Rat(base[k] + ((mask >> k) & 1)) * h;
            p[d - 1] = Rat(lo) * h;
            pts.push_back(p);
            p[d - 1] = Rat(hi) * h;
            pts.push_back(p);
        }
    }
    return hull_points(d, std::move(pts));
}

inline Rat volume(const ConvexPolytope& p) {
    if (p.degenerate) return Rat(0);
    if (p.dim == 1) return p.vertices.back()[0] - p.vertices.front()[0];
    if (p.dim == 2) {
        Rat a = 0;
        const auto& v = p.vertices;
        for (std::size_t i = 0; i < v.size(); ++i) {
            const auto& s = v[i];
            const auto& t = v[(i + 1) % v.size()];
            a += s[0] * t[1] - t[0] * s[1];
        }
        return a / 2;
    }
    Rat vol = 0;
    for (const auto& f : p.faces) {
        for (std::size_t i = 1; i + 1 < f.poly.size(); ++i)
            vol += rv_dot(rv_cross(f.poly[i], f.poly[i + 1]), f.poly[0]);
    }
    return vol / 6;
}

inline RatVec centroid(const ConvexPolytope& p) {
    if (p.dim == 1) {
        return {(p.vertices.front()[0] + p.vertices.back()[0]) / 2, Rat(0), Rat(0)};
    }
    if (p.dim == 2) {
        Rat a = 0, cx = 0, cy = 0;
        const auto& v = p.vertices;
        if (p.degenerate) {
            RatVec c{Rat(0), Rat(0), Rat(0)};
            for (const auto& q : v) {
                c[0] += q[0];
                c[1] += q[1];
            }
            c[0] /= static_cast<std::int64_t>(v.size());
            c[1] /= static_cast<std::int64_t>(v.size());
            return c;
        }
        for (std::size_t i = 0; i < v.size(); ++i) {
            const auto& s = v[i];
            const auto& t = v[(i + 1) % v.size()];
            const Rat w = s[0] * t[1] - t[0] * s[1];
            a += w;
            cx += (s[0] + t[0]) * w;
            cy += (s[1] + t[1]) * w;
        }
        return {cx / (a * 3), cy / (a * 3), Rat(0)};
    }
    if (p.degenerate) throw Error(Errc::degenerate, "centroid: degenerate 3D polytope");
    Rat vol = 0;
    RatVec acc{Rat(0), Rat(0), Rat(0)};
    for (const auto& f : p.faces) {
        for (std::size_t i = 1; i + 1 < f.poly.size(); ++i) {
            const Rat w = rv_dot(rv_cross(f.poly[i], f.poly[i + 1]), f.poly[0]);
            vol += w;
            for (int k = 0; k < 3; ++k)
                acc[k] += (f.poly[0][k] + f.poly[i][k] + f.poly[i + 1][k]) * w;  // tet centroid * 4
        }
    }
    if (vol == 0) throw Error(Errc::degenerate, "centroid: zero volume");
    for (int k = 0; k < 3; ++k) acc[k] /= vol * 4;
    return acc;
}

// Closed containment test.
inline bool contains_point(const ConvexPolytope& p, const RatVec& x) {
    if (p.dim == 1) return p.vertices.front()[0] <= x[0] && x[0] <= p.vertices.back()[0];
    if (p.dim == 2) {
        const auto& v = p.vertices;
        if (p.degenerate) {
            if (v.size() == 1) return x == v[0];
            // Segment containment.
            const RatVec d = rv_sub(v[1], v[0]), e = rv_sub(x, v[0]);
            if (d[0] * e[1] - d[1] * e[0] != 0) return false;
            const Rat len2 = rv_dot(d, d), t = rv_dot(d, e);
            return t >= 0 && t <= len2;
        }
        for (std::size_t i = 0; i < v.size(); ++i) {
            const auto& s = v[i];
            const auto& t = v[(i + 1) % v.size()];
            const Rat cr = (t[0] - s[0]) * (x[1] - s[1]) - (t[1] - s[1]) * (x[0] - s[0]);
            if (cr < 0) return false;
        }
        return true;
    }
    if (p.degenerate) throw Error(Errc::degenerate, "contains_point: degenerate 3D polytope");
    for (const auto& f : p.faces)
        if (f.plane.eval(x) > 0) return false;
    return true;
}

// x -> M x + c with rational entries; M must be invertible.
inline ConvexPolytope affine_image(const ConvexPolytope& p, const std::array<RatVec, 3>& m,
                                   const RatVec& c) {
    auto map = [&](const RatVec& v) {
        RatVec out = c;
        for (int r = 0; r < 3; ++r) out[r] += rv_dot(m[static_cast<std::size_t>(r)], v);
        return out;
    };
    ConvexPolytope out;
    out.dim = p.dim;
    out.degenerate = p.degenerate;
    out.vertices.reserve(p.vertices.size());
    for (const auto& v : p.vertices) out.vertices.push_back(map(v));
    if (p.dim == 1) {
        std::sort(out.vertices.begin(), out.vertices.end());
        return out;
    }
    if (p.dim == 2) {
        const Rat det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        if (det == 0) throw Error(Errc::degenerate, "affine_image: singular map");
        if (det < 0) std::reverse(out.vertices.begin(), out.vertices.end());
        return out;
    }
    const Rat det = rv_dot(rv_cross(m[0], m[1]), m[2]);
    if (det == 0) throw Error(Errc::degenerate, "affine_image: singular map");
    if (p.degenerate) return out;
    const RatVec ic = map(centroid(p));
    for (const auto& f : p.faces) {
        ConvexPolytope::Face nf;
        nf.poly.reserve(f.poly.size());
        for (const auto& v : f.poly) nf.poly.push_back(map(v));
        if (det < 0) std::reverse(nf.poly.begin(), nf.poly.end());
        RatVec n{Rat(0), Rat(0), Rat(0)};
        for (std::size_t i = 1; i + 1 < nf.poly.size() && n == RatVec{Rat(0), Rat(0), Rat(0)}; ++i)
            n = rv_cross(rv_sub(nf.poly[i], nf.poly[0]), rv_sub(nf.poly[i + 1], nf.poly[0]));
        Rat off = rv_dot(n, nf.poly[0]);
        if (rv_dot(n, ic) - off > 0) {
            n = {-n[0], -n[1], -n[2]};
            off = -off;
            std::reverse(nf.poly.begin(), nf.poly.end());
        }
        nf.plane = Plane{n, off};
        out.faces.push_back(std::move(nf));
    }
    return out;
}

inline ConvexPolytope translate_polytope(const ConvexPolytope& p, const RatVec& c) {
    static const std::array<RatVec, 3> id{RatVec{Rat(1), Rat(0), Rat(0)}, RatVec{Rat(0), Rat(1), Rat(0)},
                                          RatVec{Rat(0), Rat(0), Rat(1)}};
    return affine_image(p, id, c);
}

inline ConvexPolytope scale_polytope(const ConvexPolytope& p, const Rat& s, const RatVec& about) {
    if (s <= 0) throw Error(Errc::contract, "scale_polytope: scale must be positive");
    const std::array<RatVec, 3> m{RatVec{s, Rat(0), Rat(0)}, RatVec{Rat(0), s, Rat(0)},
                                  RatVec{Rat(0), Rat(0), s}};
    const RatVec c{about[0] * (Rat(1) - s), about[1] * (Rat(1) - s), about[2] * (Rat(1) - s)};
    return affine_image(p, m, c);
}

inline ConvexPolytope hull_of_union(const ConvexPolytope& a, const ConvexPolytope& b) {
    if (a.dim != b.dim) throw Error(Errc::dimension, "hull_of_union: dimension mismatch");
    std::vector<RatVec> pts = a.vertices;
    pts.insert(pts.end(), b.vertices.begin(), b.vertices.end());
    return hull_points(a.dim, std::move(pts));
}

// Area of the intersection of two convex polygons (Sutherland-Hodgman).
inline Rat polygon_intersection_area(const ConvexPolytope& a, const ConvexPolytope& b) {
    if (a.dim != 2 || b.dim != 2) throw Error(Errc::dimension, "polygon_intersection_area: dim 2 only");
    if (a.degenerate || b.degenerate) return Rat(0);
    std::vector<RatVec> poly = a.vertices;
    const auto& clip = b.vertices;
    for (std::size_t i = 0; i < clip.size() && !poly.empty(); ++i) {
        const RatVec& s = clip[i];
        const RatVec& t = clip[(i + 1) % clip.size()];
        auto inside = [&](const RatVec& q) {
            return (t[0] - s[0]) * (q[1] - s[1]) - (t[1] - s[1]) * (q[0] - s[0]) >= 0;
        };
        auto cross_at = [&](const RatVec& p1, const RatVec& p2) {
            const Rat d1 = (t[0] - s[0]) * (p1[1] - s[1]) - (t[1] - s[1]) * (p1[0] - s[0]);
            const Rat d2 = (t[0] - s[0]) * (p2[1] - s[1]) - (t[1] - s[1]) * (p2[0] - s[0]);
            const Rat w = d1 / (d1 - d2);
            return RatVec{p1[0] + (p2[0] - p1[0]) * w, p1[1] + (p2[1] - p1[1]) * w, Rat(0)};
        };
        std::vector<RatVec> next;
        for (std::size_t j = 0; j < poly.size(); ++j) {
            const RatVec& cur = poly[j];
            const RatVec& prev = poly[(j + poly.size() - 1) % poly.size()];
            const bool cin = inside(cur), pin = inside(prev);
            if (cin) {
                if (!pin) next.push_back(cross_at(prev, cur));
                next.push_back(cur);
            } else if (pin) {
                next.push_back(cross_at(prev, cur));
            }
        }
        poly = std::move(next);
    }
    if (poly.size() < 3) return Rat(0);
    Rat area = 0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const auto& s = poly[i];
        const auto& t = poly[(i + 1) % poly.size()];
        area += s[0] * t[1] - t[0] * s[1];
    }
    return rat_abs(area) / 2;
}

// Outer rasterization: every cell whose closed box meets P (separating-axis
// test), so rasterize(P, h) covers P pointwise.
inline GridSet rasterize(const ConvexPolytope& p, const Rat& h) {
    if (h <= 0) throw Error(Errc::contract, "rasterize: cell size must be positive");
    if (p.vertices.empty()) throw Error(Errc::empty_input, "rasterize: empty polytope");
    const int d = p.dim;
    std::array<Rat, 3> lo{Rat(0), Rat(0), Rat(0)}, hi{Rat(0), Rat(0), Rat(0)};
    for (int k = 0; k < d; ++k) {
        lo[k] = hi[k] = p.vertices[0][k];
        for (const auto& v : p.vertices) {
            lo[k] = std::min(lo[k], v[k]);
            hi[k] = std::max(hi[k], v[k]);
        }
    }
    Box box;
    for (int k = 0; k < d; ++k) {
        box.lo[k] = checked_coord(ifloor(lo[k] / h));
        const std::int64_t top = iceil(hi[k] / h);
        box.ext[k] = static_cast<std::int32_t>(std::max<std::int64_t>(1, top - box.lo[k]));
    }

    // Separating axes: polytope face normals, and for d = 3 also the cross
    // products of polytope edges with the coordinate axes. A cell is kept
    // when no axis strictly separates it from P.
    struct Axis {
        RatVec dir;
        Rat pmin, pmax;
    };
    std::vector<Axis> axes;
    auto add_axis = [&](const RatVec& dir) {
        if (dir[0] == 0 && dir[1] == 0 && dir[2] == 0) return;
        Axis ax;
        ax.dir = dir;
        ax.pmin = ax.pmax = rv_dot(dir, p.vertices[0]);
        for (const auto& v : p.vertices) {
            const Rat val = rv_dot(dir, v);
            ax.pmin = std::min(ax.pmin, val);
            ax.pmax = std::max(ax.pmax, val);
        }
        axes.push_back(std::move(ax));
    };
    if (d == 2) {
        const auto& v = p.vertices;
        for (std::size_t i = 0; i < v.size(); ++i) {
            const RatVec e = rv_sub(v[(i + 1) % v.size()], v[i]);
            add_axis(RatVec{-e[1], e[0], Rat(0)});
        }
    } else if (d == 3) {
        for (const auto& f : p.faces) add_axis(f.plane.n);
        std::vector<RatVec> edges;
        for (const auto& f : p.faces)
            for (std::size_t i = 0; i < f.poly.size(); ++i)
                edges.push_back(rv_sub(f.poly[(i + 1) % f.poly.size()], f.poly[i]));
        for (const auto& e : edges)
            for (int k = 0; k < 3; ++k) {
                RatVec unit{Rat(0), Rat(0), Rat(0)};
                unit[k] = 1;
                add_axis(rv_cross(e, unit));
            }
    }

    GridSet::Builder bld(d, h, box);
    CoordVec c{0, 0, 0};
    std::function<void(int)> scan = [&](int k) {
        if (k == d) {
            // Axis-aligned overlap (cell box vs vertex extents).
            for (int a = 0; a < d; ++a) {
                const Rat clo = Rat(c[a]) * h, chi = Rat(c[a] + 1) * h;
                if (hi[a] < clo || lo[a] > chi) return;
            }
            for (const auto& ax : axes) {
                Rat cmin = 0, cmax = 0;
                for (int a = 0; a < d; ++a) {
                    const Rat v0 = ax.dir[a] * Rat(c[a]) * h, v1 = ax.dir[a] * Rat(c[a] + 1) * h;
                    cmin += std::min(v0, v1);
                    cmax += std::max(v0, v1);
                }
                if (ax.pmax < cmin || ax.pmin > cmax) return;
            }
            bld.set_cell(c);
            return;
        }
        for (Coord i = box.lo[k]; i < box.lo[k] + box.ext[k]; ++i) {
            c[k] = i;
            scan(k + 1);
        }
    };
    scan(0);
    return std::move(bld).finish();
}

// Mass of G sitting over fibers of measure at most eps.
inline Rat tail_measure(const GridSet& g, const Rat& eps) {
    if (g.dim() < 2) throw Error(Errc::dimension, "tail_measure: requires dim >= 2");
    std::int64_t thin = 0;
    for (std::int64_t c = 0; c < g.columns(); ++c) {
        const std::int64_t k = g.column_popcount(c);
        if (k > 0 && Rat(k) * g.cell_size() <= eps) thin += k;
    }
    return Rat(thin) * rat_pow(g.cell_size(), g.dim());
}

struct HomothetyFit {
    ConvexPolytope body;  // shared shape K
    Rat alpha, beta;      // A-side and B-side scales
    RatVec u, v;          // A-side and B-side anchors: side ⊆ scale*K + anchor
    Rat excess_a, excess_b;
};

// Normalizes each body to unit volume about its centroid, takes K as the
// hull of the union, and reports the homothety parameters that put K back
// over each input. Containment is exact by construction; the d-th-root unit
// scale is rationalized, so |K| is within 1e-6 of 1 rather than exactly 1.
inline HomothetyFit homothety_align(const ConvexPolytope& pa, const ConvexPolytope& pb) {
    if (pa.dim != pb.dim) throw Error(Errc::dimension, "homothety_align: dimension mismatch");
    if (pa.degenerate || pb.degenerate)
        throw Error(Errc::degenerate, "homothety_align: degenerate input body");
    const int d = pa.dim;
    const Rat va = volume(pa), vb = volume(pb);
    if (va <= 0 || vb <= 0) throw Error(Errc::degenerate, "homothety_align: zero volume");
    HomothetyFit fit;
    const RatVec ca = centroid(pa), cb = centroid(pb);
    const Rat sa = rationalize(1.0 / root_d(va, d));
    const Rat sb = rationalize(1.0 / root_d(vb, d));
    if (sa <= 0 || sb <= 0) throw Error(Errc::degenerate, "homothety_align: scale underflow");
    const ConvexPolytope na = scale_polytope(translate_polytope(pa, rv_scale(ca, Rat(-1))), sa,
                                             RatVec{Rat(0), Rat(0), Rat(0)});
    const ConvexPolytope nb = scale_polytope(translate_polytope(pb, rv_scale(cb, Rat(-1))), sb,
                                             RatVec{Rat(0), Rat(0), Rat(0)});
    fit.body = hull_of_union(na, nb);
    fit.alpha = Rat(1) / sa;
    fit.beta = Rat(1) / sb;
    fit.u = ca;
    fit.v = cb;
    const Rat vk = volume(fit.body);
    fit.excess_a = vk * rat_pow(fit.alpha, d) - va;
    fit.excess_b = vk * rat_pow(fit.beta, d) - vb;
    return fit;
}

}  // namespace bm
