#pragma once

// Voxel model of a bounded measurable subset of R^d, d in {1,2,3}.
//
// A set is a finite union of half-open axis-aligned cells on the lattice of
// pitch h: cell i covers prod_k [i_k*h, (i_k+1)*h). Cells tile space without
// overlap, so measure is exactly (cell count) * h^d as a rational.
//
// Storage is a dense bitmask over a bounding box. The last axis is the
// "vertical" axis (the R^1 factor in the R^{d-1} x R^1 split); bits of one
// vertical column are contiguous and padded to whole words, which makes
// column-wise sums, smears and symmetrizations plain word operations.
//
// GridSets are immutable after construction; every operation returns a new
// value. Results are independent of any internal iteration order.

#include "bm/rational.hpp"
#include "bm/stepfn.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <functional>
#include <numeric>
#include <vector>

namespace bm {

inline constexpr int kMaxDim = 3;
using Coord = std::int32_t;
using CoordVec = std::array<Coord, kMaxDim>;  // unused trailing axes are 0

inline constexpr Coord kCoordLimit = Coord{1} << 24;
inline constexpr std::int64_t kBitLimit = std::int64_t{1} << 31;

inline Coord checked_coord(std::int64_t v) {
    if (v < -kCoordLimit || v > kCoordLimit)
        throw Error(Errc::capacity, "lattice coordinate out of range: " + std::to_string(v));
    return static_cast<Coord>(v);
}

struct Box {
    CoordVec lo{0, 0, 0};
    std::array<std::int32_t, kMaxDim> ext{1, 1, 1};

    bool contains(const CoordVec& c, int dim) const {
        for (int k = 0; k < dim; ++k)
            if (c[k] < lo[k] || c[k] >= lo[k] + ext[k]) return false;
        return true;
    }
};

class GridSet;
GridSet translate(const GridSet& g, const CoordVec& v);

class GridSet {
public:
    // --- construction -----------------------------------------------------

    GridSet() : GridSet(1, Rat(1)) {}

    GridSet(int dim, Rat h) : dim_(dim), h_(std::move(h)) {
        if (dim_ < 1 || dim_ > kMaxDim) throw Error(Errc::dimension, "GridSet: dim must be 1, 2 or 3");
        if (h_ <= 0) throw Error(Errc::contract, "GridSet: cell size must be positive");
        init_geometry();
    }

    // Mutable staging area for algorithms that assemble a result bit by bit.
    struct Builder {
        int dim;
        Rat h;
        Box box;
        std::int64_t wpc = 0;
        std::int64_t cols = 0;
        std::vector<std::uint64_t> w;

        Builder(int dim_, Rat h_, const Box& box_) : dim(dim_), h(std::move(h_)), box(box_) {
            cols = 1;
            for (int k = 0; k + 1 < dim; ++k) cols *= box.ext[k];
            wpc = (box.ext[dim - 1] + 63) / 64;
            const std::int64_t bits = cols * wpc * 64;
            if (bits > kBitLimit) throw Error(Errc::capacity, "grid bounding box too large");
            w.assign(static_cast<std::size_t>(cols * wpc), 0);
        }

        std::int64_t col_id(const CoordVec& base) const {
            std::int64_t id = 0;
            for (int k = 0; k + 1 < dim; ++k) id = id * box.ext[k] + (base[k] - box.lo[k]);
            return id;
        }

        void set_cell(const CoordVec& c) {
            if (!box.contains(c, dim)) throw Error(Errc::contract, "Builder: cell outside box");
            const std::int64_t v = c[dim - 1] - box.lo[dim - 1];
            w[static_cast<std::size_t>(col_id(c) * wpc + (v >> 6))] |= std::uint64_t{1} << (v & 63);
        }

        // Sets the vertical run [start, start+len) in the column over `base`.
        void set_run(const CoordVec& base, Coord start, std::int64_t len) {
            if (len <= 0) return;
            CoordVec probe = base;
            probe[dim - 1] = start;
            if (!box.contains(probe, dim)) throw Error(Errc::contract, "Builder: run start outside box");
            probe[dim - 1] = checked_coord(std::int64_t{start} + len - 1);
            if (!box.contains(probe, dim)) throw Error(Errc::contract, "Builder: run end outside box");
            std::uint64_t* col = w.data() + col_id(base) * wpc;
            std::int64_t v = start - box.lo[dim - 1];
            std::int64_t remaining = len;
            while (remaining > 0) {
                const std::int64_t word = v >> 6, bit = v & 63;
                const std::int64_t take = std::min<std::int64_t>(64 - bit, remaining);
                const std::uint64_t mask =
                    (take == 64) ? ~std::uint64_t{0} : (((std::uint64_t{1} << take) - 1) << bit);
                col[word] |= mask;
                v += take;
                remaining -= take;
            }
        }

        GridSet finish(bool tighten = true) && {
            GridSet g(dim, std::move(h));
            g.box_ = box;
            g.w_ = std::move(w);
            g.init_geometry();
            g.recount();
            if (tighten) g.tighten();
            return g;
        }
    };

    static GridSet from_cells(int dim, const Rat& h, const std::vector<CoordVec>& cells) {
        if (cells.empty()) return GridSet(dim, h);
        Box box;
        for (int k = 0; k < dim; ++k) {
            Coord lo = cells[0][k], hi = cells[0][k];
            for (const auto& c : cells) {
                lo = std::min(lo, c[k]);
                hi = std::max(hi, c[k]);
            }
            box.lo[k] = lo;
            box.ext[k] = hi - lo + 1;
        }
        Builder b(dim, h, box);
        for (const auto& c : cells) b.set_cell(c);
        return std::move(b).finish(false);
    }

    // --- basic queries ------------------------------------------------------

    int dim() const { return dim_; }
    const Rat& cell_size() const { return h_; }
    const Box& box() const { return box_; }
    bool empty() const { return count_ == 0; }
    std::int64_t cell_count() const { return count_; }

    Rat measure() const { return Rat(count_) * rat_pow(h_, dim_); }

    std::int64_t columns() const { return cols_; }
    std::int64_t words_per_col() const { return wpc_; }
    const std::uint64_t* col_words(std::int64_t col) const { return w_.data() + col * wpc_; }
    Coord vert_lo() const { return box_.lo[dim_ - 1]; }
    std::int32_t vert_ext() const { return box_.ext[dim_ - 1]; }

    CoordVec col_base(std::int64_t col) const {
        CoordVec base{0, 0, 0};
        for (int k = dim_ - 2; k >= 0; --k) {
            base[k] = box_.lo[k] + static_cast<Coord>(col % box_.ext[k]);
            col /= box_.ext[k];
        }
        return base;
    }

    // -1 when the base point lies outside the bounding box.
    std::int64_t col_id(const CoordVec& base) const {
        std::int64_t id = 0;
        for (int k = 0; k + 1 < dim_; ++k) {
            if (base[k] < box_.lo[k] || base[k] >= box_.lo[k] + box_.ext[k]) return -1;
            id = id * box_.ext[k] + (base[k] - box_.lo[k]);
        }
        return id;
    }

    bool contains(const CoordVec& c) const {
        if (!box_.contains(c, dim_)) return false;
        const std::int64_t v = c[dim_ - 1] - vert_lo();
        return (w_[static_cast<std::size_t>(col_id(c) * wpc_ + (v >> 6))] >> (v & 63)) & 1;
    }

    std::int64_t column_popcount(std::int64_t col) const {
        const std::uint64_t* p = col_words(col);
        std::int64_t n = 0;
        for (std::int64_t i = 0; i < wpc_; ++i) n += std::popcount(p[i]);
        return n;
    }

    // Calls fn(base, start, len) for each maximal vertical run, in canonical
    // column-major order. start is an absolute lattice coordinate.
    template <typename Fn>
    void for_each_run(Fn&& fn) const {
        for (std::int64_t c = 0; c < cols_; ++c) {
            const std::uint64_t* p = col_words(c);
            const CoordVec base = col_base(c);
            std::int64_t run_start = -1;
            for (std::int64_t word = 0; word < wpc_; ++word) {
                const std::uint64_t bits = p[word];
                const std::int64_t pos = word * 64;
                int i = 0;
                while (i < 64) {
                    if (run_start < 0) {
                        const std::uint64_t rem = bits >> i;
                        if (rem == 0) break;
                        i += std::countr_zero(rem);
                        run_start = pos + i;
                    } else {
                        const std::uint64_t rem = (~bits) >> i;
                        if (rem == 0) break;  // run continues into next word
                        i += std::countr_zero(rem);
                        fn(base, static_cast<Coord>(vert_lo() + run_start), pos + i - run_start);
                        run_start = -1;
                    }
                }
            }
            if (run_start >= 0)
                fn(base, static_cast<Coord>(vert_lo() + run_start), vert_ext() - run_start);
        }
    }

    template <typename Fn>
    void for_each_cell(Fn&& fn) const {
        for_each_run([&](const CoordVec& base, Coord start, std::int64_t len) {
            CoordVec c = base;
            for (std::int64_t i = 0; i < len; ++i) {
                c[dim_ - 1] = start + static_cast<Coord>(i);
                fn(c);
            }
        });
    }

    std::vector<CoordVec> cells() const {
        std::vector<CoordVec> out;
        out.reserve(static_cast<std::size_t>(count_));
        for_each_cell([&](const CoordVec& c) { out.push_back(c); });
        return out;
    }

    std::int64_t run_count() const {
        std::int64_t n = 0;
        for_each_run([&](const CoordVec&, Coord, std::int64_t) { ++n; });
        return n;
    }

    bool operator==(const GridSet& other) const {
        if (dim_ != other.dim_ || h_ != other.h_ || count_ != other.count_) return false;
        return cells() == other.cells();
    }
    bool operator!=(const GridSet& other) const { return !(*this == other); }

    // Occupied cells with at least one of the 2d axis neighbours unoccupied.
    std::int64_t boundary_cell_count() const {
        std::int64_t n = 0;
        for_each_cell([&](const CoordVec& c) {
            for (int k = 0; k < dim_; ++k) {
                for (int s = -1; s <= 1; s += 2) {
                    CoordVec nb = c;
                    nb[k] += s;
                    if (!contains(nb)) {
                        ++n;
                        return;
                    }
                }
            }
        });
        return n;
    }

    // --- fibers, projections, superlevel sets (d >= 2) ----------------------

    // 1D set {i_d : (x, i_d) occupied}; empty when the column is vacant.
    GridSet fiber(const CoordVec& base) const {
        require_dim_ge(2, "fiber");
        GridSet out(1, h_);
        const std::int64_t col = col_id(base);
        if (col < 0) return out;
        Box b;
        b.lo[0] = vert_lo();
        b.ext[0] = vert_ext();
        Builder bld(1, h_, b);
        std::memcpy(bld.w.data(), col_words(col), static_cast<std::size_t>(wpc_) * 8);
        return std::move(bld).finish();
    }

    GridSet project() const { return superlevel(Rat(0)); }

    // Base cells whose fiber measure strictly exceeds s.
    GridSet superlevel(const Rat& s) const {
        require_dim_ge(2, "superlevel");
        if (s < 0) throw Error(Errc::contract, "superlevel: level must be nonnegative");
        GridSet out(dim_ - 1, h_);
        if (empty()) return out;
        Box b;
        for (int k = 0; k + 1 < dim_; ++k) {
            b.lo[k] = box_.lo[k];
            b.ext[k] = box_.ext[k];
        }
        Builder bld(dim_ - 1, h_, b);
        for (std::int64_t c = 0; c < cols_; ++c) {
            if (Rat(column_popcount(c)) * h_ > s) bld.set_cell(col_base(c));
        }
        return std::move(bld).finish();
    }

    Rat max_fiber_measure() const {
        require_dim_ge(2, "max_fiber_measure");
        std::int64_t best = 0;
        for (std::int64_t c = 0; c < cols_; ++c) best = std::max(best, column_popcount(c));
        return Rat(best) * h_;
    }

    // s -> measure(superlevel(s)) as an exact step function.
    StepFunction distribution() const {
        require_dim_ge(2, "distribution");
        std::vector<std::int64_t> counts;
        for (std::int64_t c = 0; c < cols_; ++c) {
            const std::int64_t n = column_popcount(c);
            if (n > 0) counts.push_back(n);
        }
        if (counts.empty()) return StepFunction();
        std::sort(counts.begin(), counts.end());
        const Rat base_unit = rat_pow(h_, dim_ - 1);
        std::vector<std::pair<Rat, Rat>> pieces;
        pieces.push_back({Rat(0), Rat(static_cast<std::int64_t>(counts.size())) * base_unit});
        std::size_t idx = 0;
        while (idx < counts.size()) {
            std::size_t next = idx;
            while (next < counts.size() && counts[next] == counts[idx]) ++next;
            // For s in [counts[idx]*h, next distinct count * h): fibers > s are those with count > counts[idx].
            pieces.push_back({Rat(counts[idx]) * h_,
                              Rat(static_cast<std::int64_t>(counts.size() - next)) * base_unit});
            idx = next;
        }
        return StepFunction(std::move(pieces));
    }

    // --- lattice-affine transforms ------------------------------------------

    friend GridSet translate(const GridSet& g, const CoordVec& v) {
        GridSet out = g;
        for (int k = 0; k < g.dim_; ++k)
            out.box_.lo[k] = checked_coord(std::int64_t{g.box_.lo[k]} + v[k]);
        return out;
    }

    // (x, i_d) -> (x, i_d + w . x), a measure preserving skew shift.
    GridSet shear(const std::array<Coord, kMaxDim - 1>& w) const {
        require_dim_ge(2, "shear");
        if (empty()) return *this;
        std::int64_t off_lo = 0, off_hi = 0;
        for (std::int64_t c = 0; c < cols_; ++c) {
            if (column_popcount(c) == 0) continue;
            const CoordVec base = col_base(c);
            std::int64_t off = 0;
            for (int k = 0; k + 1 < dim_; ++k) off += std::int64_t{w[k]} * base[k];
            off_lo = std::min(off_lo, off);
            off_hi = std::max(off_hi, off);
        }
        Box nb = box_;
        nb.lo[dim_ - 1] = checked_coord(std::int64_t{vert_lo()} + off_lo);
        nb.ext[dim_ - 1] = static_cast<std::int32_t>(std::int64_t{vert_ext()} + off_hi - off_lo);
        Builder bld(dim_, h_, nb);
        for_each_run([&](const CoordVec& base, Coord start, std::int64_t len) {
            std::int64_t off = 0;
            for (int k = 0; k + 1 < dim_; ++k) off += std::int64_t{w[k]} * base[k];
            bld.set_run(base, checked_coord(start + off), len);
        });
        return std::move(bld).finish();
    }

    // Cells {m*i + r : i occupied, r in [0,m)^d} at cell size new_h. With
    // new_h = h/m this is plain refinement; combination sums use new_h = h/q.
    GridSet scale_indices(int m, const Rat& new_h) const {
        if (m < 1) throw Error(Errc::contract, "scale_indices: factor must be >= 1");
        GridSet out(dim_, new_h);
        if (empty()) return out;
        Box nb;
        for (int k = 0; k < dim_; ++k) {
            nb.lo[k] = checked_coord(std::int64_t{box_.lo[k]} * m);
            const std::int64_t hi = (std::int64_t{box_.lo[k]} + box_.ext[k]) * m;
            nb.ext[k] = static_cast<std::int32_t>(hi - nb.lo[k]);
        }
        Builder bld(dim_, new_h, nb);
        const int base_dims = dim_ - 1;
        for_each_run([&](const CoordVec& base, Coord start, std::int64_t len) {
            // Each base cell splits into m^{d-1} columns, each carrying the
            // scaled vertical run.
            std::array<int, kMaxDim> rep{0, 0, 0};
            while (true) {
                CoordVec nbase{0, 0, 0};
                for (int k = 0; k < base_dims; ++k)
                    nbase[k] = checked_coord(std::int64_t{base[k]} * m + rep[k]);
                bld.set_run(nbase, checked_coord(std::int64_t{start} * m), len * m);
                int k = 0;
                for (; k < base_dims; ++k) {
                    if (++rep[k] < m) break;
                    rep[k] = 0;
                }
                if (k == base_dims) break;
            }
        });
        return std::move(bld).finish(false);
    }

    GridSet refine(int q) const { return scale_indices(q, h_ / q); }

    // --- set algebra (same dim and cell size) --------------------------------

    friend GridSet unite(const GridSet& a, const GridSet& b) { return combine(a, b, Mode::unite); }
    friend GridSet intersect(const GridSet& a, const GridSet& b) { return combine(a, b, Mode::intersect); }
    friend GridSet subtract(const GridSet& a, const GridSet& b) { return combine(a, b, Mode::subtract); }

private:
    enum class Mode { unite, intersect, subtract };

    static GridSet combine(const GridSet& a, const GridSet& b, Mode mode) {
        if (a.dim_ != b.dim_) throw Error(Errc::dimension, "set algebra: dimension mismatch");
        if (a.h_ != b.h_) throw Error(Errc::contract, "set algebra: operands must share cell size");
        Box box;
        for (int k = 0; k < a.dim_; ++k) {
            const Coord lo = std::min(a.box_.lo[k], b.box_.lo[k]);
            const Coord hi = std::max<Coord>(a.box_.lo[k] + a.box_.ext[k], b.box_.lo[k] + b.box_.ext[k]);
            box.lo[k] = lo;
            box.ext[k] = hi - lo;
        }
        Builder bld(a.dim_, a.h_, box);
        auto blit = [&](const GridSet& src) {
            src.for_each_run([&](const CoordVec& base, Coord start, std::int64_t len) {
                bld.set_run(base, start, len);
            });
        };
        switch (mode) {
            case Mode::unite:
                blit(a);
                blit(b);
                break;
            case Mode::intersect: {
                a.for_each_cell([&](const CoordVec& c) {
                    if (b.contains(c)) bld.set_cell(c);
                });
                break;
            }
            case Mode::subtract: {
                a.for_each_cell([&](const CoordVec& c) {
                    if (!b.contains(c)) bld.set_cell(c);
                });
                break;
            }
        }
        return std::move(bld).finish();
    }

    void require_dim_ge(int d, const char* op) const {
        if (dim_ < d) throw Error(Errc::dimension, std::string(op) + ": requires dim >= " + std::to_string(d));
    }

    void init_geometry() {
        cols_ = 1;
        for (int k = 0; k + 1 < dim_; ++k) cols_ *= box_.ext[k];
        wpc_ = (box_.ext[dim_ - 1] + 63) / 64;
        if (w_.empty()) w_.assign(static_cast<std::size_t>(cols_ * wpc_), 0);
        if (w_.size() != static_cast<std::size_t>(cols_ * wpc_))
            throw Error(Errc::contract, "GridSet: storage size mismatch");
        // Clear padding bits above vert_ext in each column's last word.
        const int pad = static_cast<int>(wpc_ * 64 - box_.ext[dim_ - 1]);
        if (pad > 0) {
            const std::uint64_t mask = ~std::uint64_t{0} >> pad;
            for (std::int64_t c = 0; c < cols_; ++c) w_[static_cast<std::size_t>((c + 1) * wpc_ - 1)] &= mask;
        }
    }

    void recount() {
        count_ = 0;
        for (const std::uint64_t word : w_) count_ += std::popcount(word);
    }

    void tighten() {
        if (count_ == 0) {
            box_ = Box{};
            w_.assign(1, 0);
            init_geometry();
            return;
        }
        CoordVec lo{0, 0, 0}, hi{0, 0, 0};
        bool first = true;
        for (std::int64_t c = 0; c < cols_; ++c) {
            const std::uint64_t* p = col_words(c);
            std::int64_t vmin = -1, vmax = -1;
            for (std::int64_t word = 0; word < wpc_; ++word) {
                if (p[word] == 0) continue;
                if (vmin < 0) vmin = word * 64 + std::countr_zero(p[word]);
                vmax = word * 64 + 63 - std::countl_zero(p[word]);
            }
            if (vmin < 0) continue;
            CoordVec base = col_base(c);
            base[dim_ - 1] = static_cast<Coord>(vert_lo() + vmin);
            CoordVec top = base;
            top[dim_ - 1] = static_cast<Coord>(vert_lo() + vmax);
            if (first) {
                lo = base;
                hi = top;
                first = false;
            } else {
                for (int k = 0; k < dim_; ++k) {
                    lo[k] = std::min(lo[k], base[k]);
                    hi[k] = std::max(hi[k], top[k]);
                }
            }
        }
        Box nb;
        for (int k = 0; k < dim_; ++k) {
            nb.lo[k] = lo[k];
            nb.ext[k] = hi[k] - lo[k] + 1;
        }
        bool same = true;
        for (int k = 0; k < dim_; ++k)
            same = same && nb.lo[k] == box_.lo[k] && nb.ext[k] == box_.ext[k];
        if (same) return;
        Builder bld(dim_, h_, nb);
        for_each_run([&](const CoordVec& base, Coord start, std::int64_t len) {
            bld.set_run(base, start, len);
        });
        GridSet packed = std::move(bld).finish(false);
        box_ = packed.box_;
        w_ = std::move(packed.w_);
        init_geometry();
        recount();
    }

    int dim_;
    Rat h_;
    Box box_;
    std::int64_t cols_ = 1;
    std::int64_t wpc_ = 1;
    std::int64_t count_ = 0;
    std::vector<std::uint64_t> w_;
};

// Refines both operands to the coarsest common cell size; binary operations
// require exact lattice agreement and this keeps them exact.
inline std::pair<GridSet, GridSet> common_refine(const GridSet& a, const GridSet& b) {
    if (a.dim() != b.dim()) throw Error(Errc::dimension, "common_refine: dimension mismatch");
    if (a.cell_size() == b.cell_size()) return {a, b};
    const Rat ha = a.cell_size(), hb = b.cell_size();
    const Int na = numerator(ha), da = denominator(ha);
    const Int nb = numerator(hb), db = denominator(hb);
    // gcd of the two rationals: gcd(na*db, nb*da) / (da*db).
    const Int g = gcd(Int(na * db), Int(nb * da));
    const Rat h(g, da * db);
    const Rat fa = ha / h, fb = hb / h;
    if (denominator(fa) != 1 || denominator(fb) != 1)
        throw Error(Errc::contract, "common_refine: incommensurable cell sizes");
    const Int ia = numerator(fa), ib = numerator(fb);
    if (ia > 4096 || ib > 4096) throw Error(Errc::capacity, "common_refine: refinement factor too large");
    return {ia == 1 ? a : a.refine(static_cast<int>(ia)), ib == 1 ? b : b.refine(static_cast<int>(ib))};
}

}  // namespace bm
