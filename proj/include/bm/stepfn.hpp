#pragma once

// Right-continuous nonincreasing step functions with rational breakpoints.
// Used for the superlevel-measure profile s -> |{x : |G_x| > s}| of a grid
// set, which is exact: breakpoints land on multiples of the cell size.

#include "bm/rational.hpp"

#include <utility>
#include <vector>

namespace bm {

class StepFunction {
public:
    // pieces[i] = (s_i, v_i): value v_i on [s_i, s_{i+1}), 0 beyond the last
    // breakpoint. Breakpoints must ascend, values must be nonincreasing and
    // end at 0.
    StepFunction() : pieces_{{Rat(0), Rat(0)}} {}

    explicit StepFunction(std::vector<std::pair<Rat, Rat>> pieces) : pieces_(std::move(pieces)) {
        if (pieces_.empty()) pieces_.push_back({Rat(0), Rat(0)});
        for (std::size_t i = 0; i + 1 < pieces_.size(); ++i) {
            if (!(pieces_[i].first < pieces_[i + 1].first))
                throw Error(Errc::contract, "StepFunction: breakpoints must ascend");
            if (pieces_[i].second < pieces_[i + 1].second)
                throw Error(Errc::contract, "StepFunction: values must be nonincreasing");
        }
        if (pieces_.back().second != 0)
            throw Error(Errc::contract, "StepFunction: value beyond last breakpoint must be 0");
    }

    const std::vector<std::pair<Rat, Rat>>& pieces() const { return pieces_; }

    Rat value_at(const Rat& s) const {
        if (s < pieces_.front().first) return pieces_.front().second;  // constant before s_0
        Rat v = 0;
        for (const auto& [b, val] : pieces_) {
            if (b <= s) v = val;
            else break;
        }
        return v;
    }

    // Integral over [0, infinity); finite because the function vanishes past
    // the last breakpoint.
    Rat integral() const {
        Rat total = 0;
        for (std::size_t i = 0; i + 1 < pieces_.size(); ++i)
            total += pieces_[i].second * (pieces_[i + 1].first - pieces_[i].first);
        return total;
    }

    bool operator==(const StepFunction& other) const { return canonical() == other.canonical(); }
    bool operator!=(const StepFunction& other) const { return !(*this == other); }

    // Lebesgue measure of {s >= 0 : f(s) - f(s+t) > r}, computed exactly.
    // The difference is piecewise constant with breakpoints in B ∪ (B - t).
    Rat excess_level_measure(const Rat& t, const Rat& r) const {
        if (t <= 0 || r <= 0) throw Error(Errc::contract, "excess_level_measure: t, r must be positive");
        std::vector<Rat> cuts;
        for (const auto& [b, v] : pieces_) {
            if (b >= 0) cuts.push_back(b);
            if (b - t >= 0) cuts.push_back(b - t);
        }
        cuts.push_back(Rat(0));
        std::sort(cuts.begin(), cuts.end());
        cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
        Rat total = 0;
        for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
            if (value_at(cuts[i]) - value_at(cuts[i] + t) > r) total += cuts[i + 1] - cuts[i];
        }
        // Beyond the last cut the function is 0, so the difference is 0 <= r.
        return total;
    }

private:
    // Merges equal-value neighbours and drops leading pieces before 0.
    std::vector<std::pair<Rat, Rat>> canonical() const {
        std::vector<std::pair<Rat, Rat>> out;
        for (const auto& p : pieces_) {
            if (!out.empty() && out.back().second == p.second) continue;
            out.push_back(p);
        }
        return out;
    }

    std::vector<std::pair<Rat, Rat>> pieces_;
};

}  // namespace bm
