#pragma once

#include <stdexcept>

#include "semires/grid.hpp"

namespace semires {

// Nested support radii r_k = R0 + k*s, k = 1..6.
//   V lives in |x| < R0, the cutoff/barrier transitions occupy the middle
//   of one gap each, and the measurement absorber turns on beyond r_6.
// Transitions are placed on [r + trans_lo*s, r + trans_hi*s] so that the
// discrete supports stay disjoint with margin at stencil resolution.
struct SupportLayout {
    double R0 = 1.0;
    double s = 1.0;              // offset scale between consecutive radii
    double absorber_width = 4.0; // length of the collar where the outer absorber is 1
    double absorber_gap = 1.0;   // distance from r_6 to the onset of the outer absorber
    // wide transitions sharpen the nonstationary-phase decay of the gluing
    // error product at desk-scale h while keeping the supports exactly disjoint
    double trans_lo = 0.1;
    double trans_hi = 0.9;

    double r(int k) const { return R0 + k * s; }

    // Minimal half-length for a grid carrying this layout.
    double min_half_length() const {
        return r(6) + absorber_gap + s + absorber_width;
    }

    void validate(const Grid& grid) const {
        if (R0 <= 0.0 || s <= 0.0)
            throw std::invalid_argument("SupportLayout: R0 and s must be positive");
        if (!(0.0 < trans_lo && trans_lo < trans_hi && trans_hi < 1.0))
            throw std::invalid_argument("SupportLayout: bad transition fractions");
        if (grid.half_length < min_half_length())
            throw std::invalid_argument("SupportLayout: radii do not fit inside grid");
        // transition intervals must hold a few nodes each
        if ((trans_hi - trans_lo) * s < 4.0 * grid.dx)
            throw std::invalid_argument("SupportLayout: transition narrower than grid resolution");
    }
};

}  // namespace semires
