#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "semires/grid.hpp"
#include "semires/layout.hpp"

namespace semires {

enum class ProfileKind {
    chiK,      // 1 inside, transition in (r_2, r_3)
    chiInf,    // 1 - chiK
    barrierW,  // 0 inside, transition in (r_4, r_5), 1 out to the boundary
    chi,       // outer measurement cutoff, 1 inside, transition in (r_5, r_6)
    absorber   // measurement CAP, turns on beyond r_6 + gap, 1 through the collar
};

inline std::string to_string(ProfileKind k) {
    switch (k) {
        case ProfileKind::chiK: return "chiK";
        case ProfileKind::chiInf: return "chiInf";
        case ProfileKind::barrierW: return "barrierW";
        case ProfileKind::chi: return "chi";
        case ProfileKind::absorber: return "absorber";
    }
    return "?";
}

// C^infty step: 0 for t <= 0, 1 for t >= 1.
inline double smooth_step(double t) {
    if (t <= 0.0) return 0.0;
    if (t >= 1.0) return 1.0;
    const double a = std::exp(-1.0 / t);
    const double b = std::exp(-1.0 / (1.0 - t));
    return a / (a + b);
}

// Radial cutoff sampled on a grid. `values[j]` is the profile at node x_j.
struct CutoffProfile {
    ProfileKind kind;
    double inner_radius = 0.0;  // transition starts here (in the radial argument)
    double outer_radius = 0.0;  // transition ends here
    std::vector<double> values;

    double transition_width() const { return outer_radius - inner_radius; }
};

namespace detail {

// ascending: 0 below a, 1 above b (in the radial variable r = |x| + arg_shift)
inline CutoffProfile sample_radial_step(ProfileKind kind, const Grid& grid, double a,
                                        double b, bool ascending, double arg_shift) {
    if (!(a < b)) throw std::invalid_argument("make_profile: radius ordering violation");
    CutoffProfile p;
    p.kind = kind;
    p.inner_radius = a;
    p.outer_radius = b;
    p.values.resize(grid.n);
    for (int j = 0; j < grid.n; ++j) {
        const double r = std::abs(grid.x[j]) + arg_shift;
        const double t = (r - a) / (b - a);
        const double up = smooth_step(t);
        p.values[j] = ascending ? up : 1.0 - up;
    }
    return p;
}

}  // namespace detail

// Samples a cutoff/barrier profile. `arg_shift` shifts the radial argument:
// chiK with arg_shift = -s gives chi_K(|x| - s), chiInf with +s gives
// chi_inf(|x| + s).
inline CutoffProfile make_profile(ProfileKind kind, const SupportLayout& lay,
                                  const Grid& grid, double arg_shift = 0.0) {
    lay.validate(grid);
    const double lo = lay.trans_lo * lay.s, hi = lay.trans_hi * lay.s;
    switch (kind) {
        case ProfileKind::chiK:
            return detail::sample_radial_step(kind, grid, lay.r(2) + lo, lay.r(2) + hi,
                                              false, arg_shift);
        case ProfileKind::chiInf:
            return detail::sample_radial_step(kind, grid, lay.r(2) + lo, lay.r(2) + hi,
                                              true, arg_shift);
        case ProfileKind::barrierW:
            return detail::sample_radial_step(kind, grid, lay.r(4) + lo, lay.r(4) + hi,
                                              true, arg_shift);
        case ProfileKind::chi:
            return detail::sample_radial_step(kind, grid, lay.r(5) + lo, lay.r(5) + hi,
                                              false, arg_shift);
        case ProfileKind::absorber:
            // the gentle ramp over the whole collar keeps CAP reflection below
            // the 1e-3 placement-stability tolerance at the largest sweep h
            return detail::sample_radial_step(kind, grid, lay.r(6) + lay.absorber_gap,
                                              lay.r(6) + lay.absorber_gap + lay.absorber_width,
                                              true, arg_shift);
    }
    throw std::invalid_argument("make_profile: unknown kind");
}

// Measurement absorber with the onset pushed out by `extra_gap` (used by the
// CAP-placement stability checks).
inline CutoffProfile make_absorber(const SupportLayout& lay, const Grid& grid,
                                   double extra_gap = 0.0) {
    SupportLayout l = lay;
    l.absorber_gap += extra_gap;
    if (grid.half_length < l.min_half_length())
        throw std::invalid_argument("make_absorber: shifted absorber does not fit");
    return make_profile(ProfileKind::absorber, l, grid);
}

}  // namespace semires
