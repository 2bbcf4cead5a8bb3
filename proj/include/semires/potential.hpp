#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "semires/grid.hpp"

namespace semires {

enum class PotentialFamily { zero, nontrap_bump, barrier_top, double_bump_well };

inline std::string to_string(PotentialFamily f) {
    switch (f) {
        case PotentialFamily::zero: return "zero";
        case PotentialFamily::nontrap_bump: return "nontrap_bump";
        case PotentialFamily::barrier_top: return "barrier_top";
        case PotentialFamily::double_bump_well: return "double_bump_well";
    }
    return "?";
}

inline PotentialFamily potential_family_from_string(const std::string& s) {
    if (s == "zero" || s == "free") return PotentialFamily::zero;
    if (s == "nontrap_bump" || s == "nontrap") return PotentialFamily::nontrap_bump;
    if (s == "barrier_top" || s == "barrier-top") return PotentialFamily::barrier_top;
    if (s == "double_bump_well" || s == "well") return PotentialFamily::double_bump_well;
    throw std::invalid_argument("unknown potential family: " + s);
}

namespace detail {

// C_0^infty bump, max 1 at u = 0, support |u| < 1.
inline double bump(double u) {
    const double q = 1.0 - u * u;
    if (q <= 0.0) return 0.0;
    return std::exp(1.0 - 1.0 / q);
}

inline double bump_deriv(double u) {
    const double q = 1.0 - u * u;
    if (q <= 0.0) return 0.0;
    return bump(u) * (-2.0 * u / (q * q));
}

}  // namespace detail

// Smooth compactly supported potential, supp V in |x| < support_radius.
// Closed-form value and derivative (the flow integrator needs V').
struct PotentialSpec {
    PotentialFamily family = PotentialFamily::zero;
    double amplitude = 0.0;       // max of each bump (energy units)
    double support_radius = 1.0;  // R0
    double well_center = 0.5;     // double_bump_well: bump centers at +-well_center
    double well_width = 0.45;     // double_bump_well: bump half-width

    double value(double x) const {
        switch (family) {
            case PotentialFamily::zero:
                return 0.0;
            case PotentialFamily::nontrap_bump:
            case PotentialFamily::barrier_top:
                return amplitude * detail::bump(x / support_radius);
            case PotentialFamily::double_bump_well:
                return amplitude * (detail::bump((x - well_center) / well_width) +
                                    detail::bump((x + well_center) / well_width));
        }
        return 0.0;
    }

    double deriv(double x) const {
        switch (family) {
            case PotentialFamily::zero:
                return 0.0;
            case PotentialFamily::nontrap_bump:
            case PotentialFamily::barrier_top:
                return amplitude * detail::bump_deriv(x / support_radius) / support_radius;
            case PotentialFamily::double_bump_well:
                return amplitude *
                       (detail::bump_deriv((x - well_center) / well_width) +
                        detail::bump_deriv((x + well_center) / well_width)) /
                       well_width;
        }
        return 0.0;
    }

    std::vector<double> sample(const Grid& grid) const {
        std::vector<double> v(grid.n);
        for (int j = 0; j < grid.n; ++j) v[j] = value(grid.x[j]);
        return v;
    }

    bool is_zero() const { return family == PotentialFamily::zero || amplitude == 0.0; }
};

inline PotentialSpec make_potential(PotentialFamily family, double R0, double E = 1.0) {
    PotentialSpec p;
    p.family = family;
    p.support_radius = R0;
    switch (family) {
        case PotentialFamily::zero: p.amplitude = 0.0; break;
        case PotentialFamily::nontrap_bump: p.amplitude = 0.3 * E; break;
        case PotentialFamily::barrier_top: p.amplitude = E; break;  // E = max V
        case PotentialFamily::double_bump_well:
            p.amplitude = 2.0 * E;  // E sits inside the well, below the bump tops
            p.well_center = 0.5 * R0;
            p.well_width = 0.45 * R0;
            break;
    }
    return p;
}

}  // namespace semires
