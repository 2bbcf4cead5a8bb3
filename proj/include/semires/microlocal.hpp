#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include "semires/banded.hpp"
#include "semires/grid.hpp"
#include "semires/norms.hpp"
#include "semires/potential.hpp"

namespace semires {

struct PhasePoint {
    double x = 0.0;
    double xi = 0.0;
};

struct PhaseGrid {
    double x0 = 0.0;    // first x node
    double dx = 0.0;    // x spacing
    int nx = 0;
    double xi_max = 0.0;
    double dxi = 0.0;
    int nxi = 0;        // xi nodes: -xi_max + j*dxi

    double x_at(int i) const { return x0 + i * dx; }
    double xi_at(int j) const { return -xi_max + j * dxi; }
};

inline PhaseGrid default_phase_grid(const Grid& grid, double h, double xi_max) {
    PhaseGrid pg;
    pg.dx = 4.0 * grid.dx;
    pg.x0 = -grid.half_length;
    pg.nx = static_cast<int>(std::floor(2.0 * grid.half_length / pg.dx)) + 1;
    pg.xi_max = xi_max;
    pg.dxi = std::sqrt(h) / 4.0;
    pg.nxi = 2 * static_cast<int>(std::ceil(xi_max / pg.dxi)) + 1;
    pg.dxi = 2.0 * xi_max / (pg.nxi - 1);
    return pg;
}

// |T_h u| on the phase grid; Gaussian window at scale sqrt(h), normalized so
// that T_h is an isometry into L^2(dx dxi).
struct AmplitudeField {
    PhaseGrid pg;
    double h = 0.0;
    std::vector<double> amp;  // row-major: amp[i*nxi + j] at (x_i, xi_j)

    double at(int i, int j) const { return amp[static_cast<size_t>(i) * pg.nxi + j]; }
    double max_amp() const {
        double m = 0.0;
        for (double a : amp) m = std::max(m, a);
        return m;
    }
};

inline AmplitudeField fbi_transform(const cvector& u, const Grid& grid, double h,
                                    const PhaseGrid& pg) {
    if (static_cast<int>(u.size()) != grid.n)
        throw std::invalid_argument("fbi_transform: u not sampled on the grid");
    if (h <= 0.0) throw std::invalid_argument("fbi_transform: h must be positive");
    const double root_h = std::sqrt(h);
    if (pg.dx > root_h || pg.dxi > root_h)
        throw std::invalid_argument("fbi_transform: phase grid under-resolved (spacing > sqrt(h))");
    AmplitudeField field;
    field.pg = pg;
    field.h = h;
    field.amp.assign(static_cast<size_t>(pg.nx) * pg.nxi, 0.0);
    const double norm_c = std::pow(2.0 * M_PI * h, -0.5) * std::pow(M_PI * h, -0.25);
    const double window = 8.0 * root_h;
    const int halfwin = static_cast<int>(std::ceil(window / grid.dx));
    for (int i = 0; i < pg.nx; ++i) {
        const double xc = pg.x_at(i);
        const int jc = static_cast<int>(std::lround((xc + grid.half_length) / grid.dx));
        const int j0 = std::max(0, jc - halfwin), j1 = std::min(grid.n - 1, jc + halfwin);
        // precompute the windowed samples once per x column
        std::vector<cdouble> win(j1 - j0 + 1);
        for (int j = j0; j <= j1; ++j) {
            const double d = grid.x[j] - xc;
            win[j - j0] = u[j] * std::exp(-d * d / (2.0 * h));
        }
        for (int q = 0; q < pg.nxi; ++q) {
            const double xi = pg.xi_at(q);
            cdouble acc{0.0, 0.0};
            for (int j = j0; j <= j1; ++j) {
                const double phase = -xi * grid.x[j] / h;
                acc += win[j - j0] * cdouble{std::cos(phase), std::sin(phase)};
            }
            field.amp[static_cast<size_t>(i) * pg.nxi + q] =
                std::abs(acc) * norm_c * grid.dx;
        }
    }
    return field;
}

// Squared L^2 mass of the transform over phase space; equals ||u||_{L^2}^2 up
// to quadrature error when T_h is correctly normalized.
inline double phase_mass(const AmplitudeField& f) {
    double s = 0.0;
    for (double a : f.amp) s += a * a;
    return s * f.pg.dx * f.pg.dxi;
}

inline double l2_norm(const cvector& u, const Grid& grid) {
    double s = 0.0;
    for (const auto& z : u) s += std::norm(z);
    return std::sqrt(s * grid.dx);
}

// Thresholded stand-in for WF_h: cells with amplitude >= tau * max amplitude.
struct WavefrontMask {
    PhaseGrid pg;
    double h = 0.0;
    double tau = 0.0;
    double max_amp = 0.0;
    std::vector<char> mask;  // row-major, same layout as AmplitudeField

    bool at(int i, int j) const { return mask[static_cast<size_t>(i) * pg.nxi + j] != 0; }
    bool empty() const {
        for (char c : mask)
            if (c) return false;
        return true;
    }
    std::vector<PhasePoint> points() const {
        std::vector<PhasePoint> pts;
        for (int i = 0; i < pg.nx; ++i)
            for (int j = 0; j < pg.nxi; ++j)
                if (at(i, j)) pts.push_back({pg.x_at(i), pg.xi_at(j)});
        return pts;
    }
};

inline WavefrontMask wavefront_mask(const AmplitudeField& field, double tau) {
    if (!(tau > 0.0 && tau < 1.0))
        throw std::invalid_argument("wavefront_mask: tau must lie in (0,1)");
    WavefrontMask m;
    m.pg = field.pg;
    m.h = field.h;
    m.tau = tau;
    m.max_amp = field.max_amp();
    m.mask.assign(field.amp.size(), 0);
    if (m.max_amp == 0.0) return m;  // empty mask, not an error
    const double thr = tau * m.max_amp;
    for (size_t k = 0; k < field.amp.size(); ++k) m.mask[k] = field.amp[k] >= thr ? 1 : 0;
    return m;
}

// Dilate by `cells` in both phase directions (for ray-intersection tests).
inline WavefrontMask dilate_mask(const WavefrontMask& m, int cells) {
    WavefrontMask out = m;
    for (int i = 0; i < m.pg.nx; ++i)
        for (int j = 0; j < m.pg.nxi; ++j) {
            if (!m.at(i, j)) continue;
            for (int di = -cells; di <= cells; ++di)
                for (int dj = -cells; dj <= cells; ++dj) {
                    const int ii = i + di, jj = j + dj;
                    if (ii >= 0 && ii < m.pg.nx && jj >= 0 && jj < m.pg.nxi)
                        out.mask[static_cast<size_t>(ii) * m.pg.nxi + jj] = 1;
                }
        }
    return out;
}

// Decay order of max amplitude across an h sweep: slope of log(amp) vs log(h).
// "empty at order k" = order >= k with amplitudes decreasing.
inline double mask_decay_order(const std::vector<std::pair<double, double>>& h_amp) {
    std::vector<NormSample> samples;
    for (const auto& [h, a] : h_amp)
        samples.push_back({h, cdouble{0.0, 0.0}, "amp", std::max(a, 1e-300), 0, true});
    return -scaling_fit(samples).exponent;
}

struct Trajectory {
    std::vector<double> t, x, xi;
    double energy_drift = 0.0;  // max relative drift of xi^2 + V(x)
};

// gamma_rho^- = {(x + 2 t xi, xi) : t <= 0}, evaluated exactly.
inline Trajectory free_backward_ray(PhasePoint rho, const std::vector<double>& t_grid) {
    Trajectory tr;
    for (double t : t_grid) {
        if (t > 0.0)
            throw std::invalid_argument("free_backward_ray: t_grid must be <= 0");
        tr.t.push_back(t);
        tr.x.push_back(rho.x + 2.0 * t * rho.xi);
        tr.xi.push_back(rho.xi);
    }
    return tr;
}

// RK4 integration of x' = 2 xi, xi' = -V'(x); t_max may be negative.
inline Trajectory hamiltonian_flow(PhasePoint rho, const PotentialSpec& V, double t_max,
                                   double dt, double drift_tol = 1e-6) {
    if (dt <= 0.0 || dt > 1e-3 * std::abs(t_max))
        throw std::invalid_argument("hamiltonian_flow: need 0 < dt <= 1e-3 |t_max|");
    const double dir = t_max >= 0.0 ? 1.0 : -1.0;
    const int steps = static_cast<int>(std::ceil(std::abs(t_max) / dt));
    const double step = dir * std::abs(t_max) / steps;
    auto fx = [](double xi) { return 2.0 * xi; };
    auto fxi = [&V](double x) { return -V.deriv(x); };
    Trajectory tr;
    double x = rho.x, xi = rho.xi, t = 0.0;
    const double e0 = xi * xi + V.value(x);
    const double scale = std::max(std::abs(e0), 1.0);
    tr.t.push_back(t);
    tr.x.push_back(x);
    tr.xi.push_back(xi);
    for (int k = 0; k < steps; ++k) {
        const double k1x = fx(xi), k1v = fxi(x);
        const double k2x = fx(xi + 0.5 * step * k1v), k2v = fxi(x + 0.5 * step * k1x);
        const double k3x = fx(xi + 0.5 * step * k2v), k3v = fxi(x + 0.5 * step * k2x);
        const double k4x = fx(xi + step * k3v), k4v = fxi(x + step * k3x);
        x += step / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
        xi += step / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        t += step;
        tr.t.push_back(t);
        tr.x.push_back(x);
        tr.xi.push_back(xi);
        tr.energy_drift =
            std::max(tr.energy_drift, std::abs(xi * xi + V.value(x) - e0) / scale);
    }
    if (tr.energy_drift > drift_tol)
        throw std::runtime_error("hamiltonian_flow: energy drift exceeded tolerance, refine dt");
    return tr;
}

// True iff the free backward ray from rho stays in {|x| > R} for all t <= 0.
// In one dimension that is exactly x * xi <= 0: a ray seen arriving from
// larger |x| keeps moving outward backward in time.
inline bool escape_certificate(PhasePoint rho, double R) {
    if (std::abs(rho.x) <= R)
        throw std::invalid_argument("escape_certificate: requires |x| > R");
    return rho.x * rho.xi <= 0.0;
}

enum class PropagationMode { free_cap, full };

struct PropagationReport {
    int mask_points = 0;
    int passed = 0;
    int ray_condition_failed = 0;  // full mode: (e:propsing)-style hypothesis unmet
    std::vector<PhasePoint> violations;
    bool pass = false;
};

// For every wavefront point of u_out, the free backward ray must meet the
// dilated wavefront of the input f. In full mode the ray must additionally
// stay clear of supp V, certified in closed form.
inline PropagationReport propagation_check(const cvector& u_out, const cvector& f,
                                           const Grid& grid, double h,
                                           PropagationMode mode, double V_support_radius,
                                           double tau = 1e-3, int dilation_cells = 3,
                                           double xi_max = 3.0) {
    const PhaseGrid pg = default_phase_grid(grid, h, xi_max);
    const WavefrontMask mask_u = wavefront_mask(fbi_transform(u_out, grid, h, pg), tau);
    const WavefrontMask mask_f =
        dilate_mask(wavefront_mask(fbi_transform(f, grid, h, pg), tau), dilation_cells);

    // per xi row of the dilated input mask: leftmost/rightmost occupied x
    std::vector<double> row_min(pg.nxi, 1e300), row_max(pg.nxi, -1e300);
    for (int i = 0; i < pg.nx; ++i)
        for (int j = 0; j < pg.nxi; ++j)
            if (mask_f.at(i, j)) {
                row_min[j] = std::min(row_min[j], pg.x_at(i));
                row_max[j] = std::max(row_max[j], pg.x_at(i));
            }

    PropagationReport rep;
    const double slack = 2.0 * pg.dx;  // one-sided tolerance in the ray test
    for (int i = 0; i < pg.nx; ++i)
        for (int j = 0; j < pg.nxi; ++j) {
            if (!mask_u.at(i, j)) continue;
            ++rep.mask_points;
            const double x = pg.x_at(i), xi = pg.xi_at(j);
            if (mode == PropagationMode::full && std::abs(x) > V_support_radius &&
                !escape_certificate({x, xi}, V_support_radius)) {
                ++rep.ray_condition_failed;
                continue;
            }
            // backward ray: x(t) = x + 2 t xi, t <= 0, at fixed xi row j
            bool hit = false;
            if (row_max[j] >= row_min[j]) {
                if (xi == 0.0)
                    hit = row_min[j] - slack <= x && x <= row_max[j] + slack;
                else if (xi > 0.0)
                    hit = row_min[j] <= x + slack;  // ray sweeps x' <= x
                else
                    hit = row_max[j] >= x - slack;  // ray sweeps x' >= x
            }
            if (hit)
                ++rep.passed;
            else
                rep.violations.push_back({x, xi});
        }
    rep.pass = rep.violations.empty();
    return rep;
}

struct TrappingWitness {
    PhasePoint seed;
    double max_excursion = 0.0;
};

struct TrappingProbe {
    bool nonempty = false;
    std::vector<TrappingWitness> witnesses;
    int seeds_tried = 0;
};

// Samples the energy shell xi^2 + V(x) = E inside |x| <= radius and integrates
// both time directions; a seed that never leaves |x| <= radius within |t| <= T
// witnesses a nonempty trapped set at resolution T.
inline TrappingProbe trapping_probe(const PotentialSpec& V, double E, int seed_count,
                                    double T, double radius) {
    if (seed_count < 1) throw std::invalid_argument("trapping_probe: need seeds");
    TrappingProbe probe;
    std::vector<double> xs;
    for (int k = 0; k < seed_count; ++k)
        xs.push_back(-radius + 2.0 * radius * k / std::max(1, seed_count - 1));
    xs.push_back(0.0);  // always probe the symmetry point (barrier-top fixed point)
    bool any_on_shell = false;
    const double dt = std::min(1e-3 * T, 1e-3);
    for (double x0 : xs) {
        const double ke = E - V.value(x0);
        if (ke < 0.0) continue;
        any_on_shell = true;
        const double xi0 = std::sqrt(ke);
        for (double sgn : {1.0, -1.0}) {
            PhasePoint seed{x0, sgn * xi0};
            double excursion = 0.0;
            bool escaped = false;
            for (double tdir : {T, -T}) {
                const Trajectory tr = hamiltonian_flow(seed, V, tdir, dt, 1e-5);
                for (double x : tr.x) excursion = std::max(excursion, std::abs(x));
                if (excursion > radius) {
                    escaped = true;
                    break;
                }
            }
            ++probe.seeds_tried;
            if (!escaped) {
                probe.nonempty = true;
                probe.witnesses.push_back({seed, excursion});
            }
            if (xi0 == 0.0) break;  // +0 and -0 coincide
        }
    }
    if (!any_on_shell)
        throw std::runtime_error("trapping_probe: no seeds on the energy shell (E below min)");
    return probe;
}

// CSV dump of an amplitude field: x,xi,amp
inline void write_amplitude_csv(const AmplitudeField& f, const std::string& path) {
    std::FILE* fp = std::fopen(path.c_str(), "w");
    if (!fp) throw std::runtime_error("write_amplitude_csv: cannot open " + path);
    std::fprintf(fp, "x,xi,amp\n");
    for (int i = 0; i < f.pg.nx; ++i)
        for (int j = 0; j < f.pg.nxi; ++j)
            std::fprintf(fp, "%.12g,%.12g,%.12g\n", f.pg.x_at(i), f.pg.xi_at(j),
                         f.at(i, j));
    std::fclose(fp);
}

// Normalized Gaussian wavepacket at (x0, xi0), width sqrt(h).
inline cvector coherent_state(const Grid& grid, double h, double x0, double xi0) {
    cvector u(grid.n);
    const double c = std::pow(M_PI * h, -0.25);
    for (int j = 0; j < grid.n; ++j) {
        const double d = grid.x[j] - x0;
        const double phase = xi0 * d / h;
        u[j] = c * std::exp(-d * d / (2.0 * h)) * cdouble{std::cos(phase), std::sin(phase)};
    }
    return u;
}

}  // namespace semires
