#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include "semires/banded.hpp"
#include "semires/factorization.hpp"
#include "semires/layout.hpp"
#include "semires/linop.hpp"
#include "semires/potential.hpp"
#include "semires/profile.hpp"

namespace semires {

// lambda near the real energy E; the disk comparison |lambda - E| vs
// 1/(C a(h)) happens in the continuation module.
struct SpectralPoint {
    cdouble lambda;
    double E = 1.0;
    double h = 0.0;
};

struct CutoffNormResult {
    double norm = 0.0;
    int iters = 0;
    bool converged = false;
};

// Largest singular value of diag(chi_left) (op - lambda)^{-1} diag(chi_right),
// power iteration on M M^* driven by factorization solves. Operator norms are
// insensitive to the uniform L^2 quadrature weight dx, so plain 2-norms are used.
inline CutoffNormResult cutoff_norm(std::shared_ptr<const Factorization> fact,
                                    const CutoffProfile& chi_left,
                                    const CutoffProfile& chi_right, double tol = 1e-6,
                                    int max_iter = 500) {
    if (tol <= 0.0) throw std::invalid_argument("cutoff_norm: tol must be positive");
    if (static_cast<int>(chi_left.values.size()) != fact->size() ||
        static_cast<int>(chi_right.values.size()) != fact->size())
        throw std::invalid_argument("cutoff_norm: profile/factorization size mismatch");
    LinearOp m = compose(diag_op(chi_left.values),
                         compose(solve_op(fact), diag_op(chi_right.values)));
    const PowerIterResult r = operator_norm(m, tol, max_iter);
    if (!r.converged)
        throw std::runtime_error(
            "cutoff_norm: power iteration did not converge; last value " +
            std::to_string(r.norm) + ", last relative change " +
            std::to_string(r.last_rel_change));
    return {r.norm, r.iters, r.converged};
}

struct NormSample {
    double h = 0.0;
    cdouble lambda;
    std::string which_operator;
    double norm = 0.0;
    int iters = 0;
    bool converged = false;
};

struct ScalingFit {
    double exponent = 0.0;   // p in norm ~ c h^{-p}
    double prefactor = 0.0;  // c
    double residual_rms = 0.0;
    double curvature = 0.0;       // quadratic coefficient of log(norm) in log(1/h)
    bool log_excess = false;      // norm * h^1 strictly increasing as h decreases
};

// Measured h -> norm samples plus the fitted empirical a(h).
struct NormCurve {
    std::vector<NormSample> samples;
    ScalingFit fit;

    void sort_by_h_desc() {
        std::sort(samples.begin(), samples.end(),
                  [](const NormSample& a, const NormSample& b) { return a.h > b.h; });
    }
};

// Least squares of log(norm) against log(1/h).
inline ScalingFit scaling_fit(const std::vector<NormSample>& samples) {
    if (samples.size() < 2) throw std::invalid_argument("scaling_fit: need >= 2 samples");
    double hmin = samples[0].h, hmax = samples[0].h;
    for (const auto& s : samples) {
        if (s.norm <= 0.0) throw std::invalid_argument("scaling_fit: nonpositive norm");
        hmin = std::min(hmin, s.h);
        hmax = std::max(hmax, s.h);
    }
    if (hmax - hmin < 1e-12 * hmax)
        throw std::invalid_argument("scaling_fit: degenerate sweep (all h equal)");
    const size_t m = samples.size();
    double su = 0, sy = 0, suu = 0, suy = 0;
    std::vector<double> u(m), y(m);
    for (size_t i = 0; i < m; ++i) {
        u[i] = std::log(1.0 / samples[i].h);
        y[i] = std::log(samples[i].norm);
        su += u[i];
        sy += y[i];
        suu += u[i] * u[i];
        suy += u[i] * y[i];
    }
    const double det = m * suu - su * su;
    ScalingFit fit;
    fit.exponent = (m * suy - su * sy) / det;
    const double b = (sy * suu - su * suy) / det;
    fit.prefactor = std::exp(b);
    double rss = 0.0;
    for (size_t i = 0; i < m; ++i) {
        const double r = y[i] - (b + fit.exponent * u[i]);
        rss += r * r;
    }
    fit.residual_rms = std::sqrt(rss / m);
    // quadratic coefficient, for curvature diagnostics
    if (m >= 3) {
        double s0 = m, s1 = 0, s2 = 0, s3 = 0, s4 = 0, t0 = 0, t1 = 0, t2 = 0;
        for (size_t i = 0; i < m; ++i) {
            const double ui = u[i], yi = y[i];
            s1 += ui; s2 += ui * ui; s3 += ui * ui * ui; s4 += ui * ui * ui * ui;
            t0 += yi; t1 += ui * yi; t2 += ui * ui * yi;
        }
        Eigen::Matrix3d A;
        A << s0, s1, s2, s1, s2, s3, s2, s3, s4;
        Eigen::Vector3d rhs(t0, t1, t2);
        fit.curvature = A.fullPivLu().solve(rhs)(2);
    }
    // "a(h) * h increasing as h decreases" flag, the desk-scale log signature
    std::vector<NormSample> sorted = samples;
    std::sort(sorted.begin(), sorted.end(),
              [](const NormSample& a, const NormSample& b) { return a.h > b.h; });
    bool increasing = sorted.size() >= 2;
    for (size_t i = 0; i + 1 < sorted.size(); ++i)
        if (sorted[i + 1].norm * sorted[i + 1].h <= sorted[i].norm * sorted[i].h)
            increasing = false;
    fit.log_excess = increasing;
    return fit;
}

inline ScalingFit scaling_fit_checked(const NormCurve& curve) {
    if (curve.samples.size() < 5)
        throw std::invalid_argument("scaling_fit: need >= 5 samples");
    double hmin = curve.samples[0].h, hmax = curve.samples[0].h;
    for (const auto& s : curve.samples) {
        hmin = std::min(hmin, s.h);
        hmax = std::max(hmax, s.h);
    }
    if (hmax / hmin < 4.0)
        throw std::invalid_argument("scaling_fit: sweep must span a factor >= 4 in h");
    return scaling_fit(curve.samples);
}

struct OutgoingNormResult {
    double norm = 0.0;
    int iters = 0;
    double stability_rel_change = 0.0;
    bool stable = false;
    double condition_estimate = 0.0;
};

namespace detail {

inline double continued_norm_once(const SupportLayout& lay, double L,
                                  const PotentialSpec& V, double h, cdouble lambda,
                                  double extra_gap, double tol, int max_iter, int* iters,
                                  double* cond, Stencil stencil) {
    // dx rule: at least 10 points per wavelength scale h
    const double dx = std::min(h / 10.0, L / 51.0);
    GridPtr grid = make_grid(L, dx);
    const CutoffProfile chi = make_profile(ProfileKind::chi, lay, *grid);
    const CutoffProfile wout = make_absorber(lay, *grid, extra_gap);
    DiscreteOperator p = assemble_p(grid, V, h, stencil);
    const DiscreteOperator pcap = attach_absorber(p, wout);
    auto fact = std::make_shared<Factorization>(pcap, lambda);
    if (cond) *cond = fact->condition_estimate();
    const CutoffNormResult r = cutoff_norm(fact, chi, chi, tol, max_iter);
    if (iters) *iters = r.iters;
    return r.norm;
}

}  // namespace detail

// || chi (P - i W_out - lambda)^{-1} chi || with the absorber strictly beyond
// supp chi. For lambda = E this is the limiting-absorption surrogate for
// || chi R(E+i0) chi ||; for Im lambda < 0 it realizes the continued cutoff
// resolvent. The value must be insensitive to the CAP placement: the stability
// re-run doubles the absorber gap and enlarges the box by 4.
inline OutgoingNormResult continued_cutoff_norm(const SupportLayout& lay, double L,
                                                const PotentialSpec& V, double h,
                                                cdouble lambda, double tol = 1e-6,
                                                int max_iter = 500,
                                                bool stability_check = true,
                                                Stencil stencil = Stencil::second_order) {
    if (std::abs(lambda.imag()) > 0.3)
        throw std::invalid_argument(
            "continued_cutoff_norm: |Im lambda| must stay <= 0.3, well above the CAP "
            "essential spectrum");
    OutgoingNormResult out;
    out.norm = detail::continued_norm_once(lay, L, V, h, lambda, 0.0, tol, max_iter,
                                           &out.iters, &out.condition_estimate, stencil);
    if (stability_check) {
        const double again = detail::continued_norm_once(
            lay, L + 4.0, V, h, lambda, lay.absorber_gap, tol, max_iter, nullptr,
            nullptr, stencil);
        out.stability_rel_change = std::abs(again - out.norm) / out.norm;
        out.stable = out.stability_rel_change < 1e-3;
    } else {
        out.stable = true;
    }
    return out;
}

inline OutgoingNormResult outgoing_cutoff_norm(const SupportLayout& lay, double L,
                                               const PotentialSpec& V, double h, double E,
                                               double tol = 1e-6, int max_iter = 500,
                                               bool stability_check = true,
                                               Stencil stencil = Stencil::second_order) {
    return continued_cutoff_norm(lay, L, V, h, cdouble{E, 0.0}, tol, max_iter,
                                 stability_check, stencil);
}

// CSV: h,lambda_re,lambda_im,operator,norm,iters,converged
inline void write_norm_curve_csv(const NormCurve& curve, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw std::runtime_error("write_norm_curve_csv: cannot open " + path);
    std::fprintf(f, "h,lambda_re,lambda_im,operator,norm,iters,converged\n");
    for (const auto& s : curve.samples)
        std::fprintf(f, "%.12g,%.12g,%.12g,%s,%.12g,%d,%d\n", s.h, s.lambda.real(),
                     s.lambda.imag(), s.which_operator.c_str(), s.norm, s.iters,
                     s.converged ? 1 : 0);
    std::fclose(f);
}

}  // namespace semires
