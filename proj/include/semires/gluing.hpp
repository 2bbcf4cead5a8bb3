#pragma once

#include <cmath>
#include <cstdio>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "semires/banded.hpp"
#include "semires/factorization.hpp"
#include "semires/layout.hpp"
#include "semires/linop.hpp"
#include "semires/norms.hpp"
#include "semires/potential.hpp"
#include "semires/profile.hpp"

namespace semires {

enum class GluingMode {
    toCAP,   // glue R(E+i0) with R_{W,0}(E); target P_W - E
    fromCAP  // glue R_W(lambda) with the free outgoing resolvent; target is the
             // continued-resolvent surrogate P - i W_out - lambda
};

inline std::string to_string(GluingMode m) {
    return m == GluingMode::toCAP ? "toCAP" : "fromCAP";
}

struct LayoutViolation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Parametrix F = chiK(|x|-s) R_inner chiK(|x|) + chiInf(|x|+s) R_outer chiInf(|x|)
// together with the commutator error terms A_K, A_inf. The support algebra
// makes (target - shift) F = Id + A_K + A_inf exact in the discrete algebra.
struct GluingSystem {
    GluingMode mode;
    GridPtr grid;
    SupportLayout layout;
    double h = 0.0;
    cdouble shift;  // E (toCAP) or lambda (fromCAP)

    CutoffProfile chiK, chiK_shifted, chiInf, chiInf_shifted, chi, barrier, absorber;

    std::shared_ptr<const Factorization> inner, outer;
    BandedMatrix target;        // P_W (toCAP) or P - i W_out (fromCAP), unshifted
    BandedMatrix comm_K;        // [P, chiK(|x|-s)]
    BandedMatrix comm_inf;      // [P, chiInf(|x|+s)]

    LinearOp F, A_K, A_inf, target_op;  // target_op applies (target - shift)
};

namespace detail {

inline std::vector<int> nonzero_rows(const BandedMatrix& m) {
    std::vector<int> rows;
    for (int i = 0; i < m.n; ++i) {
        double s = 0.0;
        for (int k = -m.bw; k <= m.bw; ++k)
            if (i + k >= 0 && i + k < m.n) s += std::abs(m.at(i, k));
        if (s != 0.0) rows.push_back(i);
    }
    return rows;
}

inline void require_row_disjoint(const BandedMatrix& comm,
                                 const std::vector<double>& profile, const char* what) {
    for (int i : nonzero_rows(comm))
        if (profile[i] != 0.0)
            throw LayoutViolation(std::string("gluing layout violation: ") + what);
}

inline void require_pointwise_disjoint(const std::vector<double>& a,
                                       const std::vector<double>& b, const char* what) {
    for (size_t i = 0; i < a.size(); ++i)
        if (a[i] != 0.0 && b[i] != 0.0)
            throw LayoutViolation(std::string("gluing layout violation: ") + what);
}

}  // namespace detail

inline GluingSystem build_gluing(GluingMode mode, const GridPtr& grid,
                                 const PotentialSpec& V, double h, cdouble shift,
                                 const SupportLayout& layout,
                                 Stencil stencil = Stencil::second_order) {
    GluingSystem sys;
    sys.mode = mode;
    sys.grid = grid;
    sys.layout = layout;
    sys.h = h;
    sys.shift = shift;

    sys.chiK = make_profile(ProfileKind::chiK, layout, *grid);
    sys.chiK_shifted = make_profile(ProfileKind::chiK, layout, *grid, -layout.s);
    sys.chiInf = make_profile(ProfileKind::chiInf, layout, *grid);
    sys.chiInf_shifted = make_profile(ProfileKind::chiInf, layout, *grid, layout.s);
    sys.chi = make_profile(ProfileKind::chi, layout, *grid);
    sys.barrier = make_profile(ProfileKind::barrierW, layout, *grid);
    sys.absorber = make_profile(ProfileKind::absorber, layout, *grid);

    const DiscreteOperator p = assemble_p(grid, V, h, stencil);
    const DiscreteOperator p0 = assemble_p(grid, PotentialSpec{}, h, stencil);
    sys.comm_K = commutator_with_cutoff(p, sys.chiK_shifted).band;
    sys.comm_inf = commutator_with_cutoff(p, sys.chiInf_shifted).band;

    // The exactness of the gluing identities rides on these disjointness
    // relations; refuse to build when the layout breaks them.
    detail::require_row_disjoint(sys.comm_K, sys.chiK.values, "supp chiK meets [P, chiK(|x|-s)]");
    detail::require_row_disjoint(sys.comm_inf, sys.chiInf.values,
                                 "supp chiInf meets [P, chiInf(|x|+s)]");
    detail::require_pointwise_disjoint(sys.chiK_shifted.values, sys.barrier.values,
                                       "supp chiK(|x|-s) meets W");
    detail::require_pointwise_disjoint(sys.chiK_shifted.values, sys.absorber.values,
                                       "supp chiK(|x|-s) meets the outer absorber");
    detail::require_pointwise_disjoint(sys.chiInf_shifted.values, V.sample(*grid),
                                       "supp chiInf(|x|+s) meets V");

    const DiscreteOperator p_w = attach_absorber(p, sys.barrier);
    const DiscreteOperator p_cap = attach_absorber(p, sys.absorber);
    const DiscreteOperator p0_w = attach_absorber(p0, sys.barrier);
    const DiscreteOperator p0_cap = attach_absorber(p0, sys.absorber);

    if (mode == GluingMode::toCAP) {
        // inner: limiting-absorption surrogate for R(E+i0); outer: R_{W,0}(E)
        sys.inner = std::make_shared<Factorization>(p_cap, shift);
        sys.outer = std::make_shared<Factorization>(p0_w, shift);
        sys.target = p_w.band;
    } else {
        // inner: R_W(lambda); outer: free resolvent with the outer absorber
        sys.inner = std::make_shared<Factorization>(p_w, shift);
        sys.outer = std::make_shared<Factorization>(p0_cap, shift);
        sys.target = p_cap.band;
    }

    LinearOp inner_piece = compose(diag_op(sys.chiK_shifted.values),
                                   compose(solve_op(sys.inner), diag_op(sys.chiK.values)));
    LinearOp outer_piece = compose(diag_op(sys.chiInf_shifted.values),
                                   compose(solve_op(sys.outer), diag_op(sys.chiInf.values)));
    sys.F = add_op(inner_piece, outer_piece);
    sys.A_K = compose(banded_op(sys.comm_K),
                      compose(solve_op(sys.inner), diag_op(sys.chiK.values)));
    sys.A_inf = compose(banded_op(sys.comm_inf),
                        compose(solve_op(sys.outer), diag_op(sys.chiInf.values)));
    sys.target_op =
        sub_op(banded_op(sys.target), scale_op(shift, identity_op(grid->n)));
    return sys;
}

namespace detail {

// Dense oracle at oracle sizes, power iteration otherwise. Residual operators
// sit at roundoff scale where the rel-change test cannot settle, so a
// non-converged estimate is returned as-is rather than rejected.
inline double op_norm_any(const LinearOp& a, double tol, int max_iter) {
    if (a.n <= 400) return dense_op_norm(realize_dense(a));
    return operator_norm(a, tol, max_iter).norm;
}

}  // namespace detail

// || (target - shift) F - (Id + A_K + A_inf) ||, relative.
inline double residual_gluing_identity(const GluingSystem& sys, double tol = 1e-6,
                                       int max_iter = 500) {
    LinearOp lhs = compose(sys.target_op, sys.F);
    LinearOp rhs = add_op(identity_op(sys.F.n), add_op(sys.A_K, sys.A_inf));
    const double r = detail::op_norm_any(sub_op(lhs, rhs), tol, max_iter);
    return r / std::max(1.0, detail::op_norm_any(rhs, tol, max_iter));
}

// (||A_K^2|| / ||A_K||, ||A_inf^2|| / ||A_inf||); both vanish identically when
// the support algebra holds.
inline std::pair<double, double> check_nilpotency(const GluingSystem& sys,
                                                  double tol = 1e-6, int max_iter = 500) {
    const double nk = detail::op_norm_any(sys.A_K, tol, max_iter);
    const double ni = detail::op_norm_any(sys.A_inf, tol, max_iter);
    const double nk2 = detail::op_norm_any(compose(sys.A_K, sys.A_K), tol, max_iter);
    const double ni2 = detail::op_norm_any(compose(sys.A_inf, sys.A_inf), tol, max_iter);
    return {nk2 / std::max(nk, 1e-300), ni2 / std::max(ni, 1e-300)};
}

// Residual of
//   (target - shift) F (Id - A_K - A_inf + A_K A_inf)
//     = Id - A_inf A_K + A_inf A_K A_inf,
// relative to the right-hand side.
inline double check_factor_identity(const GluingSystem& sys, double tol = 1e-6,
                                    int max_iter = 500) {
    const LinearOp id = identity_op(sys.F.n);
    const LinearOp ak_ai = compose(sys.A_K, sys.A_inf);
    const LinearOp corrector =
        add_op(id, add_op(scale_op(-1.0, add_op(sys.A_K, sys.A_inf)), ak_ai));
    const LinearOp lhs = compose(compose(sys.target_op, sys.F), corrector);
    const LinearOp ai_ak = compose(sys.A_inf, sys.A_K);
    const LinearOp rhs =
        add_op(id, add_op(scale_op(-1.0, ai_ak), compose(ai_ak, sys.A_inf)));
    const double r = detail::op_norm_any(sub_op(lhs, rhs), tol, max_iter);
    return r / std::max(1.0, detail::op_norm_any(rhs, tol, max_iter));
}

// || A_inf A_K ||
inline double error_product_norm(const GluingSystem& sys, double tol = 1e-8,
                                 int max_iter = 2000) {
    return detail::op_norm_any(compose(sys.A_inf, sys.A_K), tol, max_iter);
}

inline double norm_A_K(const GluingSystem& sys, double tol = 1e-6, int max_iter = 500) {
    return detail::op_norm_any(sys.A_K, tol, max_iter);
}

// || chi A_inf chi ||
inline double norm_A_inf_cut(const GluingSystem& sys, double tol = 1e-6,
                             int max_iter = 500) {
    const LinearOp d = diag_op(sys.chi.values);
    return detail::op_norm_any(compose(d, compose(sys.A_inf, d)), tol, max_iter);
}

// || chi F (Id - A_K - A_inf + A_K A_inf) chi ||, the glued-norm bound route.
inline double glued_cutoff_norm(const GluingSystem& sys, double tol = 1e-6,
                                int max_iter = 500) {
    const LinearOp id = identity_op(sys.F.n);
    const LinearOp corrector = add_op(
        id, add_op(scale_op(-1.0, add_op(sys.A_K, sys.A_inf)),
                   compose(sys.A_K, sys.A_inf)));
    const LinearOp d = diag_op(sys.chi.values);
    return detail::op_norm_any(compose(d, compose(compose(sys.F, corrector), d)), tol,
                               max_iter);
}

struct DecaySweepRow {
    double h = 0.0;
    double norm_AK = 0.0;
    double norm_Ainf_cut = 0.0;
    double norm_product = 0.0;
    double slope_local = 0.0;  // between this h and the previous (larger) one
    double residual_identity = 0.0;
};

struct DecaySweep {
    GluingMode mode;
    std::vector<DecaySweepRow> rows;  // sorted by decreasing h
    double fitted_order = 0.0;        // least-squares slope of log norm vs log(1/h)
    bool superpolynomial = false;     // local slopes > 3 and increasing
};

inline DecaySweep decay_sweep(GluingMode mode, const std::vector<double>& h_list,
                              const PotentialSpec& V, cdouble shift,
                              const SupportLayout& layout, double L,
                              Stencil stencil = Stencil::second_order,
                              double tol = 1e-8, int max_iter = 2000) {
    if (h_list.size() < 5)
        throw std::invalid_argument("decay_sweep: need >= 5 values of h");
    std::vector<double> hs = h_list;
    std::sort(hs.begin(), hs.end(), std::greater<>());
    if (hs.front() - hs.back() < 1e-12)
        throw std::invalid_argument("decay_sweep: degenerate sweep");
    DecaySweep sweep;
    sweep.mode = mode;
    std::vector<NormSample> samples;
    for (double h : hs) {
        const double dx = std::min(h / 10.0, L / 51.0);
        GridPtr grid = make_grid(L, dx);
        GluingSystem sys = build_gluing(mode, grid, V, h, shift, layout, stencil);
        DecaySweepRow row;
        row.h = h;
        row.norm_AK = norm_A_K(sys, 1e-6, 1000);
        row.norm_Ainf_cut = norm_A_inf_cut(sys, 1e-6, 1000);
        row.norm_product = error_product_norm(sys, tol, max_iter);
        row.residual_identity = residual_gluing_identity(sys, 1e-6, 1000);
        if (!sweep.rows.empty()) {
            const DecaySweepRow& prev = sweep.rows.back();
            row.slope_local = (std::log(row.norm_product) - std::log(prev.norm_product)) /
                              (std::log(1.0 / row.h) - std::log(1.0 / prev.h));
        }
        samples.push_back({h, shift, "AinfAK", row.norm_product, 0, true});
        sweep.rows.push_back(row);
    }
    // norm ~ h^order, so order = -(slope of log norm vs log(1/h))
    sweep.fitted_order = -scaling_fit(samples).exponent;
    // local decay orders must exceed 3 and be non-decreasing as h shrinks;
    // adjacent-sample slopes carry ~0.2 of jitter, so the monotonicity test
    // gets that much slack (pinned here, not configurable)
    sweep.superpolynomial = sweep.rows.size() >= 2;
    double prev_order = 0.0;
    for (size_t i = 1; i < sweep.rows.size(); ++i) {
        const double order = -sweep.rows[i].slope_local;
        if (order < 3.0 || order + 0.25 < prev_order) sweep.superpolynomial = false;
        prev_order = order;
    }
    return sweep;
}

// Fits the decay order of a synthetic curve (h, value); calibration path for
// the sweep fitter.
inline double fitted_decay_order(const std::vector<std::pair<double, double>>& curve) {
    std::vector<NormSample> samples;
    for (const auto& [h, v] : curve) samples.push_back({h, cdouble{0, 0}, "synthetic", v, 0, true});
    return -scaling_fit(samples).exponent;
}

// CSV: mode,h,norm_AK,norm_Ainf_cut,norm_product,slope_local,residual_identity
inline void write_decay_sweep_csv(const DecaySweep& sweep, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw std::runtime_error("write_decay_sweep_csv: cannot open " + path);
    std::fprintf(f, "mode,h,norm_AK,norm_Ainf_cut,norm_product,slope_local,residual_identity\n");
    for (const auto& r : sweep.rows)
        std::fprintf(f, "%s,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g\n",
                     to_string(sweep.mode).c_str(), r.h, r.norm_AK, r.norm_Ainf_cut,
                     r.norm_product, r.slope_local, r.residual_identity);
    std::fclose(f);
}

}  // namespace semires
