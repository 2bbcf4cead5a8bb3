#include <catch_amalgamated.hpp>

#include "oracles.hpp"
#include "semires/gluing.hpp"

using namespace semires;

namespace {

// dense-oracle grid: N = 373 <= 400
GridPtr oracle_grid(double L = 13.0) { return make_grid(L, 2.0 * L / 372.0); }

}  // namespace

TEST_CASE("gluing identities on the dense oracle grid") {
    SupportLayout lay;
    auto g = oracle_grid();
    const double h = 0.5;
    auto V = make_potential(PotentialFamily::nontrap_bump, lay.R0);

    auto check_system = [](const GluingSystem& sys) {
        CHECK(residual_gluing_identity(sys) <= 1e-10);
        auto [nk, ni] = check_nilpotency(sys);
        CHECK(nk <= 1e-12);
        CHECK(ni <= 1e-12);
        CHECK(check_factor_identity(sys) <= 1e-10);
    };

    SECTION("toCAP at real shift E") {
        check_system(build_gluing(GluingMode::toCAP, g, V, h, cdouble{1.0, 0.0}, lay));
    }

    SECTION("fromCAP just below the axis") {
        check_system(
            build_gluing(GluingMode::fromCAP, g, V, h, cdouble{1.0, -0.01}, lay));
    }

    SECTION("V = 0 degenerate case stays exact") {
        check_system(
            build_gluing(GluingMode::toCAP, g, PotentialSpec{}, h, cdouble{1.0, 0.0}, lay));
    }
}

TEST_CASE("parametrix matches an independently assembled dense F") {
    SupportLayout lay;
    auto g = oracle_grid();
    const double h = 0.5;
    const cdouble shift{1.0, 0.0};
    auto V = make_potential(PotentialFamily::nontrap_bump, lay.R0);
    auto sys = build_gluing(GluingMode::toCAP, g, V, h, shift, lay);
    const int n = g->n;

    auto diag = [&](const std::vector<double>& d) {
        Eigen::VectorXcd v(n);
        for (int i = 0; i < n; ++i) v(i) = d[i];
        return Eigen::MatrixXcd(v.asDiagonal());
    };
    const Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(n, n);

    // rebuild both resolvents densely from scratch
    auto p = assemble_p(g, V, h);
    auto p0 = assemble_p(g, PotentialSpec{}, h);
    Eigen::MatrixXcd r_inner =
        (oracles::dense_from_banded(attach_absorber(p, sys.absorber).band) - shift * id)
            .lu()
            .solve(id);
    Eigen::MatrixXcd r_outer =
        (oracles::dense_from_banded(attach_absorber(p0, sys.barrier).band) - shift * id)
            .lu()
            .solve(id);
    Eigen::MatrixXcd f_ref =
        diag(sys.chiK_shifted.values) * r_inner * diag(sys.chiK.values) +
        diag(sys.chiInf_shifted.values) * r_outer * diag(sys.chiInf.values);

    Eigen::MatrixXcd f_got = realize_dense(sys.F);
    CHECK((f_got - f_ref).cwiseAbs().maxCoeff() <
          1e-10 * f_ref.cwiseAbs().maxCoeff());

    // and the error terms against the commutator definition
    Eigen::MatrixXcd ak_ref = oracles::dense_from_banded(sys.comm_K) * r_inner *
                              diag(sys.chiK.values);
    CHECK((realize_dense(sys.A_K) - ak_ref).cwiseAbs().maxCoeff() <
          1e-10 * std::max(ak_ref.cwiseAbs().maxCoeff(), 1e-12));
}

TEST_CASE("layout violations are refused") {
    SupportLayout lay;
    auto g = oracle_grid();
    const double h = 0.5;
    auto V = make_potential(PotentialFamily::nontrap_bump, lay.R0);

    SECTION("absorber pulled into the inner region") {
        SupportLayout bad = lay;
        bad.absorber_gap = -2.5;  // onset at 4.5, inside supp chiK(|x|-s)
        CHECK_THROWS_AS(
            build_gluing(GluingMode::toCAP, g, V, h, cdouble{1.0, 0.0}, bad),
            LayoutViolation);
    }

    SECTION("potential leaking past r_1") {
        PotentialSpec wide = V;
        wide.support_radius = 3.0;
        CHECK_THROWS_AS(
            build_gluing(GluingMode::toCAP, g, wide, h, cdouble{1.0, 0.0}, lay),
            LayoutViolation);
    }
}

TEST_CASE("support algebra is what makes the identities work") {
    SupportLayout lay;
    auto g = oracle_grid();
    const double h = 0.5;
    auto V = make_potential(PotentialFamily::nontrap_bump, lay.R0);
    auto sys = build_gluing(GluingMode::toCAP, g, V, h, cdouble{1.0, 0.0}, lay);

    SECTION("zeroed parametrix fails the identity by O(1)") {
        LinearOp zero_f = scale_op(0.0, sys.F);
        LinearOp rhs = add_op(identity_op(g->n), add_op(sys.A_K, sys.A_inf));
        LinearOp resid = sub_op(compose(sys.target_op, zero_f), rhs);
        CHECK(dense_op_norm(realize_dense(resid)) >= 1.0);
    }

    SECTION("overlapping cutoff destroys nilpotency") {
        // replace chiK by 1 everywhere: the commutator rows now meet the cutoff
        std::vector<double> ones(g->n, 1.0);
        LinearOp a_bad = compose(banded_op(sys.comm_K),
                                 compose(solve_op(sys.inner), diag_op(ones)));
        const double na = dense_op_norm(realize_dense(a_bad));
        const double na2 = dense_op_norm(realize_dense(compose(a_bad, a_bad)));
        REQUIRE(na > 0.0);
        CHECK(na2 / na > 1e-6);
    }
}

TEST_CASE("decay sweep") {
    SupportLayout lay;
    auto V = make_potential(PotentialFamily::nontrap_bump, lay.R0);

    SECTION("error product shrinks along a modest sweep") {
        std::vector<double> hs{0.4, 0.3, 0.22, 0.15, 0.1};
        auto sweep = decay_sweep(GluingMode::toCAP, hs, V, cdouble{1.0, 0.0}, lay, 13.0);
        REQUIRE(sweep.rows.size() == 5);
        for (size_t i = 0; i + 1 < sweep.rows.size(); ++i)
            CHECK(sweep.rows[i + 1].norm_product < sweep.rows[i].norm_product);
        for (const auto& r : sweep.rows) CHECK(r.residual_identity <= 1e-8);
        CHECK(sweep.fitted_order > 1.0);
    }

    SECTION("synthetic h^4 curve calibrates the fitter") {
        std::vector<std::pair<double, double>> curve;
        for (double h : {0.1, 0.07, 0.05, 0.035, 0.025})
            curve.emplace_back(h, 2.5 * h * h * h * h);
        CHECK(fitted_decay_order(curve) == Catch::Approx(4.0).margin(0.1));
    }

    SECTION("degenerate sweeps rejected") {
        CHECK_THROWS_AS(decay_sweep(GluingMode::toCAP, {0.1, 0.07, 0.05, 0.035},
                                    V, cdouble{1.0, 0.0}, lay, 13.0),
                        std::invalid_argument);
        CHECK_THROWS_AS(decay_sweep(GluingMode::toCAP, {0.1, 0.1, 0.1, 0.1, 0.1}, V,
                                    cdouble{1.0, 0.0}, lay, 13.0),
                        std::invalid_argument);
    }
}

TEST_CASE("glued cutoff norm tracks the direct measurement") {
    // chi F (Id - A_K - A_inf + A_K A_inf) chi realizes chi (target-shift)^{-1} chi
    // up to the A_inf A_K remainder; at moderate h they already agree well.
    SupportLayout lay;
    const double h = 0.2, L = 13.0;
    auto V = make_potential(PotentialFamily::nontrap_bump, lay.R0);
    const double dx = std::min(h / 10.0, L / 51.0);
    auto g = make_grid(L, dx);
    auto sys = build_gluing(GluingMode::toCAP, g, V, h, cdouble{1.0, 0.0}, lay);

    const double glued = glued_cutoff_norm(sys, 1e-8, 4000);
    auto p = assemble_p(g, V, h);
    auto fact = std::make_shared<Factorization>(attach_absorber(p, sys.barrier),
                                                cdouble{1.0, 0.0});
    const double direct = cutoff_norm(fact, sys.chi, sys.chi, 1e-8, 4000).norm;
    CHECK(std::abs(glued - direct) <= 0.1 * direct);
}
