#include <catch_amalgamated.hpp>

#include "oracles.hpp"
#include "semires/factorization.hpp"
#include "semires/linop.hpp"
#include "semires/norms.hpp"

using namespace semires;

namespace {

// grid-less operator wrapper for small synthetic matrices
DiscreteOperator wrap(BandedMatrix band) {
    DiscreteOperator op;
    auto g = std::make_shared<Grid>();
    g->n = band.n;
    g->dx = 1.0;
    g->half_length = band.n / 2.0;
    op.grid = g;
    op.band = std::move(band);
    op.tag = OperatorTag::custom;
    return op;
}

CutoffProfile ones_profile(int n) {
    CutoffProfile p;
    p.kind = ProfileKind::chi;
    p.values.assign(n, 1.0);
    return p;
}

BandedMatrix random_banded(int n, int bw, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, 1.0);
    BandedMatrix m(n, bw);
    for (int i = 0; i < n; ++i)
        for (int k = -bw; k <= bw; ++k) {
            if (i + k < 0 || i + k >= n) continue;
            m.at(i, k) = cdouble{dist(rng), dist(rng)};
            if (k == 0) m.at(i, 0) += 4.0;  // keep it comfortably invertible
        }
    return m;
}

}  // namespace

TEST_CASE("factorize_shifted") {
    SECTION("diagonal example") {
        BandedMatrix d(3, 0);
        d.at(0, 0) = 1.0;
        d.at(1, 0) = 2.0;
        d.at(2, 0) = 3.0;
        Factorization f(wrap(d), cdouble{0.0, 0.0});
        cvector e2{0.0, 1.0, 0.0};
        cvector x = f.solve(e2);
        CHECK(std::abs(x[1] - 0.5) < 1e-15);
        CHECK(std::abs(x[0]) < 1e-15);
        CHECK(std::abs(x[2]) < 1e-15);
    }

    SECTION("P_W at lambda = E succeeds for the default layout") {
        SupportLayout lay;
        auto g = make_grid(13.0, 0.01);
        auto V = make_potential(PotentialFamily::nontrap_bump, lay.R0);
        auto pw = attach_absorber(assemble_p(g, V, 0.1),
                                  make_profile(ProfileKind::barrierW, lay, *g));
        CHECK_NOTHROW(Factorization(pw, cdouble{1.0, 0.0}));
    }

    SECTION("random banded solve matches the dense inverse to 1e-10") {
        const int n = 50;
        auto band = random_banded(n, 2, 7);
        Eigen::MatrixXcd dense = oracles::dense_from_banded(band);
        const cdouble lambda{0.3, 0.1};
        Factorization f(wrap(band), lambda);
        cvector b = oracles::random_cvector(n, 11);
        cvector x = f.solve(b);
        Eigen::VectorXcd ref =
            (dense - lambda * Eigen::MatrixXcd::Identity(n, n)).lu().solve(oracles::to_eigen(b));
        double err = 0.0;
        for (int i = 0; i < n; ++i) err = std::max(err, std::abs(x[i] - ref(i)));
        CHECK(err < 1e-10 * ref.norm());
    }

    SECTION("round trip (op - lambda) solve(v) = v to 1e-10") {
        auto band = random_banded(200, 1, 3);
        auto op = wrap(band);
        const cdouble lambda{0.1, -0.2};
        Factorization f(op, lambda);
        for (unsigned seed : {1u, 2u, 3u}) {
            cvector v = oracles::random_cvector(200, seed);
            cvector x = f.solve(v);
            cvector y = op.band.apply(x);
            double err = 0.0;
            for (int i = 0; i < 200; ++i) err = std::max(err, std::abs(y[i] - lambda * x[i] - v[i]));
            CHECK(err <= 1e-10 * vec_norm(v));
        }
    }

    SECTION("shift on top of the spectrum is signalled") {
        BandedMatrix d(3, 0);
        d.at(0, 0) = 1.0;
        d.at(1, 0) = 2.0;
        d.at(2, 0) = 3.0;
        CHECK_THROWS_AS(Factorization(wrap(d), cdouble{2.0, 0.0}), SingularShift);
    }

    SECTION("adjoint solve consistency: <M u, v> = <u, M* v>") {
        auto band = random_banded(150, 1, 21);
        Factorization f(wrap(band), cdouble{0.2, 0.3});
        LinearOp m = solve_op(std::make_shared<Factorization>(std::move(f)));
        for (unsigned seed : {5u, 6u, 7u}) {
            cvector u = oracles::random_cvector(150, seed);
            cvector v = oracles::random_cvector(150, seed + 100);
            const cdouble a = vec_dot(m.apply(u), v);
            const cdouble b = vec_dot(u, m.apply_adjoint(v));
            CHECK(std::abs(a - b) < 1e-10 * std::abs(a));
        }
    }
}

TEST_CASE("cutoff_norm") {
    SECTION("self-adjoint case: 1/dist to the discrete spectrum") {
        auto g = make_grid(3.0, 0.05);
        auto op = assemble_p(g, PotentialSpec{}, 0.5);
        Eigen::MatrixXcd dense = oracles::dense_from_banded(op.band);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense.real());
        const double eps = 0.05;
        const cdouble lambda{1.0, eps};
        double dist = 1e300;
        for (int i = 0; i < es.eigenvalues().size(); ++i)
            dist = std::min(dist, std::abs(cdouble{es.eigenvalues()(i), 0.0} - lambda));
        auto f = std::make_shared<Factorization>(op, lambda);
        auto r = cutoff_norm(f, ones_profile(g->n), ones_profile(g->n), 1e-9, 5000);
        CHECK(r.norm <= 1.0 / eps * (1.0 + 1e-6));
        CHECK(r.norm == Catch::Approx(1.0 / dist).epsilon(1e-6));
    }

    SECTION("30x30 instance matches dense SVD to 1e-8") {
        const int n = 30;
        auto band = random_banded(n, 1, 17);
        std::vector<double> chi_l(n), chi_r(n);
        std::mt19937_64 rng(5);
        std::uniform_real_distribution<double> uni(0.0, 1.0);
        for (int i = 0; i < n; ++i) {
            chi_l[i] = uni(rng);
            chi_r[i] = uni(rng);
        }
        const cdouble lambda{0.1, 0.2};
        auto f = std::make_shared<Factorization>(wrap(band), lambda);
        CutoffProfile pl = ones_profile(n), pr = ones_profile(n);
        pl.values = chi_l;
        pr.values = chi_r;
        auto r = cutoff_norm(f, pl, pr, 1e-12, 20000);
        Eigen::MatrixXcd dense = oracles::dense_from_banded(band) -
                                 lambda * Eigen::MatrixXcd::Identity(n, n);
        Eigen::VectorXd dl(n), dr(n);
        for (int i = 0; i < n; ++i) {
            dl(i) = chi_l[i];
            dr(i) = chi_r[i];
        }
        Eigen::MatrixXcd m =
            dl.asDiagonal() * dense.inverse() * Eigen::MatrixXcd(dr.asDiagonal());
        CHECK(r.norm == Catch::Approx(oracles::svd_norm(m)).epsilon(1e-8));
    }

    SECTION("non-convergence is reported") {
        BandedMatrix d(4, 0);
        for (int i = 0; i < 4; ++i) d.at(i, 0) = i + 1.0;
        auto f = std::make_shared<Factorization>(wrap(d), cdouble{0.0, 0.0});
        CHECK_THROWS_AS(cutoff_norm(f, ones_profile(4), ones_profile(4), 1e-14, 2),
                        std::runtime_error);
    }
}

TEST_CASE("monotone absorption bound ||R_W(lambda)|| <= 1/Im lambda") {
    SupportLayout lay;
    auto g = make_grid(13.0, 0.02);
    auto V = make_potential(PotentialFamily::nontrap_bump, lay.R0);
    auto pw = attach_absorber(assemble_p(g, V, 0.2),
                              make_profile(ProfileKind::barrierW, lay, *g));
    for (double im : {0.05, 0.1, 0.2}) {
        auto f = std::make_shared<Factorization>(pw, cdouble{1.0, im});
        auto r = cutoff_norm(f, ones_profile(g->n), ones_profile(g->n), 1e-8, 2000);
        CHECK(r.norm <= (1.0 + 1e-6) / im);
    }
}

TEST_CASE("scaling_fit") {
    SECTION("exact power law 7/h") {
        std::vector<NormSample> samples;
        for (double h : {0.1, 0.07, 0.05, 0.035, 0.025})
            samples.push_back({h, cdouble{1, 0}, "synthetic", 7.0 / h, 0, true});
        auto fit = scaling_fit(samples);
        CHECK(fit.exponent == Catch::Approx(1.0).margin(1e-6));
        CHECK(fit.prefactor == Catch::Approx(7.0).margin(1e-6));
        CHECK(fit.residual_rms < 1e-10);
        CHECK_FALSE(fit.log_excess);
    }

    SECTION("log(1/h)/h: exponent slightly above 1, log-excess flagged") {
        std::vector<NormSample> samples;
        for (double h : {0.1, 0.07, 0.05, 0.035, 0.025})
            samples.push_back({h, cdouble{1, 0}, "synthetic", std::log(1.0 / h) / h, 0, true});
        auto fit = scaling_fit(samples);
        CHECK(fit.exponent > 1.0);
        CHECK(fit.exponent < 1.6);
        CHECK(fit.log_excess);
    }

    SECTION("constant curve: exponent 0") {
        std::vector<NormSample> samples;
        for (double h : {0.1, 0.05, 0.025})
            samples.push_back({h, cdouble{1, 0}, "synthetic", 3.0, 0, true});
        CHECK(scaling_fit(samples).exponent == Catch::Approx(0.0).margin(1e-12));
    }

    SECTION("degenerate sweep rejected") {
        std::vector<NormSample> samples(5, {0.1, cdouble{1, 0}, "x", 1.0, 0, true});
        CHECK_THROWS_AS(scaling_fit(samples), std::invalid_argument);
    }
}

TEST_CASE("outgoing_cutoff_norm: CAP placement independence") {
    SupportLayout lay;
    const double L = 13.0, h = 0.1, E = 1.0;

    SECTION("free potential is stable under absorber doubling") {
        auto r = outgoing_cutoff_norm(lay, L, PotentialSpec{}, h, E, 1e-7, 1000);
        CHECK(r.stable);
        CHECK(r.stability_rel_change < 1e-3);
        CHECK(r.norm > 1.0);
    }

    SECTION("explicit second placement agrees within the stability tolerance") {
        auto V = make_potential(PotentialFamily::nontrap_bump, lay.R0);
        auto a = continued_cutoff_norm(lay, L, V, h, cdouble{E, 0.0}, 1e-7, 1000, false);
        SupportLayout shifted = lay;
        shifted.absorber_gap = 2.0;
        auto b = continued_cutoff_norm(shifted, L + 4.0, V, h, cdouble{E, 0.0}, 1e-7,
                                       1000, false);
        CHECK(std::abs(a.norm - b.norm) / a.norm < 1e-3);
    }
}
