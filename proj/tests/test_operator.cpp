#include <catch_amalgamated.hpp>

#include "oracles.hpp"
#include "semires/banded.hpp"
#include "semires/grid.hpp"
#include "semires/layout.hpp"
#include "semires/potential.hpp"
#include "semires/profile.hpp"

using namespace semires;

TEST_CASE("make_grid basics") {
    auto g = make_grid(13.0, 0.01);
    CHECK(g->n == 2601);
    CHECK(g->x.front() == -13.0);
    CHECK(g->x.back() == 13.0);
    for (int j = 1; j < g->n; ++j) CHECK(g->x[j] > g->x[j - 1]);

    auto g2 = make_grid(13.0, 0.05 / 10.0);
    CHECK(g2->n == 5201);

    CHECK_THROWS_AS(make_grid(1.0, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(make_grid(-1.0, 0.01), std::invalid_argument);
}

TEST_CASE("cutoff profiles and support geometry") {
    SupportLayout lay;  // R0 = 1, s = 1
    auto g = make_grid(13.0, 0.01);

    SECTION("chiK: 1 inside |x| <= 3, 0 outside |x| >= 4") {
        auto chiK = make_profile(ProfileKind::chiK, lay, *g);
        for (int j = 0; j < g->n; ++j) {
            const double r = std::abs(g->x[j]);
            CHECK(chiK.values[j] >= 0.0);
            CHECK(chiK.values[j] <= 1.0);
            if (r <= 3.0) CHECK(chiK.values[j] == 1.0);
            if (r >= 4.0) CHECK(chiK.values[j] == 0.0);
        }
    }

    SECTION("chiInf = 1 - chiK exactly") {
        auto chiK = make_profile(ProfileKind::chiK, lay, *g);
        auto chiInf = make_profile(ProfileKind::chiInf, lay, *g);
        double m = 0.0;
        for (int j = 0; j < g->n; ++j)
            m = std::max(m, std::abs(chiK.values[j] + chiInf.values[j] - 1.0));
        CHECK(m == 0.0);
    }

    SECTION("barrier W: 0 on |x| <= 5, 1 on |x| >= 6") {
        auto w = make_profile(ProfileKind::barrierW, lay, *g);
        for (int j = 0; j < g->n; ++j) {
            const double r = std::abs(g->x[j]);
            if (r <= 5.0) CHECK(w.values[j] == 0.0);
            if (r >= 6.0) CHECK(w.values[j] == 1.0);
        }
    }

    SECTION("shifted variants move the transition by s") {
        auto shifted = make_profile(ProfileKind::chiK, lay, *g, -lay.s);
        for (int j = 0; j < g->n; ++j) {
            const double r = std::abs(g->x[j]);
            if (r <= 4.0) CHECK(shifted.values[j] == 1.0);
            if (r >= 5.0) CHECK(shifted.values[j] == 0.0);
        }
    }

    SECTION("radius ordering violation rejected") {
        SupportLayout bad = lay;
        bad.trans_lo = 0.8;
        bad.trans_hi = 0.2;
        CHECK_THROWS_AS(make_profile(ProfileKind::chiK, bad, *g), std::invalid_argument);
    }

    SECTION("layout must fit the grid") {
        auto small = make_grid(5.0, 0.01);
        CHECK_THROWS_AS(make_profile(ProfileKind::chiK, lay, *small),
                        std::invalid_argument);
    }
}

TEST_CASE("assemble_p: constants, plane waves, support") {
    SupportLayout lay;
    auto g = make_grid(13.0, 0.01);
    const double h = 0.1;

    SECTION("constants are harmonic away from the boundary") {
        auto p0 = assemble_p(g, PotentialSpec{}, h);
        CHECK(p0.tag == OperatorTag::P0);
        cvector u(g->n, cdouble{1.0, 0.0});
        cvector y = p0.band.apply(u);
        for (int j = 1; j < g->n - 1; ++j) CHECK(std::abs(y[j]) < 1e-13);
    }

    SECTION("plane wave symbol with second-order convergence") {
        const double xi = 0.7;
        auto err_at = [&](double dx) {
            auto grid = make_grid(13.0, dx);
            auto p0 = assemble_p(grid, PotentialSpec{}, h);
            cvector u(grid->n);
            for (int j = 0; j < grid->n; ++j) {
                const double ph = xi * grid->x[j] / h;
                u[j] = cdouble{std::cos(ph), std::sin(ph)};
            }
            cvector y = p0.band.apply(u);
            double worst = 0.0;
            for (int j = 2; j < grid->n - 2; ++j)
                worst = std::max(worst, std::abs(y[j] - xi * xi * u[j]));
            return worst / (xi * xi);
        };
        const double e1 = err_at(0.02), e2 = err_at(0.01);
        CHECK(e1 < 0.01);
        CHECK(e2 / e1 == Catch::Approx(0.25).margin(0.05));  // O(dx^2)
    }

    SECTION("fourth-order stencil converges faster") {
        const double xi = 0.7;
        auto err_at = [&](double dx) {
            auto grid = make_grid(13.0, dx);
            auto p0 = assemble_p(grid, PotentialSpec{}, h, Stencil::fourth_order);
            cvector u(grid->n);
            for (int j = 0; j < grid->n; ++j) {
                const double ph = xi * grid->x[j] / h;
                u[j] = cdouble{std::cos(ph), std::sin(ph)};
            }
            cvector y = p0.band.apply(u);
            double worst = 0.0;
            for (int j = 4; j < grid->n - 4; ++j)
                worst = std::max(worst, std::abs(y[j] - xi * xi * u[j]));
            return worst / (xi * xi);
        };
        CHECK(err_at(0.01) / err_at(0.02) < 0.12);  // ~ (1/2)^4
    }

    SECTION("rows agree with P0 outside supp V") {
        auto V = make_potential(PotentialFamily::nontrap_bump, lay.R0);
        auto p = assemble_p(g, V, h);
        auto p0 = assemble_p(g, PotentialSpec{}, h);
        CHECK(p.tag == OperatorTag::P);
        for (int j = 0; j < g->n; ++j) {
            if (std::abs(g->x[j]) < lay.R0) continue;
            for (int k = -1; k <= 1; ++k)
                CHECK(p.band.entry(j, j + k) == p0.band.entry(j, j + k));
        }
    }

    SECTION("P is complex-symmetric with real entries") {
        auto V = make_potential(PotentialFamily::nontrap_bump, lay.R0);
        auto p = assemble_p(g, V, h);
        for (int j = 0; j < g->n - 1; ++j) {
            CHECK(p.band.entry(j, j + 1) == p.band.entry(j + 1, j));
            CHECK(p.band.entry(j, j).imag() == 0.0);
        }
    }
}

TEST_CASE("attach_absorber") {
    SupportLayout lay;
    auto g = make_grid(13.0, 0.01);
    auto V = make_potential(PotentialFamily::nontrap_bump, lay.R0);
    auto p = assemble_p(g, V, 0.1);
    auto w = make_profile(ProfileKind::barrierW, lay, *g);

    SECTION("PW - P = -i diag(W) exactly") {
        auto pw = attach_absorber(p, w);
        CHECK(pw.tag == OperatorTag::PW);
        for (int j = 0; j < g->n; ++j) {
            CHECK(pw.band.entry(j, j) - p.band.entry(j, j) ==
                  cdouble{0.0, -w.values[j]});
            if (j + 1 < g->n) CHECK(pw.band.entry(j, j + 1) == p.band.entry(j, j + 1));
        }
    }

    SECTION("W = 0 leaves the operator unchanged") {
        CutoffProfile zero = w;
        std::fill(zero.values.begin(), zero.values.end(), 0.0);
        auto pw = attach_absorber(p, zero);
        CHECK(pw.band.max_abs() == p.band.max_abs());
        for (int j = 0; j < g->n; ++j) CHECK(pw.band.entry(j, j) == p.band.entry(j, j));
    }

    SECTION("quadratic form: Im <P_W u, u> <= 0 on random vectors") {
        auto pw = attach_absorber(p, w);
        for (unsigned seed : {1u, 2u, 3u, 4u, 5u}) {
            cvector u = oracles::random_cvector(g->n, seed);
            cvector y = pw.band.apply(u);
            CHECK(vec_dot(u, y).imag() <= 1e-10 * vec_norm(u) * vec_norm(u));
        }
    }

    SECTION("grid mismatch rejected") {
        auto g2 = make_grid(17.0, 0.01);
        auto w2 = make_profile(ProfileKind::barrierW, lay, *g2);
        CHECK_THROWS_AS(attach_absorber(p, w2), std::invalid_argument);
    }
}

TEST_CASE("commutator_with_cutoff") {
    SupportLayout lay;
    const double h = 0.3;

    SECTION("commutator with a constant profile vanishes") {
        auto g = make_grid(13.0, 0.05);
        auto p = assemble_p(g, PotentialSpec{}, h);
        CutoffProfile one;
        one.kind = ProfileKind::chi;
        one.values.assign(g->n, 1.0);
        auto c = commutator_with_cutoff(p, one);
        CHECK(c.band.max_abs() == 0.0);
    }

    SECTION("support confined to the transition region") {
        auto g = make_grid(13.0, 0.01);
        auto p = assemble_p(g, PotentialSpec{}, h);
        auto shifted = make_profile(ProfileKind::chiK, lay, *g, -lay.s);
        auto c = commutator_with_cutoff(p, shifted);
        for (int i = 0; i < g->n; ++i) {
            double rowsum = 0.0;
            for (int k = -1; k <= 1; ++k) rowsum += std::abs(c.band.entry(i, i + k));
            const double r = std::abs(g->x[i]);
            if (rowsum != 0.0) {
                CHECK(r > lay.r(3));
                CHECK(r < lay.r(4));
            }
        }
    }

    SECTION("matches dense P chi - chi P on a 200-point grid") {
        auto g = make_grid(5.0, 0.05);
        REQUIRE(g->n == 201);
        SupportLayout tiny;
        tiny.R0 = 0.2;
        tiny.s = 0.6;
        tiny.absorber_width = 0.4;
        tiny.absorber_gap = 0.1;
        auto V = make_potential(PotentialFamily::nontrap_bump, tiny.R0);
        auto p = assemble_p(g, V, h);
        auto chi = make_profile(ProfileKind::chiK, tiny, *g);
        auto c = commutator_with_cutoff(p, chi);

        Eigen::MatrixXcd dense_p = oracles::dense_from_banded(p.band);
        Eigen::VectorXcd d(g->n);
        for (int j = 0; j < g->n; ++j) d(j) = chi.values[j];
        Eigen::MatrixXcd expected = dense_p * d.asDiagonal() -
                                    Eigen::MatrixXcd(d.asDiagonal()) * dense_p;
        Eigen::MatrixXcd got = oracles::dense_from_banded(c.band);
        CHECK((got - expected).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("operator CSV dump") {
    auto g = make_grid(5.0, 0.05);
    auto p = assemble_p(g, PotentialSpec{}, 0.3);
    const std::string path = "op_dump_test.csv";
    dump_operator_csv(p, path);
    std::FILE* f = std::fopen(path.c_str(), "r");
    REQUIRE(f != nullptr);
    char line[256];
    REQUIRE(std::fgets(line, sizeof line, f) != nullptr);
    CHECK(std::string(line) == "j,x,offset,re,im\n");
    std::fclose(f);
    std::remove(path.c_str());
}
