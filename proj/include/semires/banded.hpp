#pragma once

#include <complex>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include "semires/grid.hpp"
#include "semires/potential.hpp"
#include "semires/profile.hpp"

namespace semires {

using cdouble = std::complex<double>;
using cvector = std::vector<cdouble>;

// Square banded complex matrix stored by diagonals:
// diag(k)[i] = A(i, i+k-bw) is awkward; we store offsets -bw..+bw with
// d[k+bw][i] = A(i, i+k) (entries past the edge are kept as exact zeros).
struct BandedMatrix {
    int n = 0;
    int bw = 0;  // half bandwidth
    std::vector<std::vector<cdouble>> diags;  // size 2*bw+1, each length n

    BandedMatrix() = default;
    BandedMatrix(int n_, int bw_) : n(n_), bw(bw_) {
        diags.assign(2 * bw + 1, std::vector<cdouble>(n, cdouble{0.0, 0.0}));
    }

    cdouble& at(int i, int k) { return diags[k + bw][i]; }        // A(i, i+k)
    cdouble at(int i, int k) const { return diags[k + bw][i]; }

    cdouble entry(int i, int j) const {
        const int k = j - i;
        if (k < -bw || k > bw || j < 0 || j >= n) return {0.0, 0.0};
        return diags[k + bw][i];
    }

    void apply(const cdouble* x, cdouble* y) const {
        for (int i = 0; i < n; ++i) {
            cdouble acc{0.0, 0.0};
            const int k0 = std::max(-bw, -i), k1 = std::min(bw, n - 1 - i);
            for (int k = k0; k <= k1; ++k) acc += diags[k + bw][i] * x[i + k];
            y[i] = acc;
        }
    }

    cvector apply(const cvector& x) const {
        cvector y(n);
        apply(x.data(), y.data());
        return y;
    }

    // y = A^* x
    cvector apply_adjoint(const cvector& x) const {
        cvector y(n, cdouble{0.0, 0.0});
        for (int i = 0; i < n; ++i) {
            const int k0 = std::max(-bw, -i), k1 = std::min(bw, n - 1 - i);
            for (int k = k0; k <= k1; ++k)
                y[i + k] += std::conj(diags[k + bw][i]) * x[i];
        }
        return y;
    }

    void add_diagonal(const std::vector<double>& d, cdouble scale) {
        if (static_cast<int>(d.size()) != n)
            throw std::invalid_argument("BandedMatrix::add_diagonal: size mismatch");
        for (int i = 0; i < n; ++i) diags[bw][i] += scale * d[i];
    }

    void add_scalar_diagonal(cdouble z) {
        for (int i = 0; i < n; ++i) diags[bw][i] += z;
    }

    double one_norm() const {
        std::vector<double> col(n, 0.0);
        for (int i = 0; i < n; ++i) {
            const int k0 = std::max(-bw, -i), k1 = std::min(bw, n - 1 - i);
            for (int k = k0; k <= k1; ++k) col[i + k] += std::abs(diags[k + bw][i]);
        }
        double m = 0.0;
        for (double c : col) m = std::max(m, c);
        return m;
    }

    double max_abs() const {
        double m = 0.0;
        for (const auto& d : diags)
            for (const auto& z : d) m = std::max(m, std::abs(z));
        return m;
    }
};

enum class OperatorTag { P, P0, PW, PW0, custom };

inline std::string to_string(OperatorTag t) {
    switch (t) {
        case OperatorTag::P: return "P";
        case OperatorTag::P0: return "P0";
        case OperatorTag::PW: return "PW";
        case OperatorTag::PW0: return "PW0";
        case OperatorTag::custom: return "custom";
    }
    return "?";
}

enum class Stencil { second_order, fourth_order };

inline int stencil_bandwidth(Stencil s) { return s == Stencil::second_order ? 1 : 2; }

struct DiscreteOperator {
    BandedMatrix band;
    GridPtr grid;
    double h = 0.0;
    OperatorTag tag = OperatorTag::custom;
};

// P = -h^2 d^2/dx^2 + V on the grid, Dirichlet at x = +-L.
inline DiscreteOperator assemble_p(const GridPtr& grid, const PotentialSpec& potential,
                                   double h, Stencil stencil = Stencil::second_order) {
    if (h <= 0.0) throw std::invalid_argument("assemble_p: h must be positive");
    const int n = grid->n;
    const double c = h * h / (grid->dx * grid->dx);
    DiscreteOperator op;
    op.grid = grid;
    op.h = h;
    op.tag = potential.is_zero() ? OperatorTag::P0 : OperatorTag::P;
    op.band = BandedMatrix(n, stencil_bandwidth(stencil));
    if (stencil == Stencil::second_order) {
        for (int i = 0; i < n; ++i) {
            op.band.at(i, 0) = 2.0 * c;
            if (i > 0) op.band.at(i, -1) = -c;
            if (i < n - 1) op.band.at(i, 1) = -c;
        }
    } else {
        // interior: (-u_{i-2} + 16 u_{i-1} - 30 u_i + 16 u_{i+1} - u_{i+2}) / (12 dx^2)
        // next-to-boundary rows fall back to the 3-point stencil; the absorber
        // collar sits over the boundary so the local order drop is immaterial.
        for (int i = 0; i < n; ++i) {
            if (i >= 2 && i <= n - 3) {
                op.band.at(i, 0) = 30.0 * c / 12.0;
                op.band.at(i, -1) = -16.0 * c / 12.0;
                op.band.at(i, 1) = -16.0 * c / 12.0;
                op.band.at(i, -2) = c / 12.0;
                op.band.at(i, 2) = c / 12.0;
            } else {
                op.band.at(i, 0) = 2.0 * c;
                if (i > 0) op.band.at(i, -1) = -c;
                if (i < n - 1) op.band.at(i, 1) = -c;
            }
        }
    }
    if (!potential.is_zero()) {
        const auto v = potential.sample(*grid);
        op.band.add_diagonal(v, cdouble{1.0, 0.0});
    }
    return op;
}

// P_W = P - i diag(W)
inline DiscreteOperator attach_absorber(const DiscreteOperator& op, const CutoffProfile& w) {
    if (static_cast<int>(w.values.size()) != op.grid->n)
        throw std::invalid_argument("attach_absorber: grid mismatch");
    if (op.tag != OperatorTag::P && op.tag != OperatorTag::P0)
        throw std::invalid_argument("attach_absorber: operator already carries an absorber");
    DiscreteOperator out = op;
    out.band.add_diagonal(w.values, cdouble{0.0, -1.0});
    out.tag = op.tag == OperatorTag::P ? OperatorTag::PW : OperatorTag::PW0;
    return out;
}

// [A, diag(chi)] = A diag(chi) - diag(chi) A, exact in the discrete algebra:
// entry (i,j) becomes A(i,j) * (chi_j - chi_i).
inline DiscreteOperator commutator_with_cutoff(const DiscreteOperator& op,
                                               const CutoffProfile& profile) {
    if (static_cast<int>(profile.values.size()) != op.grid->n)
        throw std::invalid_argument("commutator_with_cutoff: grid mismatch");
    DiscreteOperator out;
    out.grid = op.grid;
    out.h = op.h;
    out.tag = OperatorTag::custom;
    out.band = BandedMatrix(op.band.n, op.band.bw);
    const auto& chi = profile.values;
    for (int k = -op.band.bw; k <= op.band.bw; ++k) {
        for (int i = 0; i < op.band.n; ++i) {
            const int j = i + k;
            if (j < 0 || j >= op.band.n) continue;
            // evaluated as P chi - chi P (not P*(chi_j - chi_i)) so the result
            // agrees bit for bit with the dense product definition
            out.band.at(i, k) = op.band.at(i, k) * chi[j] - chi[i] * op.band.at(i, k);
        }
    }
    return out;
}

// Band dump: one row per (node, offset) with a nonzero entry.
// Header: j,x,offset,re,im
inline void dump_operator_csv(const DiscreteOperator& op, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw std::runtime_error("dump_operator_csv: cannot open " + path);
    std::fprintf(f, "j,x,offset,re,im\n");
    for (int i = 0; i < op.band.n; ++i)
        for (int k = -op.band.bw; k <= op.band.bw; ++k) {
            if (i + k < 0 || i + k >= op.band.n) continue;
            const cdouble z = op.band.at(i, k);
            std::fprintf(f, "%d,%.17g,%d,%.17g,%.17g\n", i, op.grid->x[i], k, z.real(),
                         z.imag());
        }
    std::fclose(f);
}

}  // namespace semires
