#pragma once

#include <complex>

#define lapack_complex_double std::complex<double>
#define lapack_complex_float std::complex<float>
#include <lapacke.h>

#include <stdexcept>
#include <vector>

#include "semires/banded.hpp"

namespace semires {

// Thrown when lambda is numerically on top of the discrete spectrum.
// The caller perturbs lambda or records a resonance candidate.
struct SingularShift : std::runtime_error {
    cdouble lambda;
    explicit SingularShift(cdouble lam)
        : std::runtime_error("factorize_shifted: shift is numerically an eigenvalue"),
          lambda(lam) {}
};

// Banded LU of (op - lambda I) via zgbtrf; solves are O(N) per right-hand side.
// Immutable after construction, safe for concurrent solves.
class Factorization {
  public:
    Factorization(const DiscreteOperator& op, cdouble lambda)
        : n_(op.band.n), kl_(op.band.bw), ku_(op.band.bw), lambda_(lambda),
          grid_(op.grid) {
        const int ldab = 2 * kl_ + ku_ + 1;
        ldab_ = ldab;
        ab_.assign(static_cast<size_t>(ldab) * n_, cdouble{0.0, 0.0});
        ipiv_.resize(n_);
        // column-major LAPACK band layout: A(i,j) -> ab[j*ldab + kl+ku+i-j]
        double anorm_cols = 0.0;
        {
            std::vector<double> colsum(n_, 0.0);
            for (int i = 0; i < n_; ++i) {
                const int k0 = std::max(-kl_, -i), k1 = std::min(ku_, n_ - 1 - i);
                for (int k = k0; k <= k1; ++k) {
                    const int j = i + k;
                    cdouble a = op.band.at(i, k);
                    if (k == 0) a -= lambda;
                    ab_[static_cast<size_t>(j) * ldab + kl_ + ku_ + i - j] = a;
                    colsum[j] += std::abs(a);
                }
            }
            for (double c : colsum) anorm_cols = std::max(anorm_cols, c);
        }
        anorm_ = anorm_cols;
        int info = LAPACKE_zgbtrf(LAPACK_COL_MAJOR, n_, n_, kl_, ku_, ab_.data(), ldab_,
                                  ipiv_.data());
        if (info > 0) throw SingularShift(lambda);
        if (info < 0) throw std::runtime_error("zgbtrf: bad argument");
        double rcond = 0.0;
        info = LAPACKE_zgbcon(LAPACK_COL_MAJOR, '1', n_, kl_, ku_, ab_.data(), ldab_,
                              ipiv_.data(), anorm_, &rcond);
        if (info != 0) throw std::runtime_error("zgbcon failed");
        rcond_ = rcond;
        if (rcond_ > 0.0 && 1.0 / rcond_ > 1e14) throw SingularShift(lambda);
        if (rcond_ == 0.0) throw SingularShift(lambda);
    }

    int size() const { return n_; }
    cdouble lambda() const { return lambda_; }
    const GridPtr& grid() const { return grid_; }
    double condition_estimate() const { return 1.0 / rcond_; }

    // x = (A - lambda)^{-1} b
    cvector solve(cvector b) const {
        trs('N', b);
        return b;
    }

    // x = (A - lambda)^{-*} b  (conjugate-transpose solve)
    cvector solve_adjoint(cvector b) const {
        trs('C', b);
        return b;
    }

  private:
    void trs(char trans, cvector& b) const {
        if (static_cast<int>(b.size()) != n_)
            throw std::invalid_argument("Factorization::solve: size mismatch");
        const int info =
            LAPACKE_zgbtrs(LAPACK_COL_MAJOR, trans, n_, kl_, ku_, 1, ab_.data(), ldab_,
                           ipiv_.data(), b.data(), n_);
        if (info != 0) throw std::runtime_error("zgbtrs failed");
    }

    int n_, kl_, ku_, ldab_ = 0;
    cdouble lambda_;
    GridPtr grid_;
    std::vector<cdouble> ab_;
    std::vector<int> ipiv_;
    double anorm_ = 0.0;
    double rcond_ = 0.0;
};

inline Factorization factorize_shifted(const DiscreteOperator& op, cdouble lambda) {
    return Factorization(op, lambda);
}

}  // namespace semires
