#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <random>
#include <stdexcept>
#include <utility>

#include "semires/banded.hpp"
#include "semires/factorization.hpp"

namespace semires {

inline double vec_norm(const cvector& v) {
    double s = 0.0;
    for (const auto& z : v) s += std::norm(z);
    return std::sqrt(s);
}

inline cdouble vec_dot(const cvector& a, const cvector& b) {  // <a, b> = sum conj(a) b
    cdouble s{0.0, 0.0};
    for (size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
    return s;
}

// Matrix-free operator: a pair of closures for A and A^*.
struct LinearOp {
    int n = 0;
    std::function<cvector(const cvector&)> apply;
    std::function<cvector(const cvector&)> apply_adjoint;
};

inline LinearOp identity_op(int n) {
    LinearOp op;
    op.n = n;
    op.apply = [](const cvector& v) { return v; };
    op.apply_adjoint = op.apply;
    return op;
}

inline LinearOp diag_op(const std::vector<double>& d) {
    LinearOp op;
    op.n = static_cast<int>(d.size());
    auto mul = [d](const cvector& v) {
        cvector y(v.size());
        for (size_t i = 0; i < v.size(); ++i) y[i] = d[i] * v[i];
        return y;
    };
    op.apply = mul;
    op.apply_adjoint = mul;  // real diagonal
    return op;
}

inline LinearOp banded_op(const BandedMatrix& m) {
    LinearOp op;
    op.n = m.n;
    op.apply = [m](const cvector& v) { return m.apply(v); };
    op.apply_adjoint = [m](const cvector& v) { return m.apply_adjoint(v); };
    return op;
}

inline LinearOp solve_op(std::shared_ptr<const Factorization> f) {
    LinearOp op;
    op.n = f->size();
    op.apply = [f](const cvector& v) { return f->solve(v); };
    op.apply_adjoint = [f](const cvector& v) { return f->solve_adjoint(v); };
    return op;
}

// A then B: v -> B(A v)
inline LinearOp compose(LinearOp b, LinearOp a) {
    LinearOp op;
    op.n = a.n;
    op.apply = [a, b](const cvector& v) { return b.apply(a.apply(v)); };
    op.apply_adjoint = [a, b](const cvector& v) {
        return a.apply_adjoint(b.apply_adjoint(v));
    };
    return op;
}

inline LinearOp scale_op(cdouble z, LinearOp a) {
    LinearOp op;
    op.n = a.n;
    op.apply = [a, z](const cvector& v) {
        cvector y = a.apply(v);
        for (auto& w : y) w *= z;
        return y;
    };
    const cdouble zc = std::conj(z);
    op.apply_adjoint = [a, zc](const cvector& v) {
        cvector y = a.apply_adjoint(v);
        for (auto& w : y) w *= zc;
        return y;
    };
    return op;
}

inline LinearOp add_op(LinearOp a, LinearOp b) {
    LinearOp op;
    op.n = a.n;
    op.apply = [a, b](const cvector& v) {
        cvector ya = a.apply(v), yb = b.apply(v);
        for (size_t i = 0; i < ya.size(); ++i) ya[i] += yb[i];
        return ya;
    };
    op.apply_adjoint = [a, b](const cvector& v) {
        cvector ya = a.apply_adjoint(v), yb = b.apply_adjoint(v);
        for (size_t i = 0; i < ya.size(); ++i) ya[i] += yb[i];
        return ya;
    };
    return op;
}

inline LinearOp sub_op(LinearOp a, LinearOp b) { return add_op(a, scale_op(-1.0, b)); }

struct PowerIterResult {
    double norm = 0.0;
    int iters = 0;
    bool converged = false;
    double last_rel_change = 0.0;
};

// Largest singular value of A via power iteration on A^* A.
// Deterministic: the start vector comes from a fixed-seed generator.
inline PowerIterResult operator_norm(const LinearOp& a, double tol = 1e-8,
                                     int max_iter = 2000, unsigned seed = 12345) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, 1.0);
    cvector v(a.n);
    for (auto& z : v) z = cdouble{dist(rng), dist(rng)};
    double nv = vec_norm(v);
    if (nv == 0.0) throw std::runtime_error("operator_norm: zero start vector");
    for (auto& z : v) z /= nv;

    PowerIterResult res;
    double sigma_prev = 0.0;
    for (int it = 1; it <= max_iter; ++it) {
        cvector w = a.apply(v);
        const double sigma = vec_norm(w);
        res.iters = it;
        if (sigma == 0.0) {  // A annihilates the current vector: norm ~ 0
            res.norm = 0.0;
            res.converged = true;
            return res;
        }
        cvector z = a.apply_adjoint(w);
        const double nz = vec_norm(z);
        if (nz == 0.0) {
            res.norm = sigma;
            res.converged = true;
            return res;
        }
        for (auto& y : z) y /= nz;
        v = std::move(z);
        res.norm = sigma;
        res.last_rel_change = std::abs(sigma - sigma_prev) / sigma;
        if (it > 1 && res.last_rel_change <= tol) {
            res.converged = true;
            return res;
        }
        sigma_prev = sigma;
    }
    return res;  // not converged; caller decides
}

// Column-by-column dense realization; oracle sizes only.
inline Eigen::MatrixXcd realize_dense(const LinearOp& a, int max_n = 400) {
    if (a.n > max_n)
        throw std::invalid_argument("realize_dense: operator too large for dense oracle");
    Eigen::MatrixXcd m(a.n, a.n);
    cvector e(a.n, cdouble{0.0, 0.0});
    for (int j = 0; j < a.n; ++j) {
        e[j] = 1.0;
        cvector col = a.apply(e);
        for (int i = 0; i < a.n; ++i) m(i, j) = col[i];
        e[j] = 0.0;
    }
    return m;
}

inline double dense_op_norm(const Eigen::MatrixXcd& m) {
    if (m.rows() > 120) {
        Eigen::BDCSVD<Eigen::MatrixXcd> svd(m);
        return svd.singularValues()(0);
    }
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m);
    return svd.singularValues()(0);
}

}  // namespace semires
