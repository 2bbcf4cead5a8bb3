#pragma once

#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

namespace semires {

// Uniform grid on [-L, L], endpoints included.
struct Grid {
    double half_length = 0.0;  // L
    double dx = 0.0;
    int n = 0;
    std::vector<double> x;  // strictly increasing, x[0] = -L, x[n-1] = L

    bool same_as(const Grid& other) const {
        return n == other.n && std::abs(dx - other.dx) < 1e-14 &&
               std::abs(half_length - other.half_length) < 1e-14;
    }
};

using GridPtr = std::shared_ptr<const Grid>;

inline GridPtr make_grid(double L, double dx_request) {
    if (L <= 0.0 || dx_request <= 0.0)
        throw std::invalid_argument("make_grid: L and dx must be positive");
    if (dx_request >= L / 50.0)
        throw std::invalid_argument("make_grid: grid too coarse (need dx < L/50)");
    auto g = std::make_shared<Grid>();
    g->half_length = L;
    g->n = static_cast<int>(std::lround(2.0 * L / dx_request)) + 1;
    g->dx = 2.0 * L / (g->n - 1);
    g->x.resize(g->n);
    for (int j = 0; j < g->n; ++j) g->x[j] = -L + j * g->dx;
    g->x.front() = -L;
    g->x.back() = L;
    return g;
}

}  // namespace semires
