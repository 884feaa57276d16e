#pragma once

// Independent minimiser of sum(A.*Z) - alpha sum log(A 1) + beta ||A||_F^2 over
// symmetric nonnegative zero-diagonal A: exact coordinate descent on each edge
// weight, started from the best point of a grid of uniform weights and from
// random points.

#include "stgf/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

namespace oracle {

struct Problem {
    stgf::Matrix z;
    double alpha = 1.0;
    double beta = 1.0;
};

inline double objective(const Problem& p, const stgf::Matrix& a) {
    const auto n = a.rows();
    double f = (a.array() * p.z.array()).sum() + p.beta * a.squaredNorm();
    for (Eigen::Index i = 0; i < n; ++i) {
        const double d = a.row(i).sum();
        if (!(d > 0.0)) return std::numeric_limits<double>::infinity();
        f -= p.alpha * std::log(d);
    }
    return f;
}

// argmin over w >= 0 of 2 z w + 2 beta w^2 - alpha log(di + w) - alpha log(dj + w)
inline double edge_minimiser(double z, double di, double dj, double alpha, double beta) {
    auto deriv = [&](double w) { return 2.0 * z + 4.0 * beta * w - alpha / (di + w) - alpha / (dj + w); };
    if (di > 0.0 && dj > 0.0 && deriv(0.0) >= 0.0) return 0.0;
    double lo = 0.0;
    double hi = 1.0;
    while (deriv(hi) < 0.0) hi *= 2.0;
    for (int k = 0; k < 200; ++k) {
        const double mid = 0.5 * (lo + hi);
        if (deriv(mid) < 0.0) lo = mid; else hi = mid;
        if (hi - lo <= 1e-16 * std::max(1.0, hi)) break;
    }
    return 0.5 * (lo + hi);
}

inline stgf::Matrix coordinate_descent(const Problem& p, stgf::Matrix a, int sweeps = 20000) {
    const auto n = a.rows();
    for (int s = 0; s < sweeps; ++s) {
        double moved = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = i + 1; j < n; ++j) {
                const double di = a.row(i).sum() - a(i, j);
                const double dj = a.row(j).sum() - a(i, j);
                const double w = edge_minimiser(p.z(i, j), di, dj, p.alpha, p.beta);
                moved = std::max(moved, std::abs(w - a(i, j)));
                a(i, j) = a(j, i) = w;
            }
        }
        if (moved < 1e-13) break;
    }
    return a;
}

inline stgf::Matrix minimise(const Problem& p, std::uint64_t seed = 7) {
    const auto n = p.z.rows();
    stgf::Matrix best;
    double best_f = std::numeric_limits<double>::infinity();
    auto consider = [&](stgf::Matrix start) {
        const auto a = coordinate_descent(p, std::move(start));
        const double f = objective(p, a);
        if (f < best_f) {
            best_f = f;
            best = a;
        }
    };
    // grid over a uniform starting weight; keep the best grid points as starts
    std::vector<std::pair<double, double>> grid;
    for (int k = -12; k <= 12; ++k) {
        const double w = std::pow(2.0, k * 0.5);
        stgf::Matrix a = stgf::Matrix::Constant(n, n, w);
        a.diagonal().setZero();
        grid.emplace_back(objective(p, a), w);
    }
    std::sort(grid.begin(), grid.end());
    for (std::size_t g = 0; g < 3 && g < grid.size(); ++g) {
        stgf::Matrix a = stgf::Matrix::Constant(n, n, grid[g].second);
        a.diagonal().setZero();
        consider(a);
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.01, 2.0);
    for (int r = 0; r < 3; ++r) {
        stgf::Matrix a = stgf::Matrix::Zero(n, n);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = i + 1; j < n; ++j) a(i, j) = a(j, i) = u(rng);
        consider(a);
    }
    return best;
}

}  // namespace oracle
