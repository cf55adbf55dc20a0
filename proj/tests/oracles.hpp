#pragma once

// Independent test oracles: brute-force enumeration, finite differences,
// adaptive quadrature, Monte-Carlo sampling, closed-form flows and a grid
// dynamic program for the double integrator. These stay independent of the
// implementation paths they check.

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <vector>

namespace oracle {

// Deterministic counter RNG (splitmix64) so oracle draws are reproducible.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline double uniform01(std::uint64_t seed, std::uint64_t idx) {
    return (splitmix64(seed * 0x9e3779b97f4a7c15ull + idx) >> 11) * 0x1.0p-53;
}

inline double uniform(std::uint64_t seed, std::uint64_t idx, double lo, double hi) {
    return lo + (hi - lo) * uniform01(seed, idx);
}

// Brute-force count of exponent vectors with |alpha| <= d in n variables.
inline long count_monomials_brute(int n, int d) {
    if (n == 0) return 1;
    long total = 0;
    for (int e = 0; e <= d; ++e) total += count_monomials_brute(n - 1, d - e);
    return total;
}

// Central finite difference of f along coordinate i.
inline double finite_diff(const std::function<double(const std::vector<double>&)>& f,
                          std::vector<double> x, int i, double h = 1e-5) {
    std::vector<double> xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    return (f(xp) - f(xm)) / (2.0 * h);
}

// Adaptive Simpson on [a,b].
inline double adaptive_simpson_rec(const std::function<double(double)>& f, double a, double b,
                                   double fa, double fm, double fb, double whole, double tol,
                                   int depth, int force_depth) {
    double m = 0.5 * (a + b);
    double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    double flm = f(lm), frm = f(rm);
    double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    // force_depth guards against spurious convergence on symmetric integrands
    if (depth <= 0 || (force_depth <= 0 && std::fabs(left + right - whole) < 15.0 * tol))
        return left + right + (left + right - whole) / 15.0;
    return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1,
                                force_depth - 1) +
           adaptive_simpson_rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1,
                                force_depth - 1);
}

inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                               double tol = 1e-11, int depth = 40, int force_depth = 3) {
    double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, tol, depth, force_depth);
}

// Moment of x^alpha over the ball |x - c| <= R via spherical adaptive
// quadrature (dimension 2 or 3), independent of the closed-form route.
inline double ball_moment_quadrature2(int a1, int a2, double r, double c1 = 0, double c2 = 0) {
    auto radial = [&](double th) {
        auto f = [&](double rho) {
            double x = c1 + rho * std::cos(th), y = c2 + rho * std::sin(th);
            return std::pow(x, a1) * std::pow(y, a2) * rho;
        };
        return adaptive_simpson(f, 0.0, r, 1e-12, 30);
    };
    return adaptive_simpson(radial, 0.0, 2.0 * std::numbers::pi, 1e-12, 30);
}

inline double ball_moment_quadrature3(int a1, int a2, int a3, double r) {
    // radial part is a monomial: integrate it exactly, quadrature the sphere
    int total = a1 + a2 + a3;
    double radial = std::pow(r, total + 3) / (total + 3);
    auto over_phi = [&](double th) {
        auto f = [&](double ph) {
            double x = std::sin(ph) * std::cos(th);
            double y = std::sin(ph) * std::sin(th);
            double z = std::cos(ph);
            return std::pow(x, a1) * std::pow(y, a2) * std::pow(z, a3) * std::sin(ph);
        };
        return adaptive_simpson(f, 0.0, std::numbers::pi, 1e-12, 28, 4);
    };
    return radial * adaptive_simpson(over_phi, 0.0, 2.0 * std::numbers::pi, 1e-11, 28, 4);
}

// Minimum time to the origin for the double integrator with |u| <= 1.
inline double di_min_time_closed_form(double x1, double x2) {
    double s = x1 + 0.5 * x2 * std::fabs(x2);
    if (s > 0.0) return x2 + 2.0 * std::sqrt(0.5 * x2 * x2 + x1);
    if (s < 0.0) return -x2 + 2.0 * std::sqrt(0.5 * x2 * x2 - x1);
    return std::fabs(x2);
}

// Area of {min-time <= T} for T = 1: closed-form width integrated in x2.
inline double di_brs_area_T1() {
    auto width = [](double t) {
        double upper = 0.25 * (1.0 - t) * (1.0 - t) - 0.5 * t * t;
        double lower = -0.5 * t * std::fabs(t);
        return std::max(0.0, upper - lower);
    };
    // symmetric region: integrate the u=-1-first half and double it
    return 2.0 * adaptive_simpson(width, -1.0, 1.0, 1e-12, 40);
}

// Semi-Lagrangian min-time value iteration on a grid (independent DP check).
struct DiGridDP {
    int n;           // grid points per axis
    double extent;   // grid covers [-extent, extent]^2
    double dt;
    std::vector<double> V;

    DiGridDP(int n_, double extent_, double dt_, double origin_radius, double horizon_cap)
        : n(n_), extent(extent_), dt(dt_), V(static_cast<std::size_t>(n_) * n_, 1e9) {
        auto coord = [&](int i) { return -extent + 2.0 * extent * i / (n - 1); };
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                double x1 = coord(i), x2 = coord(j);
                if (x1 * x1 + x2 * x2 <= origin_radius * origin_radius) V[idx(i, j)] = 0.0;
            }
        bool changed = true;
        int sweeps = 0;
        while (changed && sweeps < 4 * static_cast<int>(horizon_cap / dt)) {
            changed = false;
            ++sweeps;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) {
                    double x1 = coord(i), x2 = coord(j);
                    double best = V[idx(i, j)];
                    for (double u : {-1.0, 1.0}) {
                        double candidate = dt + interp(x1 + dt * x2, x2 + dt * u);
                        if (candidate < best - 1e-12) best = candidate;
                    }
                    if (best < V[idx(i, j)]) {
                        V[idx(i, j)] = best;
                        changed = true;
                    }
                }
        }
    }

    std::size_t idx(int i, int j) const { return static_cast<std::size_t>(i) * n + j; }

    double interp(double x1, double x2) const {
        double gx = (x1 + extent) / (2.0 * extent) * (n - 1);
        double gy = (x2 + extent) / (2.0 * extent) * (n - 1);
        if (gx < 0 || gy < 0 || gx > n - 1 || gy > n - 1) return 1e9;
        int i0 = std::min(static_cast<int>(gx), n - 2);
        int j0 = std::min(static_cast<int>(gy), n - 2);
        double fx = gx - i0, fy = gy - j0;
        double v00 = V[idx(i0, j0)], v10 = V[idx(i0 + 1, j0)];
        double v01 = V[idx(i0, j0 + 1)], v11 = V[idx(i0 + 1, j0 + 1)];
        return (1 - fx) * (1 - fy) * v00 + fx * (1 - fy) * v10 + (1 - fx) * fy * v01 +
               fx * fy * v11;
    }

    double value(double x1, double x2) const { return interp(x1, x2); }
};

}  // namespace oracle

namespace oracle {

// Ray-crossing point-in-polygon test (closed polyline).
inline bool point_in_polygon(double x, double y,
                             const std::vector<std::array<double, 2>>& poly) {
    bool inside = false;
    std::size_t n = poly.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        double xi = poly[i][0], yi = poly[i][1];
        double xj = poly[j][0], yj = poly[j][1];
        if ((yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi) inside = !inside;
    }
    return inside;
}

}  // namespace oracle
