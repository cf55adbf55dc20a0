#include "brs/sim.hpp"

#include <cmath>

#include "brs/moments.hpp"

namespace brs {

double CounterRng::uniform01(std::uint64_t stream, std::uint64_t idx) const {
    std::uint64_t x = seed * 0x9e3779b97f4a7c15ull + stream * 0xbf58476d1ce4e5b9ull + idx;
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    x ^= x >> 31;
    return (x >> 11) * 0x1.0p-53;
}

bool in_set(const SemialgebraicSet& set, const Eigen::VectorXd& x, double tol) {
    std::span<const double> pt(x.data(), x.size());
    if (set.is_point()) {
        double d2 = 0.0;
        for (int i = 0; i < x.size(); ++i) {
            double d = x[i] - (*set.point)[i];
            d2 += d * d;
        }
        if (d2 > tol) return false;
    }
    for (const auto& h : set.inequalities)
        if (h.evaluate(pt) < -tol) return false;
    return true;
}

bool near_target(const SemialgebraicSet& target, const Eigen::VectorXd& x, double radius) {
    if (target.is_point()) {
        double d2 = 0.0;
        for (int i = 0; i < x.size(); ++i) {
            double d = x[i] - (*target.point)[i];
            d2 += d * d;
        }
        return d2 <= radius * radius;
    }
    // Ball-like targets measure distance to the center; general sets use a
    // first-order dilation h >= -radius * |grad h|.
    SetGeometry g = detect_geometry(target, {}, static_cast<int>(x.size()));
    if (g.exact && g.factors.size() == 1 && g.factors[0].type == GeometryFactor::Type::Ball &&
        static_cast<int>(g.factors[0].vars.size()) == x.size()) {
        double d2 = 0.0;
        for (int i = 0; i < x.size(); ++i) {
            double d = x[i] - g.factors[0].center[i];
            d2 += d * d;
        }
        // radius <= ball radius: membership; larger: the dilated class
        return std::sqrt(d2) <= std::max(radius, g.factors[0].radius);
    }
    std::span<const double> pt(x.data(), x.size());
    for (const auto& h : target.inequalities) {
        double gn = 0.0;
        for (int i = 0; i < x.size(); ++i) {
            double gi = h.partial(i).evaluate(pt);
            gn += gi * gi;
        }
        if (h.evaluate(pt) < -radius * std::sqrt(gn)) return false;
    }
    return true;
}

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double A21 = 1.0 / 5;
constexpr double A31 = 3.0 / 40, A32 = 9.0 / 40;
constexpr double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9;
constexpr double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187, A53 = 64448.0 / 6561,
                 A54 = -212.0 / 729;
constexpr double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247, A64 = 49.0 / 176,
                 A65 = -5103.0 / 18656;
constexpr double B1 = 35.0 / 384, B3 = 500.0 / 1113, B4 = 125.0 / 192, B5 = -2187.0 / 6784,
                 B6 = 11.0 / 84;
constexpr double E1 = 71.0 / 57600, E3 = -71.0 / 16695, E4 = 71.0 / 1920, E5 = -17253.0 / 339200,
                 E6 = 22.0 / 525, E7 = -1.0 / 40;

}  // namespace

Trajectory integrate(const SynthesisProblem& p, const ControlLaw& law, const Eigen::VectorXd& x0,
                     const IntegrateOptions& opts) {
    const int n = p.n(), m = p.m();
    const double T = p.horizon;
    const bool free_mode = p.mode == HorizonMode::FreeFinalTime;
    Trajectory out;

    auto saturate = [&](Eigen::VectorXd u) {
        for (int j = 0; j < m; ++j) u[j] = std::clamp(u[j], p.input_lo[j], p.input_hi[j]);
        return u;
    };
    auto control = [&](double t, const Eigen::VectorXd& x) {
        if (m == 0) return Eigen::VectorXd(0);
        return saturate(law ? law(t, x) : Eigen::VectorXd::Zero(m));
    };
    std::vector<double> pt(n + 1);
    auto deriv = [&](double t, const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
        pt[0] = t;
        for (int i = 0; i < n; ++i) pt[i + 1] = x[i];
        Eigen::VectorXd dx(n);
        for (int i = 0; i < n; ++i) {
            double v = p.f[i].evaluate(pt);
            for (int j = 0; j < m; ++j) v += p.g[i][j].evaluate(pt) * u[j];
            dx[i] = v;
        }
        return dx;
    };

    Eigen::VectorXd x = x0;
    double t = 0.0;
    double h = T / 100.0;
    const double hmax = opts.hmax > 0 ? opts.hmax : T / 50.0;
    h = std::min(h, hmax);

    Eigen::VectorXd u = control(t, x);
    out.t.push_back(t);
    out.x.push_back(x);
    out.u.push_back(u);
    out.termination = Termination::HorizonEnd;

    Eigen::VectorXd k1 = deriv(t, x, u);
    while (t < T) {
        h = std::min(h, T - t);
        // stages (control sampled continuously along the stage states)
        auto stage = [&](double tc, const Eigen::VectorXd& xc) {
            return deriv(tc, xc, control(tc, xc));
        };
        Eigen::VectorXd k2 = stage(t + 0.2 * h, x + h * A21 * k1);
        Eigen::VectorXd k3 = stage(t + 0.3 * h, x + h * (A31 * k1 + A32 * k2));
        Eigen::VectorXd k4 = stage(t + 0.8 * h, x + h * (A41 * k1 + A42 * k2 + A43 * k3));
        Eigen::VectorXd k5 =
            stage(t + 8.0 / 9.0 * h, x + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4));
        Eigen::VectorXd k6 =
            stage(t + h, x + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5));
        Eigen::VectorXd x5 = x + h * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6);
        Eigen::VectorXd k7 = stage(t + h, x5);
        Eigen::VectorXd err =
            h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7);

        double scale = 0.0;
        for (int i = 0; i < n; ++i) {
            double s = opts.atol + opts.rtol * std::max(std::fabs(x[i]), std::fabs(x5[i]));
            scale = std::max(scale, std::fabs(err[i]) / s);
        }
        if (scale <= 1.0) {
            t += h;
            x = x5;
            // circle-embedding drift is corrected by projection
            if (!p.ring.empty()) {
                for (const auto& [si, ci] : p.ring.pairs) {
                    double nrm = std::hypot(x[si], x[ci]);
                    if (std::fabs(nrm - 1.0) > 1e-13 && nrm > 0.0) {
                        x[si] /= nrm;
                        x[ci] /= nrm;
                        ++out.ring_projections;
                    }
                }
            }
            u = control(t, x);
            k1 = deriv(t, x, u);  // FSAL does not hold after saturation/projection
            out.t.push_back(t);
            out.x.push_back(x);
            out.u.push_back(u);
            out.stop_time = t;
            if (opts.check_bounding && !in_set(p.bounding, x, 1e-7)) {
                out.termination = Termination::LeftBounding;
                return out;
            }
            if (free_mode && opts.stop_in_target && in_set(p.target, x, 1e-12)) {
                out.termination = Termination::ReachedTargetEarly;
                return out;
            }
        }
        double factor = scale > 0.0 ? 0.9 * std::pow(scale, -0.2) : 5.0;
        h *= std::clamp(factor, 0.2, 5.0);
        h = std::min(h, hmax);
        if (h < opts.hmin) {
            out.termination = Termination::StepUnderflow;
            return out;
        }
    }
    out.stop_time = t;
    if (!free_mode && in_set(p.target, x, 1e-9)) out.termination = Termination::ReachedTargetAtT;
    return out;
}

Eigen::VectorXd sample_bounding(const SynthesisProblem& p, const CounterRng& rng,
                                std::uint64_t idx) {
    const int n = p.n();
    SetGeometry g = detect_geometry(p.bounding, p.ring, n);
    if (!g.exact) throw std::invalid_argument("cannot sample: unrecognized bounding geometry");
    Eigen::VectorXd x(n);
    int stream_base = 100;
    for (const auto& f : g.factors) {
        switch (f.type) {
            case GeometryFactor::Type::Interval:
                x[f.vars[0]] = rng.uniform(stream_base, idx, f.lo, f.hi);
                break;
            case GeometryFactor::Type::Circle: {
                double th = rng.uniform(stream_base, idx, -M_PI, M_PI);
                x[f.vars[0]] = std::sin(th);
                x[f.vars[1]] = std::cos(th);
                break;
            }
            case GeometryFactor::Type::Ball: {
                // rejection from the bounding cube (volume ratio is fine for
                // the dimensions in use)
                const int d = static_cast<int>(f.vars.size());
                for (std::uint64_t attempt = 0;; ++attempt) {
                    double r2 = 0.0;
                    for (int i = 0; i < d; ++i) {
                        double c =
                            rng.uniform(stream_base + 1 + i, idx * 4096 + attempt, -1.0, 1.0);
                        x[f.vars[i]] = f.center[i] + f.radius * c;
                        r2 += c * c;
                    }
                    if (r2 <= 1.0) break;
                    if (attempt > 10000)
                        throw std::runtime_error("ball sampling rejection overflow");
                }
                break;
            }
        }
        stream_base += 16;
    }
    return x;
}

BrsEstimate estimate_brs(const SynthesisProblem& p, const ControlLaw& law, int nsamples,
                         double radius, std::uint64_t seed, const IntegrateOptions& opts_in) {
    CounterRng rng{seed};
    BrsEstimate est;
    est.samples = nsamples;
    IntegrateOptions opts = opts_in;
    opts.stop_in_target = p.mode == HorizonMode::FreeFinalTime;

    SetGeometry g = detect_geometry(p.bounding, p.ring, p.n());
    double volX = g.exact ? g.volume() : 0.0;

    for (int s = 0; s < nsamples; ++s) {
        Eigen::VectorXd x0 = sample_bounding(p, rng, s);
        est.x0.push_back(x0);
        Trajectory traj = integrate(p, law, x0, opts);
        bool ok = false;
        double when = traj.stop_time;
        if (p.mode == HorizonMode::FreeFinalTime) {
            // success iff some visited state is within `radius` of the target
            for (std::size_t i = 0; i < traj.x.size(); ++i) {
                if (near_target(p.target, traj.x[i], radius)) {
                    ok = true;
                    when = traj.t[i];
                    break;
                }
            }
            ok = ok && traj.termination != Termination::LeftBounding;
        } else {
            ok = traj.termination != Termination::LeftBounding &&
                 traj.termination != Termination::StepUnderflow && traj.stop_time >= p.horizon &&
                 near_target(p.target, traj.x.back(), radius);
        }
        est.success.push_back(ok ? 1 : 0);
        est.hit_time.push_back(ok ? when : -1.0);
        if (ok) ++est.hits;
    }
    double frac = nsamples > 0 ? static_cast<double>(est.hits) / nsamples : 0.0;
    est.volume = frac * volX;
    est.ci95 = nsamples > 0 ? 1.96 * std::sqrt(frac * (1.0 - frac) / nsamples) * volX : 0.0;
    return est;
}

double di_min_time(double x1, double x2) {
    double s = x1 + 0.5 * x2 * std::fabs(x2);
    if (s > 0.0) return x2 + 2.0 * std::sqrt(0.5 * x2 * x2 + x1);
    if (s < 0.0) return -x2 + 2.0 * std::sqrt(0.5 * x2 * x2 - x1);
    return std::fabs(x2);
}

bool di_oracle_member(const Eigen::VectorXd& x0, double T, double bounding_radius) {
    if (x0.squaredNorm() > bounding_radius * bounding_radius) return false;
    return di_min_time(x0[0], x0[1]) <= T;
}

Eigen::VectorXd di_bang_bang(double, const Eigen::VectorXd& x) {
    Eigen::VectorXd u(1);
    if (x.squaredNorm() <= 1e-16) {
        u[0] = 0.0;
        return u;
    }
    double s = x[0] + 0.5 * x[1] * std::fabs(x[1]);
    if (s > 0.0)
        u[0] = -1.0;
    else if (s < 0.0)
        u[0] = 1.0;
    else
        u[0] = x[1] > 0 ? -1.0 : 1.0;
    return u;
}

}  // namespace brs
