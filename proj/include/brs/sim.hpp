#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "brs/problem.hpp"

namespace brs {

/// Deterministic counter RNG (splitmix64 stream); every Monte-Carlo draw in
/// the toolchain flows from one seed so runs are reproducible.
struct CounterRng {
    std::uint64_t seed = 0;

    double uniform01(std::uint64_t stream, std::uint64_t idx) const;
    double uniform(std::uint64_t stream, std::uint64_t idx, double lo, double hi) const {
        return lo + (hi - lo) * uniform01(stream, idx);
    }
};

/// Control law in original units; integrate() clamps the result to the
/// problem's input box, so logged inputs always lie in [a_j, b_j] exactly.
using ControlLaw =
    std::function<Eigen::VectorXd(double t, const Eigen::VectorXd& x)>;

enum class Termination : std::uint8_t {
    HorizonEnd,          // integrated to t = T
    ReachedTargetAtT,    // fixed mode: x(T) in the target set
    ReachedTargetEarly,  // free mode: entered the target set before T
    LeftBounding,        // exited X
    StepUnderflow,
};

struct Trajectory {
    std::vector<double> t;
    std::vector<Eigen::VectorXd> x;
    std::vector<Eigen::VectorXd> u;  // saturated inputs, aligned with t
    Termination termination = Termination::HorizonEnd;
    double stop_time = 0.0;
    int ring_projections = 0;
};

struct IntegrateOptions {
    double rtol = 1e-8;
    double atol = 1e-10;
    double hmax = 0.0;  // 0 => T/50 cap
    double hmin = 1e-12;
    bool check_bounding = true;
    bool stop_in_target = false;  // free-final-time early stop
};

/// Adaptive embedded Runge-Kutta 4(5) (Dormand-Prince) rollout of the
/// closed loop from x0 over [0, T] in original time units.
Trajectory integrate(const SynthesisProblem& user_problem, const ControlLaw& law,
                     const Eigen::VectorXd& x0, const IntegrateOptions& opts = {});

bool in_set(const SemialgebraicSet& set, const Eigen::VectorXd& x, double tol = 1e-9);

/// Success test used by the BRS estimator: distance-based for point/ball
/// targets, first-order dilated membership otherwise.
bool near_target(const SemialgebraicSet& target, const Eigen::VectorXd& x, double radius);

/// Uniform sample over the reference geometry of X (ball, box or cylinder).
Eigen::VectorXd sample_bounding(const SynthesisProblem& p, const CounterRng& rng,
                                std::uint64_t idx);

struct BrsEstimate {
    int samples = 0;
    int hits = 0;
    double volume = 0.0;
    double ci95 = 0.0;
    std::vector<Eigen::VectorXd> x0;
    std::vector<std::uint8_t> success;
    std::vector<double> hit_time;
};

/// Monte-Carlo BRS estimate: uniform initial conditions over X, closed-loop
/// rollouts, success classification within `radius` of the target.
BrsEstimate estimate_brs(const SynthesisProblem& p, const ControlLaw& law, int nsamples,
                         double radius, std::uint64_t seed, const IntegrateOptions& opts = {});

// --- Double integrator oracle ----------------------------------------------

/// Minimum time to the origin under |u| <= 1 (bang-bang switching curve).
double di_min_time(double x1, double x2);

/// Membership of x0 in the analytic BRS for horizon T within the
/// bounding ball of the given radius.
bool di_oracle_member(const Eigen::VectorXd& x0, double T, double bounding_radius = 1.6);

/// The saturated minimum-time feedback law (holds the origin once reached).
Eigen::VectorXd di_bang_bang(double t, const Eigen::VectorXd& x);

}  // namespace brs
