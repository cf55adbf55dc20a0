#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "brs/sdp.hpp"
#include "brs/validate.hpp"
#include "oracles.hpp"

using namespace brs;

namespace {

// double integrator with a small ball target so arbitrary admissible
// controls produce exactly representable final measures
SynthesisProblem di_ball_target() {
    std::string text = R"(problem di_ball
vars x1 x2
horizon 1
inputs
  u1 -1 1
end
dynamics
  f x1 = x2
  g x2 u1 = 1
end
sets
  bounding ineq 2.56 - x1^2 - x2^2
  target ineq 2.56 - x1^2 - x2^2
end
options
  k 2
end
)";
    return parse_problem(text, "di_ball");
}

}  // namespace

TEST_CASE("empirical moments of admissible trajectories satisfy the relaxation") {
    auto user = di_ball_target();
    auto norm = normalize(user);
    auto cp = assemble(norm, 2);

    // an arbitrary bounded measurable feedback (clamped polynomial)
    auto law = [](double t, const Eigen::VectorXd& x) {
        Eigen::VectorXd u(1);
        u << 0.4 * x[0] - 0.8 * x[1] + 0.3 * std::sin(3.0 * t);
        return u;
    };

    CounterRng rng{17};
    std::vector<Trajectory> trajs;
    std::vector<double> weights;
    IntegrateOptions opts;
    opts.hmax = 1.0 / 200.0;
    opts.check_bounding = false;  // admissible family: keep every rollout
    const int N = 200;
    SetGeometry g = detect_geometry(user.bounding, user.ring, 2);
    for (int s = 0; s < N; ++s) {
        // restrict to a core region so trajectories stay inside X
        Eigen::VectorXd x0 = sample_bounding(user, rng, s);
        x0 *= 0.5;
        trajs.push_back(integrate(user, law, x0, opts));
        weights.push_back(0.5 * g.volume() * 0.25 / N);
    }
    Eigen::VectorXd y = empirical_moments(cp, user, trajs, weights);
    auto chk = check_point(cp, y);
    CHECK(chk.max_row_residual_rel <= 1e-2);
    CHECK(chk.min_block_eig_rel >= -1e-3);
    CHECK(chk.objective > 0.0);
}

TEST_CASE("liouville row for v = x1 holds on simulated open-loop flows") {
    auto user = di_ball_target();
    auto norm = normalize(user);
    auto cp = assemble(norm, 2);

    CounterRng rng{21};
    std::vector<Trajectory> trajs;
    std::vector<double> weights;
    IntegrateOptions opts;
    opts.hmax = 1.0 / 200.0;
    opts.check_bounding = false;
    for (int s = 0; s < 200; ++s) {
        Eigen::VectorXd x0 = sample_bounding(user, rng, s) * 0.4;
        trajs.push_back(integrate(user, nullptr, x0, opts));
        weights.push_back(1.0 / 200);
    }
    Eigen::VectorXd y = empirical_moments(cp, user, trajs, weights);
    // find the Liouville row generated by the test monomial x1
    const EqRow* row = nullptr;
    for (const auto& r : cp.rows)
        if (r.kind == RowKind::Liouville && r.test_mono == Monomial({0, 1, 0})) row = &r;
    REQUIRE(row != nullptr);
    double lhs = 0.0, mag = 0.0;
    for (const auto& [i, c] : row->coeffs) {
        lhs += c * y[i];
        mag += std::fabs(c * y[i]);
    }
    CHECK(std::fabs(lhs) <= 1e-3 * std::max(1.0, mag));
}

TEST_CASE("solver matches or beats the empirical feasible objective") {
    auto user = di_ball_target();
    auto norm = normalize(user);
    auto cp = assemble(norm, 2);

    CounterRng rng{29};
    std::vector<Trajectory> trajs;
    std::vector<double> weights;
    IntegrateOptions opts;
    opts.hmax = 1.0 / 200.0;
    opts.check_bounding = false;
    SetGeometry g = detect_geometry(user.bounding, user.ring, 2);
    for (int s = 0; s < 150; ++s) {
        Eigen::VectorXd x0 = sample_bounding(user, rng, s) * 0.5;
        trajs.push_back(integrate(user, di_bang_bang, x0, opts));
        weights.push_back(0.5 * g.volume() * 0.25 / 150);
    }
    Eigen::VectorXd y_emp = empirical_moments(cp, user, trajs, weights);
    double emp_obj = cp.objective_value(y_emp);

    auto res = solve(cp);
    REQUIRE((res.report.status == SolveStatus::Optimal ||
             res.report.status == SolveStatus::NearOptimal));
    CHECK(res.report.primal_obj >= emp_obj - 0.05 * std::fabs(emp_obj));
}

TEST_CASE("empirical moments on a quotient-ring problem satisfy the relaxation") {
    std::string text = R"(problem ringtest
vars s c w
ring s c
horizon 1.5
mode fixed
inputs
  u1 -3 3
end
dynamics
  f s = c*w
  f c = -1*s*w
  f w = 19.6*s - 0.4*w
  g w u1 = 4
end
sets
  bounding ineq 66 - s^2 - c^2 - w^2
  bounding ineq 64 - w^2
  target ineq 66 - s^2 - c^2 - w^2
  target ineq 64 - w^2
end
)";
    auto user = parse_problem(text, "ringtest");
    auto norm = normalize(user);
    auto cp = assemble(norm, 2);
    auto law = [](double t, const Eigen::VectorXd& x) {
        Eigen::VectorXd u(1);
        u << 1.2 * std::sin(2.0 * t) - 0.7 * x[0] - 0.5 * x[2];
        return u;
    };
    CounterRng rng{31};
    std::vector<Trajectory> trajs;
    std::vector<double> weights;
    IntegrateOptions opts;
    opts.hmax = 1.5 / 300.0;
    opts.check_bounding = false;
    for (int s = 0; s < 150; ++s) {
        Eigen::VectorXd x0 = sample_bounding(user, rng, s);
        x0[2] *= 0.5;  // keep the rate well inside the box
        trajs.push_back(integrate(user, law, x0, opts));
        weights.push_back(0.5 * 2.0 * std::numbers::pi * 16.0 * 0.5 / 150.0);
    }
    Eigen::VectorXd y = empirical_moments(cp, user, trajs, weights);
    auto chk = check_point(cp, y);
    CHECK(chk.max_row_residual_rel <= 1e-3);
    CHECK(chk.min_block_eig_rel >= -1e-3);
}
