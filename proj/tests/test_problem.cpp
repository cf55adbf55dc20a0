#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "brs/problem.hpp"

using namespace brs;

#ifndef BRS_PROBLEM_DIR
#define BRS_PROBLEM_DIR "problems"
#endif

static std::string prob_path(const std::string& name) {
    return std::string(BRS_PROBLEM_DIR) + "/" + name;
}

TEST_CASE("double integrator file") {
    auto p = load_problem(prob_path("double_integrator.prob"));
    CHECK(p.n() == 2);
    CHECK(p.m() == 1);
    auto txn = p.tx_names();
    // f = (x2, 0)
    CHECK(p.f[0].coeff(Monomial({0, 0, 1})) == doctest::Approx(1.0));
    CHECK(p.f[0].terms().size() == 1);
    CHECK(p.f[1].is_zero());
    // g = (0, 1)^T
    CHECK(p.g[0][0].is_zero());
    CHECK(p.g[1][0].coeff(Monomial({0, 0, 0})) == doctest::Approx(1.0));
    CHECK(p.target.is_point());
    CHECK(p.horizon == doctest::Approx(1.0));
    CHECK(p.mode == HorizonMode::FixedFinalTime);
}

TEST_CASE("brockett file") {
    auto p = load_problem(prob_path("brockett.prob"));
    CHECK(p.n() == 3);
    CHECK(p.m() == 2);
    for (const auto& fi : p.f) CHECK(fi.is_zero());
    // columns (1,0,x2) and (0,1,-x1)
    CHECK(p.g[0][0].coeff(Monomial({0, 0, 0, 0})) == doctest::Approx(1.0));
    CHECK(p.g[1][0].is_zero());
    CHECK(p.g[2][0].coeff(Monomial({0, 0, 1, 0})) == doctest::Approx(1.0));
    CHECK(p.g[0][1].is_zero());
    CHECK(p.g[1][1].coeff(Monomial({0, 0, 0, 0})) == doctest::Approx(1.0));
    CHECK(p.g[2][1].coeff(Monomial({0, 1, 0, 0})) == doctest::Approx(-1.0));
    CHECK(p.mode == HorizonMode::FreeFinalTime);
}

TEST_CASE("all bundled problems load and validate") {
    for (const char* name : {"double_integrator.prob", "brockett.prob", "pendulum.prob",
                             "quadrotor.prob", "satellite.prob"}) {
        auto p = load_problem(prob_path(name));
        CHECK_NOTHROW(validate_problem(p));
        CHECK_NOTHROW(normalize(p));
    }
}

TEST_CASE("empty file is a parse error with no partial problem") {
    CHECK_THROWS_AS(parse_problem("", "empty"), ParseError);
    CHECK_THROWS_AS(parse_problem("# only a comment\n", "comment"), ParseError);
}

TEST_CASE("round trip: save then load is identity up to term order") {
    for (const char* name : {"double_integrator.prob", "brockett.prob", "pendulum.prob"}) {
        auto p = load_problem(prob_path(name));
        auto text = save_problem(p);
        auto q = parse_problem(text, "roundtrip");
        CHECK(save_problem(q) == text);
        CHECK(problem_hash(p) == problem_hash(q));
    }
}

TEST_CASE("inputs may not appear in dynamics") {
    std::string bad = R"(problem bad
vars x1
horizon 1
inputs
  u1 -1 1
end
dynamics
  f x1 = u1
end
sets
  bounding ineq 1 - x1^2
  target point 0
end
)";
    CHECK_THROWS_AS(parse_problem(bad, "bad"), ParseError);
}

TEST_CASE("validation requires a compactness certificate on X") {
    std::string bad = R"(problem bad
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
  bounding ineq 1 - x1^2
  target point 0 0
end
)";
    CHECK_THROWS_AS(parse_problem(bad, "bad"), ValidationError);
}

TEST_CASE("degenerate input channel is rejected") {
    std::string bad = R"(problem bad
vars x1
horizon 1
inputs
  u1 2 2
end
dynamics
  g x1 u1 = 1
end
sets
  bounding ineq 1 - x1^2
  target point 0
end
)";
    CHECK_THROWS_AS(parse_problem(bad, "bad"), ValidationError);
}

TEST_CASE("target point must satisfy its own inequalities") {
    std::string bad = R"(problem bad
vars x1
horizon 1
dynamics
  f x1 = x1
end
sets
  bounding ineq 4 - x1^2
  target point 1.5
  target ineq 1 - x1^2
end
)";
    CHECK_THROWS_AS(parse_problem(bad, "bad"), ValidationError);
}

TEST_CASE("normalize: identity on canonical box and unit horizon") {
    auto p = load_problem(prob_path("double_integrator.prob"));
    auto q = normalize(p);
    CHECK(q.is_normalized());
    CHECK(q.f[0].to_string() == p.f[0].to_string());
    CHECK(q.g[1][0].to_string() == p.g[1][0].to_string());
    CHECK(q.normalization->T == doctest::Approx(1.0));
    CHECK(q.normalization->mid[0] == doctest::Approx(0.0));
    CHECK(q.normalization->halfw[0] == doctest::Approx(1.0));

    // idempotent
    auto r = normalize(q);
    CHECK(save_problem(r) == save_problem(q));
}

TEST_CASE("normalize: input box [0,6] becomes mid 3, half-width 3") {
    std::string text = R"(problem shift
vars x1
horizon 1
inputs
  u1 0 6
end
dynamics
  f x1 = x1
  g x1 u1 = 2
end
sets
  bounding ineq 9 - x1^2
  target point 0
end
)";
    auto p = parse_problem(text, "shift");
    auto q = normalize(p);
    // f' = f + 3*g = x1 + 6, g' = 3*g = 6
    CHECK(q.f[0].coeff(Monomial({0, 1})) == doctest::Approx(1.0));
    CHECK(q.f[0].coeff(Monomial({0, 0})) == doctest::Approx(6.0));
    CHECK(q.g[0][0].coeff(Monomial({0, 0})) == doctest::Approx(6.0));
    CHECK(q.input_lo[0] == doctest::Approx(-1.0));
    CHECK(q.input_hi[0] == doctest::Approx(1.0));
}

TEST_CASE("normalize: horizon T=2 scales dynamics onto [0,1]") {
    std::string text = R"(problem scaled
vars x1 x2
horizon 2
inputs
  u1 -1 1
end
dynamics
  f x1 = x2
  g x2 u1 = 1
end
sets
  bounding ineq 2.56 - x1^2 - x2^2
  target point 0 0
end
)";
    auto q = normalize(parse_problem(text, "scaled"));
    // f' = (2*x2, 0), g' = (0, 2), horizon 1
    CHECK(q.f[0].coeff(Monomial({0, 0, 1})) == doctest::Approx(2.0));
    CHECK(q.g[1][0].coeff(Monomial({0, 0, 0})) == doctest::Approx(2.0));
    CHECK(q.horizon == doctest::Approx(1.0));
    // time-dependent coefficients pick up the substitution t -> T*t
    std::string text2 = R"(problem scaled2
vars x1
horizon 2
dynamics
  f x1 = t*x1
end
sets
  bounding ineq 4 - x1^2
  target point 0
end
)";
    auto q2 = normalize(parse_problem(text2, "scaled2"));
    // d x1/d tau = 2 * (2 tau) * x1 = 4 tau x1
    CHECK(q2.f[0].coeff(Monomial({1, 1})) == doctest::Approx(4.0));
}

TEST_CASE("problems with no inputs are allowed") {
    std::string text = R"(problem drift
vars x1
horizon 1
dynamics
  f x1 = -1*x1
end
sets
  bounding ineq 1 - x1^2
  target ineq 0.25 - x1^2
end
)";
    auto p = parse_problem(text, "drift");
    CHECK(p.m() == 0);
    CHECK_NOTHROW(normalize(p));
}
