#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "brs/moments.hpp"
#include "oracles.hpp"

using namespace brs;

TEST_CASE("moment matrix structure in one variable") {
    auto basis = Basis::make({"x"}, 2);
    auto M = moment_matrix(*basis, 1);
    REQUIRE(M.dim == 2);
    // [[y0, y1], [y1, y2]]
    CHECK(M.entry(0, 0) == std::vector<std::pair<int, double>>{{0, 1.0}});
    CHECK(M.entry(0, 1) == std::vector<std::pair<int, double>>{{1, 1.0}});
    CHECK(M.entry(1, 1) == std::vector<std::pair<int, double>>{{2, 1.0}});

    // Dirac at x=2: moments (1, 2, 4) -> [[1,2],[2,4]], PSD, rank 1
    Eigen::VectorXd y(3);
    y << 1.0, 2.0, 4.0;
    Eigen::MatrixXd inst = instantiate(M, y);
    CHECK(inst(0, 0) == doctest::Approx(1.0));
    CHECK(inst(0, 1) == doctest::Approx(2.0));
    CHECK(inst(1, 1) == doctest::Approx(4.0));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(inst);
    CHECK(es.eigenvalues().minCoeff() >= -1e-12);
    CHECK(es.eigenvalues()(0) == doctest::Approx(0.0).epsilon(1e-12));  // rank 1
}

TEST_CASE("moment matrix entries depend only on the exponent sum") {
    auto basis = Basis::make({"x1", "x2"}, 4);
    auto M = moment_matrix(*basis, 2);
    REQUIRE(M.dim == 6);
    for (int r = 0; r < M.dim; ++r)
        for (int c = r; c < M.dim; ++c) {
            REQUIRE(M.entry(r, c).size() == 1);
            Monomial sum = M.row_monos[r] * M.row_monos[c];
            CHECK(M.entry(r, c)[0].first == basis->find(sum));
        }
    // Hankel-like: equal exponent sums share the same functional
    CHECK(M.entry(0, 3) == M.entry(1, 1));  // 1*x1^2 vs x1*x1
}

TEST_CASE("Monte-Carlo moment matrix is nearly PSD") {
    auto basis = Basis::make({"x1", "x2"}, 4);
    std::vector<Eigen::VectorXd> pts;
    std::vector<double> w;
    const int N = 10000;
    for (int i = 0; i < N; ++i) {
        Eigen::VectorXd p(2);
        p << oracle::uniform(11, 2 * i, -1.0, 1.0), oracle::uniform(11, 2 * i + 1, -1.0, 1.0);
        pts.push_back(p);
        w.push_back(4.0 / N);  // Lebesgue mass of the square
    }
    Eigen::VectorXd y = moments_of_samples(*basis, pts, w);
    auto M = moment_matrix(*basis, 2);
    Eigen::MatrixXd inst = instantiate(M, y);
    double scale = inst.cwiseAbs().maxCoeff();
    CHECK(min_eigenvalue(inst) >= -1e-3 * scale);
}

TEST_CASE("localizing matrix detects support violations") {
    auto basis = Basis::make({"x"}, 2);
    Polynomial h = parse_polynomial("1 - x^2", {"x"});

    Eigen::VectorXd dirac0(3);
    dirac0 << 1.0, 0.0, 0.0;
    auto L = localizing_matrix(*basis, h, 0);
    REQUIRE(L.dim == 1);
    CHECK(instantiate(L, dirac0)(0, 0) == doctest::Approx(1.0));

    Eigen::VectorXd dirac2(3);
    dirac2 << 1.0, 2.0, 4.0;
    CHECK(instantiate(L, dirac2)(0, 0) == doctest::Approx(-3.0));  // not PSD

    CHECK_THROWS_AS(localizing_matrix(*basis, h, -1), std::invalid_argument);
}

TEST_CASE("localizing matrix on the unit disk, Monte-Carlo") {
    auto basis = Basis::make({"x1", "x2"}, 4);
    Polynomial h = parse_polynomial("1 - x1^2 - x2^2", {"x1", "x2"});
    std::vector<Eigen::VectorXd> pts;
    std::vector<double> w;
    int accepted = 0;
    for (int i = 0; accepted < 8000; ++i) {
        double a = oracle::uniform(12, 2 * i, -1.0, 1.0);
        double b = oracle::uniform(12, 2 * i + 1, -1.0, 1.0);
        if (a * a + b * b > 1.0) continue;
        Eigen::VectorXd p(2);
        p << a, b;
        pts.push_back(p);
        ++accepted;
    }
    w.assign(pts.size(), std::numbers::pi / pts.size());
    Eigen::VectorXd y = moments_of_samples(*basis, pts, w);
    auto L = localizing_matrix(*basis, h, 1);
    Eigen::MatrixXd inst = instantiate(L, y);
    double scale = inst.cwiseAbs().maxCoeff();
    CHECK(min_eigenvalue(inst) >= -1e-3 * scale);
}

TEST_CASE("quotient-ring moment matrix entries reduce canonically") {
    QuotientRing ring;
    ring.pairs = {{0, 1}};
    auto basis = Basis::make({"s", "c", "w"}, 4, ring);
    // reduced count: full - (terms with c^2 factor) = C(3+4,3) - C(3+2,3)
    CHECK(basis->size() == 35 - 10);
    auto M = moment_matrix(*basis, 2);
    // row c * row c -> c^2 -> 1 - s^2: two-term functional
    int c_row = -1;
    for (int r = 0; r < M.dim; ++r)
        if (M.row_monos[r] == Monomial({0, 1, 0})) c_row = r;
    REQUIRE(c_row >= 0);
    CHECK(M.entry(c_row, c_row).size() == 2);
}

TEST_CASE("lebesgue moments: boxes and balls") {
    SemialgebraicSet box;
    std::vector<std::string> xy{"x1", "x2"};
    box.inequalities = {parse_polynomial("1 - x1^2", xy), parse_polynomial("1 - x2^2", xy),
                        parse_polynomial("2 - x1^2 - x2^2", xy)};
    auto basis = Basis::make(xy, 4);
    auto lm = lebesgue_moments(box, {}, *basis);
    CHECK(lm.exact);
    CHECK(lm.values[basis->find(Monomial({0, 0}))] == doctest::Approx(4.0));
    CHECK(lm.values[basis->find(Monomial({1, 0}))] == doctest::Approx(0.0));
    CHECK(lm.values[basis->find(Monomial({2, 0}))] == doctest::Approx(4.0 / 3.0));

    SemialgebraicSet ball;
    ball.inequalities = {parse_polynomial("2.56 - x1^2 - x2^2", xy)};
    auto bm = lebesgue_moments(ball, {}, *basis);
    CHECK(bm.exact);
    CHECK(bm.values[0] == doctest::Approx(std::numbers::pi * 1.6 * 1.6));
    // quadrature oracle for low moments of the radius-1.6 disk
    CHECK(bm.values[basis->find(Monomial({2, 0}))] ==
          doctest::Approx(oracle::ball_moment_quadrature2(2, 0, 1.6)).epsilon(1e-8));
    CHECK(bm.values[basis->find(Monomial({2, 2}))] ==
          doctest::Approx(oracle::ball_moment_quadrature2(2, 2, 1.6)).epsilon(1e-8));

    SemialgebraicSet ball3;
    std::vector<std::string> xyz{"x1", "x2", "x3"};
    ball3.inequalities = {parse_polynomial("4 - x1^2 - x2^2 - x3^2", xyz)};
    auto basis3 = Basis::make(xyz, 4);
    auto bm3 = lebesgue_moments(ball3, {}, *basis3);
    CHECK(bm3.exact);
    CHECK(bm3.values[basis3->find(Monomial({2, 0, 0}))] ==
          doctest::Approx(oracle::ball_moment_quadrature3(2, 0, 0, 2.0)).epsilon(1e-8));
    CHECK(bm3.values[0] ==
          doctest::Approx(oracle::ball_moment_quadrature3(0, 0, 0, 2.0)).epsilon(1e-8));
}

TEST_CASE("cylinder geometry: circle pair times interval") {
    std::vector<std::string> scw{"s", "c", "w"};
    QuotientRing ring;
    ring.pairs = {{0, 1}};
    SemialgebraicSet X;
    X.inequalities = {parse_polynomial("66 - s^2 - c^2 - w^2", scw),
                      parse_polynomial("64 - w^2", scw)};
    auto basis = Basis::make(scw, 4, ring);
    auto lm = lebesgue_moments(X, ring, *basis);
    CHECK(lm.exact);
    // mass = 2*pi * 16
    CHECK(lm.values[0] == doctest::Approx(2.0 * std::numbers::pi * 16.0));
    // int s^2 dtheta * int dw = pi * 16
    CHECK(lm.values[basis->find(Monomial({2, 0, 0}))] ==
          doctest::Approx(std::numbers::pi * 16.0));
    // odd in w or containing c^1: zero
    CHECK(lm.values[basis->find(Monomial({0, 0, 1}))] == doctest::Approx(0.0));
    CHECK(lm.values[basis->find(Monomial({0, 1, 0}))] == doctest::Approx(0.0));
    // int s^2 w^2: pi * (2*8^3/3)
    CHECK(lm.values[basis->find(Monomial({2, 0, 2}))] ==
          doctest::Approx(std::numbers::pi * 2.0 * 512.0 / 3.0));
}

TEST_CASE("quadrature fallback reports its accuracy") {
    std::vector<std::string> xy{"x1", "x2"};
    SemialgebraicSet ellipse;
    ellipse.inequalities = {parse_polynomial("1 - x1^2 - 2*x2^2", xy),
                            parse_polynomial("1.5 - x1^2 - x2^2", xy)};
    auto basis = Basis::make(xy, 2);
    CHECK_THROWS_AS(lebesgue_moments(ellipse, {}, *basis, false), std::invalid_argument);
    auto lm = lebesgue_moments(ellipse, {}, *basis, true, 64);
    CHECK(!lm.exact);
    double exact_area = std::numbers::pi / std::sqrt(2.0);
    CHECK(lm.values[0] == doctest::Approx(exact_area).epsilon(0.05));
    CHECK(lm.est_rel_err > 0.0);
    CHECK(lm.est_rel_err < 0.1);
}

TEST_CASE("time extension divides by the time exponent plus one") {
    auto xb = Basis::make({"x"}, 2);
    auto txb = Basis::make({"t", "x"}, 2);
    Eigen::VectorXd xm(3);
    xm << 2.0, 0.5, 1.0;
    Eigen::VectorXd y = time_extended_moments(xm, *xb, *txb);
    CHECK(y[txb->find(Monomial({0, 0}))] == doctest::Approx(2.0));
    CHECK(y[txb->find(Monomial({1, 0}))] == doctest::Approx(1.0));
    CHECK(y[txb->find(Monomial({2, 0}))] == doctest::Approx(2.0 / 3.0));
    CHECK(y[txb->find(Monomial({1, 1}))] == doctest::Approx(0.25));
}

TEST_CASE("volume equals the constant moment") {
    std::vector<std::string> xy{"x1", "x2"};
    SemialgebraicSet ball;
    ball.inequalities = {parse_polynomial("2.56 - x1^2 - x2^2", xy)};
    SetGeometry g = detect_geometry(ball, {}, 2);
    REQUIRE(g.exact);
    auto basis = Basis::make(xy, 2);
    CHECK(g.volume() == doctest::Approx(geometry_moments(g, *basis)[0]).epsilon(1e-12));
    auto radii = coordinate_radii(g, 2);
    CHECK(radii[0] == doctest::Approx(1.6));
    CHECK(radii[1] == doctest::Approx(1.6));
}
