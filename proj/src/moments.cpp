#include "brs/moments.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace brs {

std::shared_ptr<const Basis> Basis::make(std::vector<std::string> names, int maxdeg,
                                         QuotientRing ring) {
    auto b = std::make_shared<Basis>();
    b->names = std::move(names);
    b->maxdeg = maxdeg;
    b->ring = std::move(ring);
    b->monos = monomials_up_to_reduced(b->nvars(), maxdeg, b->ring);
    b->index.reserve(b->monos.size());
    for (std::size_t i = 0; i < b->monos.size(); ++i)
        b->index.emplace(b->monos[i], static_cast<int>(i));
    return b;
}

std::string MeasureTag::str() const {
    std::ostringstream os;
    switch (kind) {
        case MeasureKind::SigmaPlus: os << "sigma+_" << channel + 1; break;
        case MeasureKind::SigmaMinus: os << "sigma-_" << channel + 1; break;
        case MeasureKind::SigmaHat: os << "sigma^_" << channel + 1; break;
        case MeasureKind::Occupation: os << "mu"; break;
        case MeasureKind::Initial: os << "mu0"; break;
        case MeasureKind::InitialSlack: os << "mu0^"; break;
        case MeasureKind::Final: os << "muT"; break;
        case MeasureKind::Lebesgue: os << "lambda"; break;
    }
    return os.str();
}

namespace {

// Maps a polynomial (already reduced) to a linear functional over the basis.
std::vector<std::pair<int, double>> functional_of(const Polynomial& p, const Basis& basis) {
    std::vector<std::pair<int, double>> out;
    out.reserve(p.terms().size());
    for (const auto& [m, c] : p.terms()) {
        int idx = basis.find(m);
        if (idx < 0)
            throw std::invalid_argument("moment basis too small for monomial of degree " +
                                        std::to_string(m.degree()));
        out.emplace_back(idx, c);
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

StructuredMatrix moment_matrix(const Basis& moment_basis, int k) {
    if (k < 0) throw std::invalid_argument("moment_matrix: k >= 0 required");
    if (2 * k > moment_basis.maxdeg)
        throw std::invalid_argument("moment_matrix: basis truncation below 2k");
    StructuredMatrix sm;
    sm.kind = StructuredMatrix::Kind::Moment;
    sm.row_monos = monomials_up_to_reduced(moment_basis.nvars(), k, moment_basis.ring);
    sm.dim = static_cast<int>(sm.row_monos.size());
    sm.generator = Polynomial::constant(moment_basis.names, 1.0);
    sm.entries.resize(static_cast<std::size_t>(sm.dim) * (sm.dim + 1) / 2);
    for (int r = 0; r < sm.dim; ++r) {
        for (int c = r; c < sm.dim; ++c) {
            Monomial prod = sm.row_monos[r] * sm.row_monos[c];
            Polynomial red =
                reduce_monomial_mod_circle(prod, 1.0, moment_basis.names, moment_basis.ring);
            sm.entries[sm.entry_index(r, c)] = functional_of(red, moment_basis);
        }
    }
    return sm;
}

StructuredMatrix localizing_matrix(const Basis& moment_basis, const Polynomial& h, int k_h) {
    if (k_h < 0) throw std::invalid_argument("localizing_matrix: k_h < 0 (k too small for h)");
    Polynomial hr = reduce_mod_circle(h, moment_basis.ring);
    if (hr.degree() + 2 * k_h > moment_basis.maxdeg)
        throw std::invalid_argument("localizing_matrix: basis truncation below 2k_h + deg h");
    StructuredMatrix sm;
    sm.kind = StructuredMatrix::Kind::Localizing;
    sm.row_monos = monomials_up_to_reduced(moment_basis.nvars(), k_h, moment_basis.ring);
    sm.dim = static_cast<int>(sm.row_monos.size());
    sm.generator = hr;
    sm.entries.resize(static_cast<std::size_t>(sm.dim) * (sm.dim + 1) / 2);
    for (int r = 0; r < sm.dim; ++r) {
        for (int c = r; c < sm.dim; ++c) {
            Monomial prod = sm.row_monos[r] * sm.row_monos[c];
            Polynomial acc(moment_basis.names);
            for (const auto& [hm, hc] : hr.terms()) {
                Polynomial red =
                    reduce_monomial_mod_circle(prod * hm, hc, moment_basis.names, moment_basis.ring);
                for (const auto& [m2, c2] : red.terms()) acc.add_term(m2, c2);
            }
            sm.entries[sm.entry_index(r, c)] = functional_of(acc, moment_basis);
        }
    }
    return sm;
}

Eigen::MatrixXd instantiate(const StructuredMatrix& sm, const Eigen::VectorXd& moments) {
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(sm.dim, sm.dim);
    for (int r = 0; r < sm.dim; ++r) {
        for (int c = r; c < sm.dim; ++c) {
            double v = 0.0;
            for (const auto& [idx, coef] : sm.entries[sm.entry_index(r, c)])
                v += coef * moments[idx];
            M(r, c) = v;
            M(c, r) = v;
        }
    }
    return M;
}

double min_eigenvalue(const Eigen::MatrixXd& sym) {
    if (sym.rows() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

double eval_monomial(const Monomial& m, std::span<const double> point) {
    double v = 1.0;
    for (std::size_t i = 0; i < m.exps.size(); ++i)
        for (int e = 0; e < m.exps[i]; ++e) v *= point[i];
    return v;
}

Eigen::VectorXd moments_of_samples(const Basis& basis, const std::vector<Eigen::VectorXd>& points,
                                   const std::vector<double>& weights) {
    Eigen::VectorXd y = Eigen::VectorXd::Zero(basis.size());
    for (std::size_t s = 0; s < points.size(); ++s) {
        std::span<const double> pt(points[s].data(), points[s].size());
        for (int i = 0; i < basis.size(); ++i)
            y[i] += weights[s] * eval_monomial(basis.monos[i], pt);
    }
    return y;
}

// ---------------------------------------------------------------------------
// Reference-measure geometry

namespace {

double dfact(int n) {  // double factorial, (-1)!! = 0!! = 1
    double v = 1.0;
    for (int k = n; k >= 2; k -= 2) v *= k;
    return v;
}

double circle_moment(int se, int ce) {
    if (se % 2 != 0 || ce % 2 != 0) return 0.0;
    return 2.0 * std::numbers::pi * dfact(se - 1) * dfact(ce - 1) / dfact(se + ce);
}

double interval_moment(double lo, double hi, int e) {
    return (std::pow(hi, e + 1) - std::pow(lo, e + 1)) / (e + 1);
}

double ball_central_moment(const std::vector<int>& alpha, double radius) {
    int total = 0;
    for (int a : alpha) {
        if (a % 2 != 0) return 0.0;
        total += a;
    }
    const int n = static_cast<int>(alpha.size());
    double lg = 0.0, bsum = 0.0;
    for (int a : alpha) {
        lg += std::lgamma((a + 1) / 2.0);
        bsum += (a + 1) / 2.0;
    }
    double surface = 2.0 * std::exp(lg - std::lgamma(bsum));
    return std::pow(radius, total + n) * surface / (total + n);
}

void shifted_ball_rec(const std::vector<int>& alpha, const std::vector<double>& center,
                      double radius, std::size_t i, std::vector<int>& beta, double coef,
                      double& acc) {
    if (i == alpha.size()) {
        acc += coef * ball_central_moment(beta, radius);
        return;
    }
    double binom = 1.0;
    for (int b = alpha[i]; b >= 0; --b) {
        // binom holds C(alpha_i, b) built incrementally from b = alpha_i down.
        beta.push_back(b);
        double shift = std::pow(center[i], alpha[i] - b);
        shifted_ball_rec(alpha, center, radius, i + 1, beta, coef * binom * shift, acc);
        beta.pop_back();
        binom = binom * b / (alpha[i] - b + 1);
    }
}

double ball_moment(const std::vector<int>& alpha, const std::vector<double>& center,
                   double radius) {
    bool centered = true;
    for (double c : center)
        if (c != 0.0) centered = false;
    if (centered) return ball_central_moment(alpha, radius);
    std::vector<int> beta;
    double acc = 0.0;
    shifted_ball_rec(alpha, center, radius, 0, beta, 1.0, acc);
    return acc;
}

double factor_moment(const GeometryFactor& f, const Monomial& m) {
    switch (f.type) {
        case GeometryFactor::Type::Interval:
            return interval_moment(f.lo, f.hi, m.exps[f.vars[0]]);
        case GeometryFactor::Type::Circle:
            return circle_moment(m.exps[f.vars[0]], m.exps[f.vars[1]]);
        case GeometryFactor::Type::Ball: {
            std::vector<int> alpha;
            alpha.reserve(f.vars.size());
            for (int v : f.vars) alpha.push_back(m.exps[v]);
            return ball_moment(alpha, f.center, f.radius);
        }
    }
    return 0.0;
}

}  // namespace

double SetGeometry::volume() const {
    double v = 1.0;
    for (const auto& f : factors) {
        switch (f.type) {
            case GeometryFactor::Type::Interval: v *= f.hi - f.lo; break;
            case GeometryFactor::Type::Circle: v *= 2.0 * std::numbers::pi; break;
            case GeometryFactor::Type::Ball: {
                std::vector<int> zero(f.vars.size(), 0);
                v *= ball_central_moment(zero, f.radius);
                break;
            }
        }
    }
    return v;
}

SetGeometry detect_geometry(const SemialgebraicSet& set, const QuotientRing& ring, int nvars) {
    SetGeometry g;
    std::vector<int> cover(nvars, 0);
    std::vector<bool> is_ring(nvars, false);
    for (const auto& [s, c] : ring.pairs) {
        GeometryFactor f;
        f.type = GeometryFactor::Type::Circle;
        f.vars = {s, c};
        g.factors.push_back(f);
        cover[s]++;
        cover[c]++;
        is_ring[s] = is_ring[c] = true;
    }

    struct Bound {
        bool has_lo = false, has_hi = false;
        double lo = 0, hi = 0;
    };
    std::vector<Bound> bounds(nvars);
    std::vector<GeometryFactor> balls;

    for (const auto& h : set.inequalities) {
        // Inequalities touching ring indeterminates are support certificates,
        // redundant on the cylinder; they do not shape the reference measure.
        bool touches_ring = false;
        std::vector<int> support;
        int maxdeg_per_var = 0;
        for (const auto& [m, c] : h.terms()) {
            for (int i = 0; i < nvars; ++i) {
                if (m.exps[i] > 0) {
                    if (is_ring[i]) touches_ring = true;
                    if (std::find(support.begin(), support.end(), i) == support.end())
                        support.push_back(i);
                    maxdeg_per_var = std::max(maxdeg_per_var, m.exps[i]);
                }
            }
        }
        if (touches_ring) continue;
        std::sort(support.begin(), support.end());

        if (support.size() == 1 && h.degree() <= 2) {
            int v = support[0];
            double a = h.coeff(Monomial::constant(nvars));
            double b = h.coeff(Monomial::unit(nvars, v, 1));
            double q = -h.coeff(Monomial::unit(nvars, v, 2));
            if (q == 0.0 && b != 0.0) {
                double bound = -a / b;
                if (b > 0) {
                    bounds[v].has_lo = true;
                    bounds[v].lo = bound;
                } else {
                    bounds[v].has_hi = true;
                    bounds[v].hi = bound;
                }
                continue;
            }
            if (q > 0.0) {
                double disc = b * b + 4.0 * q * a;
                if (disc <= 0.0) {
                    g.note = "degenerate quadratic interval";
                    return g;
                }
                double r = std::sqrt(disc);
                bounds[v].has_lo = true;
                bounds[v].has_hi = true;
                bounds[v].lo = (b - r) / (2.0 * q);
                bounds[v].hi = (b + r) / (2.0 * q);
                continue;
            }
            g.note = "unrecognized single-variable inequality";
            return g;
        }

        // Ball pattern: C - sum (x_i - c_i)^2 over >= 2 vars.
        bool ball_ok = h.degree() == 2;
        for (const auto& [m, c] : h.terms()) {
            if (m.degree() == 2) {
                bool plain_square = false;
                for (int i = 0; i < nvars; ++i)
                    if (m.exps[i] == 2) plain_square = true;
                if (!plain_square || c != -1.0) ball_ok = false;
            }
        }
        int squares = 0;
        for (const auto& [m, c] : h.terms())
            if (m.degree() == 2) ++squares;
        if (!ball_ok || squares != static_cast<int>(support.size())) {
            g.note = "unrecognized multi-variable inequality";
            return g;
        }
        GeometryFactor f;
        f.type = GeometryFactor::Type::Ball;
        f.vars = support;
        double c0 = h.coeff(Monomial::constant(nvars));
        double r2 = c0;
        for (int v : support) {
            double lin = h.coeff(Monomial::unit(nvars, v, 1));
            double cc = lin / 2.0;
            f.center.push_back(cc);
            r2 += cc * cc;
        }
        if (r2 <= 0.0) {
            g.note = "empty ball";
            return g;
        }
        f.radius = std::sqrt(r2);
        balls.push_back(f);
    }

    // Resolve redundancy when a ball and interval bounds cover the same
    // variables: keep whichever set is contained in the other.
    for (auto it = balls.begin(); it != balls.end();) {
        bool all_boxed = true;
        for (int v : it->vars)
            if (!(bounds[v].has_lo && bounds[v].has_hi)) all_boxed = false;
        if (!all_boxed) {
            ++it;
            continue;
        }
        const std::size_t nv = it->vars.size();
        bool box_in_ball = true;
        for (std::size_t corner = 0; corner < (1u << nv); ++corner) {
            double d2 = 0.0;
            for (std::size_t i = 0; i < nv; ++i) {
                int v = it->vars[i];
                double coord = (corner >> i) & 1 ? bounds[v].hi : bounds[v].lo;
                d2 += (coord - it->center[i]) * (coord - it->center[i]);
            }
            if (d2 > it->radius * it->radius + 1e-12) box_in_ball = false;
        }
        if (box_in_ball) {
            it = balls.erase(it);
            continue;
        }
        bool ball_in_box = true;
        for (std::size_t i = 0; i < nv; ++i) {
            int v = it->vars[i];
            if (it->center[i] - it->radius < bounds[v].lo - 1e-12 ||
                it->center[i] + it->radius > bounds[v].hi + 1e-12)
                ball_in_box = false;
        }
        if (ball_in_box) {
            for (int v : it->vars) bounds[v] = Bound{};
            ++it;
            continue;
        }
        g.note = "ball-box intersection";
        return g;
    }

    for (const auto& f : balls) {
        g.factors.push_back(f);
        for (int v : f.vars) cover[v]++;
    }

    for (int v = 0; v < nvars; ++v) {
        if (is_ring[v]) continue;
        if (bounds[v].has_lo && bounds[v].has_hi) {
            if (bounds[v].lo >= bounds[v].hi) {
                g.note = "empty interval";
                return g;
            }
            GeometryFactor f;
            f.type = GeometryFactor::Type::Interval;
            f.vars = {v};
            f.lo = bounds[v].lo;
            f.hi = bounds[v].hi;
            g.factors.push_back(f);
            cover[v]++;
        } else if (bounds[v].has_lo || bounds[v].has_hi) {
            g.note = "half-bounded variable";
            return g;
        }
    }

    for (int v = 0; v < nvars; ++v) {
        if (cover[v] != 1) {
            g.note = cover[v] == 0 ? "uncovered variable" : "doubly covered variable";
            return g;
        }
    }
    g.exact = true;
    return g;
}

Eigen::VectorXd geometry_moments(const SetGeometry& g, const Basis& basis) {
    Eigen::VectorXd y(basis.size());
    for (int i = 0; i < basis.size(); ++i) {
        double v = 1.0;
        for (const auto& f : g.factors) v *= factor_moment(f, basis.monos[i]);
        y[i] = v;
    }
    return y;
}

// ---------------------------------------------------------------------------
// Quadrature fallback: tensor Gauss-Legendre restricted by rejection.

namespace {

void gauss_legendre(int order, std::vector<double>& nodes, std::vector<double>& weights) {
    nodes.resize(order);
    weights.resize(order);
    for (int i = 0; i < order; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (order + 0.5));
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < order; ++j) {
                double p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) * x * p1 - j * p2) / (j + 1);
            }
            double dp = order * (x * p0 - p1) / (x * x - 1.0);
            double dx = p0 / dp;
            x -= dx;
            if (std::fabs(dx) < 1e-15) break;
        }
        double p0 = 1.0, p1 = 0.0;
        for (int j = 0; j < order; ++j) {
            double p2 = p1;
            p1 = p0;
            p0 = ((2 * j + 1) * x * p1 - j * p2) / (j + 1);
        }
        double dp = order * (x * p0 - p1) / (x * x - 1.0);
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
}

Eigen::VectorXd quadrature_moments(const SemialgebraicSet& set, const Basis& basis,
                                   const std::vector<double>& lo, const std::vector<double>& hi,
                                   int order) {
    const int n = basis.nvars();
    std::vector<double> nodes, weights;
    gauss_legendre(order, nodes, weights);
    Eigen::VectorXd y = Eigen::VectorXd::Zero(basis.size());
    std::vector<int> idx(n, 0);
    std::vector<double> pt(n);
    while (true) {
        double w = 1.0;
        for (int d = 0; d < n; ++d) {
            double half = 0.5 * (hi[d] - lo[d]);
            pt[d] = lo[d] + half * (nodes[idx[d]] + 1.0);
            w *= half * weights[idx[d]];
        }
        bool inside = true;
        for (const auto& h : set.inequalities)
            if (h.evaluate(pt) < 0.0) {
                inside = false;
                break;
            }
        if (inside)
            for (int i = 0; i < basis.size(); ++i) y[i] += w * eval_monomial(basis.monos[i], pt);
        int d = 0;
        while (d < n) {
            if (++idx[d] < order) break;
            idx[d] = 0;
            ++d;
        }
        if (d == n) break;
    }
    return y;
}

}  // namespace

LebesgueResult lebesgue_moments(const SemialgebraicSet& set, const QuotientRing& ring,
                                const Basis& basis, bool allow_quadrature, int quad_order) {
    SetGeometry g = detect_geometry(set, ring, basis.nvars());
    LebesgueResult out;
    if (g.exact) {
        out.values = geometry_moments(g, basis);
        out.exact = true;
        return out;
    }
    if (!allow_quadrature)
        throw std::invalid_argument("unsupported reference-measure geometry (" + g.note +
                                    ") and quadrature disabled");
    if (!ring.empty())
        throw std::invalid_argument(
            "quadrature fallback does not support quotient-ring ambients (" + g.note + ")");
    // Bounding box combined from any recognizable ball or interval
    // certificates among the inequalities.
    const int n = basis.nvars();
    std::vector<double> lo(n, 0.0), hi(n, 0.0);
    std::vector<bool> boxed(n, false);
    for (const auto& h : set.inequalities) {
        SemialgebraicSet single;
        single.inequalities = {h};
        SetGeometry gh = detect_geometry(single, ring, n);
        for (const auto& f : gh.factors) {
            if (f.type == GeometryFactor::Type::Ball) {
                for (std::size_t i = 0; i < f.vars.size(); ++i) {
                    int v = f.vars[i];
                    double l = f.center[i] - f.radius, u = f.center[i] + f.radius;
                    if (!boxed[v] || l > lo[v]) lo[v] = l;
                    if (!boxed[v] || u < hi[v]) hi[v] = u;
                    boxed[v] = true;
                }
            } else if (f.type == GeometryFactor::Type::Interval) {
                int v = f.vars[0];
                if (!boxed[v] || f.lo > lo[v]) lo[v] = f.lo;
                if (!boxed[v] || f.hi < hi[v]) hi[v] = f.hi;
                boxed[v] = true;
            }
        }
    }
    for (int v = 0; v < n; ++v)
        if (!boxed[v])
            throw std::invalid_argument("no bounding box found for quadrature fallback");
    out.values = quadrature_moments(set, basis, lo, hi, quad_order);
    Eigen::VectorXd coarse = quadrature_moments(set, basis, lo, hi, quad_order / 2);
    double err = 0.0;
    for (int i = 0; i < basis.size(); ++i) {
        double denom = std::max(std::fabs(out.values[i]), 1e-12);
        err = std::max(err, std::fabs(out.values[i] - coarse[i]) / denom);
    }
    out.est_rel_err = err;
    out.exact = false;
    return out;
}

Eigen::VectorXd time_extended_moments(const Eigen::VectorXd& x_moments, const Basis& x_basis,
                                      const Basis& tx_basis) {
    Eigen::VectorXd y(tx_basis.size());
    for (int i = 0; i < tx_basis.size(); ++i) {
        const Monomial& m = tx_basis.monos[i];
        int a = m.exps[0];
        Monomial xm(std::vector<int>(m.exps.begin() + 1, m.exps.end()));
        int xi = x_basis.find(xm);
        y[i] = xi < 0 ? 0.0 : x_moments[xi] / (a + 1);
    }
    return y;
}

std::vector<double> coordinate_radii(const SetGeometry& g, int nvars) {
    std::vector<double> r(nvars, 1.0);
    for (const auto& f : g.factors) {
        switch (f.type) {
            case GeometryFactor::Type::Interval:
                r[f.vars[0]] = std::max(std::fabs(f.lo), std::fabs(f.hi));
                break;
            case GeometryFactor::Type::Circle:
                r[f.vars[0]] = 1.0;
                r[f.vars[1]] = 1.0;
                break;
            case GeometryFactor::Type::Ball:
                for (std::size_t i = 0; i < f.vars.size(); ++i)
                    r[f.vars[i]] = std::fabs(f.center[i]) + f.radius;
                break;
        }
    }
    for (double& v : r) v = std::max(v, 1e-9);
    return r;
}

}  // namespace brs
