#pragma once

#include <Eigen/Dense>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "brs/problem.hpp"

namespace brs {

/// Graded (quotient-reduced) monomial basis over a fixed ambient.
struct Basis {
    std::vector<std::string> names;
    int maxdeg = 0;
    QuotientRing ring;  // indices into this ambient
    std::vector<Monomial> monos;
    std::unordered_map<Monomial, int, MonomialHash> index;

    int nvars() const { return static_cast<int>(names.size()); }
    int size() const { return static_cast<int>(monos.size()); }
    int find(const Monomial& m) const {
        auto it = index.find(m);
        return it == index.end() ? -1 : it->second;
    }

    static std::shared_ptr<const Basis> make(std::vector<std::string> names, int maxdeg,
                                             QuotientRing ring = {});
};

enum class MeasureKind : std::uint8_t {
    SigmaPlus,     // sigma^+_j on [0,1] x X
    SigmaMinus,    // sigma^-_j
    SigmaHat,      // slack sigma_j
    Occupation,    // mu
    Initial,       // mu_0 on X
    InitialSlack,  // mu_hat_0 on X
    Final,         // mu_T
    Lebesgue,      // lambda (reference measure)
};

struct MeasureTag {
    MeasureKind kind = MeasureKind::Occupation;
    int channel = -1;  // sigma measures only

    bool operator==(const MeasureTag& o) const { return kind == o.kind && channel == o.channel; }
    std::string str() const;
};

/// Truncated moment sequence of one measure, indexed by basis->monos.
struct MomentVector {
    MeasureTag tag;
    std::shared_ptr<const Basis> basis;
    Eigen::VectorXd values;

    double mass() const { return values.size() ? values[0] : 0.0; }
};

/// Moment or localizing matrix structure: each entry is a linear functional
/// of a moment vector (single moment y^{a+b} for the plain moment kind;
/// several terms when a generator h or a quotient-ring reduction is involved).
struct StructuredMatrix {
    enum class Kind { Moment, Localizing };

    Kind kind = Kind::Moment;
    int dim = 0;
    std::vector<Monomial> row_monos;
    Polynomial generator;  // reduced h for Localizing
    // Upper triangle r <= c, packed row-major.
    std::vector<std::vector<std::pair<int, double>>> entries;

    int entry_index(int r, int c) const {
        // requires r <= c
        return r * dim - r * (r - 1) / 2 + (c - r);
    }
    const std::vector<std::pair<int, double>>& entry(int r, int c) const {
        return entries[r <= c ? entry_index(r, c) : entry_index(c, r)];
    }
};

/// [M_k(y)]_{(a,b)} = y^{a+b}; rows are the basis monomials of degree <= k.
StructuredMatrix moment_matrix(const Basis& moment_basis, int k);

/// [M_{k_h}(h,y)]_{(a,b)} = sum_g h_g y^{a+b+g}. Requires k_h >= 0 and
/// deg h + 2 k_h <= moment_basis.maxdeg.
StructuredMatrix localizing_matrix(const Basis& moment_basis, const Polynomial& h, int k_h);

Eigen::MatrixXd instantiate(const StructuredMatrix& sm, const Eigen::VectorXd& moments);
double min_eigenvalue(const Eigen::MatrixXd& sym);

double eval_monomial(const Monomial& m, std::span<const double> point);

/// Moments of a weighted sample cloud (test/validation oracle helper).
Eigen::VectorXd moments_of_samples(const Basis& basis,
                                   const std::vector<Eigen::VectorXd>& points,
                                   const std::vector<double>& weights);

// --- Reference-measure geometry -------------------------------------------

struct GeometryFactor {
    enum class Type { Interval, Ball, Circle };
    Type type;
    std::vector<int> vars;       // ambient indices covered by this factor
    double lo = 0, hi = 0;       // Interval
    std::vector<double> center;  // Ball, aligned with vars
    double radius = 0;           // Ball
};

struct SetGeometry {
    bool exact = false;
    std::vector<GeometryFactor> factors;
    std::string note;

    double volume() const;
};

/// Recognizes axis-aligned boxes, Euclidean balls and circle-pair cylinders.
/// Inequalities touching ring indeterminates are treated as support
/// certificates and do not shape the reference measure.
SetGeometry detect_geometry(const SemialgebraicSet& set, const QuotientRing& ring, int nvars);

struct LebesgueResult {
    Eigen::VectorXd values;
    bool exact = false;
    double est_rel_err = 0.0;  // quadrature path only
};

/// y^a = integral of x^a over the reference measure of `set`. Closed form for
/// recognized geometries, tensor Gauss-Legendre with rejection otherwise.
LebesgueResult lebesgue_moments(const SemialgebraicSet& set, const QuotientRing& ring,
                                const Basis& basis, bool allow_quadrature = true,
                                int quad_order = 48);

Eigen::VectorXd geometry_moments(const SetGeometry& g, const Basis& basis);

/// Lifts x-moments to (t,x)-moments with the time factor over [0,1]:
/// y_{t^a x^b} = x_mom[b] / (a+1).
Eigen::VectorXd time_extended_moments(const Eigen::VectorXd& x_moments, const Basis& x_basis,
                                      const Basis& tx_basis);

/// Per-coordinate radius bounds used for moment scaling.
std::vector<double> coordinate_radii(const SetGeometry& g, int nvars);

}  // namespace brs
