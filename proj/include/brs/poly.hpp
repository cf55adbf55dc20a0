#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace brs {

struct ParseError : std::runtime_error {
    int line = 0;
    int column = 0;
    ParseError(const std::string& msg, int line_, int column_)
        : std::runtime_error(msg), line(line_), column(column_) {}
};

struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Exponent vector over a fixed ordered indeterminate list.
struct Monomial {
    std::vector<int> exps;

    Monomial() = default;
    explicit Monomial(std::vector<int> e) : exps(std::move(e)) {}

    static Monomial constant(int nvars) { return Monomial(std::vector<int>(nvars, 0)); }
    static Monomial unit(int nvars, int var, int power = 1);

    int nvars() const { return static_cast<int>(exps.size()); }
    int degree() const;
    bool is_constant() const { return degree() == 0; }

    Monomial operator*(const Monomial& o) const;
    bool operator==(const Monomial& o) const { return exps == o.exps; }
    bool operator!=(const Monomial& o) const { return exps != o.exps; }
};

// Graded lexicographic order: lower total degree first; within a degree,
// higher exponent on an earlier indeterminate comes first, so for n=2, d<=2
// the ascending order is [1, x1, x2, x1^2, x1*x2, x2^2].
bool graded_lex_less(const Monomial& a, const Monomial& b);

struct MonomialLess {
    bool operator()(const Monomial& a, const Monomial& b) const { return graded_lex_less(a, b); }
};

struct MonomialHash {
    std::size_t operator()(const Monomial& m) const;
};

/// All monomials in nvars indeterminates with total degree <= maxdeg,
/// sorted ascending in the graded order. Size is C(nvars + maxdeg, nvars).
std::vector<Monomial> monomials_up_to(int nvars, int maxdeg);

/// Pairs of indeterminate indices (s_i, c_i) subject to s_i^2 + c_i^2 = 1.
/// The canonical rewrite is c_i^2 -> 1 - s_i^2.
struct QuotientRing {
    std::vector<std::pair<int, int>> pairs;

    bool empty() const { return pairs.empty(); }
    /// If `var` is a cos indeterminate, returns the index of its sin partner.
    int sin_partner_of_cos(int var) const;
    /// Remaps indeterminate indices (e.g. when prepending a time variable).
    QuotientRing shifted(int offset) const;
};

/// Canonical monomials of the quotient ring: cos exponents <= 1.
std::vector<Monomial> monomials_up_to_reduced(int nvars, int maxdeg, const QuotientRing& ring);

/// Sparse multivariate polynomial with real coefficients over named
/// indeterminates. No zero coefficients are stored; the zero polynomial has
/// an empty term map. After arithmetic, terms with |coef| below
/// 1e-14 * max|coef| are pruned.
class Polynomial {
public:
    using TermMap = std::map<Monomial, double, MonomialLess>;

    Polynomial() = default;
    explicit Polynomial(std::vector<std::string> names) : names_(std::move(names)) {}

    static Polynomial constant(std::vector<std::string> names, double c);
    static Polynomial variable(std::vector<std::string> names, int var);

    const std::vector<std::string>& names() const { return names_; }
    int nvars() const { return static_cast<int>(names_.size()); }
    const TermMap& terms() const { return terms_; }

    bool is_zero() const { return terms_.empty(); }
    /// Max total degree over stored terms; -1 for the zero polynomial.
    int degree() const;
    double coeff(const Monomial& m) const;
    void set_coeff(const Monomial& m, double c);
    void add_term(const Monomial& m, double c);

    Polynomial operator+(const Polynomial& o) const;
    Polynomial operator-(const Polynomial& o) const;
    Polynomial operator-() const;
    Polynomial operator*(const Polynomial& o) const;
    Polynomial operator*(double s) const;

    Polynomial partial(int var) const;
    double evaluate(std::span<const double> point) const;
    /// Fixes indeterminate `var` to `value`; the result keeps the full name
    /// list with exponent 0 on `var`.
    Polynomial substitute(int var, double value) const;
    /// Substitutes var -> scale * var (exponent-wise coefficient scaling).
    Polynomial scale_var(int var, double scale) const;
    /// Removes indeterminate `var`; requires exponent 0 on it in every term.
    Polynomial drop_var(int var) const;
    /// Inserts a new indeterminate (exponent 0 everywhere) at `position`.
    Polynomial insert_var(int position, const std::string& name) const;

    void prune();
    std::string to_string() const;

private:
    void check_same_vars(const Polynomial& o) const;

    std::vector<std::string> names_;
    TermMap terms_;
};

inline Polynomial operator*(double s, const Polynomial& p) { return p * s; }

/// Canonical form modulo the circle relations: no cos exponent >= 2.
/// Agrees with the input on every point of the variety s^2 + c^2 = 1.
Polynomial reduce_mod_circle(const Polynomial& p, const QuotientRing& ring);

/// Reduce a single monomial; returns the expansion as a polynomial.
Polynomial reduce_monomial_mod_circle(const Monomial& m, double coef,
                                      const std::vector<std::string>& names,
                                      const QuotientRing& ring);

/// Parses the problem-file polynomial syntax: a sum of terms
/// `coef*x1^a*x2^b`, whitespace-insensitive, `^1` and `*1` optional,
/// e.g. `-9.8 + 4.9*s^2`. Unknown indeterminate names are an error.
Polynomial parse_polynomial(const std::string& text, const std::vector<std::string>& names);

std::string format_double(double v);

}  // namespace brs
