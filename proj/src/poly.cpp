#include "brs/poly.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

namespace brs {

Monomial Monomial::unit(int nvars, int var, int power) {
    std::vector<int> e(nvars, 0);
    e.at(var) = power;
    return Monomial(std::move(e));
}

int Monomial::degree() const {
    int d = 0;
    for (int e : exps) d += e;
    return d;
}

Monomial Monomial::operator*(const Monomial& o) const {
    if (exps.size() != o.exps.size())
        throw std::invalid_argument("monomial product: mismatched indeterminate count");
    Monomial r = *this;
    for (std::size_t i = 0; i < exps.size(); ++i) r.exps[i] += o.exps[i];
    return r;
}

bool graded_lex_less(const Monomial& a, const Monomial& b) {
    int da = a.degree(), db = b.degree();
    if (da != db) return da < db;
    // Same degree: the monomial with the higher exponent on the earliest
    // differing indeterminate comes first.
    for (std::size_t i = 0; i < a.exps.size(); ++i) {
        if (a.exps[i] != b.exps[i]) return a.exps[i] > b.exps[i];
    }
    return false;
}

std::size_t MonomialHash::operator()(const Monomial& m) const {
    std::uint64_t h = 1469598103934665603ull;
    for (int e : m.exps) {
        h ^= static_cast<std::uint64_t>(e) + 0x9e3779b97f4a7c15ull;
        h *= 1099511628211ull;
    }
    return static_cast<std::size_t>(h);
}

namespace {

// Emits all exponent vectors of total degree exactly `budget` in descending
// first-exponent order, matching the graded order within a degree level.
void enumerate_exact(int remaining_vars, int budget, std::vector<int>& partial,
                     std::vector<Monomial>& out) {
    if (remaining_vars == 1) {
        partial.push_back(budget);
        out.emplace_back(partial);
        partial.pop_back();
        return;
    }
    for (int e = budget; e >= 0; --e) {
        partial.push_back(e);
        enumerate_exact(remaining_vars - 1, budget - e, partial, out);
        partial.pop_back();
    }
}

}  // namespace

std::vector<Monomial> monomials_up_to(int nvars, int maxdeg) {
    if (nvars < 1 || maxdeg < 0) throw std::invalid_argument("monomials_up_to: n >= 1, d >= 0");
    std::vector<Monomial> out;
    std::vector<int> partial;
    for (int d = 0; d <= maxdeg; ++d) enumerate_exact(nvars, d, partial, out);
    return out;
}

int QuotientRing::sin_partner_of_cos(int var) const {
    for (const auto& [s, c] : pairs)
        if (c == var) return s;
    return -1;
}

QuotientRing QuotientRing::shifted(int offset) const {
    QuotientRing r;
    for (const auto& [s, c] : pairs) r.pairs.emplace_back(s + offset, c + offset);
    return r;
}

std::vector<Monomial> monomials_up_to_reduced(int nvars, int maxdeg, const QuotientRing& ring) {
    auto all = monomials_up_to(nvars, maxdeg);
    if (ring.empty()) return all;
    std::vector<Monomial> out;
    out.reserve(all.size());
    for (auto& m : all) {
        bool canonical = true;
        for (const auto& [s, c] : ring.pairs) {
            (void)s;
            if (m.exps[c] >= 2) { canonical = false; break; }
        }
        if (canonical) out.push_back(std::move(m));
    }
    return out;
}

Polynomial Polynomial::constant(std::vector<std::string> names, double c) {
    Polynomial p(std::move(names));
    if (c != 0.0) p.terms_[Monomial::constant(p.nvars())] = c;
    return p;
}

Polynomial Polynomial::variable(std::vector<std::string> names, int var) {
    Polynomial p(std::move(names));
    p.terms_[Monomial::unit(p.nvars(), var)] = 1.0;
    return p;
}

int Polynomial::degree() const {
    int d = -1;
    for (const auto& [m, c] : terms_) d = std::max(d, m.degree());
    return d;
}

double Polynomial::coeff(const Monomial& m) const {
    auto it = terms_.find(m);
    return it == terms_.end() ? 0.0 : it->second;
}

void Polynomial::set_coeff(const Monomial& m, double c) {
    if (c == 0.0)
        terms_.erase(m);
    else
        terms_[m] = c;
}

void Polynomial::add_term(const Monomial& m, double c) {
    auto it = terms_.find(m);
    if (it == terms_.end()) {
        if (c != 0.0) terms_[m] = c;
    } else {
        it->second += c;
        if (it->second == 0.0) terms_.erase(it);
    }
}

void Polynomial::check_same_vars(const Polynomial& o) const {
    if (names_ != o.names_)
        throw std::invalid_argument("polynomial arithmetic: mismatched indeterminates");
}

Polynomial Polynomial::operator+(const Polynomial& o) const {
    check_same_vars(o);
    Polynomial r = *this;
    for (const auto& [m, c] : o.terms_) r.add_term(m, c);
    r.prune();
    return r;
}

Polynomial Polynomial::operator-(const Polynomial& o) const {
    check_same_vars(o);
    Polynomial r = *this;
    for (const auto& [m, c] : o.terms_) r.add_term(m, -c);
    r.prune();
    return r;
}

Polynomial Polynomial::operator-() const {
    Polynomial r = *this;
    for (auto& [m, c] : r.terms_) c = -c;
    return r;
}

Polynomial Polynomial::operator*(const Polynomial& o) const {
    check_same_vars(o);
    Polynomial r(names_);
    for (const auto& [ma, ca] : terms_)
        for (const auto& [mb, cb] : o.terms_) r.add_term(ma * mb, ca * cb);
    r.prune();
    return r;
}

Polynomial Polynomial::operator*(double s) const {
    Polynomial r(names_);
    if (s == 0.0) return r;
    for (const auto& [m, c] : terms_) r.terms_[m] = c * s;
    return r;
}

Polynomial Polynomial::partial(int var) const {
    if (var < 0 || var >= nvars()) throw std::invalid_argument("partial: bad indeterminate index");
    Polynomial r(names_);
    for (const auto& [m, c] : terms_) {
        if (m.exps[var] == 0) continue;
        Monomial d = m;
        double factor = d.exps[var];
        d.exps[var] -= 1;
        r.add_term(d, c * factor);
    }
    return r;
}

double Polynomial::evaluate(std::span<const double> point) const {
    if (static_cast<int>(point.size()) != nvars())
        throw std::invalid_argument("evaluate: point length != indeterminate count");
    double total = 0.0;
    for (const auto& [m, c] : terms_) {
        double term = c;
        for (int i = 0; i < nvars(); ++i) {
            double base = point[i];
            for (int e = 0; e < m.exps[i]; ++e) term *= base;
        }
        total += term;
    }
    return total;
}

Polynomial Polynomial::substitute(int var, double value) const {
    Polynomial r(names_);
    for (const auto& [m, c] : terms_) {
        double factor = 1.0;
        for (int e = 0; e < m.exps[var]; ++e) factor *= value;
        Monomial f = m;
        f.exps[var] = 0;
        r.add_term(f, c * factor);
    }
    r.prune();
    return r;
}

Polynomial Polynomial::scale_var(int var, double scale) const {
    Polynomial r(names_);
    for (const auto& [m, c] : terms_) {
        double factor = 1.0;
        for (int e = 0; e < m.exps[var]; ++e) factor *= scale;
        r.add_term(m, c * factor);
    }
    r.prune();
    return r;
}

Polynomial Polynomial::drop_var(int var) const {
    std::vector<std::string> nn = names_;
    nn.erase(nn.begin() + var);
    Polynomial r(std::move(nn));
    for (const auto& [m, c] : terms_) {
        if (m.exps[var] != 0)
            throw std::invalid_argument("drop_var: indeterminate still present: " + names_[var]);
        std::vector<int> e = m.exps;
        e.erase(e.begin() + var);
        r.add_term(Monomial(std::move(e)), c);
    }
    return r;
}

Polynomial Polynomial::insert_var(int position, const std::string& name) const {
    std::vector<std::string> nn = names_;
    nn.insert(nn.begin() + position, name);
    Polynomial r(std::move(nn));
    for (const auto& [m, c] : terms_) {
        std::vector<int> e = m.exps;
        e.insert(e.begin() + position, 0);
        r.add_term(Monomial(std::move(e)), c);
    }
    return r;
}

void Polynomial::prune() {
    double maxabs = 0.0;
    for (const auto& [m, c] : terms_) maxabs = std::max(maxabs, std::fabs(c));
    if (maxabs == 0.0) {
        terms_.clear();
        return;
    }
    const double cutoff = 1e-14 * maxabs;
    for (auto it = terms_.begin(); it != terms_.end();) {
        if (std::fabs(it->second) < cutoff)
            it = terms_.erase(it);
        else
            ++it;
    }
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string Polynomial::to_string() const {
    if (terms_.empty()) return "0";
    std::ostringstream os;
    bool first = true;
    for (const auto& [m, c] : terms_) {
        double mag = std::fabs(c);
        bool neg = c < 0.0;
        if (first) {
            if (neg) os << "-";
            first = false;
        } else {
            os << (neg ? " - " : " + ");
        }
        bool monomial_printed = false;
        std::ostringstream mono;
        for (int i = 0; i < nvars(); ++i) {
            if (m.exps[i] == 0) continue;
            if (monomial_printed) mono << "*";
            mono << names_[i];
            if (m.exps[i] > 1) mono << "^" << m.exps[i];
            monomial_printed = true;
        }
        if (!monomial_printed) {
            os << format_double(mag);
        } else if (mag == 1.0) {
            os << mono.str();
        } else {
            os << format_double(mag) << "*" << mono.str();
        }
    }
    return os.str();
}

Polynomial reduce_monomial_mod_circle(const Monomial& m, double coef,
                                      const std::vector<std::string>& names,
                                      const QuotientRing& ring) {
    Polynomial acc(names);
    acc.add_term(m, coef);
    for (const auto& [s, c] : ring.pairs) {
        Polynomial next(names);
        for (const auto& [mono, cf] : acc.terms()) {
            int ce = mono.exps[c];
            if (ce < 2) {
                next.add_term(mono, cf);
                continue;
            }
            int q = ce / 2, r = ce % 2;
            // c^(2q+r) = (1 - s^2)^q * c^r, expanded binomially.
            Monomial base = mono;
            base.exps[c] = r;
            double binom = 1.0;
            for (int j = 0; j <= q; ++j) {
                Monomial t = base;
                t.exps[s] += 2 * j;
                double sign = (j % 2 == 0) ? 1.0 : -1.0;
                next.add_term(t, cf * sign * binom);
                binom = binom * (q - j) / (j + 1);
            }
        }
        acc = std::move(next);
    }
    acc.prune();
    return acc;
}

Polynomial reduce_mod_circle(const Polynomial& p, const QuotientRing& ring) {
    if (ring.empty()) return p;
    Polynomial out(p.names());
    for (const auto& [m, c] : p.terms()) {
        Polynomial red = reduce_monomial_mod_circle(m, c, p.names(), ring);
        for (const auto& [rm, rc] : red.terms()) out.add_term(rm, rc);
    }
    out.prune();
    return out;
}

namespace {

struct PolyLexer {
    const std::string& text;
    std::size_t pos = 0;

    explicit PolyLexer(const std::string& t) : text(t) {}

    void skip_ws() {
        while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    }
    bool eof() {
        skip_ws();
        return pos >= text.size();
    }
    char peek() {
        skip_ws();
        return pos < text.size() ? text[pos] : '\0';
    }
    int column() const { return static_cast<int>(pos) + 1; }

    [[noreturn]] void fail(const std::string& msg) { throw ParseError(msg, 0, column()); }

    double number() {
        skip_ws();
        const char* start = text.c_str() + pos;
        char* end = nullptr;
        double v = std::strtod(start, &end);
        if (end == start) fail("expected a number");
        pos += end - start;
        return v;
    }

    std::string ident() {
        skip_ws();
        std::size_t s = pos;
        while (pos < text.size() &&
               (std::isalnum(static_cast<unsigned char>(text[pos])) || text[pos] == '_'))
            ++pos;
        if (s == pos) fail("expected an indeterminate name");
        return text.substr(s, pos - s);
    }

    int integer() {
        skip_ws();
        bool neg = false;
        if (peek() == '-') { neg = true; ++pos; }
        std::size_t s = pos;
        while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
        if (s == pos) fail("expected an integer exponent");
        int v = std::stoi(text.substr(s, pos - s));
        return neg ? -v : v;
    }
};

}  // namespace

Polynomial parse_polynomial(const std::string& text, const std::vector<std::string>& names) {
    PolyLexer lx(text);
    Polynomial out(names);
    if (lx.eof()) throw ParseError("empty polynomial", 0, 1);

    auto var_index = [&](const std::string& name, int col) -> int {
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == name) return static_cast<int>(i);
        throw ParseError("unknown indeterminate '" + name + "'", 0, col);
    };

    bool first_term = true;
    while (!lx.eof()) {
        double sign = 1.0;
        char c = lx.peek();
        if (c == '+' || c == '-') {
            sign = (c == '-') ? -1.0 : 1.0;
            ++lx.pos;
        } else if (!first_term) {
            lx.fail("expected '+' or '-' between terms");
        }
        first_term = false;

        double coef = sign;
        Monomial mono = Monomial::constant(static_cast<int>(names.size()));
        bool saw_factor = false;
        bool expect_factor = true;
        while (expect_factor) {
            char f = lx.peek();
            if (f == '\0') {
                if (!saw_factor) lx.fail("dangling term");
                break;
            }
            if ((f >= '0' && f <= '9') || f == '.') {
                coef *= lx.number();
                saw_factor = true;
            } else if (std::isalpha(static_cast<unsigned char>(f)) || f == '_') {
                int col = lx.column();
                std::string name = lx.ident();
                int vi = var_index(name, col);
                int e = 1;
                if (lx.peek() == '^') {
                    ++lx.pos;
                    e = lx.integer();
                    if (e < 0) lx.fail("negative exponent");
                }
                mono.exps[vi] += e;
                saw_factor = true;
            } else {
                lx.fail(std::string("unexpected character '") + f + "'");
            }
            if (lx.peek() == '*') {
                ++lx.pos;
            } else {
                expect_factor = false;
            }
        }
        if (!saw_factor) lx.fail("empty term");
        out.add_term(mono, coef);
    }
    out.prune();
    return out;
}

}  // namespace brs
