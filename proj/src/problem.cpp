#include "brs/problem.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace brs {

std::vector<std::string> SynthesisProblem::tx_names() const {
    std::vector<std::string> v;
    v.reserve(states.size() + 1);
    v.push_back("t");
    v.insert(v.end(), states.begin(), states.end());
    return v;
}

namespace {

bool is_ball_like(const Polynomial& h, int n) {
    // C - x1^2 - ... - xn^2 over the state indeterminates (time exponent 0).
    double c0 = h.coeff(Monomial::constant(h.nvars()));
    if (c0 <= 0.0) return false;
    for (const auto& [m, c] : h.terms()) {
        int d = m.degree();
        if (d == 0) continue;
        if (d != 2) return false;
        bool is_square = false;
        for (int i = 0; i < h.nvars(); ++i)
            if (m.exps[i] == 2) is_square = true;
        if (!is_square || c != -1.0) return false;
    }
    int squares = 0;
    for (const auto& [m, c] : h.terms())
        if (m.degree() == 2) ++squares;
    return squares == n;
}

}  // namespace

void validate_problem(const SynthesisProblem& p) {
    const int n = p.n(), m = p.m();
    if (n < 1) throw ValidationError("problem must have at least one state");
    std::set<std::string> seen;
    for (const auto& s : p.states) {
        if (s == "t") throw ValidationError("state indeterminate may not be named 't'");
        if (!seen.insert(s).second) throw ValidationError("duplicate state name '" + s + "'");
    }
    for (const auto& u : p.inputs) {
        if (u == "t") throw ValidationError("input may not be named 't'");
        if (!seen.insert(u).second) throw ValidationError("duplicate name '" + u + "'");
    }
    if (static_cast<int>(p.f.size()) != n) throw ValidationError("f must have n entries");
    if (static_cast<int>(p.g.size()) != n) throw ValidationError("g must have n rows");
    for (const auto& row : p.g)
        if (static_cast<int>(row.size()) != m) throw ValidationError("g must have m columns");
    const auto txn = p.tx_names();
    for (const auto& fi : p.f)
        if (fi.names() != txn)
            throw ValidationError("f entries must be polynomials in (t, states) only");
    for (const auto& row : p.g)
        for (const auto& gij : row)
            if (gij.names() != txn)
                throw ValidationError("g entries must be polynomials in (t, states) only");
    if (p.horizon <= 0.0) throw ValidationError("horizon T must be positive");
    if (static_cast<int>(p.input_lo.size()) != m || static_cast<int>(p.input_hi.size()) != m)
        throw ValidationError("input bounds must match input count");
    for (int j = 0; j < m; ++j)
        if (!(p.input_lo[j] < p.input_hi[j]))
            throw ValidationError("input channel '" + p.inputs[j] +
                                  "' has empty or degenerate bounds (a_j < b_j required)");
    for (const auto& [s, c] : p.ring.pairs) {
        if (s < 0 || s >= n || c < 0 || c >= n || s == c)
            throw ValidationError("ring pair indices out of range");
    }

    if (p.bounding.is_point()) throw ValidationError("bounding set X may not be a point");
    if (p.bounding.inequalities.empty())
        throw ValidationError("bounding set X needs at least one inequality");
    for (const auto& h : p.bounding.inequalities)
        if (h.names() != p.states)
            throw ValidationError("bounding inequalities must be over state indeterminates");
    bool has_ball = false;
    for (const auto& h : p.bounding.inequalities)
        if (is_ball_like(h, n)) has_ball = true;
    if (!has_ball)
        throw ValidationError(
            "bounding set X must include an inequality of the form C - |x|^2 (compactness)");

    if (p.target.is_point()) {
        if (static_cast<int>(p.target.point->size()) != n)
            throw ValidationError("target point dimension != state dimension");
        for (const auto& h : p.target.inequalities) {
            double v = h.evaluate(std::span<const double>(p.target.point->data(), n));
            if (v < -1e-9)
                throw ValidationError("designated target point violates its own inequality");
        }
    } else if (p.target.inequalities.empty()) {
        throw ValidationError("target set X_T needs inequalities or a point designation");
    }
    for (const auto& h : p.target.inequalities)
        if (h.names() != p.states)
            throw ValidationError("target inequalities must be over state indeterminates");

    if (p.k < 1) throw ValidationError("relaxation order k must be >= 1");

    if (p.is_normalized()) {
        for (int j = 0; j < m; ++j)
            if (p.input_lo[j] != -1.0 || p.input_hi[j] != 1.0)
                throw ValidationError("normalized problem must have U = [-1,1]^m");
        if (p.horizon != 1.0)
            throw ValidationError("normalized problem must have unit horizon");
    }
}

SynthesisProblem normalize(const SynthesisProblem& p) {
    validate_problem(p);
    if (p.is_normalized()) return p;

    SynthesisProblem q = p;
    const int n = p.n(), m = p.m();
    NormalizationRecord rec;
    rec.T = p.horizon;
    rec.mid.resize(m);
    rec.halfw.resize(m);
    for (int j = 0; j < m; ++j) {
        rec.mid[j] = 0.5 * (p.input_lo[j] + p.input_hi[j]);
        rec.halfw[j] = 0.5 * (p.input_hi[j] - p.input_lo[j]);
        if (rec.halfw[j] <= 0.0)
            throw ValidationError("degenerate input channel '" + p.inputs[j] + "'");
    }

    // Input box to [-1,1]^m: f <- f + g*mid, g <- g*diag(halfw).
    for (int i = 0; i < n; ++i) {
        Polynomial fi = p.f[i];
        for (int j = 0; j < m; ++j) fi = fi + p.g[i][j] * rec.mid[j];
        q.f[i] = fi;
        for (int j = 0; j < m; ++j) q.g[i][j] = p.g[i][j] * rec.halfw[j];
    }
    // Time to [0,1]: substitute t -> T*t and multiply dynamics by T.
    for (int i = 0; i < n; ++i) {
        q.f[i] = q.f[i].scale_var(0, rec.T) * rec.T;
        for (int j = 0; j < m; ++j) q.g[i][j] = q.g[i][j].scale_var(0, rec.T) * rec.T;
    }
    q.horizon = 1.0;
    for (int j = 0; j < m; ++j) {
        q.input_lo[j] = -1.0;
        q.input_hi[j] = 1.0;
    }
    q.normalization = rec;
    validate_problem(q);
    return q;
}

// ---------------------------------------------------------------------------
// Problem file format (see docs/problem_format.md)

namespace {

struct Line {
    int number;
    std::string text;
};

std::vector<Line> split_lines(const std::string& text) {
    std::vector<Line> lines;
    std::istringstream is(text);
    std::string raw;
    int num = 0;
    while (std::getline(is, raw)) {
        ++num;
        auto hash = raw.find('#');
        if (hash != std::string::npos) raw = raw.substr(0, hash);
        // trim
        auto b = raw.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        auto e = raw.find_last_not_of(" \t\r");
        lines.push_back({num, raw.substr(b, e - b + 1)});
    }
    return lines;
}

std::vector<std::string> split_words(const std::string& s) {
    std::vector<std::string> w;
    std::istringstream is(s);
    std::string t;
    while (is >> t) w.push_back(t);
    return w;
}

[[noreturn]] void fail(const std::string& origin, int line, const std::string& msg) {
    throw ParseError(origin + ":" + std::to_string(line) + ": " + msg, line, 0);
}

double parse_number(const std::string& origin, int line, const std::string& tok) {
    try {
        std::size_t used = 0;
        double v = std::stod(tok, &used);
        if (used != tok.size()) fail(origin, line, "bad number '" + tok + "'");
        return v;
    } catch (const std::invalid_argument&) {
        fail(origin, line, "bad number '" + tok + "'");
    } catch (const std::out_of_range&) {
        fail(origin, line, "number out of range '" + tok + "'");
    }
}

Polynomial parse_poly_at(const std::string& origin, int line, const std::string& text,
                         const std::vector<std::string>& names) {
    try {
        return parse_polynomial(text, names);
    } catch (const ParseError& e) {
        throw ParseError(origin + ":" + std::to_string(line) + ": " + e.what() +
                             " (inputs may not appear here)",
                         line, e.column);
    }
}

}  // namespace

SynthesisProblem parse_problem(const std::string& text, const std::string& origin) {
    auto lines = split_lines(text);
    if (lines.empty()) throw ParseError(origin + ": empty problem file", 0, 0);

    SynthesisProblem p;
    p.k = 2;
    std::vector<std::pair<int, std::string>> fdefs;                 // line, rest
    std::vector<std::pair<int, std::string>> gdefs;                 // line, rest
    std::vector<std::pair<int, std::vector<std::string>>> indefs;   // input rows
    std::vector<std::pair<int, std::string>> bound_ineqs, target_ineqs;
    std::optional<std::pair<int, std::vector<std::string>>> target_point;
    std::vector<std::pair<int, std::pair<std::string, std::string>>> ring_defs;
    bool saw_problem = false, saw_vars = false, saw_horizon = false;

    enum class Section { None, Inputs, Dynamics, Sets, Options };
    Section sec = Section::None;

    for (const auto& [num, raw] : lines) {
        auto words = split_words(raw);
        const std::string& head = words[0];
        if (sec != Section::None) {
            if (head == "end") {
                sec = Section::None;
                continue;
            }
            switch (sec) {
                case Section::Inputs:
                    if (words.size() != 3) fail(origin, num, "expected: <input> <lo> <hi>");
                    indefs.push_back({num, words});
                    continue;
                case Section::Dynamics: {
                    auto eq = raw.find('=');
                    if (eq == std::string::npos) fail(origin, num, "expected '=' in dynamics line");
                    std::string lhs = raw.substr(0, eq), rhs = raw.substr(eq + 1);
                    auto lw = split_words(lhs);
                    if (lw.empty() || (lw[0] != "f" && lw[0] != "g"))
                        fail(origin, num, "dynamics lines start with 'f' or 'g'");
                    if (lw[0] == "f") {
                        if (lw.size() != 2) fail(origin, num, "expected: f <state> = <poly>");
                        fdefs.push_back({num, lw[1] + "\x1f" + rhs});
                    } else {
                        if (lw.size() != 3) fail(origin, num, "expected: g <state> <input> = <poly>");
                        gdefs.push_back({num, lw[1] + "\x1f" + lw[2] + "\x1f" + rhs});
                    }
                    continue;
                }
                case Section::Sets: {
                    if (head == "bounding" && words.size() >= 3 && words[1] == "ineq") {
                        auto pos = raw.find("ineq");
                        bound_ineqs.push_back({num, raw.substr(pos + 4)});
                    } else if (head == "target" && words.size() >= 3 && words[1] == "ineq") {
                        auto pos = raw.find("ineq");
                        target_ineqs.push_back({num, raw.substr(pos + 4)});
                    } else if (head == "target" && words.size() >= 3 && words[1] == "point") {
                        target_point = {num, std::vector<std::string>(words.begin() + 2, words.end())};
                    } else {
                        fail(origin, num, "expected 'bounding ineq', 'target ineq' or 'target point'");
                    }
                    continue;
                }
                case Section::Options: {
                    if (head == "k" && words.size() == 2) {
                        p.k = static_cast<int>(parse_number(origin, num, words[1]));
                    } else {
                        fail(origin, num, "unknown option '" + head + "'");
                    }
                    continue;
                }
                case Section::None: break;
            }
        }
        if (head == "problem") {
            if (words.size() != 2) fail(origin, num, "expected: problem <name>");
            p.name = words[1];
            saw_problem = true;
        } else if (head == "vars") {
            if (words.size() < 2) fail(origin, num, "expected: vars <state> ...");
            p.states.assign(words.begin() + 1, words.end());
            saw_vars = true;
        } else if (head == "ring") {
            if (words.size() != 3) fail(origin, num, "expected: ring <sin var> <cos var>");
            ring_defs.push_back({num, {words[1], words[2]}});
        } else if (head == "horizon") {
            if (words.size() != 2) fail(origin, num, "expected: horizon <T>");
            p.horizon = parse_number(origin, num, words[1]);
            saw_horizon = true;
        } else if (head == "mode") {
            if (words.size() != 2 || (words[1] != "fixed" && words[1] != "free"))
                fail(origin, num, "expected: mode fixed|free");
            p.mode = words[1] == "fixed" ? HorizonMode::FixedFinalTime : HorizonMode::FreeFinalTime;
        } else if (head == "inputs") {
            sec = Section::Inputs;
        } else if (head == "dynamics") {
            sec = Section::Dynamics;
        } else if (head == "sets") {
            sec = Section::Sets;
        } else if (head == "options") {
            sec = Section::Options;
        } else {
            fail(origin, num, "unknown directive '" + head + "'");
        }
    }

    if (!saw_problem) throw ParseError(origin + ": missing 'problem <name>'", 0, 0);
    if (!saw_vars) throw ParseError(origin + ": missing 'vars' line", 0, 0);
    if (!saw_horizon) throw ParseError(origin + ": missing 'horizon' line", 0, 0);

    auto state_index = [&](int line, const std::string& s) {
        for (std::size_t i = 0; i < p.states.size(); ++i)
            if (p.states[i] == s) return static_cast<int>(i);
        fail(origin, line, "unknown state '" + s + "'");
    };

    for (const auto& [num, in] : indefs) {
        p.inputs.push_back(in[0]);
        p.input_lo.push_back(parse_number(origin, num, in[1]));
        p.input_hi.push_back(parse_number(origin, num, in[2]));
    }

    const int n = p.n(), m = p.m();
    const auto txn = p.tx_names();
    p.f.assign(n, Polynomial(txn));
    p.g.assign(n, std::vector<Polynomial>(m, Polynomial(txn)));

    auto input_index = [&](int line, const std::string& s) {
        for (std::size_t i = 0; i < p.inputs.size(); ++i)
            if (p.inputs[i] == s) return static_cast<int>(i);
        fail(origin, line, "unknown input '" + s + "'");
    };

    for (const auto& [num, packed] : fdefs) {
        auto sep = packed.find('\x1f');
        int i = state_index(num, packed.substr(0, sep));
        p.f[i] = parse_poly_at(origin, num, packed.substr(sep + 1), txn);
    }
    for (const auto& [num, packed] : gdefs) {
        auto s1 = packed.find('\x1f');
        auto s2 = packed.find('\x1f', s1 + 1);
        int i = state_index(num, packed.substr(0, s1));
        int j = input_index(num, packed.substr(s1 + 1, s2 - s1 - 1));
        p.g[i][j] = parse_poly_at(origin, num, packed.substr(s2 + 1), txn);
    }
    for (const auto& [num, text2] : bound_ineqs)
        p.bounding.inequalities.push_back(parse_poly_at(origin, num, text2, p.states));
    for (const auto& [num, text2] : target_ineqs)
        p.target.inequalities.push_back(parse_poly_at(origin, num, text2, p.states));
    if (target_point) {
        std::vector<double> pt;
        for (const auto& tok : target_point->second)
            pt.push_back(parse_number(origin, target_point->first, tok));
        p.target.point = pt;
    }
    for (const auto& [num, sc] : ring_defs)
        p.ring.pairs.emplace_back(state_index(num, sc.first), state_index(num, sc.second));

    validate_problem(p);
    return p;
}

SynthesisProblem load_problem(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open problem file '" + path + "'", 0, 0);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_problem(ss.str(), path);
}

std::string save_problem(const SynthesisProblem& p) {
    std::ostringstream os;
    os << "problem " << p.name << "\n";
    os << "vars";
    for (const auto& s : p.states) os << " " << s;
    os << "\n";
    for (const auto& [s, c] : p.ring.pairs)
        os << "ring " << p.states[s] << " " << p.states[c] << "\n";
    os << "horizon " << format_double(p.horizon) << "\n";
    os << "mode " << (p.mode == HorizonMode::FixedFinalTime ? "fixed" : "free") << "\n";
    os << "\n";
    if (p.m() > 0) {
        os << "inputs\n";
        for (int j = 0; j < p.m(); ++j)
            os << "  " << p.inputs[j] << " " << format_double(p.input_lo[j]) << " "
               << format_double(p.input_hi[j]) << "\n";
        os << "end\n\n";
    }
    os << "dynamics\n";
    for (int i = 0; i < p.n(); ++i)
        if (!p.f[i].is_zero()) os << "  f " << p.states[i] << " = " << p.f[i].to_string() << "\n";
    for (int i = 0; i < p.n(); ++i)
        for (int j = 0; j < p.m(); ++j)
            if (!p.g[i][j].is_zero())
                os << "  g " << p.states[i] << " " << p.inputs[j] << " = "
                   << p.g[i][j].to_string() << "\n";
    os << "end\n\n";
    os << "sets\n";
    for (const auto& h : p.bounding.inequalities)
        os << "  bounding ineq " << h.to_string() << "\n";
    if (p.target.is_point()) {
        os << "  target point";
        for (double v : *p.target.point) os << " " << format_double(v);
        os << "\n";
    }
    for (const auto& h : p.target.inequalities)
        os << "  target ineq " << h.to_string() << "\n";
    os << "end\n\n";
    os << "options\n  k " << p.k << "\nend\n";
    return os.str();
}

void save_problem_file(const SynthesisProblem& p, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << save_problem(p);
}

std::uint64_t fnv1a64(const std::string& data) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string problem_hash(const SynthesisProblem& p) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(save_problem(p))));
    return buf;
}

}  // namespace brs
