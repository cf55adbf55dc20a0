#include "brs/extract.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "brs/moments.hpp"

namespace brs {

Eigen::VectorXd PolynomialController::eval(double t, const Eigen::VectorXd& x) const {
    Eigen::VectorXd out(u.size());
    std::vector<double> pt(1 + x.size());
    pt[0] = t;
    for (int i = 0; i < x.size(); ++i) pt[i + 1] = x[i];
    for (std::size_t j = 0; j < u.size(); ++j)
        out[j] = std::clamp(u[j].evaluate(pt), lo[j], hi[j]);
    return out;
}

ControlLaw PolynomialController::law() const {
    PolynomialController copy = *this;
    return [copy](double t, const Eigen::VectorXd& x) { return copy.eval(t, x); };
}

PolynomialController extract_controller(const ConicProgram& cp, const Eigen::VectorXd& y,
                                        const SynthesisProblem& user, double ridge) {
    const int m = user.m();
    const auto& mu = cp.measure({MeasureKind::Occupation, -1});

    // the mu moment matrix defines the degree-k basis and the linear system
    const PsdBlock* mublock = nullptr;
    for (const auto& b : cp.blocks)
        if (b.measure == mu.tag && b.structure.kind == StructuredMatrix::Kind::Moment) {
            mublock = &b;
            break;
        }
    if (!mublock) throw std::logic_error("no occupation moment matrix block");
    const auto& sm = mublock->structure;
    Eigen::VectorXd mu_local = y.segment(mu.offset, mu.count());
    Eigen::MatrixXd M = instantiate(sm, mu_local);
    double tr = M.trace();
    if (!(tr > 1e-12))
        throw std::runtime_error(
            "occupation measure carries no mass: the certified reachable set is empty");

    Eigen::MatrixXd Mr = M;
    Mr.diagonal().array() += ridge * tr / sm.dim;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(Mr);

    PolynomialController ctrl;
    ctrl.problem_name = user.name;
    ctrl.states = user.states;
    ctrl.inputs = user.inputs;
    ctrl.k = cp.k;
    ctrl.lo.resize(m);
    ctrl.hi.resize(m);
    const NormalizationRecord& rec = user.normalization
                                         ? *user.normalization
                                         : NormalizationRecord{std::vector<double>(m, 0.0),
                                                               std::vector<double>(m, 1.0), 1.0};
    ctrl.map = rec;
    auto txn = user.tx_names();

    for (int j = 0; j < m; ++j) {
        const auto& sp = cp.measure({MeasureKind::SigmaPlus, j});
        const auto& smn = cp.measure({MeasureKind::SigmaMinus, j});
        Eigen::VectorXd rhs(sm.dim);
        for (int i = 0; i < sm.dim; ++i) {
            int idx = mu.basis->find(sm.row_monos[i]);
            rhs[i] = y[sp.offset + idx] - y[smn.offset + idx];
        }
        Eigen::VectorXd coef = ldlt.solve(rhs);
        coef += ldlt.solve(rhs - M * coef);  // one refinement against the ridge bias
        double resid = (M * coef - rhs).norm() / std::max(rhs.norm(), 1e-12);
        ctrl.residuals.push_back(resid);

        // normalized-units polynomial in scaled time
        Polynomial uhat(txn);
        for (int i = 0; i < sm.dim; ++i) uhat.add_term(sm.row_monos[i], coef[i]);
        uhat.prune();
        // original units: u = mid + halfw * uhat(t / T, x)
        Polynomial uorig = uhat.scale_var(0, 1.0 / rec.T) * rec.halfw[j] +
                           Polynomial::constant(txn, rec.mid[j]);
        ctrl.u.push_back(uorig);
        double a = rec.mid[j] - rec.halfw[j], b = rec.mid[j] + rec.halfw[j];
        ctrl.lo[j] = a;
        ctrl.hi[j] = b;
    }
    return ctrl;
}

std::string save_controller(const PolynomialController& c) {
    std::ostringstream os;
    os << "controller " << c.problem_name << "\n";
    os << "k " << c.k << "\n";
    os << "vars";
    for (const auto& s : c.states) os << " " << s;
    os << "\n";
    for (std::size_t j = 0; j < c.u.size(); ++j) {
        os << "map " << c.inputs[j] << " mid " << format_double(c.map.mid[j]) << " halfw "
           << format_double(c.map.halfw[j]) << " T " << format_double(c.map.T) << "\n";
        os << "saturate " << c.inputs[j] << " " << format_double(c.lo[j]) << " "
           << format_double(c.hi[j]) << "\n";
        os << "poly " << c.inputs[j] << " = " << c.u[j].to_string() << "\n";
        os << "residual " << c.inputs[j] << " " << format_double(c.residuals[j]) << "\n";
    }
    return os.str();
}

void save_controller_file(const PolynomialController& c, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << save_controller(c);
}

PolynomialController load_controller(const std::string& text, const std::string& origin) {
    PolynomialController c;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    std::vector<std::string> txn;
    while (std::getline(is, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::string head;
        if (!(ls >> head) || head[0] == '#') continue;
        if (head == "controller") {
            ls >> c.problem_name;
        } else if (head == "k") {
            ls >> c.k;
        } else if (head == "vars") {
            std::string v;
            while (ls >> v) c.states.push_back(v);
            txn = {"t"};
            txn.insert(txn.end(), c.states.begin(), c.states.end());
        } else if (head == "map") {
            std::string name, kw;
            double mid, halfw, T;
            ls >> name >> kw >> mid >> kw >> halfw >> kw >> T;
            c.inputs.push_back(name);
            c.map.mid.push_back(mid);
            c.map.halfw.push_back(halfw);
            c.map.T = T;
        } else if (head == "saturate") {
            std::string name;
            double lo, hi;
            ls >> name >> lo >> hi;
            c.lo.conservativeResize(c.lo.size() + 1);
            c.hi.conservativeResize(c.hi.size() + 1);
            c.lo[c.lo.size() - 1] = lo;
            c.hi[c.hi.size() - 1] = hi;
        } else if (head == "poly") {
            auto eq = line.find('=');
            if (eq == std::string::npos)
                throw ParseError(origin + ": missing '=' in poly line", lineno, 0);
            c.u.push_back(parse_polynomial(line.substr(eq + 1), txn));
        } else if (head == "residual") {
            std::string name;
            double r;
            ls >> name >> r;
            c.residuals.push_back(r);
        } else {
            throw ParseError(origin + ": unknown controller directive '" + head + "'", lineno, 0);
        }
    }
    if (c.states.empty() || c.u.size() != c.inputs.size())
        throw ParseError(origin + ": incomplete controller file", 0, 0);
    return c;
}

PolynomialController load_controller_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open controller file '" + path + "'", 0, 0);
    std::stringstream ss;
    ss << in.rdbuf();
    return load_controller(ss.str(), path);
}

// ---------------------------------------------------------------------------

BRSCertificate recover_certificate(const ConicProgram& cp, const Eigen::VectorXd& mult) {
    BRSCertificate cert;
    cert.k = cp.k;
    auto txn = cp.tx_basis->names;
    auto xn = cp.x_basis->names;
    Polynomial v0(txn), w(xn);
    std::vector<Polynomial> p;
    int m = 0;
    for (const auto& ml : cp.measures)
        if (ml.tag.kind == MeasureKind::SigmaPlus) ++m;
    for (int j = 0; j < m; ++j) p.emplace_back(txn);

    for (std::size_t r = 0; r < cp.rows.size(); ++r) {
        const auto& row = cp.rows[r];
        double lam = mult[static_cast<int>(r)];
        if (lam == 0.0) continue;
        switch (row.kind) {
            case RowKind::Liouville: v0.add_term(row.test_mono, lam); break;
            case RowKind::Lebesgue: w.add_term(row.test_mono, lam); break;
            case RowKind::Slack: p[row.channel].add_term(row.test_mono, lam); break;
        }
    }
    v0.prune();
    w.prune();
    cert.v = -v0;
    cert.w = w;
    for (auto& pj : p) {
        pj.prune();
        cert.p.push_back(pj);
    }
    cert.dual_objective = dual_objective_of_w(cp, cert.w);
    return cert;
}

double dual_objective_of_w(const ConicProgram& cp, const Polynomial& w) {
    double v = 0.0;
    for (const auto& [mono, c] : w.terms()) {
        int idx = cp.x_basis->find(mono);
        if (idx < 0) throw std::invalid_argument("w exceeds the Lebesgue moment basis");
        v += c * cp.lebesgue[idx];
    }
    return v;
}

CertificateCheck validate_certificate(const BRSCertificate& cert,
                                      const SynthesisProblem& prob, int nsamples, double tol,
                                      std::uint64_t seed) {
    CertificateCheck out;
    out.ok = true;
    out.worst = 0.0;
    CounterRng rng{seed};
    const int n = prob.n();
    const bool free_mode = prob.mode == HorizonMode::FreeFinalTime;
    auto ring_tx = prob.ring_tx();

    Polynomial lfv = apply_Lf(cert.v, prob.f, ring_tx);
    auto lgv = apply_Lg(cert.v, prob.g, ring_tx);
    Polynomial v0 = cert.v.substitute(0, 0.0).drop_var(0);
    Polynomial vT = cert.v.substitute(0, 1.0).drop_var(0);

    auto record = [&](double margin, const char* kind, const Eigen::VectorXd& x) {
        if (margin < out.worst) {
            out.worst = margin;
            out.worst_kind = kind;
            out.worst_point = x;
        }
        if (margin < -tol) out.ok = false;
    };

    std::vector<double> txpt(n + 1);
    for (int s = 0; s < nsamples; ++s) {
        Eigen::VectorXd x = sample_bounding(prob, rng, s);
        std::span<const double> xs(x.data(), n);
        double wx = cert.w.evaluate(xs);
        double scale_w = 1.0 + std::fabs(wx);
        record(wx / scale_w, "w >= 0", x);
        record((wx - v0.evaluate(xs) - 1.0) / scale_w, "w >= v(0,.) + 1", x);

        double tau = rng.uniform01(7, s);
        txpt[0] = tau;
        for (int i = 0; i < n; ++i) txpt[i + 1] = x[i];
        double lf = lfv.evaluate(txpt);
        double psum = 0.0;
        for (std::size_t j = 0; j < cert.p.size(); ++j) {
            double pj = cert.p[j].evaluate(txpt);
            double gj = lgv[j].evaluate(txpt);
            double sc = 1.0 + std::fabs(pj) + std::fabs(gj);
            record((pj - std::fabs(gj)) / sc, "p >= |Lg v|", x);
            psum += pj;
        }
        double sc = 1.0 + std::fabs(lf) + std::fabs(psum);
        record(-(lf + psum) / sc, "Lf v + sum p <= 0", x);

        // target-side check: v >= 0 on X_T (at t=1 in fixed mode, any t free)
        Eigen::VectorXd xt;
        if (prob.target.is_point()) {
            xt = Eigen::Map<const Eigen::VectorXd>(prob.target.point->data(), n);
        } else if (in_set(prob.target, x, 1e-12)) {
            xt = x;
        }
        if (xt.size() == n) {
            std::span<const double> xts(xt.data(), n);
            if (free_mode) {
                txpt[0] = tau;
                for (int i = 0; i < n; ++i) txpt[i + 1] = xt[i];
                double vv = cert.v.evaluate(txpt);
                record(vv / (1.0 + std::fabs(vv)), "v >= 0 on [0,1] x X_T", xt);
            } else {
                double vv = vT.evaluate(xts);
                record(vv / (1.0 + std::fabs(vv)), "v(1,.) >= 0 on X_T", xt);
            }
        }
    }
    return out;
}

std::string save_certificate(const BRSCertificate& c) {
    std::ostringstream os;
    os << "certificate k " << c.k << "\n";
    os << "dual_objective " << format_double(c.dual_objective) << "\n";
    os << "w = " << c.w.to_string() << "\n";
    os << "v = " << c.v.to_string() << "\n";
    for (std::size_t j = 0; j < c.p.size(); ++j)
        os << "p" << j + 1 << " = " << c.p[j].to_string() << "\n";
    return os.str();
}

void save_certificate_file(const BRSCertificate& c, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << save_certificate(c);
}

// ---------------------------------------------------------------------------

LevelSetGrid level_set_grid(const Polynomial& w, int axis_i, int axis_j,
                            std::array<double, 4> bounds, int nx, int ny,
                            const Eigen::VectorXd& base) {
    if (nx < 2 || ny < 2) throw std::invalid_argument("level_set_grid: resolution >= 2");
    LevelSetGrid g;
    g.axis_i = axis_i;
    g.axis_j = axis_j;
    g.nx = nx;
    g.ny = ny;
    g.xlo = bounds[0];
    g.xhi = bounds[1];
    g.ylo = bounds[2];
    g.yhi = bounds[3];
    g.base = base;
    g.values.resize(static_cast<std::size_t>(nx) * ny);
    std::vector<double> pt(base.size());
    for (int i = 0; i < base.size(); ++i) pt[i] = base[i];
    for (int iy = 0; iy < ny; ++iy)
        for (int ix = 0; ix < nx; ++ix) {
            pt[axis_i] = g.x_of(ix);
            pt[axis_j] = g.y_of(iy);
            g.values[static_cast<std::size_t>(iy) * nx + ix] = w.evaluate(pt);
        }
    return g;
}

namespace {

struct EdgeKey {
    int ix, iy, dir;  // dir 0: horizontal edge from (ix,iy) to (ix+1,iy); 1: vertical
    bool operator<(const EdgeKey& o) const {
        return std::tie(ix, iy, dir) < std::tie(o.ix, o.iy, o.dir);
    }
};

}  // namespace

std::vector<std::vector<std::array<double, 2>>> contour_polylines(const LevelSetGrid& g,
                                                                  double level) {
    auto val = [&](int ix, int iy) {
        return g.values[static_cast<std::size_t>(iy) * g.nx + ix] - level;
    };
    auto interp = [&](double a, double b) { return a / (a - b); };

    std::map<EdgeKey, std::array<double, 2>> points;
    std::map<EdgeKey, std::vector<EdgeKey>> adj;
    auto edge_point = [&](const EdgeKey& e) {
        auto it = points.find(e);
        if (it != points.end()) return it->second;
        double t;
        std::array<double, 2> p;
        if (e.dir == 0) {
            t = interp(val(e.ix, e.iy), val(e.ix + 1, e.iy));
            p = {g.x_of(e.ix) + t * (g.x_of(e.ix + 1) - g.x_of(e.ix)), g.y_of(e.iy)};
        } else {
            t = interp(val(e.ix, e.iy), val(e.ix, e.iy + 1));
            p = {g.x_of(e.ix), g.y_of(e.iy) + t * (g.y_of(e.iy + 1) - g.y_of(e.iy))};
        }
        points[e] = p;
        return p;
    };
    auto connect = [&](const EdgeKey& a, const EdgeKey& b) {
        edge_point(a);
        edge_point(b);
        adj[a].push_back(b);
        adj[b].push_back(a);
    };

    for (int iy = 0; iy + 1 < g.ny; ++iy) {
        for (int ix = 0; ix + 1 < g.nx; ++ix) {
            double tl = val(ix, iy), tr = val(ix + 1, iy);
            double bl = val(ix, iy + 1), br = val(ix + 1, iy + 1);
            int c = (tl >= 0) | ((tr >= 0) << 1) | ((bl >= 0) << 2) | ((br >= 0) << 3);
            if (c == 0 || c == 15) continue;
            EdgeKey top{ix, iy, 0}, bottom{ix, iy + 1, 0};
            EdgeKey left{ix, iy, 1}, right{ix + 1, iy, 1};
            switch (c) {
                case 1: case 14: connect(top, left); break;
                case 2: case 13: connect(top, right); break;
                case 3: case 12: connect(left, right); break;
                case 4: case 11: connect(left, bottom); break;
                case 5: case 10: connect(top, bottom); break;
                case 8: case 7: connect(right, bottom); break;
                case 6: {
                    // saddle: decide by the cell center
                    double mid = 0.25 * (tl + tr + bl + br);
                    if (mid >= 0) {
                        connect(top, right);
                        connect(left, bottom);
                    } else {
                        connect(top, left);
                        connect(right, bottom);
                    }
                    break;
                }
                case 9: {
                    double mid = 0.25 * (tl + tr + bl + br);
                    if (mid >= 0) {
                        connect(top, left);
                        connect(right, bottom);
                    } else {
                        connect(top, right);
                        connect(left, bottom);
                    }
                    break;
                }
            }
        }
    }

    // chain segments into polylines
    std::vector<std::vector<std::array<double, 2>>> polylines;
    std::map<EdgeKey, bool> used;
    for (const auto& [start, nbrs] : adj) {
        if (used[start]) continue;
        if (nbrs.size() == 1 || nbrs.size() > 2) {
            // endpoint or junction: walk each branch
        } else {
            continue;  // interior of a chain; picked up from an endpoint or loop
        }
        for (const auto& first : nbrs) {
            if (used[start]) break;
            std::vector<std::array<double, 2>> line{points[start]};
            EdgeKey prev = start, cur = first;
            used[start] = true;
            while (true) {
                line.push_back(points[cur]);
                used[cur] = true;
                const auto& nn = adj[cur];
                EdgeKey next = cur;
                bool found = false;
                for (const auto& cand : nn)
                    if (!(cand.ix == prev.ix && cand.iy == prev.iy && cand.dir == prev.dir)) {
                        if (used.count(cand) && used[cand]) continue;
                        next = cand;
                        found = true;
                        break;
                    }
                if (!found) break;
                prev = cur;
                cur = next;
            }
            if (line.size() > 1) polylines.push_back(std::move(line));
        }
    }
    // closed loops: everything not yet used has exactly two neighbors
    for (const auto& [start, nbrs] : adj) {
        if (used[start] || nbrs.size() != 2) continue;
        std::vector<std::array<double, 2>> line{points[start]};
        EdgeKey prev = start, cur = nbrs[0];
        used[start] = true;
        while (!(cur.ix == start.ix && cur.iy == start.iy && cur.dir == start.dir)) {
            line.push_back(points[cur]);
            used[cur] = true;
            const auto& nn = adj[cur];
            EdgeKey next = nn[0];
            if (next.ix == prev.ix && next.iy == prev.iy && next.dir == prev.dir) next = nn[1];
            prev = cur;
            cur = next;
        }
        line.push_back(points[start]);  // close the loop
        polylines.push_back(std::move(line));
    }
    return polylines;
}

std::string write_grid(const LevelSetGrid& g, const std::string& run_id,
                       const std::vector<std::string>& axis_names, double level) {
    std::ostringstream os;
    os << "# brsynth level-set grid run " << run_id << "\n";
    os << "axes " << axis_names[0] << " " << axis_names[1] << " indices " << g.axis_i << " "
       << g.axis_j << "\n";
    os << "range " << format_double(g.xlo) << " " << format_double(g.xhi) << " "
       << format_double(g.ylo) << " " << format_double(g.yhi) << "\n";
    os << "resolution " << g.nx << " " << g.ny << "\n";
    os << "level " << format_double(level) << "\n";
    os << "base";
    for (int i = 0; i < g.base.size(); ++i) os << " " << format_double(g.base[i]);
    os << "\n";
    os << "values\n";
    for (int iy = 0; iy < g.ny; ++iy) {
        for (int ix = 0; ix < g.nx; ++ix)
            os << format_double(g.values[static_cast<std::size_t>(iy) * g.nx + ix])
               << (ix + 1 < g.nx ? " " : "\n");
    }
    return os.str();
}

LevelSetGrid parse_grid(const std::string& text) {
    LevelSetGrid g;
    std::istringstream is(text);
    std::string line;
    std::vector<double> base;
    while (std::getline(is, line)) {
        std::istringstream ls(line);
        std::string head;
        if (!(ls >> head) || head[0] == '#') continue;
        if (head == "axes") {
            std::string a, b, kw;
            ls >> a >> b >> kw >> g.axis_i >> g.axis_j;
        } else if (head == "range") {
            ls >> g.xlo >> g.xhi >> g.ylo >> g.yhi;
        } else if (head == "resolution") {
            ls >> g.nx >> g.ny;
        } else if (head == "level") {
            double lv;
            ls >> lv;
        } else if (head == "base") {
            double v;
            while (ls >> v) base.push_back(v);
        } else if (head == "values") {
            g.values.reserve(static_cast<std::size_t>(g.nx) * g.ny);
            double v;
            while (is >> v) g.values.push_back(v);
        }
    }
    if (g.nx < 2 || g.ny < 2 ||
        g.values.size() != static_cast<std::size_t>(g.nx) * g.ny)
        throw std::runtime_error("malformed grid file");
    g.base = Eigen::Map<Eigen::VectorXd>(base.data(), static_cast<int>(base.size()));
    return g;
}

}  // namespace brs
