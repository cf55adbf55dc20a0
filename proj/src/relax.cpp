#include "brs/relax.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace brs {

std::vector<MeasureTag> gamma_tags(int m) {
    std::vector<MeasureTag> tags;
    for (int j = 0; j < m; ++j) tags.push_back({MeasureKind::SigmaPlus, j});
    for (int j = 0; j < m; ++j) tags.push_back({MeasureKind::SigmaMinus, j});
    for (int j = 0; j < m; ++j) tags.push_back({MeasureKind::SigmaHat, j});
    tags.push_back({MeasureKind::Occupation, -1});
    tags.push_back({MeasureKind::Initial, -1});
    tags.push_back({MeasureKind::InitialSlack, -1});
    tags.push_back({MeasureKind::Final, -1});
    return tags;
}

const MeasureLayout& ConicProgram::measure(const MeasureTag& tag) const {
    for (const auto& ml : measures)
        if (ml.tag == tag) return ml;
    throw std::logic_error("unknown measure tag " + tag.str());
}

double ConicProgram::objective_value(const Eigen::VectorXd& y) const {
    double v = 0.0;
    for (const auto& [i, c] : objective) v += c * y[i];
    return v;
}

Polynomial apply_Lf(const Polynomial& v, const std::vector<Polynomial>& f,
                    const QuotientRing& ring_tx) {
    Polynomial out = v.partial(0);
    for (std::size_t i = 0; i < f.size(); ++i)
        out = out + v.partial(static_cast<int>(i) + 1) * f[i];
    return reduce_mod_circle(out, ring_tx);
}

std::vector<Polynomial> apply_Lg(const Polynomial& v,
                                 const std::vector<std::vector<Polynomial>>& g,
                                 const QuotientRing& ring_tx) {
    if (g.empty()) return {};
    const std::size_t m = g[0].size();
    std::vector<Polynomial> out;
    out.reserve(m);
    for (std::size_t j = 0; j < m; ++j) {
        Polynomial acc(v.names());
        for (std::size_t i = 0; i < g.size(); ++i)
            acc = acc + v.partial(static_cast<int>(i) + 1) * g[i][j];
        out.push_back(reduce_mod_circle(acc, ring_tx));
    }
    return out;
}

namespace {

// Accumulates one equality row; pair_measure returns false on truncation
// overflow (a referenced moment beyond degree 2k).
struct RowBuilder {
    std::map<int, double> coeffs;
    bool overflow = false;

    void add(int idx, double c) {
        if (c == 0.0) return;
        coeffs[idx] += c;
    }

    std::vector<std::pair<int, double>> finish() {
        std::vector<std::pair<int, double>> out;
        out.reserve(coeffs.size());
        for (const auto& [i, c] : coeffs)
            if (c != 0.0) out.emplace_back(i, c);
        return out;
    }
};

double eval_state_part(const Monomial& tx_mono, const std::vector<double>& point) {
    double v = 1.0;
    for (std::size_t i = 1; i < tx_mono.exps.size(); ++i)
        for (int e = 0; e < tx_mono.exps[i]; ++e) v *= point[i - 1];
    return v;
}

}  // namespace

ConicProgram assemble(const SynthesisProblem& prob, int k) {
    if (!prob.is_normalized())
        throw std::logic_error("assemble requires a normalized problem (call normalize first)");
    validate_problem(prob);
    const int n = prob.n(), m = prob.m();
    const bool free_time = prob.mode == HorizonMode::FreeFinalTime;
    const auto txn = prob.tx_names();
    const QuotientRing ring_x = prob.ring;
    const QuotientRing ring_tx = prob.ring_tx();

    for (int j = 0; j < m; ++j) {
        bool all_zero = true;
        for (int i = 0; i < n; ++i)
            if (!prob.g[i][j].is_zero()) all_zero = false;
        if (all_zero)
            throw ValidationError("degenerate input channel '" + prob.inputs[j] +
                                  "': g column is identically zero");
    }

    ConicProgram cp;
    cp.k = k;
    cp.mode = prob.mode;
    cp.source_hash = problem_hash(prob);
    cp.tx_basis = Basis::make(txn, 2 * k, ring_tx);
    cp.x_basis = Basis::make(prob.states, 2 * k, ring_x);

    const bool point_target = prob.target.is_point();
    std::shared_ptr<const Basis> final_basis;
    if (point_target) {
        final_basis = Basis::make({"t"}, free_time ? 2 * k : 0);
    } else {
        final_basis = free_time ? cp.tx_basis : cp.x_basis;
    }

    // Layout: sigma+_j, sigma-_j, sigma^_j, mu, mu0, mu0^, muT.
    int offset = 0;
    for (const auto& tag : gamma_tags(m)) {
        MeasureLayout ml;
        ml.tag = tag;
        switch (tag.kind) {
            case MeasureKind::SigmaPlus:
            case MeasureKind::SigmaMinus:
            case MeasureKind::SigmaHat:
            case MeasureKind::Occupation:
                ml.basis = cp.tx_basis;
                break;
            case MeasureKind::Initial:
            case MeasureKind::InitialSlack:
                ml.basis = cp.x_basis;
                break;
            case MeasureKind::Final:
                ml.basis = final_basis;
                ml.point_target = point_target;
                if (point_target) ml.point = *prob.target.point;
                break;
            default:
                throw std::logic_error("unexpected measure tag");
        }
        ml.offset = offset;
        offset += ml.count();
        cp.measures.push_back(std::move(ml));
    }
    cp.num_vars = offset;

    const auto& mu = cp.measure({MeasureKind::Occupation, -1});
    const auto& mu0 = cp.measure({MeasureKind::Initial, -1});
    const auto& mu0h = cp.measure({MeasureKind::InitialSlack, -1});
    const auto& muT = cp.measure({MeasureKind::Final, -1});

    // Pairing of <measure, poly>: returns false on truncation overflow.
    auto pair_tx = [&](const MeasureLayout& ml, const Polynomial& p, double scale,
                       RowBuilder& rb) -> bool {
        for (const auto& [mono, c] : p.terms()) {
            int idx = ml.basis->find(mono);
            if (idx < 0) return false;
            rb.add(ml.offset + idx, scale * c);
        }
        return true;
    };
    // muT pairing: fixed mode takes an x-polynomial (time already evaluated
    // at 1), free mode a (t,x)-polynomial.
    auto pair_final = [&](const Polynomial& p, double scale, RowBuilder& rb) -> bool {
        if (!point_target) return pair_tx(muT, p, scale, rb);
        const bool p_is_tx = p.names() == txn;
        for (const auto& [mono, c] : p.terms()) {
            int texp = p_is_tx ? mono.exps[0] : 0;
            if (texp > muT.basis->maxdeg) return false;
            double xval = p_is_tx ? eval_state_part(mono, muT.point)
                                  : eval_monomial(mono, std::span<const double>(
                                                            muT.point.data(), muT.point.size()));
            rb.add(muT.offset + texp, scale * c * xval);
        }
        return true;
    };

    // Liouville rows: one per test monomial v = t^a x^b of degree <= 2k.
    for (const auto& phi : cp.tx_basis->monos) {
        Polynomial v(txn);
        v.add_term(phi, 1.0);
        RowBuilder rb;
        bool ok = true;

        Polynomial lfv = apply_Lf(v, prob.f, ring_tx);
        ok = ok && pair_tx(mu, lfv, 1.0, rb);
        auto lgv = apply_Lg(v, prob.g, ring_tx);
        for (int j = 0; j < m && ok; ++j) {
            ok = ok && pair_tx(cp.measure({MeasureKind::SigmaPlus, j}), lgv[j], 1.0, rb);
            ok = ok && pair_tx(cp.measure({MeasureKind::SigmaMinus, j}), lgv[j], -1.0, rb);
        }
        if (ok) {
            Polynomial v0 = v.substitute(0, 0.0).drop_var(0);
            ok = pair_tx(mu0, v0, 1.0, rb);
        }
        if (ok) {
            if (free_time) {
                ok = pair_final(v, -1.0, rb);
            } else {
                Polynomial vT = v.substitute(0, 1.0).drop_var(0);
                ok = pair_final(vT, -1.0, rb);
            }
        }
        if (!ok) {
            ++cp.dropped_liouville_rows;
            continue;
        }
        EqRow row;
        row.kind = RowKind::Liouville;
        row.test_mono = phi;
        row.coeffs = rb.finish();
        row.rhs = 0.0;
        cp.rows.push_back(std::move(row));
    }

    // Slack rows: [sigma+]_j + [sigma-]_j + [sigma^]_j = mu, per basis monomial.
    for (int j = 0; j < m; ++j) {
        const auto& sp = cp.measure({MeasureKind::SigmaPlus, j});
        const auto& sm = cp.measure({MeasureKind::SigmaMinus, j});
        const auto& sh = cp.measure({MeasureKind::SigmaHat, j});
        for (int i = 0; i < cp.tx_basis->size(); ++i) {
            EqRow row;
            row.kind = RowKind::Slack;
            row.channel = j;
            row.test_mono = cp.tx_basis->monos[i];
            row.coeffs = {{sp.offset + i, 1.0},
                          {sm.offset + i, 1.0},
                          {sh.offset + i, 1.0},
                          {mu.offset + i, -1.0}};
            std::sort(row.coeffs.begin(), row.coeffs.end());
            row.rhs = 0.0;
            cp.rows.push_back(std::move(row));
        }
    }

    // Lebesgue rows: mu0 + mu0^ = lambda.
    auto leb = lebesgue_moments(prob.bounding, ring_x, *cp.x_basis);
    cp.lebesgue = leb.values;
    cp.lambda_volume = leb.values[0];
    if (!leb.exact) {
        std::ostringstream os;
        os << "reference moments via quadrature fallback, estimated relative error "
           << leb.est_rel_err;
        cp.diagnostics = os.str();
    }
    for (int i = 0; i < cp.x_basis->size(); ++i) {
        EqRow row;
        row.kind = RowKind::Lebesgue;
        row.test_mono = cp.x_basis->monos[i];
        row.coeffs = {{mu0.offset + i, 1.0}, {mu0h.offset + i, 1.0}};
        std::sort(row.coeffs.begin(), row.coeffs.end());
        row.rhs = leb.values[i];
        cp.rows.push_back(std::move(row));
    }

    // PSD blocks, in the order of the P_k statement.
    auto reduced_deg = [&](const Polynomial& h, const QuotientRing& r) {
        return reduce_mod_circle(h, r).degree();
    };
    auto add_block = [&](const MeasureLayout& ml, StructuredMatrix&& sm, std::string label) {
        PsdBlock b;
        b.measure = ml.tag;
        b.structure = std::move(sm);
        b.offset = ml.offset;
        b.label = std::move(label);
        cp.blocks.push_back(std::move(b));
    };

    for (const auto& ml : cp.measures) {
        int bk = std::min(k, ml.basis->maxdeg / 2);
        add_block(ml, moment_matrix(*ml.basis, bk), "M_k(" + ml.tag.str() + ")");
    }
    for (const auto& ml : cp.measures) {
        if (ml.tag.kind == MeasureKind::Final) continue;
        const bool is_tx = ml.basis == cp.tx_basis;
        for (std::size_t i = 0; i < prob.bounding.inequalities.size(); ++i) {
            Polynomial h = prob.bounding.inequalities[i];
            if (is_tx) h = h.insert_var(0, "t");
            const QuotientRing& r = is_tx ? ring_tx : ring_x;
            int kh = k - (reduced_deg(h, r) + 1) / 2;
            if (kh < 0)
                throw ValidationError("relaxation order k too small for bounding inequality " +
                                      std::to_string(i + 1));
            add_block(ml, localizing_matrix(*ml.basis, h, kh),
                      "M(h_X" + std::to_string(i + 1) + "," + ml.tag.str() + ")");
        }
    }
    if (!point_target) {
        for (std::size_t i = 0; i < prob.target.inequalities.size(); ++i) {
            Polynomial h = prob.target.inequalities[i];
            if (free_time) h = h.insert_var(0, "t");
            const QuotientRing& r = free_time ? ring_tx : ring_x;
            int kh = k - (reduced_deg(h, r) + 1) / 2;
            if (kh < 0)
                throw ValidationError("relaxation order k too small for target inequality " +
                                      std::to_string(i + 1));
            add_block(muT, localizing_matrix(*muT.basis, h, kh),
                      "M(h_T" + std::to_string(i + 1) + ",muT)");
        }
    }
    {
        if (k - 1 < 0) throw ValidationError("relaxation order k too small for h_tau");
        Polynomial t = Polynomial::variable(txn, 0);
        Polynomial htau_tx = t * (Polynomial::constant(txn, 1.0) - t);
        for (const auto& ml : cp.measures) {
            bool time_supported = ml.tag.kind == MeasureKind::SigmaPlus ||
                                  ml.tag.kind == MeasureKind::SigmaMinus ||
                                  ml.tag.kind == MeasureKind::SigmaHat ||
                                  ml.tag.kind == MeasureKind::Occupation;
            if (ml.tag.kind == MeasureKind::Final && free_time) time_supported = true;
            if (!time_supported) continue;
            if (ml.point_target) {
                Polynomial tt = Polynomial::variable({"t"}, 0);
                Polynomial htau_t = tt * (Polynomial::constant({"t"}, 1.0) - tt);
                add_block(ml, localizing_matrix(*ml.basis, htau_t, k - 1),
                          "M(h_tau," + ml.tag.str() + ")");
            } else {
                add_block(ml, localizing_matrix(*ml.basis, htau_tx, k - 1),
                          "M(h_tau," + ml.tag.str() + ")");
            }
        }
    }

    // Objective: maximize the initial-measure mass.
    cp.objective = {{mu0.offset + 0, 1.0}};

    // Per-degree moment balancing from the bounding geometry.
    SetGeometry gx = detect_geometry(prob.bounding, ring_x, n);
    std::vector<double> xr = gx.exact ? coordinate_radii(gx, n) : std::vector<double>(n, 1.0);
    cp.var_scale.assign(cp.num_vars, 1.0);
    for (const auto& ml : cp.measures) {
        const bool is_tx = ml.basis->names == txn;
        const bool is_t_only = ml.basis->nvars() == 1 && ml.basis->names[0] == "t";
        for (int i = 0; i < ml.basis->size(); ++i) {
            const Monomial& mono = ml.basis->monos[i];
            double s = 1.0;
            if (!is_t_only) {
                for (int v = 0; v < ml.basis->nvars(); ++v) {
                    double r = is_tx ? (v == 0 ? 1.0 : xr[v - 1]) : xr[v];
                    for (int e = 0; e < mono.exps[v]; ++e) s *= r;
                }
            }
            cp.var_scale[ml.offset + i] = s;
        }
    }

    return cp;
}

PointCheck check_point(const ConicProgram& cp, const Eigen::VectorXd& y) {
    PointCheck out;
    for (std::size_t r = 0; r < cp.rows.size(); ++r) {
        const auto& row = cp.rows[r];
        double lhs = 0.0, mag = std::fabs(row.rhs);
        for (const auto& [i, c] : row.coeffs) {
            lhs += c * y[i];
            mag += std::fabs(c * y[i]);
        }
        double rel = std::fabs(lhs - row.rhs) / std::max(1.0, mag);
        if (rel > out.max_row_residual_rel) {
            out.max_row_residual_rel = rel;
            out.worst_row = static_cast<int>(r);
        }
    }
    out.min_block_eig_rel = 0.0;
    for (const auto& b : cp.blocks) {
        Eigen::VectorXd local = y.segment(b.offset, cp.measure(b.measure).count());
        Eigen::MatrixXd M = instantiate(b.structure, local);
        double scale = std::max(M.cwiseAbs().maxCoeff(), 1e-12);
        double rel = min_eigenvalue(M) / scale;
        out.min_block_eig_rel = std::min(out.min_block_eig_rel, rel);
    }
    out.objective = cp.objective_value(y);
    return out;
}

}  // namespace brs
