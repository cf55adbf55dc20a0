#include "brs/sdp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>
#include <unordered_map>

namespace brs {

std::string status_name(SolveStatus s) {
    switch (s) {
        case SolveStatus::Optimal: return "optimal";
        case SolveStatus::NearOptimal: return "near-optimal";
        case SolveStatus::Infeasible: return "infeasible";
        case SolveStatus::IterationLimit: return "iteration-limit";
        case SolveStatus::NumericalFailure: return "numerical-failure";
    }
    return "unknown";
}

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct BlockEntry {
    int r, c;  // r <= c
    double coef;
};

struct Block {
    int dim = 0;
    std::vector<int> vars;                        // scaled-program variable indices
    std::vector<std::vector<BlockEntry>> per_var;  // aligned with vars
};

struct RepairEntry {
    int block = -1, r = 0, c = 0;
    double coef = 0.0;
};

// Scaled program handed to the interior-point core.
struct Scaled {
    int N = 0, M = 0;
    MatrixXd A;  // M x N
    VectorXd b, c;
    std::vector<Block> blocks;
    std::vector<RepairEntry> repair;  // per variable: a single-term block entry
    // mappings back to the original program
    VectorXd var_scale;           // y_orig = s_b * D * y_scaled
    double s_b = 1.0;
    double c_norm = 1.0;
    std::vector<int> kept_rows;   // scaled row -> original row
    VectorXd row_scale;           // per kept row
};

struct BlockState {
    MatrixXd X, Z;
    // NT scaling workspace
    MatrixXd R, Rinv;
    VectorXd sigma;
    MatrixXd Shat;  // dim^2 x nv, scaled coefficient matrices
    MatrixXd E;     // Lyapunov-solved centrality rhs
    MatrixXd dXhat_aff, dZhat_aff;
    MatrixXd dX, dZ, dXhat, dZhat;
};

MatrixXd build_block(const Block& blk, const VectorXd& y) {
    MatrixXd M = MatrixXd::Zero(blk.dim, blk.dim);
    for (std::size_t v = 0; v < blk.vars.size(); ++v) {
        double yv = y[blk.vars[v]];
        if (yv == 0.0) continue;
        for (const auto& e : blk.per_var[v]) {
            M(e.r, e.c) += e.coef * yv;
            if (e.r != e.c) M(e.c, e.r) += e.coef * yv;
        }
    }
    return M;
}

// out[v] += sum over entries of <B_v, S> for symmetric S.
void accumulate_adjoint(const Block& blk, const MatrixXd& S, VectorXd& out, double scale) {
    for (std::size_t v = 0; v < blk.vars.size(); ++v) {
        double acc = 0.0;
        for (const auto& e : blk.per_var[v])
            acc += e.coef * (e.r == e.c ? S(e.r, e.c) : 2.0 * S(e.r, e.c));
        out[blk.vars[v]] += scale * acc;
    }
}

double max_step(const VectorXd& sigma, const MatrixXd& dHat) {
    // largest a with diag(sigma) + a*dHat > 0
    const int d = static_cast<int>(sigma.size());
    MatrixXd S = dHat;
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) S(i, j) /= std::sqrt(sigma[i] * sigma[j]);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(S, Eigen::EigenvaluesOnly);
    double lmin = es.eigenvalues().minCoeff();
    if (lmin >= -1e-14) return 1e30;
    return -1.0 / lmin;
}

}  // namespace

SolveResult solve(const ConicProgram& cp, const SolveOptions& opts) {
    const auto t_start = std::chrono::steady_clock::now();
    SolveResult res;
    res.row_multipliers = VectorXd::Zero(static_cast<int>(cp.rows.size()));

    // ---- Presolve: scaling -------------------------------------------------
    Scaled sp;
    sp.N = cp.num_vars;
    sp.var_scale = VectorXd::Ones(sp.N);
    if (!cp.var_scale.empty())
        for (int i = 0; i < sp.N; ++i) sp.var_scale[i] = cp.var_scale[i];

    const int M0 = static_cast<int>(cp.rows.size());
    MatrixXd A0 = MatrixXd::Zero(M0, sp.N);
    VectorXd b0 = VectorXd::Zero(M0);
    for (int r = 0; r < M0; ++r) {
        for (const auto& [i, cval] : cp.rows[r].coeffs) A0(r, i) = cval * sp.var_scale[i];
        b0[r] = cp.rows[r].rhs;
    }

    // Row equilibration first; empty rows must have zero rhs.
    VectorXd row_scale0 = VectorXd::Ones(M0);
    std::vector<bool> empty_row(M0, false);
    for (int r = 0; r < M0; ++r) {
        double s = A0.row(r).cwiseAbs().maxCoeff();
        if (s <= 0.0) {
            empty_row[r] = true;
            if (std::fabs(b0[r]) > 1e-12) {
                res.report.status = SolveStatus::Infeasible;
                res.report.message = "empty equality row with nonzero rhs";
                return res;
            }
            continue;
        }
        A0.row(r) /= s;
        b0[r] /= s;
        row_scale0[r] = s;
    }
    sp.s_b = std::max(1.0, b0.cwiseAbs().maxCoeff());
    b0 /= sp.s_b;

    // Rank-revealing elimination of dependent rows.
    std::vector<int> candidate;
    for (int r = 0; r < M0; ++r)
        if (!empty_row[r]) candidate.push_back(r);
    MatrixXd At(sp.N, static_cast<int>(candidate.size()));
    for (std::size_t j = 0; j < candidate.size(); ++j) At.col(j) = A0.row(candidate[j]).transpose();
    Eigen::ColPivHouseholderQR<MatrixXd> qr(At);
    qr.setThreshold(1e-10);
    const int rank = static_cast<int>(qr.rank());
    std::vector<char> kept_mask(candidate.size(), 0);
    for (int j = 0; j < rank; ++j) kept_mask[qr.colsPermutation().indices()[j]] = 1;

    if (rank < static_cast<int>(candidate.size())) {
        // Consistency of the dropped rows: rank([A; b]) must equal rank(A).
        MatrixXd Atb(sp.N + 1, static_cast<int>(candidate.size()));
        Atb.topRows(sp.N) = At;
        for (std::size_t j = 0; j < candidate.size(); ++j) Atb(sp.N, j) = b0[candidate[j]];
        Eigen::ColPivHouseholderQR<MatrixXd> qrb(Atb);
        qrb.setThreshold(1e-10);
        if (qrb.rank() > rank) {
            res.report.status = SolveStatus::Infeasible;
            res.report.message = "inconsistent equality system";
            // Certificate: lambda with A^T lambda = 0, b^T lambda = 1.
            VectorXd e = VectorXd::Zero(sp.N + 1);
            e[sp.N] = 1.0;
            VectorXd lam_c =
                Atb.jacobiSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(e);
            res.infeasibility_certificate = VectorXd::Zero(M0);
            for (std::size_t j = 0; j < candidate.size(); ++j)
                res.infeasibility_certificate[candidate[j]] =
                    lam_c[j] / (row_scale0[candidate[j]] * sp.s_b);
            return res;
        }
    }
    for (std::size_t j = 0; j < candidate.size(); ++j)
        if (kept_mask[j]) {
            sp.kept_rows.push_back(candidate[j]);
        }
    sp.M = static_cast<int>(sp.kept_rows.size());
    res.report.dropped_dependent_rows = static_cast<int>(candidate.size()) - sp.M;

    sp.A.resize(sp.M, sp.N);
    sp.b.resize(sp.M);
    sp.row_scale.resize(sp.M);
    for (int r = 0; r < sp.M; ++r) {
        sp.A.row(r) = A0.row(sp.kept_rows[r]);
        sp.b[r] = b0[sp.kept_rows[r]];
        sp.row_scale[r] = row_scale0[sp.kept_rows[r]];
    }

    // Objective scaling.
    VectorXd c0 = VectorXd::Zero(sp.N);
    for (const auto& [i, cval] : cp.objective) c0[i] += cval * sp.var_scale[i];
    sp.c_norm = std::max(1e-12, c0.cwiseAbs().maxCoeff());
    sp.c = c0 / sp.c_norm;

    // Blocks with per-block coefficient normalization.
    for (const auto& pb : cp.blocks) {
        Block blk;
        blk.dim = pb.structure.dim;
        std::vector<int> local_of(sp.N, -1);
        double max_coef = 0.0;
        for (int r = 0; r < blk.dim; ++r)
            for (int col = r; col < blk.dim; ++col)
                for (const auto& [li, coef] : pb.structure.entry(r, col)) {
                    int gi = pb.offset + li;
                    if (local_of[gi] < 0) {
                        local_of[gi] = static_cast<int>(blk.vars.size());
                        blk.vars.push_back(gi);
                        blk.per_var.emplace_back();
                    }
                    double scaled = coef * sp.var_scale[gi];
                    blk.per_var[local_of[gi]].push_back({r, col, scaled});
                    max_coef = std::max(max_coef, std::fabs(scaled));
                }
        if (max_coef > 0.0)
            for (auto& pv : blk.per_var)
                for (auto& e : pv) e.coef /= max_coef;
        sp.blocks.push_back(std::move(blk));
    }

    // For each variable find a block entry that references it alone; used to
    // repair the dual slack so dual feasibility does not drift.
    sp.repair.assign(sp.N, RepairEntry{});
    for (std::size_t l = 0; l < sp.blocks.size(); ++l) {
        const auto& blk = sp.blocks[l];
        std::vector<std::vector<std::pair<int, int>>> by_cell;  // (var, entry) per cell
        std::unordered_map<long long, std::pair<int, int>> cell_count;
        for (std::size_t v = 0; v < blk.vars.size(); ++v)
            for (std::size_t e = 0; e < blk.per_var[v].size(); ++e) {
                long long key = static_cast<long long>(blk.per_var[v][e].r) * blk.dim +
                                blk.per_var[v][e].c;
                auto it = cell_count.find(key);
                if (it == cell_count.end())
                    cell_count[key] = {static_cast<int>(v), static_cast<int>(e)};
                else
                    it->second.first = -1;  // shared cell: unusable
            }
        for (const auto& [key, ve] : cell_count) {
            if (ve.first < 0) continue;
            int gvar = blk.vars[ve.first];
            const auto& ent = blk.per_var[ve.first][ve.second];
            // Prefer the measure's own moment matrix (earliest block), then
            // the largest coefficient within it.
            if (sp.repair[gvar].block >= 0 && sp.repair[gvar].block < static_cast<int>(l))
                continue;
            if (sp.repair[gvar].block == static_cast<int>(l) &&
                std::fabs(sp.repair[gvar].coef) >= std::fabs(ent.coef))
                continue;
            sp.repair[gvar] = {static_cast<int>(l), ent.r, ent.c, ent.coef};
        }
    }

    // ---- Interior-point core ----------------------------------------------
    const int N = sp.N, M = sp.M;
    int total_dim = 0;
    for (const auto& blk : sp.blocks) total_dim += blk.dim;

    VectorXd y = VectorXd::Zero(N);
    VectorXd lam = VectorXd::Zero(M);
    std::vector<BlockState> st(sp.blocks.size());
    const double rho_x = 1.0 + sp.b.cwiseAbs().maxCoeff();
    const double rho_z = 1.0 + sp.c.cwiseAbs().maxCoeff();
    for (std::size_t l = 0; l < sp.blocks.size(); ++l) {
        st[l].X = rho_x * MatrixXd::Identity(sp.blocks[l].dim, sp.blocks[l].dim);
        st[l].Z = rho_z * MatrixXd::Identity(sp.blocks[l].dim, sp.blocks[l].dim);
    }

    auto residuals = [&](VectorXd& r_p, VectorXd& r_d, std::vector<MatrixXd>& r_X) {
        r_p = sp.b - sp.A * y;
        r_d = sp.c - sp.A.transpose() * lam;
        for (std::size_t l = 0; l < sp.blocks.size(); ++l) {
            accumulate_adjoint(sp.blocks[l], st[l].Z, r_d, 1.0);
            r_X[l] = build_block(sp.blocks[l], y) - st[l].X;
        }
    };

    SolveStatus status = SolveStatus::IterationLimit;
    std::string message;
    int iter = 0;
    double cur_gap = 1.0, cur_pres = 1.0, cur_xres = 1.0, cur_dres = 1.0;
    auto near_enough = [&] {
        return cur_gap <= std::max(1e-3, 100 * opts.gap_tol) && cur_pres <= 100 * opts.feas_tol &&
               cur_xres <= 100 * opts.feas_tol && cur_dres <= 100 * opts.feas_tol;
    };
    double best_score = 1e300;
    VectorXd y_best = y, lam_best = lam;
    double best_gap = 1.0, best_pres = 1.0, best_xres = 1.0, best_dres = 1.0;
    double last_ap = 0.0, last_ad = 0.0, last_sigma = 0.0;
    int stall_count = 0;

    MatrixXd G(N, N), K, S;
    std::vector<MatrixXd> r_X(sp.blocks.size());
    VectorXd r_p(M), r_d(N);
    VectorXd dy(N), dlam(M);

    for (iter = 0; iter < opts.max_iter; ++iter) {
        residuals(r_p, r_d, r_X);
        // Dual slack repair: absorb the dual residual into per-variable
        // representative entries of Z, guarded by a trial factorization.
        {
            double dmax = r_d.cwiseAbs().maxCoeff();
            if (dmax > 1e-14 && dmax < 1e-2 * (1.0 + sp.c.cwiseAbs().maxCoeff())) {
                std::vector<MatrixXd> zsave;
                zsave.reserve(st.size());
                for (auto& B : st) zsave.push_back(B.Z);
                bool all_repaired = true;
                for (int n = 0; n < N && all_repaired; ++n) {
                    const auto& re = sp.repair[n];
                    if (re.block < 0) {
                        if (std::fabs(r_d[n]) > 1e-12) all_repaired = false;
                        continue;
                    }
                    double adj = r_d[n] / (re.coef * (re.r == re.c ? 1.0 : 2.0));
                    st[re.block].Z(re.r, re.c) -= adj;
                    if (re.r != re.c) st[re.block].Z(re.c, re.r) -= adj;
                }
                if (all_repaired) {
                    for (auto& B : st) {
                        Eigen::LLT<MatrixXd> trial(B.Z);
                        if (trial.info() != Eigen::Success) {
                            all_repaired = false;
                            break;
                        }
                    }
                }
                if (!all_repaired) {
                    for (std::size_t l = 0; l < st.size(); ++l) st[l].Z = zsave[l];
                } else {
                    residuals(r_p, r_d, r_X);
                }
            }
        }
        double mu = 0.0;
        for (std::size_t l = 0; l < sp.blocks.size(); ++l)
            mu += (st[l].X.array() * st[l].Z.array()).sum();
        mu /= std::max(1, total_dim);

        double pobj = sp.c.dot(y);
        double dobj = sp.b.dot(lam);
        // gap in original objective units so the exit test matches the report
        double pobj_o = sp.c_norm * sp.s_b * pobj;
        double dobj_o = sp.c_norm * sp.s_b * dobj;
        double gap_rel = std::fabs(pobj_o - dobj_o) /
                         (1.0 + std::max(std::fabs(pobj_o), std::fabs(dobj_o)));
        double pres = r_p.size() ? r_p.cwiseAbs().maxCoeff() / (1.0 + sp.b.cwiseAbs().maxCoeff())
                                 : 0.0;
        double xres = 0.0;
        for (std::size_t l = 0; l < sp.blocks.size(); ++l)
            xres = std::max(xres,
                            r_X[l].cwiseAbs().maxCoeff() /
                                (1.0 + st[l].X.cwiseAbs().maxCoeff()));
        double dres = r_d.cwiseAbs().maxCoeff() / (1.0 + sp.c.cwiseAbs().maxCoeff());
        double mu_rel = mu / (1.0 + std::fabs(pobj));
        cur_gap = gap_rel;
        cur_pres = pres;
        cur_xres = xres;
        cur_dres = dres;

        if (opts.check_identities) {
            double xz = 0.0, zrx = 0.0;
            for (std::size_t l = 0; l < sp.blocks.size(); ++l) {
                xz += (st[l].X.array() * st[l].Z.array()).sum();
                zrx += (st[l].Z.array() * r_X[l].array()).sum();
            }
            double identity = dobj - pobj - r_p.dot(lam) + r_d.dot(y) - zrx - xz;
            double scale = 1.0 + std::fabs(dobj) + std::fabs(pobj);
            if (std::fabs(identity) > 1e-6 * scale)
                throw std::logic_error("gap identity violated: " + std::to_string(identity));
        }

        if (opts.verbose) {
            std::ostringstream os;
            os << "iter " << iter << " pobj " << pobj << " dobj " << dobj << " gap " << gap_rel
               << " pres " << pres << " xres " << xres << " dres " << dres << " mu " << mu
               << " ap " << last_ap << " ad " << last_ad << " sg " << last_sigma;
            std::fputs((os.str() + "\n").c_str(), stderr);
        }

        double score = std::max(std::max(gap_rel, pres), std::max(xres, dres));
        if (score < best_score) {
            best_score = score;
            y_best = y;
            lam_best = lam;
            best_gap = gap_rel;
            best_pres = pres;
            best_xres = xres;
            best_dres = dres;
            stall_count = 0;
        } else if (++stall_count > 30) {
            message = "progress stalled";
            break;
        }
        if (iter > 0 && std::min(last_ap, last_ad) < 1e-7) stall_count += 5;

        if (gap_rel <= opts.gap_tol && pres <= opts.feas_tol && xres <= opts.feas_tol &&
            dres <= opts.feas_tol && mu_rel <= std::max(opts.gap_tol, 1e-9) * 10) {
            status = SolveStatus::Optimal;
            break;
        }

        // NT scaling and the scaled coefficient Gram matrix.
        G.setZero();
        bool factor_ok = true;
        for (std::size_t l = 0; l < sp.blocks.size(); ++l) {
            auto& B = st[l];
            const int d = sp.blocks[l].dim;
            Eigen::LLT<MatrixXd> lltX(B.X), lltZ(B.Z);
            if (lltX.info() != Eigen::Success || lltZ.info() != Eigen::Success) {
                factor_ok = false;
                break;
            }
            MatrixXd Lx = lltX.matrixL();
            MatrixXd Lz = lltZ.matrixL();
            Eigen::BDCSVD<MatrixXd> svd(Lz.transpose() * Lx,
                                        Eigen::ComputeFullU | Eigen::ComputeFullV);
            B.sigma = svd.singularValues();
            if (B.sigma.minCoeff() <= 0.0) {
                factor_ok = false;
                break;
            }
            MatrixXd V = svd.matrixV();
            B.R = Lx * V * B.sigma.cwiseSqrt().cwiseInverse().asDiagonal();
            MatrixXd LxInv =
                Lx.triangularView<Eigen::Lower>().solve(MatrixXd::Identity(d, d));
            B.Rinv = B.sigma.cwiseSqrt().asDiagonal() * V.transpose() * LxInv;

            const auto& blk = sp.blocks[l];
            const int nv = static_cast<int>(blk.vars.size());
            B.Shat.resize(d * d, nv);
            MatrixXd tmp(d, d);
            for (int v = 0; v < nv; ++v) {
                tmp.setZero();
                for (const auto& e : blk.per_var[v]) {
                    tmp.noalias() += e.coef * (B.Rinv.col(e.r) * B.Rinv.col(e.c).transpose());
                    if (e.r != e.c)
                        tmp.noalias() += e.coef * (B.Rinv.col(e.c) * B.Rinv.col(e.r).transpose());
                }
                B.Shat.col(v) = Eigen::Map<VectorXd>(tmp.data(), d * d);
            }
            MatrixXd Gb = B.Shat.transpose() * B.Shat;
            for (int a = 0; a < nv; ++a)
                for (int bcol = 0; bcol < nv; ++bcol) G(blk.vars[a], blk.vars[bcol]) += Gb(a, bcol);
        }
        if (!factor_ok) {
            message = "block factorization breakdown";
            break;
        }

        double gdiag = G.diagonal().maxCoeff();
        Eigen::LLT<MatrixXd> lltG(G);
        for (double reg = 1e-14; lltG.info() != Eigen::Success && reg <= 1e-6; reg *= 100) {
            G.diagonal().array() += reg * gdiag;
            lltG.compute(G);
        }
        if (lltG.info() != Eigen::Success) {
            message = "normal-operator factorization breakdown";
            break;
        }
        K = lltG.solve(sp.A.transpose());
        S = sp.A * K;
        Eigen::LLT<MatrixXd> lltS(S);
        double sdiag = std::max(1.0, S.diagonal().maxCoeff());
        for (double reg = 1e-14; lltS.info() != Eigen::Success && reg <= 1e-6; reg *= 100) {
            S.diagonal().array() += reg * sdiag;
            lltS.compute(S);
        }
        if (lltS.info() != Eigen::Success) {
            message = "Schur factorization breakdown";
            break;
        }

        // Newton solve for the current per-block centrality targets st[l].E;
        // with_residuals=false solves the pure re-centering system.
        auto solve_newton = [&](bool with_residuals) {
            VectorXd r1 = with_residuals ? r_d : VectorXd::Zero(N);
            for (std::size_t l = 0; l < sp.blocks.size(); ++l) {
                auto& B = st[l];
                MatrixXd inner = B.E;
                if (with_residuals)
                    inner.noalias() -= B.Rinv * r_X[l] * B.Rinv.transpose();
                MatrixXd T = B.Rinv.transpose() * inner * B.Rinv;
                accumulate_adjoint(sp.blocks[l], T, r1, 1.0);
            }
            VectorXd rp_local = with_residuals ? r_p : VectorXd::Zero(M);
            VectorXd t = lltG.solve(r1);
            dlam = lltS.solve(sp.A * t - rp_local);
            dy = t - K * dlam;
            for (int refine = 0; refine < 2; ++refine) {
                VectorXd res1 = r1 - G * dy - sp.A.transpose() * dlam;
                VectorXd res2 = rp_local - sp.A * dy;
                VectorXd t2 = lltG.solve(res1);
                VectorXd dl2 = lltS.solve(sp.A * t2 - res2);
                dy += t2 - K * dl2;
                dlam += dl2;
            }
            for (std::size_t l = 0; l < sp.blocks.size(); ++l) {
                auto& B = st[l];
                B.dX = build_block(sp.blocks[l], dy);
                if (with_residuals) B.dX += r_X[l];
                B.dXhat = B.Rinv * B.dX * B.Rinv.transpose();
                B.dZhat = B.E - B.dXhat;
                B.dZ = B.Rinv.transpose() * B.dZhat * B.Rinv;
            }
            // Repair the dual direction so A^T dlam - B*(dZ) matches its rhs
            // exactly; the scaled reconstruction of dZ loses digits when the
            // NT spectrum is spread. Any PSD risk is absorbed by the step
            // length safeguard downstream.
            {
                VectorXd edir = -sp.A.transpose() * dlam;
                if (with_residuals) edir += r_d;
                for (std::size_t l = 0; l < sp.blocks.size(); ++l)
                    accumulate_adjoint(sp.blocks[l], st[l].dZ, edir, 1.0);
                bool changed = false;
                for (int n = 0; n < N; ++n) {
                    const auto& re = sp.repair[n];
                    if (re.block < 0 || edir[n] == 0.0) continue;
                    double adj = edir[n] / (re.coef * (re.r == re.c ? 1.0 : 2.0));
                    st[re.block].dZ(re.r, re.c) -= adj;
                    if (re.r != re.c) st[re.block].dZ(re.c, re.r) -= adj;
                    changed = true;
                }
                if (changed)
                    for (std::size_t l = 0; l < sp.blocks.size(); ++l) {
                        auto& B = st[l];
                        B.dZhat = B.R.transpose() * B.dZ * B.R;
                    }
            }
        };

        auto step_lengths = [&](double& ax, double& az) {
            ax = az = 1e30;
            for (std::size_t l = 0; l < sp.blocks.size(); ++l) {
                ax = std::min(ax, max_step(st[l].sigma, st[l].dXhat));
                az = std::min(az, max_step(st[l].sigma, st[l].dZhat));
            }
        };

        // Predictor (affine scaling).
        for (std::size_t l = 0; l < sp.blocks.size(); ++l) {
            auto& B = st[l];
            VectorXd neg_sigma2 = -(B.sigma.array() * B.sigma.array());
            MatrixXd D = neg_sigma2.asDiagonal();
            B.E.resize(D.rows(), D.cols());
            for (int i = 0; i < D.rows(); ++i)
                for (int j = 0; j < D.cols(); ++j)
                    B.E(i, j) = 2.0 * D(i, j) / (B.sigma[i] + B.sigma[j]);
        }
        solve_newton(true);
        double ax, az;
        step_lengths(ax, az);
        double a_aff_x = std::min(1.0, ax), a_aff_z = std::min(1.0, az);
        double mu_aff = 0.0;
        for (std::size_t l = 0; l < sp.blocks.size(); ++l) {
            MatrixXd Xa = st[l].X + a_aff_x * st[l].dX;
            MatrixXd Za = st[l].Z + a_aff_z * st[l].dZ;
            mu_aff += (Xa.array() * Za.array()).sum();
            st[l].dXhat_aff = st[l].dXhat;
            st[l].dZhat_aff = st[l].dZhat;
        }
        mu_aff /= std::max(1, total_dim);
        double expo = std::max(1.0, 3.0 * std::pow(std::min(a_aff_x, a_aff_z), 2.0));
        double sigma = std::pow(std::max(0.0, mu_aff / mu), expo);
        sigma = std::clamp(sigma, 1e-8, 0.999);
        // Do not drive mu far below what the gap tolerance needs: the scaled
        // complementarity turns to numerical noise there.
        double mu_floor = 0.05 * opts.gap_tol *
                          (1.0 + std::max(std::fabs(pobj_o), std::fabs(dobj_o))) /
                          (sp.c_norm * sp.s_b * std::max(1, total_dim));
        if (sigma * mu < mu_floor) sigma = std::min(0.999, mu_floor / mu);
        double mu_target = sigma * mu;

        // Mehrotra corrector (residuals folded in: one combined step).
        for (std::size_t l = 0; l < sp.blocks.size(); ++l) {
            auto& B = st[l];
            VectorXd neg_sigma2 = -(B.sigma.array() * B.sigma.array());
            MatrixXd D = neg_sigma2.asDiagonal();
            D.diagonal().array() += mu_target;
            D.noalias() -= 0.5 * (B.dXhat_aff * B.dZhat_aff + B.dZhat_aff * B.dXhat_aff);
            for (int i = 0; i < D.rows(); ++i)
                for (int j = 0; j < D.cols(); ++j)
                    B.E(i, j) = 2.0 * D(i, j) / (B.sigma[i] + B.sigma[j]);
        }
        solve_newton(true);
        step_lengths(ax, az);

        // Re-centering fallback: a short step after the corrector signals a
        // badly de-centered iterate; aim closer to the central path instead.
        // A jammed iterate (near-zero steps) re-centers upward.
        if (std::min(ax, az) < 0.2 && sigma < 0.8) {
            sigma = std::min(ax, az) < 0.02 ? 1.5 : 0.8;
            mu_target = sigma * mu;
            for (std::size_t l = 0; l < sp.blocks.size(); ++l) {
                auto& B = st[l];
                VectorXd neg_sigma2 = -(B.sigma.array() * B.sigma.array());
                MatrixXd D = neg_sigma2.asDiagonal();
                D.diagonal().array() += mu_target;
                D.noalias() -= 0.5 * (B.dXhat_aff * B.dZhat_aff + B.dZhat_aff * B.dXhat_aff);
                for (int i = 0; i < D.rows(); ++i)
                    for (int j = 0; j < D.cols(); ++j)
                        B.E(i, j) = 2.0 * D(i, j) / (B.sigma[i] + B.sigma[j]);
            }
            solve_newton(true);
            step_lengths(ax, az);
        }

        // Gondzio centrality correctors: push complementarity eigenvalues of
        // the tentative point back into [bmin, bmax]*mu_target to enlarge the
        // achievable steps.
        const double bmin = 0.1, bmax = 10.0;
        for (int extra = 0; extra < 3 && std::min(ax, az) < 0.9; ++extra) {
            double axt = std::min(1.0, 1.08 * ax + 0.08);
            double azt = std::min(1.0, 1.08 * az + 0.08);
            VectorXd dy_s = dy;
            VectorXd dlam_s = dlam;
            std::vector<MatrixXd> dX_s(sp.blocks.size()), dZ_s(sp.blocks.size());
            std::vector<MatrixXd> dXhat_s(sp.blocks.size()), dZhat_s(sp.blocks.size());
            for (std::size_t l = 0; l < sp.blocks.size(); ++l) {
                dX_s[l] = st[l].dX;
                dZ_s[l] = st[l].dZ;
                dXhat_s[l] = st[l].dXhat;
                dZhat_s[l] = st[l].dZhat;
            }
            for (std::size_t l = 0; l < sp.blocks.size(); ++l) {
                auto& B = st[l];
                MatrixXd Xt = MatrixXd(B.sigma.asDiagonal()) + axt * dXhat_s[l];
                MatrixXd Zt = MatrixXd(B.sigma.asDiagonal()) + azt * dZhat_s[l];
                MatrixXd H = 0.5 * (Xt * Zt + Zt * Xt);
                Eigen::SelfAdjointEigenSolver<MatrixXd> es(H);
                VectorXd h = es.eigenvalues();
                VectorXd target = h;
                for (int i = 0; i < h.size(); ++i)
                    target[i] = std::clamp(h[i], bmin * mu_target, bmax * mu_target);
                MatrixXd D = es.eigenvectors() * (target - h).asDiagonal() *
                             es.eigenvectors().transpose();
                for (int i = 0; i < D.rows(); ++i)
                    for (int j = 0; j < D.cols(); ++j)
                        B.E(i, j) = 2.0 * D(i, j) / (B.sigma[i] + B.sigma[j]);
            }
            solve_newton(false);
            // combine and evaluate
            dy += dy_s;
            dlam += dlam_s;
            for (std::size_t l = 0; l < sp.blocks.size(); ++l) {
                st[l].dX += dX_s[l];
                st[l].dZ += dZ_s[l];
                st[l].dXhat += dXhat_s[l];
                st[l].dZhat += dZhat_s[l];
            }
            double ax2, az2;
            step_lengths(ax2, az2);
            if (std::min(ax2, az2) < std::min(ax, az) + 0.005) {
                // no improvement: revert
                dy = dy_s;
                dlam = dlam_s;
                for (std::size_t l = 0; l < sp.blocks.size(); ++l) {
                    st[l].dX = dX_s[l];
                    st[l].dZ = dZ_s[l];
                    st[l].dXhat = dXhat_s[l];
                    st[l].dZhat = dZhat_s[l];
                }
                break;
            }
            ax = ax2;
            az = az2;
        }

        const double tau = cur_gap < 1e-4 ? 0.999 : 0.99;
        double ap = std::min(1.0, tau * ax);
        double ad = std::min(1.0, tau * az);
        last_ap = ap;
        last_ad = ad;
        last_sigma = sigma;

        y += ap * dy;
        lam += ad * dlam;
        for (std::size_t l = 0; l < sp.blocks.size(); ++l) {
            st[l].X += ap * st[l].dX;
            st[l].Z += ad * st[l].dZ;
        }
    }
    if (iter >= opts.max_iter) {
        status = SolveStatus::IterationLimit;
        message = "iteration cap reached";
    }

    // Return the best iterate seen if the last steps degraded it.
    if (status != SolveStatus::Optimal) {
        if (message != "iteration cap reached" && !message.empty())
            status = SolveStatus::NumericalFailure;
        double final_score =
            std::max(std::max(cur_gap, cur_pres), std::max(cur_xres, cur_dres));
        if (best_score < final_score) {
            y = y_best;
            lam = lam_best;
            cur_gap = best_gap;
            cur_pres = best_pres;
            cur_xres = best_xres;
            cur_dres = best_dres;
        }
        if (cur_gap <= opts.gap_tol && cur_pres <= opts.feas_tol && cur_xres <= opts.feas_tol &&
            cur_dres <= opts.feas_tol)
            status = SolveStatus::Optimal;
        else if (near_enough())
            status = SolveStatus::NearOptimal;
    }

    // ---- Map back -----------------------------------------------------------
    res.y = sp.s_b * (sp.var_scale.array() * y.array()).matrix();
    for (int r = 0; r < sp.M; ++r)
        res.row_multipliers[sp.kept_rows[r]] = lam[r] * sp.c_norm / sp.row_scale[r];

    auto chk = check_point(cp, res.y);
    res.report.status = status;
    res.report.message = message;
    res.report.iterations = iter;
    res.report.primal_obj = cp.objective_value(res.y);
    double dual_obj = 0.0;
    for (std::size_t r = 0; r < cp.rows.size(); ++r)
        dual_obj += cp.rows[r].rhs * res.row_multipliers[r];
    res.report.dual_obj = dual_obj;
    res.report.rel_gap =
        std::fabs(res.report.primal_obj - dual_obj) /
        (1.0 + std::max(std::fabs(res.report.primal_obj), std::fabs(dual_obj)));
    res.report.max_eq_residual = chk.max_row_residual_rel;
    res.report.min_block_eig = chk.min_block_eig_rel;
    if (status == SolveStatus::Optimal &&
        (chk.max_row_residual_rel > opts.feas_tol * 10 ||
         chk.min_block_eig_rel < -opts.feas_tol * 10)) {
        res.report.status = SolveStatus::NearOptimal;
        res.report.message = "converged in scaled space; original-units residuals above tolerance";
    }
    res.report.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return res;
}

// --------------------------------------------------------------------------
// SDPA sparse interchange

SdpaData to_sdpa(const ConicProgram& cp) {
    // Exported in the per-degree scaled variables (documented in the header
    // comment): x_file = y / var_scale. Same optimal value, far better
    // conditioned for reference solvers. import_solution undoes the scaling.
    SdpaData d;
    d.comment = "brsynth relaxation " + cp.source_hash + " k=" + std::to_string(cp.k) +
                " (vars carry the per-degree scaling)";
    d.m = cp.num_vars;
    std::vector<double> ds(cp.num_vars, 1.0);
    if (!cp.var_scale.empty()) ds = cp.var_scale;
    d.c.assign(cp.num_vars, 0.0);
    for (const auto& [i, c] : cp.objective) d.c[i] -= c * ds[i];  // SDPA minimizes
    const int M = static_cast<int>(cp.rows.size());
    for (const auto& pb : cp.blocks) d.block_sizes.push_back(pb.structure.dim);
    d.block_sizes.push_back(-2 * M);
    const int lp_block = static_cast<int>(d.block_sizes.size());

    // Row equilibration mirrors the solver presolve.
    std::vector<double> row_scale(M, 1.0);
    for (int r = 0; r < M; ++r) {
        double s = 0.0;
        for (const auto& [i, coef] : cp.rows[r].coeffs) s = std::max(s, std::fabs(coef * ds[i]));
        if (s > 0.0) row_scale[r] = s;
    }

    // F_0: equality rhs on the paired diagonal entries.
    for (int r = 0; r < M; ++r) {
        double rhs = cp.rows[r].rhs / row_scale[r];
        if (rhs != 0.0) {
            d.entries.push_back({0, lp_block, 2 * r + 1, 2 * r + 1, rhs});
            d.entries.push_back({0, lp_block, 2 * r + 2, 2 * r + 2, -rhs});
        }
    }
    // F_i: PSD block coefficients, then the paired equality coefficients.
    for (std::size_t bidx = 0; bidx < cp.blocks.size(); ++bidx) {
        const auto& pb = cp.blocks[bidx];
        for (int r = 0; r < pb.structure.dim; ++r)
            for (int c = r; c < pb.structure.dim; ++c) {
                double acc = 0.0;
                for (const auto& [li, coef] : pb.structure.entry(r, c)) {
                    (void)coef;
                    acc = 1.0;
                }
                if (acc == 0.0) continue;
                for (const auto& [li, coef] : pb.structure.entry(r, c))
                    d.entries.push_back({pb.offset + li + 1, static_cast<int>(bidx) + 1, r + 1,
                                         c + 1, coef * ds[pb.offset + li]});
            }
    }
    for (int r = 0; r < M; ++r)
        for (const auto& [i, coef] : cp.rows[r].coeffs) {
            double v = coef * ds[i] / row_scale[r];
            d.entries.push_back({i + 1, lp_block, 2 * r + 1, 2 * r + 1, v});
            d.entries.push_back({i + 1, lp_block, 2 * r + 2, 2 * r + 2, -v});
        }
    std::sort(d.entries.begin(), d.entries.end(), [](const auto& a, const auto& b) {
        return std::tie(a.matno, a.block, a.i, a.j) < std::tie(b.matno, b.block, b.i, b.j);
    });
    return d;
}

std::string write_sdpa(const SdpaData& d) {
    std::ostringstream os;
    os << "\"" << d.comment << "\n";
    os << d.m << "\n";
    os << d.block_sizes.size() << "\n";
    for (std::size_t i = 0; i < d.block_sizes.size(); ++i)
        os << d.block_sizes[i] << (i + 1 < d.block_sizes.size() ? " " : "\n");
    for (int i = 0; i < d.m; ++i) os << format_double(d.c[i]) << (i + 1 < d.m ? " " : "\n");
    for (const auto& e : d.entries)
        os << e.matno << " " << e.block << " " << e.i << " " << e.j << " "
           << format_double(e.value) << "\n";
    return os.str();
}

std::string export_interchange(const ConicProgram& cp) { return write_sdpa(to_sdpa(cp)); }

SdpaData parse_sdpa(const std::string& text) {
    SdpaData d;
    std::istringstream is(text);
    std::string line;
    // comments
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line[0] == '"' || line[0] == '*') {
            if (d.comment.empty() && line.size() > 1) d.comment = line.substr(1);
            continue;
        }
        break;
    }
    d.m = std::stoi(line);
    int nblocks;
    is >> nblocks;
    d.block_sizes.resize(nblocks);
    for (int i = 0; i < nblocks; ++i) is >> d.block_sizes[i];
    d.c.resize(d.m);
    for (int i = 0; i < d.m; ++i) is >> d.c[i];
    SdpaData::Entry e;
    while (is >> e.matno >> e.block >> e.i >> e.j >> e.value) d.entries.push_back(e);
    return d;
}

Eigen::VectorXd import_solution(const ConicProgram& cp, const std::string& text) {
    std::istringstream is(text);
    std::string tok;
    long nblocks = -1, nvars = -1;
    Eigen::VectorXd y;
    while (is >> tok) {
        if (tok == "*" || tok[0] == '*') {
            std::string rest;
            std::getline(is, rest);
            continue;
        }
        if (tok == "blocks") {
            is >> nblocks;
            if (nblocks != static_cast<long>(cp.blocks.size()) + 1)
                throw std::runtime_error("solution block count " + std::to_string(nblocks) +
                                         " does not match program (" +
                                         std::to_string(cp.blocks.size() + 1) + ")");
        } else if (tok == "xvec") {
            is >> nvars;
            if (nvars != cp.num_vars)
                throw std::runtime_error("solution variable count " + std::to_string(nvars) +
                                         " does not match program (" +
                                         std::to_string(cp.num_vars) + ")");
            y.resize(cp.num_vars);
            for (int i = 0; i < cp.num_vars; ++i)
                if (!(is >> y[i])) throw std::runtime_error("truncated solution vector");
            if (!cp.var_scale.empty())
                for (int i = 0; i < cp.num_vars; ++i) y[i] *= cp.var_scale[i];
        } else {
            throw std::runtime_error("unrecognized solution token '" + tok + "'");
        }
    }
    if (nvars < 0) throw std::runtime_error("solution file has no xvec section");
    return y;
}

}  // namespace brs
