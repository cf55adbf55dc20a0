// Acceptance suite: exercises the end-to-end pipeline on the bundled
// benchmark problems and prints one PASS/FAIL line per criterion.
// Run with --slow to include the long satellite solve.

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "brs/extract.hpp"
#include "brs/sdp.hpp"
#include "brs/validate.hpp"
#include "oracles.hpp"

#ifndef BRS_PROBLEM_DIR
#define BRS_PROBLEM_DIR "problems"
#endif
#ifndef BRS_TOOLS_DIR
#define BRS_TOOLS_DIR "tools"
#endif

using namespace brs;

namespace {

int failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
    std::printf("[criterion %d] %s %s\n", criterion, pass ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

std::string prob_path(const std::string& name) {
    return std::string(BRS_PROBLEM_DIR) + "/" + name;
}

struct DiSynthesis {
    ConicProgram cp;
    SolveResult res;
    BRSCertificate cert;
    PolynomialController ctrl;
};

long reduced_count(int nvars, int deg) {
    return oracle::count_monomials_brute(nvars, deg) -
           oracle::count_monomials_brute(nvars, deg - 2);
}

// samples uniformly from the analytic BRS (oracle members) by rejection
Eigen::VectorXd sample_oracle_member(const SynthesisProblem& p, const CounterRng& rng,
                                     std::uint64_t& counter, double horizon_fraction = 1.0) {
    for (;;) {
        Eigen::VectorXd x = sample_bounding(p, rng, counter++);
        if (di_min_time(x[0], x[1]) <= horizon_fraction) return x;
    }
}

double external_objective(const std::string& dats_path) {
    std::string cmd = "python3 " + std::string(BRS_TOOLS_DIR) + "/solve_sdpa.py " + dats_path +
                      " 2>/dev/null";
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) return std::nan("");
    char buf[512];
    double value = std::nan("");
    while (fgets(buf, sizeof(buf), pipe)) {
        double v;
        if (std::sscanf(buf, "* objective %lf", &v) == 1) value = v;
    }
    pclose(pipe);
    return value;
}

}  // namespace

int main(int argc, char** argv) {
    bool slow = false;
    for (int i = 1; i < argc; ++i)
        if (std::strcmp(argv[i], "--slow") == 0) slow = true;

    auto di_user = load_problem(prob_path("double_integrator.prob"));
    auto di_norm = normalize(di_user);

    // shared synthesis runs for k = 2, 3, 4
    std::vector<DiSynthesis> di;
    for (int k = 2; k <= 4; ++k) {
        DiSynthesis s{assemble(di_norm, k), {}, {}, {}};
        s.res = solve(s.cp);
        bool usable = s.res.report.status == SolveStatus::Optimal ||
                      s.res.report.status == SolveStatus::NearOptimal;
        if (!usable) {
            report(0, false,
                   "double-integrator P_" + std::to_string(k) + " solve failed: " +
                       status_name(s.res.report.status));
            return 1;
        }
        s.cert = recover_certificate(s.cp, s.res.row_multipliers);
        s.ctrl = extract_controller(s.cp, s.res.y, di_user);
        di.push_back(std::move(s));
    }

    // ---- criterion 1: containment of the analytic BRS in {w_k >= 1} -------
    {
        CounterRng rng{2024};
        bool pass = true;
        std::ostringstream detail;
        detail << "analytic-BRS samples with w_k >= 1 - 1e-3:";
        for (int i = 0; i < 3; ++i) {
            std::uint64_t counter = 0;
            int good = 0;
            const int N = 10000;
            for (int s = 0; s < N; ++s) {
                Eigen::VectorXd x = sample_oracle_member(di_user, rng, counter);
                std::span<const double> pt(x.data(), 2);
                if (di[i].cert.w.evaluate(pt) >= 1.0 - 1e-3) ++good;
            }
            double frac = double(good) / N;
            detail << " k=" << i + 2 << " " << frac;
            if (frac < 0.999) pass = false;
        }
        detail << " (required >= 0.999 each)";
        report(1, pass, detail.str());
    }

    // ---- criterion 2: monotone convergence from above ----------------------
    {
        double p2 = di[0].res.report.primal_obj;
        double p3 = di[1].res.report.primal_obj;
        double p4 = di[2].res.report.primal_obj;
        double w2 = di[0].cert.dual_objective;
        double w3 = di[1].cert.dual_objective;
        double w4 = di[2].cert.dual_objective;
        double vol = oracle::di_brs_area_T1();  // analytic BRS volume, = 2/3
        double tol = 1e-6;
        bool mono_p = p2 >= p3 - tol * std::fabs(p2) && p3 >= p4 - tol * std::fabs(p3);
        bool mono_w = w2 >= w3 - tol * std::fabs(w2) && w3 >= w4 - tol * std::fabs(w3);
        bool outer = p4 >= vol - 1e-6;
        bool shrink = (p2 - vol) >= (p4 - vol) - tol;
        std::ostringstream detail;
        detail << "p* = [" << p2 << ", " << p3 << ", " << p4 << "], int w dl = [" << w2 << ", "
               << w3 << ", " << w4 << "], lambda(X*) = " << vol;
        report(2, mono_p && mono_w && outer && shrink, detail.str());
    }

    // ---- criterion 3: controller efficacy ----------------------------------
    {
        CounterRng rng{0};
        std::uint64_t counter = 0;
        auto law = di[2].ctrl.law();
        int good = 0;
        const int N = 500;
        for (int s = 0; s < N; ++s) {
            Eigen::VectorXd x0 = sample_oracle_member(di_user, rng, counter, 0.9);
            Trajectory tr = integrate(di_user, law, x0, {});
            if (tr.termination != Termination::LeftBounding &&
                tr.termination != Termination::StepUnderflow && tr.x.back().norm() <= 0.1)
                ++good;
        }
        double frac = double(good) / N;
        std::ostringstream detail;
        detail << "saturated k=4 law drives " << frac
               << " of 500 oracle-interior samples to |x(T)| <= 0.1 (>= 0.9 required;"
               << " thresholds are fixed test policy)";
        report(3, frac >= 0.9, detail.str());
    }

    // ---- criterion 4: Liouville empirical oracle ----------------------------
    {
        CounterRng rng{7};
        std::vector<Trajectory> trajs;
        std::vector<double> weights;
        IntegrateOptions opts;
        opts.hmax = 1e-3;
        std::uint64_t drawn = 0;
        int kept = 0;
        while (kept < 200) {
            Eigen::VectorXd x0 = sample_bounding(di_user, rng, drawn++);
            if (!di_oracle_member(x0, 1.0)) continue;
            trajs.push_back(integrate(di_user, di_bang_bang, x0, opts));
            ++kept;
        }
        double volX = std::numbers::pi * 2.56;
        weights.assign(200, 0.5 * volX / double(drawn));
        Eigen::VectorXd y = empirical_moments(di[0].cp, di_user, trajs, weights);
        auto chk = check_point(di[0].cp, y);
        std::ostringstream detail;
        detail << "200 bang-bang trajectories: max row residual " << chk.max_row_residual_rel
               << " (<= 1e-2), min block eig " << chk.min_block_eig_rel << " (>= -1e-3)";
        report(4, chk.max_row_residual_rel <= 1e-2 && chk.min_block_eig_rel >= -1e-3,
               detail.str());
    }

    // ---- criterion 5: external solver cross-validation ----------------------
    {
        bool pass = true;
        std::ostringstream detail;
        detail << "embedded vs reference (dual-form cvxpy):";
        for (int i = 0; i < 2; ++i) {  // P_2 and P_3
            const auto& s = di[i];
            std::string path = "/tmp/brs_acceptance_k" + std::to_string(i + 2) + ".dat-s";
            std::ofstream out(path);
            out << export_interchange(s.cp);
            out.close();
            double ext = external_objective(path);
            double mine = s.res.report.primal_obj;
            double rel = std::fabs(mine - (-ext)) / (1.0 + std::fabs(mine));
            detail << " k=" << i + 2 << ": " << mine << " vs " << -ext << " (rel " << rel
                   << ", gap " << s.res.report.rel_gap << ")";
            if (!(rel <= 1e-5)) pass = false;
            if (!(s.res.report.rel_gap <= 1e-7)) pass = false;
        }
        report(5, pass, detail.str());
    }

    // ---- criterion 6: Brockett free final time ------------------------------
    {
        auto user = load_problem(prob_path("brockett.prob"));
        auto norm = normalize(user);
        auto cp = assemble(norm, 3);
        auto res = solve(cp);
        bool usable = res.report.status == SolveStatus::Optimal ||
                      res.report.status == SolveStatus::NearOptimal;
        bool in_time = res.report.wall_time_s <= 1800.0;
        int black_hits = 0, grey_hits = 0, black_not_grey = 0;
        if (usable) {
            auto ctrl = extract_controller(cp, res.y, user);
            auto law = ctrl.law();
            auto black = estimate_brs(user, law, 1200, 0.1, 0);
            auto grey = estimate_brs(user, law, 1200, 0.2, 0);
            black_hits = black.hits;
            grey_hits = grey.hits;
            for (int i = 0; i < black.samples; ++i)
                if (black.success[i] && !grey.success[i]) ++black_not_grey;
        }
        std::ostringstream detail;
        detail << "k=3 solve " << status_name(res.report.status) << " in "
               << res.report.wall_time_s << " s (<= 1800); black(r=0.1) " << black_hits
               << "/1200, grey(r=0.2) " << grey_hits << "/1200, black-outside-grey "
               << black_not_grey;
        report(6, usable && in_time && black_hits > 0 && black_not_grey == 0, detail.str());
    }

    // ---- criterion 7: pendulum quotient ring --------------------------------
    {
        auto user = load_problem(prob_path("pendulum.prob"));
        auto norm = normalize(user);
        auto cp = assemble(norm, 3);
        long expect_tx = reduced_count(4, 6);
        long expect_x = reduced_count(3, 6);
        bool counts = cp.measure({MeasureKind::Occupation, -1}).count() == expect_tx &&
                      cp.measure({MeasureKind::Final, -1}).count() == expect_tx &&
                      cp.measure({MeasureKind::Initial, -1}).count() == expect_x;
        SolveOptions opts;
        opts.gap_tol = 1e-5;  // documented override: see the solver report invariant
        auto res = solve(cp, opts);
        bool optimal = res.report.status == SolveStatus::Optimal;

        double frac = 0.0;
        if (optimal || res.report.status == SolveStatus::NearOptimal) {
            auto ctrl = extract_controller(cp, res.y, user);
            auto law = ctrl.law();
            CounterRng rng{0};
            int ok = 0;
            const int N = 200;
            for (int s = 0; s < N; ++s) {
                double th = rng.uniform(1, s, -0.5, 0.5);
                double w = rng.uniform(2, s, -1.0, 1.0);
                Eigen::VectorXd x0(3);
                x0 << std::sin(th), std::cos(th), w;
                Trajectory tr = integrate(user, law, x0, {});
                if (tr.termination == Termination::LeftBounding ||
                    tr.termination == Termination::StepUnderflow)
                    continue;
                for (std::size_t i = 0; i < tr.x.size(); ++i)
                    if (in_set(user.target, tr.x[i], 1e-9)) {
                        ++ok;
                        break;
                    }
            }
            frac = double(ok) / N;
        }
        std::ostringstream detail;
        detail << "quotient basis counts " << (counts ? "match" : "MISMATCH") << " (tx "
               << expect_tx << ", x " << expect_x << "); solve " << status_name(res.report.status)
               << " gap " << res.report.rel_gap << " (gap_tol 1e-5); near-upright cone swing-up "
               << frac << " (>= 0.9 required)";
        report(7, counts && optimal && frac >= 0.9, detail.str());
    }

    // ---- criterion 8: quadrotor and satellite structure ---------------------
    {
        bool pass = true;
        std::ostringstream detail;
        struct Expect {
            const char* file;
            int k;
        };
        for (const auto& e : {Expect{"quadrotor.prob", 2}, Expect{"satellite.prob", 2}}) {
            auto user = load_problem(prob_path(e.file));
            auto norm = normalize(user);
            auto cp = assemble(norm, e.k);
            int m = user.m();
            int nX = static_cast<int>(user.bounding.inequalities.size());
            int nT = static_cast<int>(user.target.inequalities.size());
            bool free_mode = user.mode == HorizonMode::FreeFinalTime;
            bool point = user.target.is_point();
            int gamma = 3 * m + 4;
            int expected_blocks = gamma + nX * (gamma - 1) + (point ? 0 : nT) +
                                  (3 * m + 1 + (free_mode && !point ? 1 : 0)) +
                                  (free_mode && point ? 1 : 0);
            bool ok = static_cast<int>(cp.blocks.size()) == expected_blocks &&
                      cp.num_vars > 0 && !cp.rows.empty();
            detail << user.name << ": " << cp.num_vars << " moments, " << cp.rows.size()
                   << " rows, " << cp.blocks.size() << " blocks (expected " << expected_blocks
                   << "); ";
            if (!ok) pass = false;
        }
        if (slow) {
            auto user = load_problem(prob_path("satellite.prob"));
            auto norm = normalize(user);
            auto cp = assemble(norm, 2);
            SolveOptions opts;
            opts.max_iter = 100;
            auto res = solve(cp, opts);
            bool usable = res.report.status == SolveStatus::Optimal ||
                          res.report.status == SolveStatus::NearOptimal;
            detail << "satellite k=2 solve " << status_name(res.report.status) << " p* "
                   << res.report.primal_obj << " in " << res.report.wall_time_s << " s; ";
            if (!usable) pass = false;
        } else {
            detail << "(satellite k=2 solve: slow test, run with --slow)";
        }
        report(8, pass, detail.str());
    }

    std::printf("%d criterion(s) failing\n", failures);
    return failures == 0 ? 0 : 1;
}
