// brsynth: synthesize saturating polynomial feedback controllers that
// maximize a finite-horizon backward reachable set, via moment relaxations
// of the occupation-measure formulation.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "brs/extract.hpp"
#include "brs/report.hpp"
#include "brs/sdp.hpp"
#include "brs/validate.hpp"

namespace fs = std::filesystem;
using namespace brs;

namespace {

struct CommonArgs {
    std::string problem_path;
    int k = 0;  // 0: use the problem file's value
    std::string mode;
    std::uint64_t seed = 0;
    bool seed_given = false;
    std::string out_dir = ".";
    double feas_tol = 1e-7, gap_tol = 1e-7;
    int max_iter = 200;
};

void add_common(CLI::App* cmd, CommonArgs& a, bool with_solver_opts = true) {
    cmd->add_option("problem", a.problem_path, "problem file")->required();
    cmd->add_option("--k", a.k, "relaxation order (default: from the problem file)");
    cmd->add_option("--mode", a.mode, "fixed|free horizon mode override")
        ->check(CLI::IsMember({"fixed", "free"}));
    cmd->add_option("--out-dir", a.out_dir, "output directory");
    if (with_solver_opts) {
        cmd->add_option("--feas-tol", a.feas_tol, "solver feasibility tolerance");
        cmd->add_option("--gap-tol", a.gap_tol, "solver gap tolerance");
        cmd->add_option("--max-iter", a.max_iter, "solver iteration cap");
    }
}

SynthesisProblem load_with_overrides(const CommonArgs& a) {
    SynthesisProblem p = load_problem(a.problem_path);
    if (a.k > 0) p.k = a.k;
    if (a.mode == "fixed") p.mode = HorizonMode::FixedFinalTime;
    if (a.mode == "free") p.mode = HorizonMode::FreeFinalTime;
    return p;
}

std::string make_run_id(const std::string& command, const SynthesisProblem& p,
                        const CommonArgs& a) {
    std::ostringstream os;
    os << command << "|" << save_problem(p) << "|" << p.k << "|" << a.seed << "|" << a.feas_tol
       << "|" << a.gap_tol << "|" << a.max_iter;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(os.str())));
    return buf;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << content;
}

RunManifest base_manifest(const std::string& command, const SynthesisProblem& p,
                          const CommonArgs& a, const std::string& run_id) {
    RunManifest m;
    m.run_id = run_id;
    m.command = command;
    m.problem_hash = problem_hash(p);
    m.k = p.k;
    m.mode = p.mode == HorizonMode::FixedFinalTime ? "fixed" : "free";
    m.feas_tol = a.feas_tol;
    m.gap_tol = a.gap_tol;
    m.max_iter = a.max_iter;
    m.seed = a.seed;
    m.started = timestamp_utc();
    return m;
}

int cmd_relax(const CommonArgs& a) {
    SynthesisProblem user = load_with_overrides(a);
    SynthesisProblem norm = normalize(user);
    auto run_id = make_run_id("relax", user, a);
    auto m = base_manifest("relax", user, a, run_id);
    ConicProgram cp = assemble(norm, user.k);

    std::cout << "relaxation order " << cp.k << ": " << cp.num_vars << " moments, "
              << cp.rows.size() << " equality rows, " << cp.blocks.size() << " PSD blocks";
    if (cp.dropped_liouville_rows > 0)
        std::cout << " (" << cp.dropped_liouville_rows << " truncation-dropped test rows)";
    std::cout << "\n";
    if (!cp.diagnostics.empty()) std::cout << "note: " << cp.diagnostics << "\n";
    for (const auto& b : cp.blocks)
        std::cout << "  block " << b.label << " dim " << b.structure.dim << "\n";

    fs::create_directories(a.out_dir);
    std::string path = a.out_dir + "/" + user.name + "_k" + std::to_string(cp.k) + ".dat-s";
    write_file(path, "\"run " + run_id + "\n" + export_interchange(cp));
    std::cout << "wrote " << path << "\n";
    m.files.push_back(path);
    m.status = "ok";
    m.finished = timestamp_utc();
    append_manifest(a.out_dir, m);
    return 0;
}

int cmd_synth(const CommonArgs& a, bool export_sdp, const std::string& import_solution_path,
              int grid_res) {
    SynthesisProblem user = load_with_overrides(a);
    SynthesisProblem norm = normalize(user);
    auto run_id = make_run_id("synth", user, a);
    auto m = base_manifest("synth", user, a, run_id);
    fs::create_directories(a.out_dir);

    ConicProgram cp = assemble(norm, user.k);
    std::cout << "assembled order-" << cp.k << " relaxation: " << cp.num_vars << " moments, "
              << cp.rows.size() << " rows, " << cp.blocks.size() << " blocks\n";

    if (export_sdp) {
        std::string path = a.out_dir + "/" + user.name + "_k" + std::to_string(cp.k) + ".dat-s";
        write_file(path, "\"run " + run_id + "\n" + export_interchange(cp));
        m.files.push_back(path);
        std::cout << "wrote " << path << "\n";
    }

    Eigen::VectorXd y;
    Eigen::VectorXd multipliers;
    bool have_duals = false;
    SolveReport rep;
    if (!import_solution_path.empty()) {
        std::ifstream in(import_solution_path);
        if (!in) throw std::runtime_error("cannot open '" + import_solution_path + "'");
        std::stringstream ss;
        ss << in.rdbuf();
        y = import_solution(cp, ss.str());
        auto chk = check_point(cp, y);
        std::cout << "imported solution: objective " << chk.objective << ", row residual "
                  << chk.max_row_residual_rel << ", min block eig " << chk.min_block_eig_rel
                  << "\n";
        rep.status = SolveStatus::Optimal;
        rep.primal_obj = chk.objective;
        rep.max_eq_residual = chk.max_row_residual_rel;
        rep.min_block_eig = chk.min_block_eig_rel;
        m.status = "imported";
    } else {
        SolveOptions opts;
        opts.feas_tol = a.feas_tol;
        opts.gap_tol = a.gap_tol;
        opts.max_iter = a.max_iter;
        auto res = solve(cp, opts);
        rep = res.report;
        y = res.y;
        multipliers = res.row_multipliers;
        have_duals = true;
        std::cout << "solve: status " << status_name(rep.status) << ", p* " << rep.primal_obj
                  << ", gap " << rep.rel_gap << ", residual " << rep.max_eq_residual
                  << ", min eig " << rep.min_block_eig << ", " << rep.iterations << " iterations, "
                  << rep.wall_time_s << " s\n";
        m.status = status_name(rep.status);
        if (rep.status != SolveStatus::Optimal && rep.status != SolveStatus::NearOptimal) {
            m.finished = timestamp_utc();
            m.pstar = rep.primal_obj;
            m.gap = rep.rel_gap;
            append_manifest(a.out_dir, m);
            std::cerr << "solver did not reach a usable optimum (" << status_name(rep.status)
                      << ": " << rep.message << ")\n";
            return 3;
        }
    }
    m.pstar = rep.primal_obj;
    m.gap = rep.rel_gap;

    // empty reachable set: report infeasible synthesis
    double vol = cp.lambda_volume;
    if (rep.primal_obj < 1e-6 * vol) {
        m.status = "infeasible";
        m.finished = timestamp_utc();
        append_manifest(a.out_dir, m);
        std::cerr << "status infeasible: certified reachable mass " << rep.primal_obj
                  << " is negligible against lambda(X) = " << vol << "\n";
        return 3;
    }

    PolynomialController ctrl = extract_controller(cp, y, user);
    std::string ctrl_path = a.out_dir + "/" + user.name + "_k" + std::to_string(cp.k) +
                            "_controller.txt";
    write_file(ctrl_path, "# run " + run_id + "\n" + save_controller(ctrl));
    m.files.push_back(ctrl_path);
    std::cout << "controller: residuals";
    for (double r : ctrl.residuals) std::cout << " " << r;
    std::cout << "; wrote " << ctrl_path << "\n";

    if (have_duals) {
        BRSCertificate cert = recover_certificate(cp, multipliers);
        auto check = validate_certificate(cert, norm, 4000, 1e-4, a.seed);
        std::cout << "certificate: dual objective " << cert.dual_objective << " (solver dual "
                  << rep.dual_obj << "), worst margin " << check.worst << " [" << check.worst_kind
                  << "]\n";
        std::string cert_path = a.out_dir + "/" + user.name + "_k" + std::to_string(cp.k) +
                                "_certificate.txt";
        write_file(cert_path, "# run " + run_id + "\n" + save_certificate(cert));
        m.files.push_back(cert_path);

        if (user.n() >= 2) {
            SetGeometry g = detect_geometry(user.bounding, user.ring, user.n());
            auto radii = coordinate_radii(g, user.n());
            std::array<double, 4> bounds{-radii[0], radii[0], -radii[1], radii[1]};
            Eigen::VectorXd base = Eigen::VectorXd::Zero(user.n());
            if (!user.ring.empty()) {
                for (const auto& [si, ci] : user.ring.pairs) base[ci] = 1.0;
            }
            LevelSetGrid grid =
                level_set_grid(cert.w, 0, 1, bounds, grid_res, grid_res, base);
            std::string grid_path = a.out_dir + "/" + user.name + "_k" +
                                    std::to_string(cp.k) + "_w.grid";
            write_file(grid_path,
                       write_grid(grid, run_id, {user.states[0], user.states[1]}, 1.0));
            m.files.push_back(grid_path);

            SvgPlot plot(bounds[0], bounds[1], bounds[2], bounds[3]);
            for (const auto& line : contour_polylines(grid, 1.0))
                plot.polyline(line, "#1f77b4", 1.5);
            std::string svg_path = a.out_dir + "/" + user.name + "_k" +
                                   std::to_string(cp.k) + "_w.svg";
            write_file(svg_path, plot.finish(user.name + " level set w = 1", run_id));
            m.files.push_back(svg_path);
            std::cout << "wrote " << grid_path << " and " << svg_path << "\n";
        }

        if (!check.ok) {
            m.status = "certificate-validation-failure";
            m.finished = timestamp_utc();
            append_manifest(a.out_dir, m);
            std::cerr << "certificate validation failure: margin " << check.worst << " ["
                      << check.worst_kind << "] at point "
                      << check.worst_point.transpose() << "\n";
            return 4;
        }
    } else {
        std::cout << "note: imported solutions carry no dual multipliers; certificate skipped\n";
    }

    m.finished = timestamp_utc();
    append_manifest(a.out_dir, m);
    return 0;
}

int cmd_simulate(const CommonArgs& a, const std::string& controller_path, int samples,
                 double radius, int dump_trajectories) {
    SynthesisProblem user = load_with_overrides(a);
    auto run_id = make_run_id("simulate", user, a);
    auto m = base_manifest("simulate", user, a, run_id);
    fs::create_directories(a.out_dir);

    ControlLaw law;
    if (!controller_path.empty()) {
        PolynomialController ctrl = load_controller_file(controller_path);
        if (ctrl.states != user.states)
            throw ValidationError("controller state list does not match the problem");
        law = ctrl.law();
    }

    BrsEstimate est = estimate_brs(user, law, samples, radius, a.seed);
    double frac = samples > 0 ? double(est.hits) / samples : 0.0;
    std::cout << "samples " << samples << ", hits " << est.hits << " (fraction " << frac
              << "), volume " << est.volume << " +- " << est.ci95 << " (95% CI), radius "
              << radius << "\n";
    if (!user.ring.empty() && !est.x0.empty()) {
        IntegrateOptions ropts;
        ropts.stop_in_target = user.mode == HorizonMode::FreeFinalTime;
        Trajectory probe = integrate(user, law, est.x0.front(), ropts);
        std::cout << "circle-embedding projections on the first rollout: "
                  << probe.ring_projections << "\n";
    }

    std::string csv_path = a.out_dir + "/" + user.name + "_samples.csv";
    write_file(csv_path, samples_csv(est, user.states, radius, run_id));
    m.files.push_back(csv_path);

    int dumped = 0;
    for (int i = 0; i < samples && dumped < dump_trajectories; ++i) {
        if (!est.success[i]) continue;
        IntegrateOptions opts;
        opts.stop_in_target = user.mode == HorizonMode::FreeFinalTime;
        Trajectory tr = integrate(user, law, est.x0[i], opts);
        std::string path =
            a.out_dir + "/" + user.name + "_traj" + std::to_string(dumped) + ".csv";
        write_file(path, trajectory_csv(tr, user.states, user.inputs, run_id));
        m.files.push_back(path);
        ++dumped;
    }

    m.status = "ok";
    m.brs_volume = est.volume;
    m.brs_ci = est.ci95;
    m.finished = timestamp_utc();
    append_manifest(a.out_dir, m);
    return 0;
}

int cmd_plot(const std::string& grid_path, const std::vector<std::string>& traj_paths,
             const std::string& out_path, double level) {
    std::ifstream in(grid_path);
    if (!in) throw std::runtime_error("cannot open grid '" + grid_path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    LevelSetGrid grid = parse_grid(ss.str());

    SvgPlot plot(grid.xlo, grid.xhi, grid.ylo, grid.yhi);
    for (const auto& line : contour_polylines(grid, level)) plot.polyline(line, "#1f77b4", 1.5);

    for (const auto& tp : traj_paths) {
        std::ifstream tin(tp);
        if (!tin) throw std::runtime_error("cannot open trajectory '" + tp + "'");
        std::string line;
        std::vector<std::array<double, 2>> pts;
        while (std::getline(tin, line)) {
            if (line.empty() || line[0] == '#' || line[0] == 't') continue;
            std::istringstream ls(line);
            std::string cell;
            std::vector<double> row;
            while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
            if (static_cast<int>(row.size()) > std::max(grid.axis_i, grid.axis_j) + 1)
                pts.push_back({row[grid.axis_i + 1], row[grid.axis_j + 1]});
        }
        plot.polyline(pts, "#d62728", 1.0);
        if (!pts.empty()) plot.point(pts.back()[0], pts.back()[1], "#d62728", 3.0);
    }
    write_file(out_path, plot.finish("level set " + std::to_string(level), "plot"));
    std::cout << "wrote " << out_path << "\n";
    return 0;
}

int cmd_check(const CommonArgs& a, const std::string& controller_path, int samples) {
    SynthesisProblem user = load_with_overrides(a);
    SynthesisProblem norm = normalize(user);
    ConicProgram cp = assemble(norm, user.k);

    ControlLaw law;
    if (!controller_path.empty()) law = load_controller_file(controller_path).law();

    CounterRng rng{a.seed};
    std::vector<Trajectory> trajs;
    std::vector<double> weights;
    IntegrateOptions opts;
    opts.hmax = user.horizon / 200.0;
    opts.stop_in_target = user.mode == HorizonMode::FreeFinalTime;
    SetGeometry g = detect_geometry(user.bounding, user.ring, user.n());
    double w = 0.5 * (g.exact ? g.volume() : 1.0) / std::max(1, samples);
    int discarded = 0;
    for (int s = 0; s < samples; ++s) {
        Eigen::VectorXd x0 = sample_bounding(user, rng, s);
        Trajectory tr = integrate(user, law, x0, opts);
        // The empirical family must be admissible for the final measure:
        // keep trajectories that stay in X and actually end in the target.
        bool admissible = tr.termination != Termination::LeftBounding &&
                          tr.termination != Termination::StepUnderflow;
        if (admissible) {
            if (user.mode == HorizonMode::FreeFinalTime)
                admissible = tr.termination == Termination::ReachedTargetEarly ||
                             in_set(user.target, tr.x.back(), 1e-6);
            else
                admissible = user.target.is_point()
                                 ? near_target(user.target, tr.x.back(), 0.02)
                                 : in_set(user.target, tr.x.back(), 1e-6);
        }
        if (!admissible) {
            ++discarded;
            continue;
        }
        trajs.push_back(std::move(tr));
        weights.push_back(w);
    }
    if (discarded > 0)
        std::cout << "discarded " << discarded << " of " << samples
                  << " trajectories that leave X or miss the target (the empirical"
                     " family keeps the admissible subset)\n";
    if (trajs.empty()) {
        std::cerr << "no admissible trajectories: nothing to check\n";
        return 4;
    }
    Eigen::VectorXd y = empirical_moments(cp, user, trajs, weights);
    auto chk = check_point(cp, y);
    std::cout << "empirical feasibility over " << trajs.size() << " trajectories: max row residual "
              << chk.max_row_residual_rel << ", min block eig " << chk.min_block_eig_rel
              << ", initial mass " << chk.objective << "\n";
    bool ok = chk.max_row_residual_rel <= 1e-2 && chk.min_block_eig_rel >= -1e-3;
    if (!ok) {
        std::cerr << "empirical moments violate the relaxation beyond tolerance\n";
        return 4;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"occupation-measure reachability controller synthesis"};
    app.require_subcommand(1);

    CommonArgs relax_args, synth_args, sim_args, check_args;
    bool export_sdp = false;
    std::string import_path, controller_path, grid_path, plot_out = "plot.svg";
    std::vector<std::string> traj_paths;
    int samples = 2000, dump_traj = 4, grid_res = 201, check_samples = 200;
    double radius = 0.1, level = 1.0;

    auto* relax = app.add_subcommand("relax", "assemble and export the relaxation");
    add_common(relax, relax_args, false);

    auto* synth = app.add_subcommand("synth", "full synthesis pipeline");
    add_common(synth, synth_args);
    synth->add_flag("--export-sdp", export_sdp, "also write the interchange file");
    synth->add_option("--import-solution", import_path,
                      "use an externally solved moment vector");
    synth->add_option("--grid-res", grid_res, "level-set grid resolution");
    synth->add_option("--seed", synth_args.seed, "random seed (default 0)");

    auto* simulate = app.add_subcommand("simulate", "closed-loop reachability estimate");
    add_common(simulate, sim_args, false);
    simulate->add_option("--controller", controller_path, "controller file (default: zero law)");
    simulate->add_option("--samples", samples, "number of initial conditions");
    simulate->add_option("--radius", radius, "success radius around the target");
    simulate->add_option("--seed", sim_args.seed, "random seed (default 0)");
    simulate->add_option("--dump-trajectories", dump_traj, "successful rollouts to dump as CSV");

    auto* plot = app.add_subcommand("plot", "render level-set contours and trajectories");
    plot->add_option("--grid", grid_path, "level-set grid file")->required();
    plot->add_option("--traj", traj_paths, "trajectory CSV overlays");
    plot->add_option("--level", level, "contour level");
    plot->add_option("--out", plot_out, "output SVG path");

    auto* check = app.add_subcommand("check", "empirical Liouville feasibility oracle");
    add_common(check, check_args, false);
    check->add_option("--controller", controller_path, "controller file (default: zero law)");
    check->add_option("--samples", check_samples, "trajectories to simulate");
    check->add_option("--seed", check_args.seed, "random seed (default 0)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (relax->parsed()) return cmd_relax(relax_args);
        if (synth->parsed()) {
            if (!synth->count("--seed")) std::cout << "seed 0 (default)\n";
            return cmd_synth(synth_args, export_sdp, import_path, grid_res);
        }
        if (simulate->parsed()) {
            if (!simulate->count("--seed")) std::cout << "seed 0 (default)\n";
            return cmd_simulate(sim_args, controller_path, samples, radius, dump_traj);
        }
        if (plot->parsed()) return cmd_plot(grid_path, traj_paths, plot_out, level);
        if (check->parsed()) {
            if (!check->count("--seed")) std::cout << "seed 0 (default)\n";
            return cmd_check(check_args, controller_path, check_samples);
        }
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return 2;
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
