#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "brs/relax.hpp"

namespace brs {

struct SolveOptions {
    double feas_tol = 1e-7;
    double gap_tol = 1e-7;
    int max_iter = 200;
    bool verbose = false;
    // Asserts the algebraic gap identity each iteration (tests).
    bool check_identities = false;
};

enum class SolveStatus { Optimal, NearOptimal, Infeasible, IterationLimit, NumericalFailure };

std::string status_name(SolveStatus s);

struct SolveReport {
    SolveStatus status = SolveStatus::NumericalFailure;
    double primal_obj = 0.0;       // original units
    double dual_obj = 0.0;
    double rel_gap = 1.0;
    double max_eq_residual = 1.0;  // relative, over the original rows
    double min_block_eig = -1.0;   // relative, over the original blocks
    int iterations = 0;
    double wall_time_s = 0.0;
    int dropped_dependent_rows = 0;
    std::string message;
};

struct SolveResult {
    Eigen::VectorXd y;                // optimal moments, original scaling
    Eigen::VectorXd row_multipliers;  // one per program row (0 for eliminated rows)
    Eigen::VectorXd infeasibility_certificate;  // nonempty when status == Infeasible
    SolveReport report;
};

/// Infeasible-start primal-dual path following with Nesterov-Todd scaling and
/// a Mehrotra predictor-corrector, dense per-block linear algebra.
SolveResult solve(const ConicProgram& cp, const SolveOptions& opts = {});

// --- Sparse SDP interchange (SDPA .dat-s) ----------------------------------
// Equality rows are encoded as paired entries of one diagonal block; the
// writer is bit-exact with a documented canonical ordering (17 significant
// digits, entries sorted by matrix, block, row, column).

struct SdpaData {
    int m = 0;                    // number of scalar variables
    std::vector<int> block_sizes;  // negative size = diagonal block
    std::vector<double> c;
    struct Entry {
        int matno, block, i, j;  // 1-based, upper triangle
        double value;
        bool operator==(const Entry& o) const = default;
    };
    std::vector<Entry> entries;
    std::string comment;
};

SdpaData to_sdpa(const ConicProgram& cp);
std::string write_sdpa(const SdpaData& data);
SdpaData parse_sdpa(const std::string& text);
std::string export_interchange(const ConicProgram& cp);

/// Parses an externally produced solution ("blocks <n>" / "xvec <m>" followed
/// by the variable values) back into the program's moment vector.
Eigen::VectorXd import_solution(const ConicProgram& cp, const std::string& text);

}  // namespace brs
