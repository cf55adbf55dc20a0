#pragma once

#include <Eigen/Dense>
#include <memory>
#include <string>
#include <vector>

#include "brs/moments.hpp"
#include "brs/problem.hpp"

namespace brs {

/// One measure's slot in the concatenated moment variable vector. Point
/// targets keep only time moments; the x-part is evaluated at the designated
/// point during pairing (a measure on a point is a scaled Dirac).
struct MeasureLayout {
    MeasureTag tag;
    std::shared_ptr<const Basis> basis;
    int offset = 0;
    bool point_target = false;
    std::vector<double> point;  // designated target coordinates (state order)

    int count() const { return basis->size(); }
};

enum class RowKind : std::uint8_t { Liouville, Slack, Lebesgue };

struct EqRow {
    RowKind kind;
    int channel = -1;       // Slack rows
    Monomial test_mono;     // generating monomial (tx ambient; x ambient for Lebesgue)
    std::vector<std::pair<int, double>> coeffs;
    double rhs = 0.0;
};

struct PsdBlock {
    MeasureTag measure;
    StructuredMatrix structure;  // local moment indices into the measure basis
    int offset = 0;              // global offset of the owning measure
    std::string label;
};

/// The order-k relaxation: equality system over concatenated truncated
/// moment sequences plus the PSD moment/localizing blocks, maximizing the
/// initial-measure mass.
struct ConicProgram {
    int k = 0;
    std::string source_hash;
    int num_vars = 0;
    HorizonMode mode = HorizonMode::FixedFinalTime;
    std::vector<MeasureLayout> measures;
    std::vector<EqRow> rows;
    std::vector<PsdBlock> blocks;
    std::vector<std::pair<int, double>> objective;  // maximized
    std::vector<double> var_scale;                  // per-degree radius balancing
    Eigen::VectorXd lebesgue;                       // lambda moments over the x basis
    std::shared_ptr<const Basis> tx_basis, x_basis;
    int dropped_liouville_rows = 0;
    double lambda_volume = 0.0;
    std::string diagnostics;  // e.g. quadrature fallback tolerance

    const MeasureLayout& measure(const MeasureTag& tag) const;
    double objective_value(const Eigen::VectorXd& y) const;
};

/// L_f v = dv/dt + sum_i dv/dx_i [f]_i, reduced modulo the ring.
Polynomial apply_Lf(const Polynomial& v, const std::vector<Polynomial>& f,
                    const QuotientRing& ring_tx);

/// [L_g v]_j = sum_i dv/dx_i [g]_{ij}, reduced modulo the ring.
std::vector<Polynomial> apply_Lg(const Polynomial& v,
                                 const std::vector<std::vector<Polynomial>>& g,
                                 const QuotientRing& ring_tx);

/// Assembles P_k for a normalized problem. Deterministic: identical inputs
/// produce identical layouts, row order and block order.
ConicProgram assemble(const SynthesisProblem& normalized, int k);

/// Residuals of a concrete moment assignment against the program.
struct PointCheck {
    double max_row_residual_rel = 0.0;
    double min_block_eig_rel = 0.0;  // relative to each block's max |entry|
    double objective = 0.0;
    int worst_row = -1;
};
PointCheck check_point(const ConicProgram& cp, const Eigen::VectorXd& y);

std::vector<MeasureTag> gamma_tags(int m);

}  // namespace brs
