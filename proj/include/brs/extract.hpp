#pragma once

#include <Eigen/Dense>
#include <array>
#include <string>
#include <vector>

#include "brs/relax.hpp"
#include "brs/sim.hpp"

namespace brs {

/// Saturating polynomial feedback law in original time and input units.
struct PolynomialController {
    std::string problem_name;
    std::vector<std::string> states;
    std::vector<std::string> inputs;
    std::vector<Polynomial> u;   // per channel, over (t, states)
    Eigen::VectorXd lo, hi;      // saturation box
    NormalizationRecord map;     // recorded input/time map from normalize()
    std::vector<double> residuals;  // relative LS residual per channel
    int k = 0;

    Eigen::VectorXd eval(double t, const Eigen::VectorXd& x) const;
    ControlLaw law() const;
};

/// Least-squares recovery of the polynomial control law from the optimal
/// moments: M_k(y_mu) vec(u_j) = y_{sigma+_j} - y_{sigma-_j}, Tikhonov
/// regularized with ridge * trace(M)/dim. Throws when the occupation measure
/// carries no mass (empty BRS).
PolynomialController extract_controller(const ConicProgram& cp, const Eigen::VectorXd& y,
                                        const SynthesisProblem& user, double ridge = 1e-8);

std::string save_controller(const PolynomialController& c);
void save_controller_file(const PolynomialController& c, const std::string& path);
PolynomialController load_controller(const std::string& text, const std::string& origin);
PolynomialController load_controller_file(const std::string& path);

/// Dual certificate recovered from the equality-row multipliers: w from the
/// Lebesgue rows, v from the Liouville rows, p_j from the slack rows.
/// {x | w(x) >= 1} is the BRS outer approximation.
struct BRSCertificate {
    Polynomial w;               // over states
    Polynomial v;               // over (t, states), scaled time in [0,1]
    std::vector<Polynomial> p;  // per channel, over (t, states)
    int k = 0;
    double dual_objective = 0.0;  // l^T vec(w)
};

BRSCertificate recover_certificate(const ConicProgram& cp, const Eigen::VectorXd& multipliers);

/// Pointwise validation of the certificate inequalities on seeded samples of
/// the normalized problem's domain.
struct CertificateCheck {
    bool ok = false;
    double worst = 0.0;  // most negative margin (relative)
    std::string worst_kind;
    Eigen::VectorXd worst_point;
};
CertificateCheck validate_certificate(const BRSCertificate& cert,
                                      const SynthesisProblem& normalized, int nsamples,
                                      double tol, std::uint64_t seed);

double dual_objective_of_w(const ConicProgram& cp, const Polynomial& w);

std::string save_certificate(const BRSCertificate& c);
void save_certificate_file(const BRSCertificate& c, const std::string& path);

// --- Level sets --------------------------------------------------------------

struct LevelSetGrid {
    int axis_i = 0, axis_j = 1;  // plotted state indices
    int nx = 0, ny = 0;
    double xlo = 0, xhi = 0, ylo = 0, yhi = 0;
    Eigen::VectorXd base;        // values of the remaining states
    std::vector<double> values;  // row-major, iy * nx + ix

    double x_of(int ix) const { return xlo + (xhi - xlo) * ix / (nx - 1); }
    double y_of(int iy) const { return ylo + (yhi - ylo) * iy / (ny - 1); }
};

/// Evaluates w over a 2-D slice grid (other states fixed at `base`).
LevelSetGrid level_set_grid(const Polynomial& w, int axis_i, int axis_j,
                            std::array<double, 4> bounds, int nx, int ny,
                            const Eigen::VectorXd& base);

/// Marching-squares contour at `level`, chained into polylines.
std::vector<std::vector<std::array<double, 2>>> contour_polylines(const LevelSetGrid& grid,
                                                                  double level);

std::string write_grid(const LevelSetGrid& g, const std::string& run_id,
                       const std::vector<std::string>& axis_names, double level);
LevelSetGrid parse_grid(const std::string& text);

}  // namespace brs
