#include "brs/validate.hpp"

#include <cmath>

#include "brs/moments.hpp"

namespace brs {

namespace {

void add_x_monos(const Basis& basis, const Eigen::VectorXd& x, double w, Eigen::VectorXd& out,
                 int offset) {
    std::span<const double> pt(x.data(), x.size());
    for (int i = 0; i < basis.size(); ++i) out[offset + i] += w * eval_monomial(basis.monos[i], pt);
}

}  // namespace

Eigen::VectorXd empirical_moments(const ConicProgram& cp, const SynthesisProblem& user,
                                  const std::vector<Trajectory>& trajs,
                                  const std::vector<double>& weights) {
    const int n = user.n(), m = user.m();
    const double T = user.horizon;
    const bool free_mode = cp.mode == HorizonMode::FreeFinalTime;
    Eigen::VectorXd y = Eigen::VectorXd::Zero(cp.num_vars);

    std::vector<double> mid(m, 0.0), halfw(m, 1.0);
    for (int j = 0; j < m; ++j) {
        mid[j] = 0.5 * (user.input_lo[j] + user.input_hi[j]);
        halfw[j] = 0.5 * (user.input_hi[j] - user.input_lo[j]);
    }

    const auto& mu = cp.measure({MeasureKind::Occupation, -1});
    const auto& mu0 = cp.measure({MeasureKind::Initial, -1});
    const auto& mu0h = cp.measure({MeasureKind::InitialSlack, -1});
    const auto& muT = cp.measure({MeasureKind::Final, -1});

    Eigen::VectorXd txpt(n + 1);
    auto tx_values = [&](double tau, const Eigen::VectorXd& x, Eigen::VectorXd& vals) {
        txpt[0] = tau;
        txpt.tail(n) = x;
        std::span<const double> pt(txpt.data(), txpt.size());
        for (int i = 0; i < mu.basis->size(); ++i)
            vals[i] = eval_monomial(mu.basis->monos[i], pt);
    };

    Eigen::VectorXd vals_a(mu.basis->size()), vals_b(mu.basis->size());
    for (std::size_t j = 0; j < trajs.size(); ++j) {
        const auto& tr = trajs[j];
        const double w = weights[j];
        add_x_monos(*mu0.basis, tr.x.front(), w, y, mu0.offset);

        // occupation and control measures via the trapezoid rule in tau = t/T
        tx_values(tr.t.front() / T, tr.x.front(), vals_a);
        for (std::size_t s = 0; s + 1 < tr.t.size(); ++s) {
            double dtau = (tr.t[s + 1] - tr.t[s]) / T;
            tx_values(tr.t[s + 1] / T, tr.x[s + 1], vals_b);
            for (int i = 0; i < mu.basis->size(); ++i) {
                double avg = 0.5 * (vals_a[i] + vals_b[i]);
                y[mu.offset + i] += w * dtau * avg;
            }
            for (int jc = 0; jc < m; ++jc) {
                double ua = (tr.u[s][jc] - mid[jc]) / halfw[jc];
                double ub = (tr.u[s + 1][jc] - mid[jc]) / halfw[jc];
                const auto& sp = cp.measure({MeasureKind::SigmaPlus, jc});
                const auto& sm = cp.measure({MeasureKind::SigmaMinus, jc});
                const auto& sh = cp.measure({MeasureKind::SigmaHat, jc});
                for (int i = 0; i < mu.basis->size(); ++i) {
                    double plus = 0.5 * (vals_a[i] * std::max(ua, 0.0) +
                                         vals_b[i] * std::max(ub, 0.0));
                    double minus = 0.5 * (vals_a[i] * std::max(-ua, 0.0) +
                                          vals_b[i] * std::max(-ub, 0.0));
                    double hat = 0.5 * (vals_a[i] * (1.0 - std::fabs(ua)) +
                                        vals_b[i] * (1.0 - std::fabs(ub)));
                    y[sp.offset + i] += w * dtau * plus;
                    y[sm.offset + i] += w * dtau * minus;
                    y[sh.offset + i] += w * dtau * hat;
                }
            }
            vals_a.swap(vals_b);
        }

        // final measure at the stop state
        double tau_stop = tr.stop_time / T;
        const Eigen::VectorXd& xs = tr.x.back();
        if (muT.point_target) {
            for (int a = 0; a <= muT.basis->maxdeg; ++a)
                y[muT.offset + a] += w * std::pow(tau_stop, a);
        } else if (free_mode) {
            txpt[0] = tau_stop;
            txpt.tail(n) = xs;
            std::span<const double> pt(txpt.data(), txpt.size());
            for (int i = 0; i < muT.basis->size(); ++i)
                y[muT.offset + i] += w * eval_monomial(muT.basis->monos[i], pt);
        } else {
            add_x_monos(*muT.basis, xs, w, y, muT.offset);
        }
    }

    // slack of the Lebesgue domination row
    y.segment(mu0h.offset, mu0h.count()) =
        cp.lebesgue - y.segment(mu0.offset, mu0.count());
    return y;
}

}  // namespace brs
