#pragma once

#include <Eigen/Dense>
#include <vector>

#include "brs/relax.hpp"
#include "brs/sim.hpp"

namespace brs {

/// Truncated empirical moments of the measure tuple induced by closed-loop
/// trajectories of the user-form problem, expressed in the normalized
/// convention of the assembled program (time scaled to [0,1], inputs mapped
/// to [-1,1]). Trajectory j carries mass weights[j] in the initial measure.
/// Feeding the result to check_point realizes the Liouville oracle: admissible
/// trajectory families satisfy every equality row and keep all blocks PSD.
Eigen::VectorXd empirical_moments(const ConicProgram& cp, const SynthesisProblem& user,
                                  const std::vector<Trajectory>& trajs,
                                  const std::vector<double>& weights);

}  // namespace brs
