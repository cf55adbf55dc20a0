#pragma once

#include <optional>
#include <string>
#include <vector>

#include "brs/poly.hpp"

namespace brs {

/// {x | h_i(x) >= 0 for all i}, optionally designated as a single point.
struct SemialgebraicSet {
    std::vector<Polynomial> inequalities;  // over state indeterminates
    std::optional<std::vector<double>> point;

    bool is_point() const { return point.has_value(); }
};

enum class HorizonMode { FixedFinalTime, FreeFinalTime };

/// Affine input map and time scale recorded by normalize() so controllers
/// can be mapped back to original units: u_orig = mid + halfw .* u_norm,
/// t_orig = T * t_norm.
struct NormalizationRecord {
    std::vector<double> mid;
    std::vector<double> halfw;
    double T = 1.0;
};

struct SynthesisProblem {
    std::string name;
    std::vector<std::string> states;           // x1..xn
    std::vector<std::string> inputs;           // u1..um (may be empty)
    std::vector<Polynomial> f;                 // n entries over (t, states)
    std::vector<std::vector<Polynomial>> g;    // n rows x m cols over (t, states)
    SemialgebraicSet bounding;                 // X
    SemialgebraicSet target;                   // X_T
    double horizon = 1.0;                      // T, original time units
    std::vector<double> input_lo, input_hi;    // a_j, b_j
    HorizonMode mode = HorizonMode::FixedFinalTime;
    QuotientRing ring;                         // over state indices
    int k = 2;                                 // default relaxation order

    std::optional<NormalizationRecord> normalization;  // set => internal scaled form

    int n() const { return static_cast<int>(states.size()); }
    int m() const { return static_cast<int>(inputs.size()); }
    std::vector<std::string> tx_names() const;
    QuotientRing ring_tx() const { return ring.shifted(1); }
    bool is_normalized() const { return normalization.has_value(); }
};

/// Throws ValidationError naming the violated invariant.
void validate_problem(const SynthesisProblem& p);

/// Equivalent problem with U = [-1,1]^m and the horizon rescaled to [0,1]
/// (dynamics multiplied by T). Idempotent on already-normalized problems.
SynthesisProblem normalize(const SynthesisProblem& p);

SynthesisProblem load_problem(const std::string& path);
SynthesisProblem parse_problem(const std::string& text, const std::string& origin = "<string>");
std::string save_problem(const SynthesisProblem& p);
void save_problem_file(const SynthesisProblem& p, const std::string& path);

/// Stable content hash of the canonical serialization.
std::string problem_hash(const SynthesisProblem& p);

std::uint64_t fnv1a64(const std::string& data);

}  // namespace brs
