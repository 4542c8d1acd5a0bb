#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <adaptive/common.hpp>
#include <adaptive/linear_bandits.hpp>

namespace adaptive {

enum class AssignmentUnit { individual, cluster };
enum class Mechanism { fixed_random, adaptive, micro_randomized };

struct ExperimentDesign {
    AssignmentUnit unit = AssignmentUnit::individual;
    Mechanism mechanism = Mechanism::fixed_random;
    std::vector<std::string> arm_labels{"control", "treatment"};
    /// fixed_random: per-arm probabilities, non-negative and summing to 1.
    std::vector<double> arm_probabilities{0.5, 0.5};
    /// micro_randomized: treatment probability per decision point; the last
    /// entry applies to every later point.
    std::vector<double> treatment_probability{0.5};
    std::uint64_t seed = 0;

    void validate() const;
    double treatment_probability_at(std::size_t decision_point) const;
};

/// One logged assignment. `propensity` is the probability with which the
/// assigned arm was drawn, recorded at draw time and never recomputed.
struct AssignmentRecord {
    std::string unit_id;
    std::optional<std::string> cluster_id;
    std::size_t decision_point = 0;
    std::size_t arm = 0;
    double propensity = 1.0;
    std::int64_t timestamp = 0;

    bool operator==(const AssignmentRecord &) const = default;
};

/// Fixed-random assignment with a per-experiment cluster cache: every unit of
/// a cluster receives the arm drawn for the cluster's first unit.
class Assigner {
    public:
        explicit Assigner(ExperimentDesign design);

        AssignmentRecord assign(const std::string & unit_id, const std::optional<std::string> & cluster_id, Rng & rng,
                                std::size_t decision_point = 0, std::int64_t timestamp = 0);

        const ExperimentDesign & design() const { return design_; }

    private:
        ExperimentDesign design_;
        std::map<std::string, std::size_t> cluster_arm_;
};

/// Thompson-sampling assignment. The chosen arm is the first posterior draw;
/// its propensity is the Monte Carlo frequency over `n_samples` draws that
/// include that first one, so it is always positive.
AssignmentRecord adaptive_assign(const ExperimentDesign & design, const PosteriorBelief & policy,
                                 const ContextVector & x, const std::string & unit_id, Rng & rng,
                                 std::size_t n_samples = kDefaultPropensitySamples, std::size_t decision_point = 0,
                                 std::int64_t timestamp = 0);

/// Bernoulli(p_t) treatment at one decision point. arm 1 = treated.
AssignmentRecord mrt_randomize(const ExperimentDesign & design, const std::string & unit_id,
                               std::size_t decision_point, Rng & rng);

struct Outcome {
    AssignmentRecord record;
    double reward = 0.0;
};

enum class Estimator { difference_in_means, ipw };

struct EffectEstimate {
    double estimate = 0.0;
    double standard_error = 0.0;
    std::string estimator;
    std::size_t sample_size = 0;
};

/// Treatment (arm 1) versus control (arm 0).
EffectEstimate estimate_effect(std::span<const Outcome> outcomes, Estimator estimator);

Estimator parse_estimator(const std::string & name);

/// Line-delimited JSON: unit, cluster, decision_point, arm, propensity, reward.
void write_experiment_log(std::ostream & out, std::span<const Outcome> outcomes);
std::vector<Outcome> read_experiment_log(std::istream & in);

} // namespace adaptive
