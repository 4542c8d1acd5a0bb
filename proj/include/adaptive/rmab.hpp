#pragma once

#include <array>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include <adaptive/common.hpp>

namespace adaptive {

inline constexpr int kPassive = 0;
inline constexpr int kActive = 1;

/// Binary-state arm MDP. transition[a][s][s2] = P(s2 | s, a).
struct TwoStateMdp {
    std::array<std::array<std::array<double, 2>, 2>, 2> transition{};
    std::array<double, 2> reward{0.0, 1.0};
    double discount = 0.9;

    /// Build from the probabilities of landing in state 1.
    static TwoStateMdp from_good_probs(double passive_from0, double passive_from1, double active_from0,
                                       double active_from1, double discount = 0.9);

    /// P(s' = 1 | s, a)
    double good_prob(int action, int state) const { return transition[action][state][1]; }

    /// Throws unless every row is a distribution and 0 < discount < 1.
    void validate() const;

    bool operator==(const TwoStateMdp &) const = default;
};

/// Solution of the subsidy MDP: resting earns r(s) + subsidy.
struct SubsidySolution {
    std::array<double, 2> value{};
    std::array<double, 2> q_passive{};
    std::array<double, 2> q_active{};
    std::array<bool, 2> passive_optimal{};
    int iterations = 0;
    double residual = 0.0;  // sup-norm Bellman residual at return
};

inline constexpr double kPassiveMargin = 1e-9;

SubsidySolution value_iteration(const TwoStateMdp & mdp, double subsidy, double tolerance = 1e-9);

/// Same fixed point by policy iteration; exact up to rounding.
SubsidySolution solve_subsidy_mdp(const TwoStateMdp & mdp, double subsidy);

/// Half-width of the subsidy bracket: 2 / (1 - discount), scaled by the reward magnitude.
double subsidy_bracket(const TwoStateMdp & mdp);

/// Smallest subsidy making rest weakly optimal at `state`, by bisection.
double whittle_index(const TwoStateMdp & mdp, int state);

/// Sweep the bracket at `resolution` and verify the set of states preferring
/// rest never shrinks.
bool check_indexability(const TwoStateMdp & mdp, double resolution = 1e-3);

/// Beta posteriors over P(s' = 1 | s, a), Beta(1, 1) initially.
struct DynamicsBelief {
    std::array<std::array<double, 2>, 2> alpha{{{1.0, 1.0}, {1.0, 1.0}}};
    std::array<std::array<double, 2>, 2> beta{{{1.0, 1.0}, {1.0, 1.0}}};
    std::array<double, 2> reward{0.0, 1.0};
    double discount = 0.9;

    double mean(int action, int state) const;
    TwoStateMdp sample(Rng & rng) const;
    TwoStateMdp posterior_mean() const;
};

void update_dynamics(DynamicsBelief & belief, int action, int state, int next_state);

struct RmabArm {
    std::string id;
    int state = 0;
    std::variant<TwoStateMdp, DynamicsBelief> dynamics;
    std::string group;
};

struct Allocation {
    std::size_t round = 0;
    std::vector<std::size_t> acted;        // positions into the arm list, ascending
    std::vector<std::string> acted_ids;    // same order as `acted`
    std::vector<double> indices;           // per arm, input order
    std::map<std::string, std::size_t> group_counts;
    std::map<std::string, double> group_mean_index;
    bool indexable = true;
};

struct AllocateOptions {
    /// Only arms with known dynamics are checked; results are memoized.
    bool check_indexability = true;
    double indexability_resolution = 1e-3;
};

/// Whittle-index top-k. Arms with learned dynamics are scored on a model
/// sampled from their belief.
Allocation allocate(const std::vector<RmabArm> & arms, std::size_t budget, Rng & rng,
                    const AllocateOptions & options = {});

/// Per-group floors: a group with fraction f first gets its floor(f * k)
/// best arms; the rest of the budget goes to the best remaining indices.
struct EquityConstraint {
    double min_fraction = 0.0;                     // applied to every group
    std::map<std::string, double> group_fraction;  // overrides per group
};

Allocation equitable_allocate(const std::vector<RmabArm> & arms, std::size_t budget,
                              const EquityConstraint & equity, Rng & rng, const AllocateOptions & options = {});

/// Whittle indices for every arm at its current state, as used by allocate.
std::vector<double> arm_indices(const std::vector<RmabArm> & arms, Rng & rng, const AllocateOptions & options,
                                bool & indexable);

} // namespace adaptive
