#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <adaptive/common.hpp>
#include <adaptive/deep_bandits.hpp>
#include <adaptive/linear_bandits.hpp>
#include <adaptive/rmab.hpp>
#include <adaptive/survival.hpp>

namespace adaptive {

// Sub-stream ids split from an episode seed.
inline constexpr std::uint64_t kEnvironmentStream = 1;
inline constexpr std::uint64_t kPolicyStream = 2;

enum class ContextDistribution { standard_normal, uniform_cube, constant_ones };

ContextDistribution parse_context_distribution(const std::string & name);

/// Linear-reward contextual environment: r = x^T theta*_a + N(0, noise_sd^2).
struct LinearEnvSpec {
    std::size_t n_arms = 2;
    std::size_t dim = 1;
    std::vector<Vector> theta;
    double noise_sd = 0.0;
    ContextDistribution contexts = ContextDistribution::standard_normal;
    std::size_t horizon = 0;

    void validate() const;
};

/// Common surface of every contextual policy the harness drives.
class BanditPolicy {
    public:
        virtual ~BanditPolicy() = default;
        virtual std::size_t select(const ContextVector & x, Rng & rng) = 0;
        virtual void update(const ContextVector & x, std::size_t action, double reward) = 0;
        virtual std::string name() const = 0;
};

class LinUcbPolicy final : public BanditPolicy {
    public:
        explicit LinUcbPolicy(LinearBanditState state) : state_(std::move(state)) {}
        std::size_t select(const ContextVector & x, Rng &) override { return linucb_select(state_, x).action; }
        void update(const ContextVector & x, std::size_t a, double r) override { linucb_update(state_, x, a, r); }
        std::string name() const override { return "linucb"; }
        const LinearBanditState & state() const { return state_; }
        LinearBanditState & state() { return state_; }

    private:
        LinearBanditState state_;
};

class ThompsonPolicy final : public BanditPolicy {
    public:
        explicit ThompsonPolicy(PosteriorBelief belief) : belief_(std::move(belief)) {}
        std::size_t select(const ContextVector & x, Rng & rng) override { return ts_select(belief_, x, rng); }
        void update(const ContextVector & x, std::size_t a, double r) override { ts_update(belief_, x, a, r); }
        std::string name() const override { return "thompson"; }
        const PosteriorBelief & belief() const { return belief_; }
        PosteriorBelief & belief() { return belief_; }

    private:
        PosteriorBelief belief_;
};

class EkfPolicy final : public BanditPolicy {
    public:
        explicit EkfPolicy(EkfBelief belief) : belief_(std::move(belief)) {}
        std::size_t select(const ContextVector & x, Rng & rng) override { return ekf_select(belief_, x, rng); }
        void update(const ContextVector & x, std::size_t a, double r) override { ekf_update(belief_, x, a, r); }
        std::string name() const override { return "ekf"; }
        const EkfBelief & belief() const { return belief_; }
        EkfBelief & belief() { return belief_; }

    private:
        EkfBelief belief_;
};

class NeuralLinearAdapter final : public BanditPolicy {
    public:
        explicit NeuralLinearAdapter(NeuralLinearPolicy policy) : policy_(std::move(policy)) {}
        std::size_t select(const ContextVector & x, Rng & rng) override { return policy_.select(x, rng); }
        void update(const ContextVector & x, std::size_t a, double r) override { policy_.update(x, a, r); }
        std::string name() const override { return "neural-linear"; }
        const NeuralLinearPolicy & policy() const { return policy_; }
        NeuralLinearPolicy & policy() { return policy_; }

    private:
        NeuralLinearPolicy policy_;
};

class UniformRandomPolicy final : public BanditPolicy {
    public:
        explicit UniformRandomPolicy(std::size_t n_arms) : n_arms_(n_arms) {}
        std::size_t select(const ContextVector &, Rng & rng) override;
        void update(const ContextVector &, std::size_t, double) override {}
        std::string name() const override { return "uniform"; }

    private:
        std::size_t n_arms_;
};

/// Knows theta*; picks the best mean reward.
class OraclePolicy final : public BanditPolicy {
    public:
        explicit OraclePolicy(std::vector<Vector> theta) : theta_(std::move(theta)) {}
        std::size_t select(const ContextVector & x, Rng &) override;
        void update(const ContextVector &, std::size_t, double) override {}
        std::string name() const override { return "oracle"; }

    private:
        std::vector<Vector> theta_;
};

enum class EpisodeKind { bandit, rmab };

struct EpisodeResult {
    EpisodeKind kind = EpisodeKind::bandit;
    // bandit
    std::vector<std::size_t> actions;
    std::vector<double> rewards;
    std::vector<double> regret;             // noise-free gap per round
    std::vector<double> cumulative_regret;
    // rmab
    std::vector<double> total_reward;       // per round, sum of r(s')
    std::vector<std::map<std::string, double>> group_reward_mean;
    std::vector<Allocation> allocations;
};

/// Interaction loop stepped one round at a time, so a run can be paused,
/// checkpointed and resumed. Environment and policy draw from separate
/// sub-streams of the episode seed.
class BanditEpisode {
    public:
        BanditEpisode(LinearEnvSpec spec, std::uint64_t seed);
        /// Continue at `round` with saved streams. The result only covers
        /// rounds from `round` on.
        static BanditEpisode resume(LinearEnvSpec spec, std::size_t round, Rng environment, Rng policy);

        bool done() const { return round_ >= spec_.horizon; }
        std::size_t round() const { return round_; }
        void step(BanditPolicy & policy);

        const EpisodeResult & result() const { return result_; }
        Rng & environment_rng() { return env_rng_; }
        Rng & policy_rng() { return policy_rng_; }
        const LinearEnvSpec & spec() const { return spec_; }

    private:
        LinearEnvSpec spec_;
        Rng env_rng_;
        Rng policy_rng_;
        std::size_t round_ = 0;
        EpisodeResult result_;
};

EpisodeResult run_bandit_episode(const LinearEnvSpec & spec, BanditPolicy & policy, std::uint64_t seed);

/// Expected per-round regret of uniform play under standard-normal contexts
/// for K = 2 or K = 3 (closed form via pairwise differences).
double uniform_regret_per_round(const std::vector<Vector> & theta);

struct RmabEnvSpec {
    std::vector<TwoStateMdp> mdps;  // true dynamics per arm
    std::vector<std::string> ids;   // defaults to zero-padded positions
    std::vector<std::string> groups;
    std::vector<int> initial_states;
    std::size_t budget = 0;
    std::size_t horizon = 0;
    bool learn_dynamics = false;

    void validate() const;
    std::size_t n_arms() const { return mdps.size(); }
};

class Allocator {
    public:
        virtual ~Allocator() = default;
        virtual Allocation allocate(const std::vector<RmabArm> & arms, std::size_t budget, Rng & rng) = 0;
        virtual std::string name() const = 0;
};

class WhittleAllocator final : public Allocator {
    public:
        explicit WhittleAllocator(AllocateOptions options = {}) : options_(options) {}
        Allocation allocate(const std::vector<RmabArm> & arms, std::size_t budget, Rng & rng) override {
            return adaptive::allocate(arms, budget, rng, options_);
        }
        std::string name() const override { return "whittle"; }

    private:
        AllocateOptions options_;
};

class EquitableAllocator final : public Allocator {
    public:
        explicit EquitableAllocator(EquityConstraint equity, AllocateOptions options = {})
            : equity_(std::move(equity)), options_(options) {}
        Allocation allocate(const std::vector<RmabArm> & arms, std::size_t budget, Rng & rng) override {
            return equitable_allocate(arms, budget, equity_, rng, options_);
        }
        std::string name() const override { return "equitable"; }

    private:
        EquityConstraint equity_;
        AllocateOptions options_;
};

class RandomAllocator final : public Allocator {
    public:
        Allocation allocate(const std::vector<RmabArm> & arms, std::size_t budget, Rng & rng) override;
        std::string name() const override { return "random"; }
};

EpisodeResult run_rmab_episode(const RmabEnvSpec & spec, Allocator & allocator, std::uint64_t seed);

struct MetricRow {
    std::string scenario;
    std::string replication;  // index, or "all" for aggregates
    std::string round;        // index, "final", or "aggregate"
    std::string metric;
    double value = 0.0;

    bool operator==(const MetricRow &) const = default;
};

struct MetricsTable {
    std::vector<MetricRow> rows;

    /// Value of an aggregate row ("<metric>.mean" / "<metric>.sd").
    double aggregate(const std::string & metric) const;
    /// Final-round value of `metric` per replication, in replication order.
    std::vector<double> finals(const std::string & metric) const;
};

struct Scenario {
    std::string name;
    std::function<EpisodeResult(std::uint64_t seed)> run;
    std::size_t log_every = 0;  // per-round rows every n rounds; 0 disables
};

/// Replications use seeds base_seed + i.
MetricsTable replicate(const Scenario & scenario, std::size_t n_reps, std::uint64_t base_seed);

/// Per-replication summary metrics of one episode.
std::vector<std::pair<std::string, double>> episode_metrics(const EpisodeResult & result);

struct SurvivalCohortSpec {
    std::size_t n = 0;
    Vector weights;                // feature coefficients
    std::vector<double> baseline;  // per-period intercepts, one per period
    PeriodLayout layout;
    double censoring_rate = 0.0;
};

/// Features ~ N(0, I). Event period drawn from the logistic hazard; with
/// probability `censoring_rate` a censoring time ~ U(0, M] competes with it.
/// Subjects without an event by M are censored at M.
std::vector<SurvivalRecord> make_survival_cohort(const SurvivalCohortSpec & spec, std::uint64_t seed);

} // namespace adaptive
