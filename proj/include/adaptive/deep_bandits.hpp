#pragma once

#include <cstdint>
#include <deque>
#include <vector>

#include <adaptive/common.hpp>

namespace adaptive {

struct Transition {
    ContextVector x;
    std::size_t action = 0;
    double reward = 0.0;
};

/// Bounded FIFO of logged transitions; the oldest entry is evicted first.
class ReplayQueue {
    public:
        explicit ReplayQueue(std::size_t capacity = 1000) : capacity_(capacity) {}

        void push(Transition t);

        std::size_t size() const { return items_.size(); }
        std::size_t capacity() const { return capacity_; }
        bool empty() const { return items_.empty(); }
        const std::deque<Transition> & items() const { return items_; }

    private:
        std::size_t capacity_;
        std::deque<Transition> items_;
};

ReplayQueue replay_push(ReplayQueue queue, Transition t);

struct DenseLayer {
    Matrix weights;  // out x in
    Vector bias;
};

struct ExtractorHyper {
    double step_size = 0.05;
    int epochs = 100;
};

/// Fully connected tanh network x -> phi(x), plus a per-arm linear head that
/// is only used to train the representation. With no layers the extractor is
/// the identity map.
class FeatureExtractor {
    public:
        FeatureExtractor() = default;
        /// Layers input_dim -> hidden... -> feature_dim, Xavier-uniform init from `seed`.
        FeatureExtractor(std::size_t input_dim, std::size_t n_arms, std::vector<std::size_t> hidden,
                         std::size_t feature_dim, std::uint64_t seed);

        static FeatureExtractor identity(std::size_t dim, std::size_t n_arms);

        std::size_t input_dim() const { return input_dim_; }
        std::size_t feature_dim() const { return feature_dim_; }
        std::size_t n_arms() const { return static_cast<std::size_t>(head_weights_.rows()); }

        Vector features(const ContextVector & x) const;
        /// Training-head prediction for `action`.
        double predict(const ContextVector & x, std::size_t action) const;

        /// Flattened view of every trainable parameter (layers then head).
        Vector parameters() const;
        void set_parameters(const Vector & params);
        std::size_t parameter_count() const;

        const std::vector<DenseLayer> & layers() const { return layers_; }
        const Matrix & head_weights() const { return head_weights_; }
        const Vector & head_bias() const { return head_bias_; }

        /// Rebuild from stored parts (checkpoint loading).
        static FeatureExtractor from_parts(std::size_t input_dim, std::vector<DenseLayer> layers,
                                           Matrix head_weights, Vector head_bias);

    private:
        std::size_t input_dim_ = 0;
        std::size_t feature_dim_ = 0;
        std::vector<DenseLayer> layers_;
        Matrix head_weights_;  // n_arms x feature_dim
        Vector head_bias_;
};

/// Mean over the replay of 0.5 * (head_a(phi(x)) - r)^2 for the logged action.
double replay_loss(const FeatureExtractor & extractor, const ReplayQueue & queue);
/// Gradient of replay_loss with respect to FeatureExtractor::parameters().
Vector replay_loss_gradient(const FeatureExtractor & extractor, const ReplayQueue & queue);

/// Full-batch gradient descent on replay_loss. `loss_history`, when given,
/// receives the loss before the first epoch and after each epoch.
FeatureExtractor train_feature_extractor(const ReplayQueue & queue, FeatureExtractor extractor,
                                         const ExtractorHyper & hyper,
                                         std::vector<double> * loss_history = nullptr);

/// Normal-inverse-Gamma prior: theta | s2 ~ N(mean, s2 * precision^{-1}), s2 ~ IG(shape, rate).
struct NigPrior {
    double mean = 0.0;       // every coefficient
    double precision = 1.0;  // times the identity
    double shape = 1.0;
    double rate = 1.0;
};

/// Per-arm NIG posterior, kept as prior plus sufficient statistics so that
/// sequential and batch updates agree exactly.
struct NigArm {
    Vector prior_mean;
    Matrix prior_precision;
    double prior_shape = 1.0;
    double prior_rate = 1.0;

    Matrix gram;       // sum phi phi^T
    Vector moment;     // sum r phi
    double sum_sq = 0.0;
    std::uint64_t count = 0;

    Matrix precision() const;
    Vector mean() const;
    double shape() const;
    double rate() const;
};

struct NigHead {
    std::size_t feature_dim = 0;
    std::vector<NigArm> arms;

    NigHead() = default;
    NigHead(std::size_t n_arms, std::size_t feature_dim, const NigPrior & prior = {});

    std::size_t n_arms() const { return arms.size(); }
    /// Drop all observations, keeping the prior.
    void reset();
};

void neural_linear_update(NigHead & head, const Vector & features, std::size_t action, double reward);

/// Thompson draw (theta, s2) from each arm's NIG and argmax of phi^T theta.
std::size_t neural_linear_select(const FeatureExtractor & extractor, const NigHead & head,
                                 const ContextVector & x, Rng & rng);

struct NeuralLinearConfig {
    std::size_t n_arms = 2;
    std::size_t dim = 1;
    std::vector<std::size_t> hidden{32, 32};
    std::size_t feature_dim = 32;
    std::size_t replay_capacity = 1000;
    std::size_t retrain_every = 100;
    ExtractorHyper train;
    NigPrior prior;
    std::uint64_t init_seed = 0;
};

/// Extractor, head and replay wired together. The head is refit from the
/// whole replay after every retrain.
class NeuralLinearPolicy {
    public:
        explicit NeuralLinearPolicy(const NeuralLinearConfig & config);

        std::size_t select(const ContextVector & x, Rng & rng) const;
        void update(const ContextVector & x, std::size_t action, double reward);
        void retrain();

        const NeuralLinearConfig & config() const { return config_; }
        const FeatureExtractor & extractor() const { return extractor_; }
        const NigHead & head() const { return head_; }
        const ReplayQueue & replay() const { return replay_; }
        std::uint64_t interactions() const { return interactions_; }
        std::uint64_t retrain_count() const { return retrains_; }

        /// Restore from checkpointed parts.
        void restore(FeatureExtractor extractor, NigHead head, ReplayQueue replay, std::uint64_t interactions,
                     std::uint64_t retrains);

    private:
        NeuralLinearConfig config_;
        FeatureExtractor extractor_;
        NigHead head_;
        ReplayQueue replay_;
        std::uint64_t interactions_ = 0;
        std::uint64_t retrains_ = 0;
};

/// Stacked Gaussian belief over all arms' coefficients for the Kalman-filter bandit.
struct EkfBelief {
    std::size_t n_arms = 0;
    std::size_t dim = 0;
    Vector mean;        // n_arms * dim
    Matrix covariance;
    double process_noise = 0.0;      // q
    double observation_noise = 1.0;  // R

    EkfBelief() = default;
    EkfBelief(std::size_t n_arms, std::size_t dim, double prior_scale = 1.0, double process_noise = 0.0,
              double observation_noise = 1.0);

    Vector arm_mean(std::size_t k) const;
    Matrix arm_covariance(std::size_t k) const;
};

void ekf_update(EkfBelief & belief, const ContextVector & x, std::size_t action, double reward);
std::size_t ekf_select(const EkfBelief & belief, const ContextVector & x, Rng & rng);

} // namespace adaptive
