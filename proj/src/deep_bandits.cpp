#include <adaptive/deep_bandits.hpp>

#include <cmath>

namespace adaptive {

void ReplayQueue::push(Transition t) {
    if (capacity_ == 0)
        return;
    if (items_.size() == capacity_)
        items_.pop_front();
    items_.push_back(std::move(t));
}

ReplayQueue replay_push(ReplayQueue queue, Transition t) {
    queue.push(std::move(t));
    return queue;
}

FeatureExtractor::FeatureExtractor(std::size_t input_dim, std::size_t n_arms, std::vector<std::size_t> hidden,
                                   std::size_t feature_dim, std::uint64_t seed)
    : input_dim_(input_dim), feature_dim_(feature_dim) {
    if (n_arms == 0 || input_dim == 0 || feature_dim == 0)
        throw Error("input", "extractor dimensions must be positive");
    Rng rng = make_stream(seed, 0);
    hidden.push_back(feature_dim);
    std::size_t in = input_dim;
    for (const std::size_t out : hidden) {
        const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
        std::uniform_real_distribution<double> u(-limit, limit);
        DenseLayer layer{Matrix(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in)),
                         Vector::Zero(static_cast<Eigen::Index>(out))};
        for (Eigen::Index j = 0; j < layer.weights.cols(); ++j)
            for (Eigen::Index i = 0; i < layer.weights.rows(); ++i)
                layer.weights(i, j) = u(rng);
        layers_.push_back(std::move(layer));
        in = out;
    }
    const double limit = std::sqrt(6.0 / static_cast<double>(feature_dim + 1));
    std::uniform_real_distribution<double> u(-limit, limit);
    head_weights_.resize(static_cast<Eigen::Index>(n_arms), static_cast<Eigen::Index>(feature_dim));
    for (Eigen::Index j = 0; j < head_weights_.cols(); ++j)
        for (Eigen::Index i = 0; i < head_weights_.rows(); ++i)
            head_weights_(i, j) = u(rng);
    head_bias_ = Vector::Zero(static_cast<Eigen::Index>(n_arms));
}

FeatureExtractor FeatureExtractor::identity(std::size_t dim, std::size_t n_arms) {
    return from_parts(dim, {}, Matrix::Zero(static_cast<Eigen::Index>(n_arms), static_cast<Eigen::Index>(dim)),
                      Vector::Zero(static_cast<Eigen::Index>(n_arms)));
}

FeatureExtractor FeatureExtractor::from_parts(std::size_t input_dim, std::vector<DenseLayer> layers,
                                              Matrix head_weights, Vector head_bias) {
    FeatureExtractor f;
    f.input_dim_ = input_dim;
    std::size_t in = input_dim;
    for (const auto & l : layers) {
        if (static_cast<std::size_t>(l.weights.cols()) != in || l.bias.size() != l.weights.rows())
            throw Error("input", "inconsistent extractor layer shapes");
        in = static_cast<std::size_t>(l.weights.rows());
    }
    if (static_cast<std::size_t>(head_weights.cols()) != in || head_bias.size() != head_weights.rows())
        throw Error("input", "inconsistent extractor head shape");
    f.feature_dim_ = in;
    f.layers_ = std::move(layers);
    f.head_weights_ = std::move(head_weights);
    f.head_bias_ = std::move(head_bias);
    return f;
}

Vector FeatureExtractor::features(const ContextVector & x) const {
    if (static_cast<std::size_t>(x.size()) != input_dim_)
        throw Error("dimension", "context dimension does not match extractor input");
    Vector h = x;
    for (const auto & l : layers_)
        h = (l.weights * h + l.bias).array().tanh().matrix();
    return h;
}

double FeatureExtractor::predict(const ContextVector & x, std::size_t action) const {
    return head_weights_.row(static_cast<Eigen::Index>(action)).dot(features(x)) +
           head_bias_[static_cast<Eigen::Index>(action)];
}

std::size_t FeatureExtractor::parameter_count() const {
    std::size_t n = 0;
    for (const auto & l : layers_)
        n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
    return n + static_cast<std::size_t>(head_weights_.size() + head_bias_.size());
}

Vector FeatureExtractor::parameters() const {
    Vector p(static_cast<Eigen::Index>(parameter_count()));
    Eigen::Index at = 0;
    auto put = [&](const auto & block) {
        p.segment(at, block.size()) = Eigen::Map<const Vector>(block.data(), block.size());
        at += block.size();
    };
    for (const auto & l : layers_) {
        put(l.weights);
        put(l.bias);
    }
    put(head_weights_);
    put(head_bias_);
    return p;
}

void FeatureExtractor::set_parameters(const Vector & p) {
    if (static_cast<std::size_t>(p.size()) != parameter_count())
        throw Error("dimension", "parameter vector has the wrong length");
    Eigen::Index at = 0;
    auto take = [&](auto & block) {
        Eigen::Map<Vector>(block.data(), block.size()) = p.segment(at, block.size());
        at += block.size();
    };
    for (auto & l : layers_) {
        take(l.weights);
        take(l.bias);
    }
    take(head_weights_);
    take(head_bias_);
}

namespace {

struct Batch {
    Matrix inputs;  // n x d
    std::vector<std::size_t> actions;
    Vector rewards;
};

Batch make_batch(const ReplayQueue & queue, const FeatureExtractor & f) {
    if (queue.empty())
        throw Error("input", "replay queue is empty");
    const auto n = static_cast<Eigen::Index>(queue.size());
    Batch b{Matrix(n, static_cast<Eigen::Index>(f.input_dim())), {}, Vector(n)};
    Eigen::Index i = 0;
    for (const auto & t : queue.items()) {
        if (static_cast<std::size_t>(t.x.size()) != f.input_dim())
            throw Error("dimension", "replay context dimension does not match extractor");
        if (t.action >= f.n_arms())
            throw Error("input", "replay action out of range");
        b.inputs.row(i) = t.x.transpose();
        b.actions.push_back(t.action);
        b.rewards[i] = t.reward;
        ++i;
    }
    return b;
}

// Activations per layer (index 0 is the input).
std::vector<Matrix> forward(const FeatureExtractor & f, const Matrix & inputs) {
    std::vector<Matrix> acts{inputs};
    for (const auto & l : f.layers()) {
        Matrix z = acts.back() * l.weights.transpose();
        z.rowwise() += l.bias.transpose();
        acts.push_back(z.array().tanh().matrix());
    }
    return acts;
}

Vector residuals(const FeatureExtractor & f, const Batch & b, const Matrix & phi) {
    Vector e(b.rewards.size());
    for (Eigen::Index i = 0; i < e.size(); ++i) {
        const auto a = static_cast<Eigen::Index>(b.actions[static_cast<std::size_t>(i)]);
        e[i] = f.head_weights().row(a).dot(phi.row(i)) + f.head_bias()[a] - b.rewards[i];
    }
    return e;
}

double batch_loss(const FeatureExtractor & f, const Batch & b) {
    const auto acts = forward(f, b.inputs);
    const Vector e = residuals(f, b, acts.back());
    return 0.5 * e.squaredNorm() / static_cast<double>(e.size());
}

Vector batch_gradient(const FeatureExtractor & f, const Batch & b) {
    const auto acts = forward(f, b.inputs);
    const auto n = static_cast<double>(b.rewards.size());
    const Vector e = residuals(f, b, acts.back()) / n;

    Matrix d_head = Matrix::Zero(f.head_weights().rows(), f.head_weights().cols());
    Vector d_head_bias = Vector::Zero(f.head_bias().size());
    Matrix upstream(acts.back().rows(), acts.back().cols());
    for (Eigen::Index i = 0; i < e.size(); ++i) {
        const auto a = static_cast<Eigen::Index>(b.actions[static_cast<std::size_t>(i)]);
        d_head.row(a) += e[i] * acts.back().row(i);
        d_head_bias[a] += e[i];
        upstream.row(i) = e[i] * f.head_weights().row(a);
    }

    const auto & layers = f.layers();
    std::vector<Matrix> d_w(layers.size());
    std::vector<Vector> d_b(layers.size());
    for (std::size_t li = layers.size(); li-- > 0;) {
        const Matrix & out = acts[li + 1];
        const Matrix delta = upstream.cwiseProduct((1.0 - out.array().square()).matrix());
        d_w[li] = delta.transpose() * acts[li];
        d_b[li] = delta.colwise().sum().transpose();
        if (li > 0)
            upstream = delta * layers[li].weights;
    }

    Vector g(static_cast<Eigen::Index>(f.parameter_count()));
    Eigen::Index at = 0;
    auto put = [&](const auto & block) {
        g.segment(at, block.size()) = Eigen::Map<const Vector>(block.data(), block.size());
        at += block.size();
    };
    for (std::size_t li = 0; li < layers.size(); ++li) {
        put(d_w[li]);
        put(d_b[li]);
    }
    put(d_head);
    put(d_head_bias);
    return g;
}

} // namespace

double replay_loss(const FeatureExtractor & extractor, const ReplayQueue & queue) {
    return batch_loss(extractor, make_batch(queue, extractor));
}

Vector replay_loss_gradient(const FeatureExtractor & extractor, const ReplayQueue & queue) {
    return batch_gradient(extractor, make_batch(queue, extractor));
}

FeatureExtractor train_feature_extractor(const ReplayQueue & queue, FeatureExtractor extractor,
                                         const ExtractorHyper & hyper, std::vector<double> * loss_history) {
    const Batch batch = make_batch(queue, extractor);
    if (loss_history)
        loss_history->push_back(batch_loss(extractor, batch));
    Vector params = extractor.parameters();
    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        params -= hyper.step_size * batch_gradient(extractor, batch);
        extractor.set_parameters(params);
        if (loss_history)
            loss_history->push_back(batch_loss(extractor, batch));
    }
    return extractor;
}

Matrix NigArm::precision() const { return prior_precision + gram; }

Vector NigArm::mean() const {
    return precision().llt().solve(prior_precision * prior_mean + moment);
}

double NigArm::shape() const { return prior_shape + 0.5 * static_cast<double>(count); }

double NigArm::rate() const {
    const Vector m = mean();
    const double quad = sum_sq + prior_mean.dot(prior_precision * prior_mean) - m.dot(precision() * m);
    return prior_rate + 0.5 * std::max(quad, 0.0);
}

NigHead::NigHead(std::size_t n_arms, std::size_t p, const NigPrior & prior) : feature_dim(p) {
    if (n_arms == 0)
        throw Error("input", "head needs at least one arm");
    if (!(prior.precision > 0.0) || !(prior.shape > 0.0) || !(prior.rate > 0.0))
        throw Error("input", "NIG prior precision, shape and rate must be positive");
    const auto n = static_cast<Eigen::Index>(p);
    NigArm arm;
    arm.prior_mean = Vector::Constant(n, prior.mean);
    arm.prior_precision = prior.precision * Matrix::Identity(n, n);
    arm.prior_shape = prior.shape;
    arm.prior_rate = prior.rate;
    arm.gram = Matrix::Zero(n, n);
    arm.moment = Vector::Zero(n);
    arms.assign(n_arms, arm);
}

void NigHead::reset() {
    for (auto & arm : arms) {
        arm.gram.setZero();
        arm.moment.setZero();
        arm.sum_sq = 0.0;
        arm.count = 0;
    }
}

void neural_linear_update(NigHead & head, const Vector & features, std::size_t action, double reward) {
    if (action >= head.n_arms())
        throw Error("input", "action index out of range");
    if (static_cast<std::size_t>(features.size()) != head.feature_dim)
        throw Error("dimension", "feature dimension does not match head");
    require_finite(features, "features");
    require_finite(reward, "reward");
    auto & arm = head.arms[action];
    arm.gram.noalias() += features * features.transpose();
    arm.moment += reward * features;
    arm.sum_sq += reward * reward;
    ++arm.count;
    if (!(arm.rate() > 0.0) || !(arm.shape() > 0.0))
        throw Error("internal", "NIG posterior lost positivity");
}

std::size_t neural_linear_select(const FeatureExtractor & extractor, const NigHead & head,
                                 const ContextVector & x, Rng & rng) {
    const Vector phi = extractor.features(x);
    if (static_cast<std::size_t>(phi.size()) != head.feature_dim)
        throw Error("dimension", "feature dimension does not match head");
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector values(static_cast<Eigen::Index>(head.n_arms()));
    for (std::size_t k = 0; k < head.n_arms(); ++k) {
        const auto & arm = head.arms[k];
        std::gamma_distribution<double> gamma(arm.shape(), 1.0 / arm.rate());
        const double variance = 1.0 / gamma(rng);
        const Eigen::LLT<Matrix> llt(arm.precision());
        Vector z(phi.size());
        for (Eigen::Index i = 0; i < z.size(); ++i)
            z[i] = normal(rng);
        const Vector theta = llt.solve(arm.prior_precision * arm.prior_mean + arm.moment) +
                             std::sqrt(variance) * Vector(llt.matrixU().solve(z));
        values[static_cast<Eigen::Index>(k)] = phi.dot(theta);
    }
    return argmax_lowest(values);
}

NeuralLinearPolicy::NeuralLinearPolicy(const NeuralLinearConfig & config)
    : config_(config),
      extractor_(config.hidden.empty() && config.feature_dim == config.dim
                     ? FeatureExtractor::identity(config.dim, config.n_arms)
                     : FeatureExtractor(config.dim, config.n_arms, config.hidden, config.feature_dim,
                                        config.init_seed)),
      head_(config.n_arms, extractor_.feature_dim(), config.prior),
      replay_(config.replay_capacity) {}

std::size_t NeuralLinearPolicy::select(const ContextVector & x, Rng & rng) const {
    return neural_linear_select(extractor_, head_, x, rng);
}

void NeuralLinearPolicy::update(const ContextVector & x, std::size_t action, double reward) {
    neural_linear_update(head_, extractor_.features(x), action, reward);
    replay_.push({x, action, reward});
    ++interactions_;
    if (config_.retrain_every > 0 && interactions_ % config_.retrain_every == 0)
        retrain();
}

void NeuralLinearPolicy::retrain() {
    if (replay_.empty() || extractor_.layers().empty())
        return;
    extractor_ = train_feature_extractor(replay_, std::move(extractor_), config_.train);
    head_.reset();
    for (const auto & t : replay_.items())
        neural_linear_update(head_, extractor_.features(t.x), t.action, t.reward);
    ++retrains_;
}

void NeuralLinearPolicy::restore(FeatureExtractor extractor, NigHead head, ReplayQueue replay,
                                 std::uint64_t interactions, std::uint64_t retrains) {
    extractor_ = std::move(extractor);
    head_ = std::move(head);
    replay_ = std::move(replay);
    interactions_ = interactions;
    retrains_ = retrains;
}

EkfBelief::EkfBelief(std::size_t k, std::size_t d, double prior_scale, double q, double r)
    : n_arms(k), dim(d), process_noise(q), observation_noise(r) {
    if (k == 0)
        throw Error("input", "bandit needs at least one arm");
    if (!(prior_scale > 0.0) || q < 0.0 || !(r > 0.0))
        throw Error("input", "invalid EKF noise parameters");
    const auto n = static_cast<Eigen::Index>(k * d);
    mean = Vector::Zero(n);
    covariance = prior_scale * Matrix::Identity(n, n);
}

Vector EkfBelief::arm_mean(std::size_t k) const {
    return mean.segment(static_cast<Eigen::Index>(k * dim), static_cast<Eigen::Index>(dim));
}

Matrix EkfBelief::arm_covariance(std::size_t k) const {
    const auto at = static_cast<Eigen::Index>(k * dim);
    const auto n = static_cast<Eigen::Index>(dim);
    return covariance.block(at, at, n, n);
}

void ekf_update(EkfBelief & belief, const ContextVector & x, std::size_t action, double reward) {
    if (action >= belief.n_arms)
        throw Error("input", "action index out of range");
    if (static_cast<std::size_t>(x.size()) != belief.dim)
        throw Error("dimension", "context dimension does not match EKF belief");
    require_finite(x, "context");
    require_finite(reward, "reward");

    // Predict: random-walk coefficients.
    belief.covariance.diagonal().array() += belief.process_noise;

    // Update: observation r = h^T theta + noise, h = x placed in the action's block.
    const auto at = static_cast<Eigen::Index>(action * belief.dim);
    const auto d = static_cast<Eigen::Index>(belief.dim);
    const Vector ph = belief.covariance.middleCols(at, d) * x;  // P h
    const double innovation_var = x.dot(ph.segment(at, d)) + belief.observation_noise;
    const double innovation = reward - x.dot(belief.mean.segment(at, d));
    const Vector gain = ph / innovation_var;
    belief.mean += gain * innovation;
    belief.covariance.noalias() -= gain * ph.transpose();
    belief.covariance = 0.5 * (belief.covariance + belief.covariance.transpose()).eval();

    if ((belief.covariance.diagonal().array() < -1e-12).any())
        throw Error("internal", "EKF covariance lost positive semidefiniteness");
}

std::size_t ekf_select(const EkfBelief & belief, const ContextVector & x, Rng & rng) {
    if (static_cast<std::size_t>(x.size()) != belief.dim)
        throw Error("dimension", "context dimension does not match EKF belief");
    Vector values(static_cast<Eigen::Index>(belief.n_arms));
    for (std::size_t k = 0; k < belief.n_arms; ++k) {
        const Vector theta = sample_gaussian(belief.arm_mean(k), psd_sqrt(belief.arm_covariance(k)), rng);
        values[static_cast<Eigen::Index>(k)] = x.dot(theta);
    }
    return argmax_lowest(values);
}

} // namespace adaptive
