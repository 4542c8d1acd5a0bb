#include <adaptive/checkpoint.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace adaptive {

using ojson = nlohmann::ordered_json;

namespace {

ojson matrix_json(const Matrix & m) {
    ojson j;
    j["rows"] = m.rows();
    j["cols"] = m.cols();
    j["data"] = std::vector<double>(m.data(), m.data() + m.size());
    return j;
}

Matrix matrix_from(const nlohmann::json & j) {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto data = j.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != rows * cols)
        throw Error("checkpoint", "matrix payload has the wrong size");
    return Eigen::Map<const Matrix>(data.data(), rows, cols);
}

ojson vector_json(const Vector & v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector vector_from(const nlohmann::json & j) {
    const auto data = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(data.data(), static_cast<Eigen::Index>(data.size()));
}

ojson to_json(const LinearBanditState & s) {
    ojson j;
    j["dim"] = s.dim;
    j["ridge"] = s.ridge;
    j["alpha"] = s.alpha;
    for (const auto & a : s.arms)
        j["arms"].push_back({{"precision", matrix_json(a.precision)},
                             {"response", vector_json(a.response)},
                             {"count", a.count}});
    return j;
}

ojson to_json(const PosteriorBelief & s) {
    ojson j;
    j["dim"] = s.dim;
    j["noise_variance"] = s.noise_variance;
    j["prior_scale"] = s.prior_scale;
    for (const auto & a : s.arms)
        j["arms"].push_back({{"precision", matrix_json(a.precision)}, {"shift", vector_json(a.shift)}});
    return j;
}

ojson to_json(const EkfBelief & s) {
    ojson j;
    j["n_arms"] = s.n_arms;
    j["dim"] = s.dim;
    j["mean"] = vector_json(s.mean);
    j["covariance"] = matrix_json(s.covariance);
    j["process_noise"] = s.process_noise;
    j["observation_noise"] = s.observation_noise;
    return j;
}

ojson to_json(const NeuralLinearPolicy & p) {
    const auto & c = p.config();
    ojson j;
    j["config"] = {{"n_arms", c.n_arms},
                   {"dim", c.dim},
                   {"hidden", c.hidden},
                   {"feature_dim", c.feature_dim},
                   {"replay_capacity", c.replay_capacity},
                   {"retrain_every", c.retrain_every},
                   {"step_size", c.train.step_size},
                   {"epochs", c.train.epochs},
                   {"prior", {c.prior.mean, c.prior.precision, c.prior.shape, c.prior.rate}},
                   {"init_seed", c.init_seed}};
    const auto & f = p.extractor();
    ojson ex;
    ex["input_dim"] = f.input_dim();
    ex["layers"] = ojson::array();
    for (const auto & l : f.layers())
        ex["layers"].push_back({{"weights", matrix_json(l.weights)}, {"bias", vector_json(l.bias)}});
    ex["head_weights"] = matrix_json(f.head_weights());
    ex["head_bias"] = vector_json(f.head_bias());
    j["extractor"] = ex;
    ojson head;
    head["feature_dim"] = p.head().feature_dim;
    for (const auto & a : p.head().arms)
        head["arms"].push_back({{"prior_mean", vector_json(a.prior_mean)},
                                {"prior_precision", matrix_json(a.prior_precision)},
                                {"prior_shape", a.prior_shape},
                                {"prior_rate", a.prior_rate},
                                {"gram", matrix_json(a.gram)},
                                {"moment", vector_json(a.moment)},
                                {"sum_sq", a.sum_sq},
                                {"count", a.count}});
    j["head"] = head;
    ojson replay = ojson::array();
    for (const auto & t : p.replay().items())
        replay.push_back({{"x", vector_json(t.x)}, {"action", t.action}, {"reward", t.reward}});
    j["replay"] = replay;
    j["interactions"] = p.interactions();
    j["retrains"] = p.retrain_count();
    return j;
}

std::string rng_state(const Rng & rng) {
    std::ostringstream os;
    os << rng;
    return os.str();
}

Rng rng_from(const std::string & text) {
    Rng rng;
    std::istringstream is(text);
    is >> rng;
    if (!is)
        throw Error("checkpoint", "corrupt random stream state");
    return rng;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

} // namespace

std::string module_tag(const PolicyState & state) {
    return std::visit(
        [](const auto & s) -> std::string {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, LinearBanditState>) return "linucb";
            else if constexpr (std::is_same_v<T, PosteriorBelief>) return "thompson";
            else if constexpr (std::is_same_v<T, EkfBelief>) return "ekf";
            else return "neural-linear";
        },
        state);
}

std::uint64_t checksum_of(const std::string & payload) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const unsigned char c : payload) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

ojson state_to_json(const PolicyState & state) {
    return std::visit([](const auto & s) { return to_json(s); }, state);
}

PolicyState state_from_json(const std::string & module, const nlohmann::json & j) {
    try {
        if (module == "linucb") {
            LinearBanditState s;
            s.dim = j.at("dim").get<std::size_t>();
            s.ridge = j.at("ridge").get<double>();
            s.alpha = j.at("alpha").get<double>();
            for (const auto & a : j.at("arms"))
                s.arms.push_back({matrix_from(a.at("precision")), vector_from(a.at("response")),
                                  a.at("count").get<std::uint64_t>()});
            return s;
        }
        if (module == "thompson") {
            PosteriorBelief s;
            s.dim = j.at("dim").get<std::size_t>();
            s.noise_variance = j.at("noise_variance").get<double>();
            s.prior_scale = j.at("prior_scale").get<double>();
            for (const auto & a : j.at("arms"))
                s.arms.push_back({matrix_from(a.at("precision")), vector_from(a.at("shift"))});
            return s;
        }
        if (module == "ekf") {
            EkfBelief s;
            s.n_arms = j.at("n_arms").get<std::size_t>();
            s.dim = j.at("dim").get<std::size_t>();
            s.mean = vector_from(j.at("mean"));
            s.covariance = matrix_from(j.at("covariance"));
            s.process_noise = j.at("process_noise").get<double>();
            s.observation_noise = j.at("observation_noise").get<double>();
            return s;
        }
        if (module == "neural-linear") {
            const auto & c = j.at("config");
            NeuralLinearConfig cfg;
            cfg.n_arms = c.at("n_arms").get<std::size_t>();
            cfg.dim = c.at("dim").get<std::size_t>();
            cfg.hidden = c.at("hidden").get<std::vector<std::size_t>>();
            cfg.feature_dim = c.at("feature_dim").get<std::size_t>();
            cfg.replay_capacity = c.at("replay_capacity").get<std::size_t>();
            cfg.retrain_every = c.at("retrain_every").get<std::size_t>();
            cfg.train.step_size = c.at("step_size").get<double>();
            cfg.train.epochs = c.at("epochs").get<int>();
            const auto prior = c.at("prior").get<std::vector<double>>();
            cfg.prior = {prior.at(0), prior.at(1), prior.at(2), prior.at(3)};
            cfg.init_seed = c.at("init_seed").get<std::uint64_t>();

            const auto & ex = j.at("extractor");
            std::vector<DenseLayer> layers;
            for (const auto & l : ex.at("layers"))
                layers.push_back({matrix_from(l.at("weights")), vector_from(l.at("bias"))});
            auto extractor = FeatureExtractor::from_parts(ex.at("input_dim").get<std::size_t>(), std::move(layers),
                                                          matrix_from(ex.at("head_weights")),
                                                          vector_from(ex.at("head_bias")));
            NigHead head;
            head.feature_dim = j.at("head").at("feature_dim").get<std::size_t>();
            for (const auto & a : j.at("head").at("arms")) {
                NigArm arm;
                arm.prior_mean = vector_from(a.at("prior_mean"));
                arm.prior_precision = matrix_from(a.at("prior_precision"));
                arm.prior_shape = a.at("prior_shape").get<double>();
                arm.prior_rate = a.at("prior_rate").get<double>();
                arm.gram = matrix_from(a.at("gram"));
                arm.moment = vector_from(a.at("moment"));
                arm.sum_sq = a.at("sum_sq").get<double>();
                arm.count = a.at("count").get<std::uint64_t>();
                head.arms.push_back(std::move(arm));
            }
            ReplayQueue replay(cfg.replay_capacity);
            for (const auto & t : j.at("replay"))
                replay.push({vector_from(t.at("x")), t.at("action").get<std::size_t>(), t.at("reward").get<double>()});

            NeuralLinearPolicy policy(cfg);
            policy.restore(std::move(extractor), std::move(head), std::move(replay),
                           j.at("interactions").get<std::uint64_t>(), j.at("retrains").get<std::uint64_t>());
            return policy;
        }
    } catch (const nlohmann::json::exception & e) {
        throw Error("checkpoint", std::string("malformed checkpoint payload: ") + e.what());
    }
    throw Error("checkpoint", "unknown checkpoint module: " + module);
}

Checkpoint save_checkpoint(const PolicyState & state, const std::filesystem::path & path,
                           const std::vector<Rng> & streams) {
    ojson payload;
    payload["state"] = state_to_json(state);
    payload["streams"] = ojson::array();
    for (const auto & rng : streams)
        payload["streams"].push_back(rng_state(rng));
    const std::string body = payload.dump();

    Checkpoint ck{kCheckpointVersion, module_tag(state), state, streams, checksum_of(body)};
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw Error("io", "cannot write checkpoint: " + path.string());
        out << "adaptive-checkpoint " << ck.version << ' ' << ck.module << ' ' << body.size() << ' '
            << hex64(ck.checksum) << '\n'
            << body;
        if (!out)
            throw Error("io", "cannot write checkpoint: " + path.string());
    }
    std::filesystem::rename(tmp, path);
    return ck;
}

Checkpoint load_checkpoint(const std::filesystem::path & path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("checkpoint", "cannot open checkpoint: " + path.string());
    std::string header;
    if (!std::getline(in, header))
        throw Error("checkpoint", "checksum mismatch: empty checkpoint");
    std::istringstream hs(header);
    std::string magic, module, sum_hex;
    int version = 0;
    std::size_t length = 0;
    hs >> magic >> version >> module >> length >> sum_hex;
    if (magic != "adaptive-checkpoint")
        throw Error("checkpoint", "not a checkpoint file: " + path.string());
    if (version != kCheckpointVersion)
        throw Error("checkpoint", "unsupported checkpoint version " + std::to_string(version) + " (expected " +
                                      std::to_string(kCheckpointVersion) + ")");
    if (!hs)
        throw Error("checkpoint", "checksum mismatch: corrupt header");

    std::string body((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (body.size() != length || hex64(checksum_of(body)) != sum_hex)
        throw Error("checkpoint", "checksum mismatch");

    nlohmann::json payload;
    try {
        payload = nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error & e) {
        throw Error("checkpoint", std::string("malformed checkpoint payload: ") + e.what());
    }
    Checkpoint ck{version, module, state_from_json(module, payload.at("state")), {}, checksum_of(body)};
    for (const auto & s : payload.at("streams"))
        ck.streams.push_back(rng_from(s.get<std::string>()));
    return ck;
}

std::unique_ptr<BanditPolicy> make_policy(PolicyState state) {
    return std::visit(
        [](auto && s) -> std::unique_ptr<BanditPolicy> {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, LinearBanditState>)
                return std::make_unique<LinUcbPolicy>(std::move(s));
            else if constexpr (std::is_same_v<T, PosteriorBelief>)
                return std::make_unique<ThompsonPolicy>(std::move(s));
            else if constexpr (std::is_same_v<T, EkfBelief>)
                return std::make_unique<EkfPolicy>(std::move(s));
            else
                return std::make_unique<NeuralLinearAdapter>(std::move(s));
        },
        std::move(state));
}

PolicyState policy_state(const BanditPolicy & policy) {
    if (const auto * p = dynamic_cast<const LinUcbPolicy *>(&policy))
        return p->state();
    if (const auto * p = dynamic_cast<const ThompsonPolicy *>(&policy))
        return p->belief();
    if (const auto * p = dynamic_cast<const EkfPolicy *>(&policy))
        return p->belief();
    if (const auto * p = dynamic_cast<const NeuralLinearAdapter *>(&policy))
        return p->policy();
    throw Error("checkpoint", "policy '" + policy.name() + "' has no checkpointable state");
}

} // namespace adaptive
