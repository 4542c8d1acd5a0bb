#include <adaptive/config.hpp>

#include <fstream>
#include <set>

namespace adaptive {

using ojson = nlohmann::ordered_json;

namespace {

enum class Type { count, number, string, boolean, array, object };

struct Field {
    std::string name;
    Type type = Type::string;
    bool required = false;
    ojson fallback = nullptr;      // default; null means "no default"
    std::vector<Field> children;   // object fields, or array item fields
    bool input_path = false;
    bool free_form = false;        // object/array items not validated here
};

Field make(std::string name, Type t, bool required, ojson def = nullptr) {
    Field f;
    f.name = std::move(name);
    f.type = t;
    f.required = required;
    f.fallback = std::move(def);
    return f;
}
Field req(std::string name, Type t) { return make(std::move(name), t, true); }
Field opt(std::string name, Type t, ojson def = nullptr) { return make(std::move(name), t, false, std::move(def)); }
Field path(std::string name, bool required) {
    Field f = make(std::move(name), Type::string, required);
    f.input_path = true;
    return f;
}
Field object(std::string name, bool required, std::vector<Field> children) {
    Field f = make(std::move(name), Type::object, required, required ? ojson(nullptr) : ojson::object());
    f.children = std::move(children);
    return f;
}
Field free_object(std::string name, bool required) {
    Field f = make(std::move(name), Type::object, required, required ? ojson(nullptr) : ojson::object());
    f.free_form = true;
    return f;
}
Field object_array(std::string name, bool required, std::vector<Field> items) {
    Field f = make(std::move(name), Type::array, required);
    f.children = std::move(items);
    return f;
}

const char * type_name(Type t) {
    switch (t) {
        case Type::count: return "non-negative integer";
        case Type::number: return "number";
        case Type::string: return "string";
        case Type::boolean: return "boolean";
        case Type::array: return "array";
        case Type::object: return "object";
    }
    return "value";
}

bool type_ok(const ojson & v, Type t) {
    switch (t) {
        case Type::count: return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
        case Type::number: return v.is_number();
        case Type::string: return v.is_string();
        case Type::boolean: return v.is_boolean();
        case Type::array: return v.is_array();
        case Type::object: return v.is_object();
    }
    return false;
}

std::string join(const std::string & prefix, const std::string & key) {
    return prefix.empty() ? key : prefix + "." + key;
}

ojson resolve(const ojson & node, const std::vector<Field> & fields, const std::string & prefix,
              const std::filesystem::path & base_dir);

ojson resolve_value(const ojson & v, const Field & f, const std::string & where,
                    const std::filesystem::path & base_dir) {
    if (!type_ok(v, f.type))
        throw Error("config", "type mismatch at '" + where + "': expected " + type_name(f.type));
    if (f.input_path) {
        const std::filesystem::path p = base_dir / v.get<std::string>();
        if (!std::filesystem::exists(p))
            throw Error("config", "file referenced by '" + where + "' does not exist: " + p.string());
    }
    if (f.free_form)
        return v;
    if (f.type == Type::object && !f.children.empty())
        return resolve(v, f.children, where, base_dir);
    if (f.type == Type::array && !f.children.empty()) {
        ojson out = ojson::array();
        for (std::size_t i = 0; i < v.size(); ++i)
            out.push_back(resolve(v[i], f.children, where + "[" + std::to_string(i) + "]", base_dir));
        return out;
    }
    return v;
}

ojson resolve(const ojson & node, const std::vector<Field> & fields, const std::string & prefix,
              const std::filesystem::path & base_dir) {
    if (!node.is_object())
        throw Error("config", "type mismatch at '" + (prefix.empty() ? std::string("<root>") : prefix) +
                                  "': expected object");
    std::set<std::string> known;
    for (const auto & f : fields)
        known.insert(f.name);
    for (const auto & [key, _] : node.items())
        if (!known.count(key))
            throw Error("config", "unknown key: " + join(prefix, key));

    ojson out = ojson::object();
    for (const auto & f : fields) {
        const std::string where = join(prefix, f.name);
        if (node.contains(f.name)) {
            out[f.name] = resolve_value(node.at(f.name), f, where, base_dir);
        } else if (f.required) {
            throw Error("config", "missing required field: " + where);
        } else if (!f.fallback.is_null()) {
            out[f.name] = resolve_value(f.fallback, f, where, base_dir);
        }
    }
    return out;
}

std::vector<Field> policy_fields(bool with_arms) {
    std::vector<Field> f{
        req("type", Type::string),
        opt("ridge", Type::number, 1.0),
        opt("alpha", Type::number, 1.0),
        opt("noise_variance", Type::number, 1.0),
        opt("prior_scale", Type::number, 1.0),
        opt("process_noise", Type::number, 0.0),
        opt("observation_noise", Type::number, 1.0),
        opt("hidden", Type::array, ojson::array({32, 32})),
        opt("feature_dim", Type::count, 32),
        opt("replay_capacity", Type::count, 1000),
        opt("retrain_every", Type::count, 100),
        opt("step_size", Type::number, 0.05),
        opt("epochs", Type::count, 100),
    };
    if (with_arms) {
        f.push_back(req("arms", Type::count));
    }
    return f;
}

std::vector<Field> fields_for(ScenarioKind kind) {
    std::vector<Field> f{req("kind", Type::string), opt("name", Type::string), req("seed", Type::count)};
    auto add = [&f](std::vector<Field> more) { f.insert(f.end(), more.begin(), more.end()); };

    switch (kind) {
        case ScenarioKind::bandit_sim:
            add({opt("replications", Type::count, 1), opt("log_every", Type::count, 0),
                 object("environment", true,
                        {req("arms", Type::count), req("dim", Type::count), req("theta", Type::array),
                         opt("noise_sd", Type::number, 0.5), opt("contexts", Type::string, "standard_normal"),
                         req("horizon", Type::count)}),
                 object_array("policies", true, policy_fields(false))});
            break;
        case ScenarioKind::rmab_sim:
            add({opt("replications", Type::count, 1), opt("log_every", Type::count, 0),
                 object("environment", true,
                        {opt("discount", Type::number, 0.9), req("budget", Type::count), req("horizon", Type::count),
                         opt("learn_dynamics", Type::boolean, false),
                         object_array("templates", true,
                                      {req("name", Type::string), opt("group", Type::string, ""),
                                       req("count", Type::count), req("passive", Type::array),
                                       req("active", Type::array), opt("initial_state", Type::count, 1)})}),
                 object_array("allocators", true,
                              {req("type", Type::string), opt("min_fraction", Type::number, 0.0),
                               opt("check_indexability", Type::boolean, true),
                               opt("learn_dynamics", Type::boolean)})});
            break;
        case ScenarioKind::survival_fit:
            add({path("data", false), opt("censor_coding", Type::string, "one_means_censored"),
                 [] {
                     Field s = object("synthetic", false,
                                      {req("n", Type::count), req("weights", Type::array),
                                       req("baseline", Type::array), opt("censoring_rate", Type::number, 0.0)});
                     s.fallback = nullptr;
                     return s;
                 }(),
                 object("layout", true, {req("max_followup", Type::number), opt("period", Type::number, 1.0)}),
                 object("hyper", false,
                        {opt("l2", Type::number, 1e-2), opt("max_iterations", Type::count, 100),
                         opt("tolerance", Type::number, 1e-8)}),
                 opt("horizon", Type::count)});
            break;
        case ScenarioKind::experiment:
            add({object("design", true,
                        {opt("unit", Type::string, "individual"), opt("mechanism", Type::string, "fixed_random"),
                         opt("arms", Type::array, ojson::array({"control", "treatment"})),
                         opt("probabilities", Type::array, ojson::array({0.5, 0.5})),
                         opt("treatment_probability", Type::array, ojson::array({0.5})),
                         opt("propensity_samples", Type::count, 1000)}),
                 [] {
                     Field s = object("simulation", false,
                                      {opt("units", Type::count, 100), opt("clusters", Type::count, 0),
                                       opt("decision_points", Type::count, 1), opt("baseline", Type::number, 0.0),
                                       opt("effect", Type::number, 0.3), opt("noise_sd", Type::number, 1.0)});
                     s.fallback = nullptr;
                     return s;
                 }(),
                 path("log", false), opt("estimator", Type::string, "ipw")});
            break;
        case ScenarioKind::decide:
            add({path("events", true), free_object("traits", true),
                 [] {
                     Field s = object("schema", true, {req("columns", Type::array)});
                     return s;
                 }(),
                 req("now", Type::string), opt("subjects", Type::array), object("policy", true, policy_fields(true)),
                 path("checkpoint_in", false), path("feedback", false), opt("propensity_samples", Type::count, 1000)});
            break;
        case ScenarioKind::allocate:
            add({path("cohort", true), req("budget", Type::count),
                 object("equity", false, {opt("min_fraction", Type::number, 0.0), free_object("groups", false)}),
                 opt("check_indexability", Type::boolean, true)});
            break;
    }
    return f;
}

std::vector<double> numbers(const ojson & arr, const std::string & what) {
    std::vector<double> out;
    for (const auto & v : arr) {
        if (!v.is_number())
            throw Error("config", "type mismatch at '" + what + "': expected numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

Vector to_vector(const std::vector<double> & v) {
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

} // namespace

ScenarioKind parse_scenario_kind(const std::string & name) {
    if (name == "bandit-sim") return ScenarioKind::bandit_sim;
    if (name == "rmab-sim") return ScenarioKind::rmab_sim;
    if (name == "survival-fit") return ScenarioKind::survival_fit;
    if (name == "experiment") return ScenarioKind::experiment;
    if (name == "decide") return ScenarioKind::decide;
    if (name == "allocate") return ScenarioKind::allocate;
    throw Error("config", "unknown scenario kind: " + name);
}

std::string to_string(ScenarioKind kind) {
    switch (kind) {
        case ScenarioKind::bandit_sim: return "bandit-sim";
        case ScenarioKind::rmab_sim: return "rmab-sim";
        case ScenarioKind::survival_fit: return "survival-fit";
        case ScenarioKind::experiment: return "experiment";
        case ScenarioKind::decide: return "decide";
        case ScenarioKind::allocate: return "allocate";
    }
    return "bandit-sim";
}

std::filesystem::path ScenarioConfig::path(const ojson & node, const std::string & key) const {
    return base_dir / node.at(key).get<std::string>();
}

ScenarioConfig parse_scenario(const ojson & raw, const std::filesystem::path & base_dir) {
    if (!raw.is_object())
        throw Error("config", "type mismatch at '<root>': expected object");
    if (!raw.contains("kind"))
        throw Error("config", "missing required field: kind");
    if (!raw.at("kind").is_string())
        throw Error("config", "type mismatch at 'kind': expected string");

    ScenarioConfig cfg;
    cfg.kind = parse_scenario_kind(raw.at("kind").get<std::string>());
    cfg.base_dir = base_dir;
    cfg.resolved = resolve(raw, fields_for(cfg.kind), "", base_dir);
    if (!cfg.resolved.contains("name"))
        cfg.resolved["name"] = to_string(cfg.kind);
    cfg.name = cfg.resolved.at("name").get<std::string>();
    cfg.seed = cfg.resolved.at("seed").get<std::uint64_t>();

    if (cfg.kind == ScenarioKind::survival_fit &&
        cfg.resolved.contains("data") == cfg.resolved.contains("synthetic"))
        throw Error("config", "survival-fit needs exactly one of 'data' or 'synthetic'");
    if (cfg.kind == ScenarioKind::experiment &&
        cfg.resolved.contains("log") == cfg.resolved.contains("simulation"))
        throw Error("config", "experiment needs exactly one of 'log' or 'simulation'");
    return cfg;
}

ScenarioConfig load_scenario(const std::filesystem::path & path) {
    std::ifstream in(path);
    if (!in)
        throw Error("config", "cannot open config file: " + path.string());
    ojson raw;
    try {
        raw = ojson::parse(in);
    } catch (const nlohmann::json::parse_error & e) {
        throw Error("config", std::string("invalid JSON in config: ") + e.what());
    }
    return parse_scenario(raw, path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

LinearEnvSpec linear_env_from_config(const ojson & env) {
    LinearEnvSpec spec;
    spec.n_arms = env.at("arms").get<std::size_t>();
    spec.dim = env.at("dim").get<std::size_t>();
    for (const auto & row : env.at("theta"))
        spec.theta.push_back(to_vector(numbers(row, "environment.theta")));
    spec.noise_sd = env.at("noise_sd").get<double>();
    spec.contexts = parse_context_distribution(env.at("contexts").get<std::string>());
    spec.horizon = env.at("horizon").get<std::size_t>();
    spec.validate();
    return spec;
}

std::unique_ptr<BanditPolicy> policy_from_config(const ojson & p, const LinearEnvSpec & env,
                                                 std::uint64_t init_seed) {
    const auto type = p.at("type").get<std::string>();
    if (type == "linucb")
        return std::make_unique<LinUcbPolicy>(
            LinearBanditState(env.n_arms, env.dim, p.at("ridge").get<double>(), p.at("alpha").get<double>()));
    if (type == "thompson")
        return std::make_unique<ThompsonPolicy>(PosteriorBelief(
            env.n_arms, env.dim, p.at("noise_variance").get<double>(), p.at("prior_scale").get<double>()));
    if (type == "ekf")
        return std::make_unique<EkfPolicy>(EkfBelief(env.n_arms, env.dim, p.at("prior_scale").get<double>(),
                                                     p.at("process_noise").get<double>(),
                                                     p.at("observation_noise").get<double>()));
    if (type == "neural-linear") {
        NeuralLinearConfig c;
        c.n_arms = env.n_arms;
        c.dim = env.dim;
        c.hidden.clear();
        for (const auto & h : p.at("hidden"))
            c.hidden.push_back(h.get<std::size_t>());
        c.feature_dim = p.at("feature_dim").get<std::size_t>();
        c.replay_capacity = p.at("replay_capacity").get<std::size_t>();
        c.retrain_every = p.at("retrain_every").get<std::size_t>();
        c.train.step_size = p.at("step_size").get<double>();
        c.train.epochs = p.at("epochs").get<int>();
        c.prior.precision = 1.0 / p.at("prior_scale").get<double>();
        c.init_seed = init_seed;
        return std::make_unique<NeuralLinearAdapter>(NeuralLinearPolicy(c));
    }
    if (type == "uniform")
        return std::make_unique<UniformRandomPolicy>(env.n_arms);
    if (type == "oracle")
        return std::make_unique<OraclePolicy>(env.theta);
    throw Error("config", "unknown policy type: " + type);
}

RmabEnvSpec rmab_env_from_config(const ojson & env) {
    RmabEnvSpec spec;
    const double discount = env.at("discount").get<double>();
    for (const auto & t : env.at("templates")) {
        const auto passive = numbers(t.at("passive"), "templates.passive");
        const auto active = numbers(t.at("active"), "templates.active");
        if (passive.size() != 2 || active.size() != 2)
            throw Error("config", "template rows list P(s'=1|s=0) and P(s'=1|s=1)");
        const auto mdp = TwoStateMdp::from_good_probs(passive[0], passive[1], active[0], active[1], discount);
        const auto group = t.at("group").get<std::string>();
        const auto state = t.at("initial_state").get<int>();
        for (std::size_t i = 0; i < t.at("count").get<std::size_t>(); ++i) {
            spec.mdps.push_back(mdp);
            spec.groups.push_back(group.empty() ? t.at("name").get<std::string>() : group);
            spec.initial_states.push_back(state);
        }
    }
    spec.budget = env.at("budget").get<std::size_t>();
    spec.horizon = env.at("horizon").get<std::size_t>();
    spec.learn_dynamics = env.at("learn_dynamics").get<bool>();
    spec.validate();
    return spec;
}

std::unique_ptr<Allocator> allocator_from_config(const ojson & a) {
    const auto type = a.at("type").get<std::string>();
    AllocateOptions options;
    options.check_indexability = a.at("check_indexability").get<bool>();
    if (type == "whittle")
        return std::make_unique<WhittleAllocator>(options);
    if (type == "equitable") {
        EquityConstraint eq;
        eq.min_fraction = a.at("min_fraction").get<double>();
        return std::make_unique<EquitableAllocator>(eq, options);
    }
    if (type == "random")
        return std::make_unique<RandomAllocator>();
    throw Error("config", "unknown allocator type: " + type);
}

ExperimentDesign design_from_config(const ojson & d, std::uint64_t seed) {
    ExperimentDesign design;
    const auto unit = d.at("unit").get<std::string>();
    if (unit == "individual")
        design.unit = AssignmentUnit::individual;
    else if (unit == "cluster")
        design.unit = AssignmentUnit::cluster;
    else
        throw Error("config", "unknown assignment unit: " + unit);
    const auto mech = d.at("mechanism").get<std::string>();
    if (mech == "fixed_random")
        design.mechanism = Mechanism::fixed_random;
    else if (mech == "adaptive")
        design.mechanism = Mechanism::adaptive;
    else if (mech == "micro_randomized")
        design.mechanism = Mechanism::micro_randomized;
    else
        throw Error("config", "unknown mechanism: " + mech);
    design.arm_labels.clear();
    for (const auto & a : d.at("arms"))
        design.arm_labels.push_back(a.get<std::string>());
    design.arm_probabilities = numbers(d.at("probabilities"), "design.probabilities");
    design.treatment_probability = numbers(d.at("treatment_probability"), "design.treatment_probability");
    design.seed = seed;
    design.validate();
    return design;
}

std::vector<RmabArm> read_cohort(const std::filesystem::path & path) {
    std::ifstream in(path);
    if (!in)
        throw Error("input", "cannot open cohort file: " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error & e) {
        throw Error("input", std::string("invalid cohort JSON: ") + e.what());
    }
    std::vector<RmabArm> arms;
    try {
        const double discount = j.value("discount", 0.9);
        std::set<std::string> ids;
        for (const auto & a : j.at("arms")) {
            RmabArm arm;
            arm.id = a.at("id").get<std::string>();
            if (!ids.insert(arm.id).second)
                throw Error("input", "duplicate arm id in cohort: " + arm.id);
            arm.group = a.value("group", std::string("all"));
            arm.state = a.at("state").get<int>();
            const auto & tr = a.at("transitions");
            if (tr.is_string()) {
                if (tr.get<std::string>() != "learn")
                    throw Error("input", "transitions must be rows or \"learn\": " + arm.id);
                DynamicsBelief belief;
                belief.discount = discount;
                if (a.contains("counts")) {
                    belief.alpha = a.at("counts").at("alpha").get<std::array<std::array<double, 2>, 2>>();
                    belief.beta = a.at("counts").at("beta").get<std::array<std::array<double, 2>, 2>>();
                }
                arm.dynamics = belief;
            } else {
                TwoStateMdp mdp;
                mdp.discount = discount;
                mdp.transition[kPassive] = tr.at("passive").get<std::array<std::array<double, 2>, 2>>();
                mdp.transition[kActive] = tr.at("active").get<std::array<std::array<double, 2>, 2>>();
                mdp.validate();
                arm.dynamics = mdp;
            }
            arms.push_back(std::move(arm));
        }
    } catch (const nlohmann::json::exception & e) {
        throw Error("input", std::string("malformed cohort file: ") + e.what());
    }
    return arms;
}

} // namespace adaptive
