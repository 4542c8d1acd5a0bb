#include <adaptive/commands.hpp>

#include <adaptive/checkpoint.hpp>
#include <adaptive/trait_pipeline.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <optional>
#include <set>
#include <sstream>

namespace adaptive {

using ojson = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

ScenarioConfig load_kind(const fs::path & config, std::initializer_list<ScenarioKind> kinds,
                         const std::string & command) {
    ScenarioConfig cfg = load_scenario(config);
    for (const auto k : kinds)
        if (cfg.kind == k)
            return cfg;
    throw Error("config", "command '" + command + "' cannot run a '" + to_string(cfg.kind) + "' scenario");
}

std::ofstream open_out(const fs::path & path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error("io", "cannot write " + path.string());
    return out;
}

void prepare_out(const ScenarioConfig & cfg, const fs::path & out_dir) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec)
        throw Error("io", "cannot create output directory " + out_dir.string() + ": " + ec.message());
    auto out = open_out(out_dir / "resolved_config.json");
    out << cfg.resolved.dump(2) << '\n';
}

std::string unique_name(std::set<std::string> & used, const std::string & base) {
    std::string name = base;
    for (int i = 2; used.count(name); ++i)
        name = base + "-" + std::to_string(i);
    used.insert(name);
    return name;
}

void append(MetricsTable & into, const MetricsTable & from) {
    into.rows.insert(into.rows.end(), from.rows.begin(), from.rows.end());
}

std::vector<double> doubles(const ojson & arr) {
    std::vector<double> v;
    for (const auto & x : arr)
        v.push_back(x.get<double>());
    return v;
}

ojson vector_json(const Vector & v) { return std::vector<double>(v.data(), v.data() + v.size()); }

} // namespace

MetricsTable simulate_metrics(const ScenarioConfig & cfg) {
    const auto & r = cfg.resolved;
    const auto reps = r.at("replications").get<std::size_t>();
    const auto log_every = r.at("log_every").get<std::size_t>();
    MetricsTable table;
    std::set<std::string> used;

    if (cfg.kind == ScenarioKind::bandit_sim) {
        const LinearEnvSpec env = linear_env_from_config(r.at("environment"));
        for (const auto & p : r.at("policies")) {
            policy_from_config(p, env, 0);  // validate the type up front
            Scenario s;
            s.name = cfg.name + "/" + unique_name(used, p.at("type").get<std::string>());
            s.log_every = log_every;
            s.run = [env, p](std::uint64_t seed) {
                auto policy = policy_from_config(p, env, seed);
                return run_bandit_episode(env, *policy, seed);
            };
            append(table, replicate(s, reps, cfg.seed));
        }
        return table;
    }
    if (cfg.kind == ScenarioKind::rmab_sim) {
        const RmabEnvSpec base = rmab_env_from_config(r.at("environment"));
        for (const auto & a : r.at("allocators")) {
            allocator_from_config(a);
            RmabEnvSpec env = base;
            if (a.contains("learn_dynamics"))
                env.learn_dynamics = a.at("learn_dynamics").get<bool>();
            std::string label = a.at("type").get<std::string>();
            if (env.learn_dynamics)
                label += "-learned";
            Scenario s;
            s.name = cfg.name + "/" + unique_name(used, label);
            s.log_every = log_every;
            s.run = [env, a](std::uint64_t seed) {
                auto allocator = allocator_from_config(a);
                return run_rmab_episode(env, *allocator, seed);
            };
            append(table, replicate(s, reps, cfg.seed));
        }
        return table;
    }
    throw Error("config", "simulate needs a bandit-sim or rmab-sim scenario");
}

void run_simulate(const fs::path & config, const fs::path & out_dir) {
    const auto cfg = load_kind(config, {ScenarioKind::bandit_sim, ScenarioKind::rmab_sim}, "simulate");
    const MetricsTable table = simulate_metrics(cfg);
    prepare_out(cfg, out_dir);
    export_metrics(table, out_dir / "metrics.csv");
}

void run_fit_survival(const fs::path & config, const fs::path & out_dir) {
    const auto cfg = load_kind(config, {ScenarioKind::survival_fit}, "fit-survival");
    const auto & r = cfg.resolved;

    PeriodLayout layout;
    layout.max_followup = r.at("layout").at("max_followup").get<double>();
    layout.period = r.at("layout").at("period").get<double>();
    if (!(layout.period > 0.0) || !(layout.max_followup > 0.0))
        throw Error("config", "layout.max_followup and layout.period must be positive");

    std::vector<SurvivalRecord> records;
    if (r.contains("data")) {
        const auto coding_name = r.at("censor_coding").get<std::string>();
        CensorCoding coding;
        if (coding_name == "one_means_censored")
            coding = CensorCoding::one_means_censored;
        else if (coding_name == "one_means_event")
            coding = CensorCoding::one_means_event;
        else
            throw Error("config", "unknown censor_coding: " + coding_name);
        std::ifstream in(cfg.path(r, "data"));
        if (!in)
            throw Error("input", "cannot open survival data: " + cfg.path(r, "data").string());
        records = read_survival_csv(in, coding);
    } else {
        const auto & syn = r.at("synthetic");
        SurvivalCohortSpec spec;
        spec.n = syn.at("n").get<std::size_t>();
        const auto w = doubles(syn.at("weights"));
        spec.weights = Eigen::Map<const Vector>(w.data(), static_cast<Eigen::Index>(w.size()));
        spec.baseline = doubles(syn.at("baseline"));
        spec.layout = layout;
        spec.censoring_rate = syn.at("censoring_rate").get<double>();
        records = make_survival_cohort(spec, cfg.seed);
    }
    if (records.empty())
        throw Error("input", "survival data has no records");

    HazardHyper hyper;
    hyper.l2 = r.at("hyper").at("l2").get<double>();
    hyper.max_iterations = r.at("hyper").at("max_iterations").get<int>();
    hyper.tolerance = r.at("hyper").at("tolerance").get<double>();

    const SurvivalCurve km = fit_kaplan_meier(records);
    const HazardModel model = fit_discrete_hazard(records, layout, hyper);

    prepare_out(cfg, out_dir);
    {
        auto out = open_out(out_dir / "kaplan_meier.csv");
        out << "time,survival,at_risk,events,censored\n";
        for (const auto & p : km.points)
            out << format_double(p.time) << ',' << format_double(p.survival) << ',' << p.at_risk << ','
                << p.events << ',' << p.censored << '\n';
    }
    {
        ojson m;
        m["dim"] = model.dim;
        m["max_followup"] = layout.max_followup;
        m["period"] = layout.period;
        m["weights"] = vector_json(model.coefficients.head(static_cast<Eigen::Index>(model.dim)));
        m["period_intercepts"] =
            vector_json(model.coefficients.tail(static_cast<Eigen::Index>(model.periods())));
        m["iterations"] = model.iterations;
        m["final_loss"] = model.final_loss;
        m["gradient_norm"] = model.gradient_norm;
        auto out = open_out(out_dir / "model.json");
        out << m.dump(2) << '\n';
    }

    MetricsTable table;
    const std::string name = cfg.name;
    auto row = [&](const std::string & metric, double v) { table.rows.push_back({name, "0", "final", metric, v}); };
    std::size_t events = 0;
    for (const auto & rec : records)
        events += rec.censored ? 0 : 1;
    row("records", static_cast<double>(records.size()));
    row("events", static_cast<double>(events));
    row("iterations", model.iterations);
    row("final_loss", model.final_loss);
    row("gradient_norm", model.gradient_norm);
    for (Eigen::Index i = 0; i < model.coefficients.size(); ++i)
        row("coefficient:" + std::to_string(i), model.coefficients(i));

    if (r.contains("horizon")) {
        const auto horizon = r.at("horizon").get<std::size_t>();
        std::vector<std::pair<std::string, ContextVector>> cohort;
        for (const auto & rec : records)
            cohort.emplace_back(rec.subject_id, rec.x);
        const auto ranked = risk_rank(model, cohort, horizon);
        std::map<std::string, const ContextVector *> by_id;
        for (const auto & [id, x] : cohort)
            by_id[id] = &x;
        auto out = open_out(out_dir / "risk.csv");
        out << "rank,subject_id,survival\n";
        for (std::size_t i = 0; i < ranked.size(); ++i)
            out << i + 1 << ',' << ranked[i] << ','
                << format_double(predict_survival(model, *by_id.at(ranked[i]), horizon).back()) << '\n';
        row("km_survival_at_horizon", km.at(static_cast<double>(horizon) * layout.period));
    }
    export_metrics(table, out_dir / "metrics.csv");
}

void run_decide(const fs::path & config, const fs::path & out_dir) {
    const auto cfg = load_kind(config, {ScenarioKind::decide}, "decide");
    const auto & r = cfg.resolved;

    std::vector<Event> events;
    {
        std::ifstream in(cfg.path(r, "events"));
        if (!in)
            throw Error("input", "cannot open event log: " + cfg.path(r, "events").string());
        events = read_event_log(in);
    }
    TraitStore store(trait_catalog_from_json(r.at("traits")));
    for (const auto & e : events)
        store.update(e);
    const ContextSchema schema = context_schema_from_json(r.at("schema"));
    const Timestamp now = parse_timestamp(r.at("now").get<std::string>());

    std::vector<std::string> subjects;
    if (r.contains("subjects"))
        for (const auto & s : r.at("subjects"))
            subjects.push_back(s.get<std::string>());
    else
        subjects = store.subjects();

    LinearEnvSpec env;
    env.n_arms = r.at("policy").at("arms").get<std::size_t>();
    env.dim = schema.dimension();
    const auto type = r.at("policy").at("type").get<std::string>();
    if (type == "oracle")
        throw Error("config", "policy type 'oracle' needs true parameters and cannot serve decisions");

    std::unique_ptr<BanditPolicy> policy;
    Rng rng = make_stream(cfg.seed, kPolicyStream);
    if (r.contains("checkpoint_in")) {
        Checkpoint ck = load_checkpoint(cfg.path(r, "checkpoint_in"));
        if (ck.module != type)
            throw Error("checkpoint", "checkpoint holds a '" + ck.module + "' policy but the config asks for '" +
                                          type + "'");
        policy = make_policy(std::move(ck.state));
        if (!ck.streams.empty())
            rng = ck.streams.front();
    } else {
        policy = policy_from_config(r.at("policy"), env, cfg.seed);
    }

    std::size_t feedback_rows = 0;
    if (r.contains("feedback")) {
        std::ifstream in(cfg.path(r, "feedback"));
        if (!in)
            throw Error("input", "cannot open feedback file: " + cfg.path(r, "feedback").string());
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.find_first_not_of(" \t\r") == std::string::npos)
                continue;
            try {
                const auto j = nlohmann::json::parse(line);
                ContextVector x;
                if (j.contains("context")) {
                    const auto v = j.at("context").get<std::vector<double>>();
                    x = Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
                } else {
                    x = build_context(store, j.at("subject_id").get<std::string>(), schema, now);
                }
                if (static_cast<std::size_t>(x.size()) != env.dim)
                    throw Error("dimension", "feedback context has dimension " + std::to_string(x.size()) +
                                                 ", expected " + std::to_string(env.dim));
                const auto action = j.at("action").get<std::size_t>();
                if (action >= env.n_arms)
                    throw Error("input", "feedback action out of range: " + std::to_string(action));
                policy->update(x, action, j.at("reward").get<double>());
                ++feedback_rows;
            } catch (const nlohmann::json::exception & e) {
                throw Error("input", "line " + std::to_string(line_no) + ": " + e.what());
            } catch (const Error & e) {
                throw Error(e.kind(), "line " + std::to_string(line_no) + ": " + e.what());
            }
        }
    }

    const auto samples = std::max<std::size_t>(1, r.at("propensity_samples").get<std::size_t>());
    prepare_out(cfg, out_dir);
    std::vector<std::size_t> counts(env.n_arms, 0);
    {
        auto out = open_out(out_dir / "decisions.jsonl");
        const auto names = schema.column_names();
        for (const auto & subject : subjects) {
            const ContextVector x = build_context(store, subject, schema, now);
            const std::size_t action = policy->select(x, rng);
            std::size_t hits = 1;
            for (std::size_t i = 1; i < samples; ++i)
                hits += policy->select(x, rng) == action ? 1 : 0;
            ojson d;
            d["subject_id"] = subject;
            d["action"] = action;
            d["propensity"] = static_cast<double>(hits) / static_cast<double>(samples);
            d["context"] = vector_json(x);
            out << d.dump() << '\n';
            ++counts[action];
        }
    }
    {
        auto out = open_out(out_dir / "contexts.csv");
        out << "subject_id";
        for (const auto & n : schema.column_names())
            out << ',' << n;
        out << '\n';
        for (const auto & subject : subjects) {
            const ContextVector x = build_context(store, subject, schema, now);
            out << subject;
            for (Eigen::Index i = 0; i < x.size(); ++i)
                out << ',' << format_double(x(i));
            out << '\n';
        }
    }
    save_checkpoint(policy_state(*policy), out_dir / "policy.ckpt", {rng});

    MetricsTable table;
    table.rows.push_back({cfg.name, "0", "final", "subjects", static_cast<double>(subjects.size())});
    table.rows.push_back({cfg.name, "0", "final", "feedback_rows", static_cast<double>(feedback_rows)});
    for (std::size_t k = 0; k < counts.size(); ++k)
        table.rows.push_back(
            {cfg.name, "0", "final", "action_count:" + std::to_string(k), static_cast<double>(counts[k])});
    export_metrics(table, out_dir / "metrics.csv");
}

void run_allocate(const fs::path & config, const fs::path & out_dir) {
    const auto cfg = load_kind(config, {ScenarioKind::allocate}, "allocate");
    const auto & r = cfg.resolved;
    const std::vector<RmabArm> arms = read_cohort(cfg.path(r, "cohort"));
    const auto budget = r.at("budget").get<std::size_t>();
    AllocateOptions options;
    options.check_indexability = r.at("check_indexability").get<bool>();

    Rng rng = make_stream(cfg.seed, kPolicyStream);
    Allocation alloc;
    const auto & eq = r.at("equity");
    const bool equitable = eq.at("min_fraction").get<double>() > 0.0 || !eq.at("groups").empty();
    if (equitable) {
        EquityConstraint c;
        c.min_fraction = eq.at("min_fraction").get<double>();
        for (const auto & [g, f] : eq.at("groups").items()) {
            if (!f.is_number())
                throw Error("config", "type mismatch at 'equity.groups." + g + "': expected number");
            c.group_fraction[g] = f.get<double>();
        }
        alloc = equitable_allocate(arms, budget, c, rng, options);
    } else {
        alloc = allocate(arms, budget, rng, options);
    }

    prepare_out(cfg, out_dir);
    {
        ojson j;
        j["budget"] = budget;
        j["indexable"] = alloc.indexable;
        j["acted"] = alloc.acted_ids;
        ojson per_arm = ojson::array();
        std::set<std::size_t> acted(alloc.acted.begin(), alloc.acted.end());
        for (std::size_t i = 0; i < arms.size(); ++i)
            per_arm.push_back({{"id", arms[i].id},
                               {"group", arms[i].group},
                               {"state", arms[i].state},
                               {"index", alloc.indices[i]},
                               {"action", acted.count(i) ? 1 : 0}});
        j["arms"] = per_arm;
        j["group_counts"] = alloc.group_counts;
        j["group_mean_index"] = alloc.group_mean_index;
        auto out = open_out(out_dir / "allocation.json");
        out << j.dump(2) << '\n';
    }
    MetricsTable table;
    table.rows.push_back({cfg.name, "0", "final", "acted", static_cast<double>(alloc.acted.size())});
    table.rows.push_back({cfg.name, "0", "final", "indexable", alloc.indexable ? 1.0 : 0.0});
    for (const auto & [g, n] : alloc.group_counts)
        table.rows.push_back({cfg.name, "0", "final", "group_actions:" + g, static_cast<double>(n)});
    for (const auto & [g, m] : alloc.group_mean_index)
        table.rows.push_back({cfg.name, "0", "final", "group_mean_index:" + g, m});
    export_metrics(table, out_dir / "metrics.csv");
}

void run_experiment(const fs::path & config, const fs::path & out_dir) {
    const auto cfg = load_kind(config, {ScenarioKind::experiment}, "experiment");
    const auto & r = cfg.resolved;
    const ExperimentDesign design = design_from_config(r.at("design"), cfg.seed);
    const Estimator estimator = parse_estimator(r.at("estimator").get<std::string>());

    std::vector<Outcome> outcomes;
    if (r.contains("log")) {
        std::ifstream in(cfg.path(r, "log"));
        if (!in)
            throw Error("input", "cannot open experiment log: " + cfg.path(r, "log").string());
        outcomes = read_experiment_log(in);
    } else {
        const auto & sim = r.at("simulation");
        const auto units = sim.at("units").get<std::size_t>();
        const auto clusters = sim.at("clusters").get<std::size_t>();
        const auto points = sim.at("decision_points").get<std::size_t>();
        const double baseline = sim.at("baseline").get<double>();
        const double effect = sim.at("effect").get<double>();
        const double noise_sd = sim.at("noise_sd").get<double>();
        if (design.unit == AssignmentUnit::cluster && clusters == 0)
            throw Error("config", "cluster assignment needs simulation.clusters > 0");
        const auto samples = std::max<std::size_t>(1, r.at("design").at("propensity_samples").get<std::size_t>());

        Rng assign_rng = make_stream(cfg.seed, kPolicyStream);
        Rng env_rng = make_stream(cfg.seed, kEnvironmentStream);
        std::normal_distribution<double> noise(0.0, noise_sd);
        std::optional<Assigner> assigner;
        if (design.mechanism == Mechanism::fixed_random)
            assigner.emplace(design);
        PosteriorBelief belief(design.arm_labels.size(), 1);
        const ContextVector one = Vector::Ones(1);
        for (std::size_t t = 0; t < points; ++t) {
            for (std::size_t u = 0; u < units; ++u) {
                const std::string unit_id = "u" + std::to_string(u);
                std::optional<std::string> cluster;
                if (clusters > 0)
                    cluster = "c" + std::to_string(u % clusters);
                AssignmentRecord rec;
                switch (design.mechanism) {
                    case Mechanism::fixed_random:
                        rec = assigner->assign(unit_id, design.unit == AssignmentUnit::cluster ? cluster : std::nullopt,
                                              assign_rng, t);
                        break;
                    case Mechanism::adaptive:
                        rec = adaptive_assign(design, belief, one, unit_id, assign_rng, samples, t);
                        break;
                    case Mechanism::micro_randomized:
                        rec = mrt_randomize(design, unit_id, t, assign_rng);
                        break;
                }
                rec.cluster_id = cluster;
                const double reward = baseline + (rec.arm == 1 ? effect : 0.0) + noise(env_rng);
                if (design.mechanism == Mechanism::adaptive)
                    ts_update(belief, one, rec.arm, reward);
                outcomes.push_back({rec, reward});
            }
        }
    }

    const EffectEstimate est = estimate_effect(outcomes, estimator);
    prepare_out(cfg, out_dir);
    {
        auto out = open_out(out_dir / "assignments.jsonl");
        write_experiment_log(out, outcomes);
    }
    {
        ojson j;
        j["estimator"] = est.estimator;
        j["estimate"] = est.estimate;
        j["standard_error"] = est.standard_error;
        j["sample_size"] = est.sample_size;
        auto out = open_out(out_dir / "estimate.json");
        out << j.dump(2) << '\n';
    }
    MetricsTable table;
    table.rows.push_back({cfg.name, "0", "final", "estimate", est.estimate});
    table.rows.push_back({cfg.name, "0", "final", "standard_error", est.standard_error});
    table.rows.push_back({cfg.name, "0", "final", "sample_size", static_cast<double>(est.sample_size)});
    export_metrics(table, out_dir / "metrics.csv");
}

void run_report(const fs::path & config, const fs::path & out_dir) {
    const ScenarioConfig cfg = load_scenario(config);
    const fs::path metrics_path = out_dir / "metrics.csv";
    if (!fs::exists(metrics_path))
        throw Error("input", "no metrics.csv in " + out_dir.string() + "; run the scenario first");
    const MetricsTable table = read_metrics(metrics_path);

    std::ostringstream os;
    os << "scenario " << cfg.name << " (" << to_string(cfg.kind) << ", seed " << cfg.seed << ")\n";
    std::vector<std::string> order;
    std::map<std::string, std::vector<const MetricRow *>> by_scenario;
    for (const auto & row : table.rows) {
        if (row.round != "aggregate" && row.round != "final")
            continue;
        if (!by_scenario.count(row.scenario))
            order.push_back(row.scenario);
        by_scenario[row.scenario].push_back(&row);
    }
    for (const auto & name : order) {
        const auto & rows = by_scenario[name];
        const bool has_aggregate =
            std::any_of(rows.begin(), rows.end(), [](const MetricRow * r) { return r->round == "aggregate"; });
        os << '\n' << name << '\n';
        for (const MetricRow * row : rows) {
            if (has_aggregate && row->round != "aggregate")
                continue;
            os << "  " << std::left << std::setw(32) << row->metric << ' ' << format_double(row->value) << '\n';
        }
    }
    auto out = open_out(out_dir / "report.txt");
    out << os.str();
}

} // namespace adaptive
