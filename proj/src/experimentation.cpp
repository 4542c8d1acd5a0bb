#include <adaptive/experimentation.hpp>

#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>

#include <json.hpp>

namespace adaptive {

void ExperimentDesign::validate() const {
    if (arm_labels.empty())
        throw Error("config", "experiment needs at least one arm");
    switch (mechanism) {
        case Mechanism::fixed_random: {
            if (arm_probabilities.size() != arm_labels.size())
                throw Error("config", "arm_probabilities must match arm_labels");
            double total = 0.0;
            for (const double p : arm_probabilities) {
                if (!(p >= 0.0) || p > 1.0)
                    throw Error("config", "arm probabilities must lie in [0, 1]");
                total += p;
            }
            if (std::abs(total - 1.0) > 1e-9)
                throw Error("config", "arm probabilities must sum to 1");
            break;
        }
        case Mechanism::micro_randomized:
            if (arm_labels.size() != 2)
                throw Error("config", "micro-randomized designs have exactly two arms");
            if (treatment_probability.empty())
                throw Error("config", "treatment_probability is empty");
            for (const double p : treatment_probability)
                if (!(p > 0.0 && p < 1.0))
                    throw Error("config", "treatment probability must lie strictly inside (0, 1)");
            break;
        case Mechanism::adaptive:
            break;
    }
    if (unit == AssignmentUnit::cluster && mechanism == Mechanism::micro_randomized)
        throw Error("config", "micro-randomized designs randomize individuals");
}

double ExperimentDesign::treatment_probability_at(std::size_t t) const {
    if (treatment_probability.empty())
        throw Error("config", "treatment_probability is empty");
    return treatment_probability[std::min(t, treatment_probability.size() - 1)];
}

Assigner::Assigner(ExperimentDesign design) : design_(std::move(design)) {
    design_.validate();
    if (design_.mechanism != Mechanism::fixed_random)
        throw Error("config", "Assigner requires a fixed-random design");
}

AssignmentRecord Assigner::assign(const std::string & unit_id, const std::optional<std::string> & cluster_id,
                                  Rng & rng, std::size_t decision_point, std::int64_t timestamp) {
    if (design_.unit == AssignmentUnit::cluster && !cluster_id)
        throw Error("input", "cluster design requires a cluster id for unit " + unit_id);

    AssignmentRecord rec{unit_id, cluster_id, decision_point, 0, 1.0, timestamp};
    auto draw = [&] {
        std::discrete_distribution<std::size_t> dist(design_.arm_probabilities.begin(),
                                                     design_.arm_probabilities.end());
        return dist(rng);
    };
    if (design_.unit == AssignmentUnit::cluster) {
        auto it = cluster_arm_.find(*cluster_id);
        if (it == cluster_arm_.end())
            it = cluster_arm_.emplace(*cluster_id, draw()).first;
        rec.arm = it->second;
    } else {
        rec.arm = draw();
    }
    rec.propensity = design_.arm_probabilities[rec.arm];
    return rec;
}

AssignmentRecord adaptive_assign(const ExperimentDesign & design, const PosteriorBelief & policy,
                                 const ContextVector & x, const std::string & unit_id, Rng & rng,
                                 std::size_t n_samples, std::size_t decision_point, std::int64_t timestamp) {
    if (design.mechanism != Mechanism::adaptive)
        throw Error("config", "adaptive_assign requires an adaptive design");
    if (design.arm_labels.size() != policy.n_arms())
        throw Error("dimension", "policy arm count does not match the design");
    if (n_samples == 0)
        throw Error("input", "n_samples must be at least 1");

    const std::size_t arm = ts_select(policy, x, rng);
    double propensity = 1.0;
    if (n_samples > 1) {
        const Vector rest = action_propensity(policy, x, n_samples - 1, rng);
        const double hits = 1.0 + rest[static_cast<Eigen::Index>(arm)] * static_cast<double>(n_samples - 1);
        propensity = hits / static_cast<double>(n_samples);
    }
    return {unit_id, std::nullopt, decision_point, arm, propensity, timestamp};
}

AssignmentRecord mrt_randomize(const ExperimentDesign & design, const std::string & unit_id,
                               std::size_t decision_point, Rng & rng) {
    if (design.mechanism != Mechanism::micro_randomized)
        throw Error("config", "mrt_randomize requires a micro-randomized design");
    const double p = design.treatment_probability_at(decision_point);
    if (!(p > 0.0 && p < 1.0))
        throw Error("input", "treatment probability must lie strictly inside (0, 1)");
    std::bernoulli_distribution coin(p);
    const bool treated = coin(rng);
    return {unit_id, std::nullopt, decision_point, treated ? 1u : 0u, treated ? p : 1.0 - p,
            static_cast<std::int64_t>(decision_point)};
}

EffectEstimate estimate_effect(std::span<const Outcome> outcomes, Estimator estimator) {
    for (const auto & o : outcomes) {
        if (o.record.arm > 1)
            throw Error("input", "effect estimation expects arms 0 (control) and 1 (treatment)");
        require_finite(o.reward, "reward");
    }

    if (estimator == Estimator::difference_in_means) {
        double sum[2] = {0.0, 0.0}, sq[2] = {0.0, 0.0};
        std::size_t n[2] = {0, 0};
        for (const auto & o : outcomes) {
            sum[o.record.arm] += o.reward;
            ++n[o.record.arm];
        }
        if (n[0] == 0 || n[1] == 0)
            throw Error("input", "difference-in-means needs observations in both arms");
        const double mean[2] = {sum[0] / static_cast<double>(n[0]), sum[1] / static_cast<double>(n[1])};
        for (const auto & o : outcomes) {
            const double dev = o.reward - mean[o.record.arm];
            sq[o.record.arm] += dev * dev;
        }
        const double df = static_cast<double>(n[0] + n[1]) - 2.0;
        const double pooled = df > 0.0 ? (sq[0] + sq[1]) / df : 0.0;
        const double se = std::sqrt(pooled * (1.0 / static_cast<double>(n[0]) + 1.0 / static_cast<double>(n[1])));
        return {mean[1] - mean[0], se, "difference-in-means", n[0] + n[1]};
    }

    if (outcomes.empty())
        throw Error("input", "ipw needs at least one observation");
    std::vector<double> contrib;
    contrib.reserve(outcomes.size());
    for (const auto & o : outcomes) {
        const double q = o.record.propensity;
        if (!(q > 0.0 && q < 1.0))
            throw Error("input", "ipw needs propensities strictly inside (0, 1)");
        // Logged propensity is for the assigned arm; recover P(treated).
        const double p = o.record.arm == 1 ? q : 1.0 - q;
        contrib.push_back(o.record.arm == 1 ? o.reward / p : -o.reward / (1.0 - p));
    }
    const auto n = static_cast<double>(contrib.size());
    const double mean = std::accumulate(contrib.begin(), contrib.end(), 0.0) / n;
    double ss = 0.0;
    for (const double c : contrib)
        ss += (c - mean) * (c - mean);
    const double sd = contrib.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    return {mean, sd / std::sqrt(n), "ipw", contrib.size()};
}

Estimator parse_estimator(const std::string & name) {
    if (name == "difference-in-means")
        return Estimator::difference_in_means;
    if (name == "ipw")
        return Estimator::ipw;
    throw Error("config", "unknown estimator: " + name);
}

void write_experiment_log(std::ostream & out, std::span<const Outcome> outcomes) {
    for (const auto & o : outcomes) {
        nlohmann::ordered_json j;
        j["unit"] = o.record.unit_id;
        j["cluster"] = o.record.cluster_id ? nlohmann::ordered_json(*o.record.cluster_id) : nullptr;
        j["decision_point"] = o.record.decision_point;
        j["arm"] = o.record.arm;
        j["propensity"] = o.record.propensity;
        j["reward"] = o.reward;
        out << j.dump() << '\n';
    }
}

std::vector<Outcome> read_experiment_log(std::istream & in) {
    std::vector<Outcome> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        try {
            const auto j = nlohmann::json::parse(line);
            Outcome o;
            o.record.unit_id = j.at("unit").get<std::string>();
            if (j.contains("cluster") && !j.at("cluster").is_null())
                o.record.cluster_id = j.at("cluster").get<std::string>();
            o.record.decision_point = j.at("decision_point").get<std::size_t>();
            o.record.arm = j.at("arm").get<std::size_t>();
            o.record.propensity = j.at("propensity").get<double>();
            o.reward = j.at("reward").get<double>();
            out.push_back(std::move(o));
        } catch (const nlohmann::json::exception & e) {
            throw Error("input", "line " + std::to_string(n) + ": " + e.what());
        }
    }
    return out;
}

} // namespace adaptive
