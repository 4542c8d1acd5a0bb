#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include <json.hpp>

#include <adaptive/experimentation.hpp>
#include <adaptive/simulator.hpp>
#include <adaptive/survival.hpp>

namespace adaptive {

enum class ScenarioKind { bandit_sim, rmab_sim, survival_fit, experiment, decide, allocate };

ScenarioKind parse_scenario_kind(const std::string & name);
std::string to_string(ScenarioKind kind);

/// A validated scenario file. `resolved` holds every key with defaults
/// filled in; relative paths are resolved against the config's directory.
struct ScenarioConfig {
    ScenarioKind kind = ScenarioKind::bandit_sim;
    std::string name;
    std::uint64_t seed = 0;
    nlohmann::ordered_json resolved;
    std::filesystem::path base_dir;

    /// Path stored under `key` (already resolved against base_dir).
    std::filesystem::path path(const nlohmann::ordered_json & node, const std::string & key) const;
};

/// Parse and validate. Unknown keys, type mismatches and missing required
/// fields (including `seed`) raise Error("config", ...) naming the key.
ScenarioConfig load_scenario(const std::filesystem::path & path);
ScenarioConfig parse_scenario(const nlohmann::ordered_json & raw, const std::filesystem::path & base_dir = ".");

LinearEnvSpec linear_env_from_config(const nlohmann::ordered_json & environment);
std::unique_ptr<BanditPolicy> policy_from_config(const nlohmann::ordered_json & policy, const LinearEnvSpec & env,
                                                 std::uint64_t init_seed);

RmabEnvSpec rmab_env_from_config(const nlohmann::ordered_json & environment);
std::unique_ptr<Allocator> allocator_from_config(const nlohmann::ordered_json & allocator);

ExperimentDesign design_from_config(const nlohmann::ordered_json & design, std::uint64_t seed);

/// Cohort file: {"discount": b, "arms": [{"id", "group", "state",
/// "transitions": {"passive": [[..],[..]], "active": [[..],[..]]} | "learn"}]}.
std::vector<RmabArm> read_cohort(const std::filesystem::path & path);

} // namespace adaptive
