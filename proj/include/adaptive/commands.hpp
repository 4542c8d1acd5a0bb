#pragma once

#include <filesystem>
#include <string>

#include <adaptive/config.hpp>
#include <adaptive/metrics.hpp>

namespace adaptive {

/// Each command loads its config, validates the kind, creates `out_dir` and
/// writes resolved_config.json plus its own outputs. Files are a pure
/// function of the config.
void run_simulate(const std::filesystem::path & config, const std::filesystem::path & out_dir);
void run_fit_survival(const std::filesystem::path & config, const std::filesystem::path & out_dir);
void run_decide(const std::filesystem::path & config, const std::filesystem::path & out_dir);
void run_allocate(const std::filesystem::path & config, const std::filesystem::path & out_dir);
void run_experiment(const std::filesystem::path & config, const std::filesystem::path & out_dir);
/// Summarises <out_dir>/metrics.csv from an earlier run of `config` into
/// <out_dir>/report.txt.
void run_report(const std::filesystem::path & config, const std::filesystem::path & out_dir);

/// Metrics of a bandit-sim or rmab-sim config, one scenario per policy or
/// allocator named "<name>/<type>".
MetricsTable simulate_metrics(const ScenarioConfig & cfg);

} // namespace adaptive
