#include <adaptive/commands.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <functional>
#include <iostream>
#include <map>

namespace {

int fail(const std::string & kind, const std::string & message) {
    nlohmann::ordered_json j;
    j["error"] = kind;
    j["message"] = message;
    std::cerr << j.dump() << '\n';
    return kind == "usage" ? 2 : 1;
}

} // namespace

int main(int argc, char ** argv) {
    using Runner = std::function<void(const std::filesystem::path &, const std::filesystem::path &)>;
    const std::map<std::string, std::pair<Runner, std::string>> commands{
        {"simulate", {adaptive::run_simulate, "run a bandit-sim or rmab-sim scenario and export metrics"}},
        {"fit-survival", {adaptive::run_fit_survival, "fit Kaplan-Meier and the discrete hazard model"}},
        {"decide", {adaptive::run_decide, "build contexts from an event log and choose actions"}},
        {"allocate", {adaptive::run_allocate, "Whittle-index allocation for a cohort"}},
        {"experiment", {adaptive::run_experiment, "assign, simulate or load outcomes, and estimate effects"}},
        {"report", {adaptive::run_report, "summarise the metrics of an earlier run"}},
    };

    CLI::App app{"adaptive decision engine"};
    app.require_subcommand(1);
    std::string config, out;
    for (const auto & [name, entry] : commands) {
        auto * sub = app.add_subcommand(name, entry.second);
        sub->add_option("--config", config, "scenario file (JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out, "output directory")->required();
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp & e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp & e) {
        return app.exit(e);
    } catch (const CLI::ParseError & e) {
        return fail("usage", e.what());
    }

    const std::string name = app.get_subcommands().front()->get_name();
    try {
        commands.at(name).first(config, out);
    } catch (const adaptive::Error & e) {
        return fail(e.kind(), e.what());
    } catch (const std::exception & e) {
        return fail("internal", e.what());
    }
    return 0;
}
