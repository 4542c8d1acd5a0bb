#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include <adaptive/deep_bandits.hpp>
#include <adaptive/linear_bandits.hpp>
#include <adaptive/simulator.hpp>

namespace adaptive {

inline constexpr int kCheckpointVersion = 1;

using PolicyState = std::variant<LinearBanditState, PosteriorBelief, EkfBelief, NeuralLinearPolicy>;

/// Module tag written in the checkpoint header ("linucb", "thompson", ...).
std::string module_tag(const PolicyState & state);

/// Saved policy plus any random streams needed to continue bit-for-bit.
struct Checkpoint {
    int version = kCheckpointVersion;
    std::string module;
    PolicyState state;
    std::vector<Rng> streams;
    std::uint64_t checksum = 0;
};

/// FNV-1a 64 over the payload bytes.
std::uint64_t checksum_of(const std::string & payload);

/// File layout: a header line "adaptive-checkpoint <version> <module>
/// <payload bytes> <checksum hex>", then the JSON payload. Written via a
/// temporary file and rename.
Checkpoint save_checkpoint(const PolicyState & state, const std::filesystem::path & path,
                           const std::vector<Rng> & streams = {});

/// Throws Error("checkpoint", ...) on version mismatch, truncation or
/// checksum mismatch.
Checkpoint load_checkpoint(const std::filesystem::path & path);

nlohmann::ordered_json state_to_json(const PolicyState & state);
PolicyState state_from_json(const std::string & module, const nlohmann::json & j);

/// Wrap a restored state in the matching BanditPolicy.
std::unique_ptr<BanditPolicy> make_policy(PolicyState state);
/// Snapshot of a policy created by make_policy or policy_from_config.
PolicyState policy_state(const BanditPolicy & policy);

} // namespace adaptive
