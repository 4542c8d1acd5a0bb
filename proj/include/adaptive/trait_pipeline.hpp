#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include <adaptive/common.hpp>

namespace adaptive {

/// Seconds since the Unix epoch, UTC.
using Timestamp = std::int64_t;

inline constexpr Timestamp kSecondsPerDay = 86400;

/// Parse an RFC 3339 instant ("2024-08-01T10:00:00Z", offsets allowed).
/// Fractional seconds are truncated. Throws Error("input", "malformed timestamp").
Timestamp parse_timestamp(std::string_view text);
std::string format_timestamp(Timestamp ts);

using PayloadValue = std::variant<double, bool, std::string>;

/// Numeric view of a payload value: numbers as-is, booleans as 0/1, strings none.
std::optional<double> numeric_value(const PayloadValue & v);

struct Event {
    std::string subject_id;
    std::string kind;
    Timestamp timestamp = 0;
    std::map<std::string, PayloadValue> payload;

    bool operator==(const Event &) const = default;
};

/// Validate one structured log record. `line` is reported in error messages
/// (0 means "not from a file").
Event ingest_event(const nlohmann::json & record, std::size_t line = 0);

/// Parse a line-delimited JSON event log. Blank lines are skipped; any other
/// malformed line throws with its 1-based line number.
std::vector<Event> read_event_log(std::istream & in);

enum class Aggregator { count, sum, mean, last };

Aggregator parse_aggregator(std::string_view name);
std::string_view to_string(Aggregator agg);

struct DynamicTraitDef {
    std::string name;
    std::string event_kind;
    Aggregator aggregator = Aggregator::count;
    std::string field;          // payload key; unused for count
    double window_days = 30.0;
};

/// Latest value of `field` from events of `event_kind`, no window.
struct StaticTraitDef {
    std::string name;
    std::string event_kind;
    std::string field;
};

struct TraitCatalog {
    std::vector<StaticTraitDef> static_traits;
    std::vector<DynamicTraitDef> dynamic_traits;
};

TraitCatalog trait_catalog_from_json(const nlohmann::json & j);

/// Per-subject retained events plus the catalog describing how they
/// aggregate. Aggregates are recomputed from the retained list at query time,
/// so late or out-of-order events are handled the same as in-order ones.
class TraitStore {
    public:
        explicit TraitStore(TraitCatalog catalog);

        /// Retain the event if any trait listens to its kind; no-op otherwise.
        void update(const Event & event);

        bool has_subject(const std::string & subject_id) const;
        std::vector<std::string> subjects() const;

        /// Trait value at `now`; nullopt means missing. Throws for unknown
        /// subjects or trait names.
        std::optional<double> value(const std::string & subject_id, const std::string & trait,
                                    Timestamp now) const;

        Timestamp last_updated() const { return last_updated_; }
        const TraitCatalog & catalog() const { return catalog_; }

    private:
        TraitCatalog catalog_;
        std::map<std::string, std::vector<Event>> retained_;
        Timestamp last_updated_ = 0;
};

/// Functional form of TraitStore::update.
TraitStore update_traits(TraitStore store, const Event & event);

struct ContextColumn {
    std::string trait;
    bool missing_indicator = true;
    std::optional<double> mean;
    std::optional<double> scale;
};

class ContextSchema {
    public:
        explicit ContextSchema(std::vector<ContextColumn> columns);

        std::size_t dimension() const { return dimension_; }
        const std::vector<ContextColumn> & columns() const { return columns_; }
        std::vector<std::string> column_names() const;

    private:
        std::vector<ContextColumn> columns_;
        std::size_t dimension_ = 0;
};

ContextSchema context_schema_from_json(const nlohmann::json & j);

/// Context for `subject_id` at `now`. Missing traits are imputed with zero and
/// flag their indicator column with 1.
ContextVector build_context(const TraitStore & store, const std::string & subject_id,
                            const ContextSchema & schema, Timestamp now);

} // namespace adaptive
