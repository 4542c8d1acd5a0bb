#include <adaptive/trait_pipeline.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <istream>
#include <set>
#include <tuple>

namespace adaptive {

namespace {

[[noreturn]] void malformed_timestamp() {
    throw Error("input", "malformed timestamp");
}

// Howard Hinnant's days_from_civil.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const auto yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, std::int64_t & y, unsigned & m, unsigned & d) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const auto doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = doy - (153 * mp + 2) / 5 + 1;
    m = mp < 10 ? mp + 3 : mp - 9;
    y += m <= 2;
}

bool is_leap(std::int64_t y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

unsigned days_in_month(std::int64_t y, unsigned m) {
    static constexpr unsigned kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    return m == 2 && is_leap(y) ? 29 : kDays[m - 1];
}

int digits(std::string_view s, std::size_t pos, std::size_t count) {
    if (pos + count > s.size())
        malformed_timestamp();
    int v = 0;
    for (std::size_t i = pos; i < pos + count; ++i) {
        if (!std::isdigit(static_cast<unsigned char>(s[i])))
            malformed_timestamp();
        v = v * 10 + (s[i] - '0');
    }
    return v;
}

void expect(std::string_view s, std::size_t pos, char c) {
    if (pos >= s.size() || std::toupper(static_cast<unsigned char>(s[pos])) != c)
        malformed_timestamp();
}

PayloadValue payload_from_json(const nlohmann::json & v, const std::string & key, std::size_t line) {
    if (v.is_boolean())
        return v.get<bool>();
    if (v.is_number())
        return v.get<double>();
    if (v.is_string())
        return v.get<std::string>();
    std::string msg = "payload value for '" + key + "' is not a scalar";
    if (line)
        msg = "line " + std::to_string(line) + ": " + msg;
    throw Error("input", msg);
}

bool event_less(const Event & a, const Event & b) {
    return std::tie(a.timestamp, a.kind, a.payload) < std::tie(b.timestamp, b.kind, b.payload);
}

} // namespace

Timestamp parse_timestamp(std::string_view s) {
    // YYYY-MM-DDTHH:MM:SS[.frac](Z|+HH:MM|-HH:MM)
    const int year = digits(s, 0, 4);
    expect(s, 4, '-');
    const int month = digits(s, 5, 2);
    expect(s, 7, '-');
    const int day = digits(s, 8, 2);
    expect(s, 10, 'T');
    const int hour = digits(s, 11, 2);
    expect(s, 13, ':');
    const int minute = digits(s, 14, 2);
    expect(s, 16, ':');
    const int second = digits(s, 17, 2);
    std::size_t pos = 19;
    if (pos < s.size() && s[pos] == '.') {
        ++pos;
        const std::size_t start = pos;
        while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos])))
            ++pos;
        if (pos == start)
            malformed_timestamp();
    }
    if (pos >= s.size())
        malformed_timestamp();
    int offset = 0;
    if (std::toupper(static_cast<unsigned char>(s[pos])) == 'Z') {
        ++pos;
    } else if (s[pos] == '+' || s[pos] == '-') {
        const int sign = s[pos] == '+' ? 1 : -1;
        const int oh = digits(s, pos + 1, 2);
        expect(s, pos + 3, ':');
        const int om = digits(s, pos + 4, 2);
        if (oh > 23 || om > 59)
            malformed_timestamp();
        offset = sign * (oh * 3600 + om * 60);
        pos += 6;
    } else {
        malformed_timestamp();
    }
    if (pos != s.size())
        malformed_timestamp();
    if (month < 1 || month > 12 || day < 1 ||
        static_cast<unsigned>(day) > days_in_month(year, static_cast<unsigned>(month)) ||
        hour > 23 || minute > 59 || second > 60)
        malformed_timestamp();

    const std::int64_t days = days_from_civil(year, static_cast<unsigned>(month), static_cast<unsigned>(day));
    return days * kSecondsPerDay + hour * 3600 + minute * 60 + second - offset;
}

std::string format_timestamp(Timestamp ts) {
    std::int64_t days = ts / kSecondsPerDay;
    std::int64_t rem = ts % kSecondsPerDay;
    if (rem < 0) {
        rem += kSecondsPerDay;
        --days;
    }
    std::int64_t y;
    unsigned m, d;
    civil_from_days(days, y, m, d);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04lld-%02u-%02uT%02lld:%02lld:%02lldZ", static_cast<long long>(y), m, d,
                  static_cast<long long>(rem / 3600), static_cast<long long>(rem / 60 % 60),
                  static_cast<long long>(rem % 60));
    return buf;
}

std::optional<double> numeric_value(const PayloadValue & v) {
    if (const auto * d = std::get_if<double>(&v))
        return *d;
    if (const auto * b = std::get_if<bool>(&v))
        return *b ? 1.0 : 0.0;
    return std::nullopt;
}

Event ingest_event(const nlohmann::json & record, std::size_t line) {
    auto fail = [line](const std::string & msg) -> Error {
        return Error("input", line ? "line " + std::to_string(line) + ": " + msg : msg);
    };
    if (!record.is_object())
        throw fail("record is not an object");
    for (const char * field : {"subject_id", "kind", "timestamp"}) {
        if (!record.contains(field))
            throw fail(std::string("missing field: ") + field);
        if (!record.at(field).is_string())
            throw fail(std::string("field is not a string: ") + field);
    }
    Event e;
    e.subject_id = record.at("subject_id").get<std::string>();
    e.kind = record.at("kind").get<std::string>();
    if (e.subject_id.empty())
        throw fail("missing field: subject_id");
    if (e.kind.empty())
        throw fail("missing field: kind");
    try {
        e.timestamp = parse_timestamp(record.at("timestamp").get<std::string>());
    } catch (const Error &) {
        throw fail("malformed timestamp");
    }
    if (record.contains("payload")) {
        const auto & p = record.at("payload");
        if (!p.is_object())
            throw fail("payload is not an object");
        for (const auto & [key, val] : p.items())
            e.payload.emplace(key, payload_from_json(val, key, line));
    }
    return e;
}

std::vector<Event> read_event_log(std::istream & in) {
    std::vector<Event> events;
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (text.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        nlohmann::json record;
        try {
            record = nlohmann::json::parse(text);
        } catch (const nlohmann::json::parse_error &) {
            throw Error("input", "line " + std::to_string(line) + ": invalid JSON");
        }
        events.push_back(ingest_event(record, line));
    }
    return events;
}

Aggregator parse_aggregator(std::string_view name) {
    if (name == "count") return Aggregator::count;
    if (name == "sum") return Aggregator::sum;
    if (name == "mean") return Aggregator::mean;
    if (name == "last") return Aggregator::last;
    throw Error("config", "unknown aggregator: " + std::string(name));
}

std::string_view to_string(Aggregator agg) {
    switch (agg) {
        case Aggregator::count: return "count";
        case Aggregator::sum: return "sum";
        case Aggregator::mean: return "mean";
        case Aggregator::last: return "last";
    }
    return "count";
}

TraitCatalog trait_catalog_from_json(const nlohmann::json & j) {
    TraitCatalog catalog;
    std::set<std::string> names;
    auto claim = [&names](const std::string & name) {
        if (name.empty() || !names.insert(name).second)
            throw Error("config", "duplicate or empty trait name: " + name);
    };
    if (j.contains("static"))
        for (const auto & t : j.at("static")) {
            StaticTraitDef def{t.at("name").get<std::string>(), t.at("kind").get<std::string>(),
                               t.at("field").get<std::string>()};
            claim(def.name);
            catalog.static_traits.push_back(std::move(def));
        }
    if (j.contains("dynamic"))
        for (const auto & t : j.at("dynamic")) {
            DynamicTraitDef def;
            def.name = t.at("name").get<std::string>();
            def.event_kind = t.at("kind").get<std::string>();
            def.aggregator = parse_aggregator(t.at("aggregator").get<std::string>());
            def.field = t.value("field", std::string{});
            def.window_days = t.at("window_days").get<double>();
            if (!(def.window_days > 0.0))
                throw Error("config", "window_days must be positive: " + def.name);
            if (def.aggregator != Aggregator::count && def.field.empty())
                throw Error("config", "aggregator needs a payload field: " + def.name);
            claim(def.name);
            catalog.dynamic_traits.push_back(std::move(def));
        }
    return catalog;
}

TraitStore::TraitStore(TraitCatalog catalog) : catalog_(std::move(catalog)) {}

void TraitStore::update(const Event & event) {
    const bool relevant =
        std::any_of(catalog_.static_traits.begin(), catalog_.static_traits.end(),
                    [&](const auto & t) { return t.event_kind == event.kind; }) ||
        std::any_of(catalog_.dynamic_traits.begin(), catalog_.dynamic_traits.end(),
                    [&](const auto & t) { return t.event_kind == event.kind; });
    if (!relevant)
        return;
    auto & events = retained_[event.subject_id];
    events.insert(std::upper_bound(events.begin(), events.end(), event, event_less), event);
    last_updated_ = std::max(last_updated_, event.timestamp);
}

bool TraitStore::has_subject(const std::string & subject_id) const {
    return retained_.count(subject_id) != 0;
}

std::vector<std::string> TraitStore::subjects() const {
    std::vector<std::string> out;
    for (const auto & [id, _] : retained_)
        out.push_back(id);
    return out;
}

std::optional<double> TraitStore::value(const std::string & subject_id, const std::string & trait,
                                        Timestamp now) const {
    const auto it = retained_.find(subject_id);
    if (it == retained_.end())
        throw Error("input", "unknown subject: " + subject_id);
    const auto & events = it->second;

    for (const auto & def : catalog_.static_traits) {
        if (def.name != trait)
            continue;
        std::optional<double> latest;
        for (const auto & e : events) {
            if (e.timestamp > now)
                break;
            if (e.kind != def.event_kind)
                continue;
            if (auto f = e.payload.find(def.field); f != e.payload.end())
                if (auto v = numeric_value(f->second))
                    latest = v;
        }
        return latest;
    }

    for (const auto & def : catalog_.dynamic_traits) {
        if (def.name != trait)
            continue;
        const auto window = static_cast<Timestamp>(std::llround(def.window_days * kSecondsPerDay));
        const Timestamp start = now - window;
        double count = 0.0, sum = 0.0;
        std::optional<double> last;
        for (const auto & e : events) {
            if (e.timestamp > now)
                break;
            if (e.timestamp <= start || e.kind != def.event_kind)
                continue;
            if (def.aggregator == Aggregator::count) {
                count += 1.0;
                continue;
            }
            auto f = e.payload.find(def.field);
            if (f == e.payload.end())
                continue;
            if (auto v = numeric_value(f->second)) {
                count += 1.0;
                sum += *v;
                last = v;
            }
        }
        switch (def.aggregator) {
            case Aggregator::count: return count;
            case Aggregator::sum: return sum;
            case Aggregator::mean: return count > 0.0 ? std::optional<double>(sum / count) : std::nullopt;
            case Aggregator::last: return last;
        }
    }
    throw Error("input", "unknown trait: " + trait);
}

TraitStore update_traits(TraitStore store, const Event & event) {
    store.update(event);
    return store;
}

ContextSchema::ContextSchema(std::vector<ContextColumn> columns) : columns_(std::move(columns)) {
    std::set<std::string> seen;
    for (const auto & c : columns_) {
        if (c.trait.empty() || !seen.insert(c.trait).second)
            throw Error("config", "duplicate or empty schema trait: " + c.trait);
        if (c.scale && !(*c.scale > 0.0))
            throw Error("config", "standardization scale must be positive: " + c.trait);
        dimension_ += c.missing_indicator ? 2 : 1;
    }
}

std::vector<std::string> ContextSchema::column_names() const {
    std::vector<std::string> names;
    for (const auto & c : columns_) {
        names.push_back(c.trait);
        if (c.missing_indicator)
            names.push_back(c.trait + "_missing");
    }
    return names;
}

ContextSchema context_schema_from_json(const nlohmann::json & j) {
    std::vector<ContextColumn> cols;
    for (const auto & c : j.at("columns")) {
        ContextColumn col;
        if (c.is_string()) {
            col.trait = c.get<std::string>();
        } else {
            col.trait = c.at("trait").get<std::string>();
            col.missing_indicator = c.value("missing_indicator", true);
            if (c.contains("mean"))
                col.mean = c.at("mean").get<double>();
            if (c.contains("scale"))
                col.scale = c.at("scale").get<double>();
        }
        cols.push_back(std::move(col));
    }
    return ContextSchema(std::move(cols));
}

ContextVector build_context(const TraitStore & store, const std::string & subject_id,
                            const ContextSchema & schema, Timestamp now) {
    if (!store.has_subject(subject_id))
        throw Error("input", "unknown subject: " + subject_id);
    ContextVector x = ContextVector::Zero(static_cast<Eigen::Index>(schema.dimension()));
    Eigen::Index i = 0;
    for (const auto & col : schema.columns()) {
        const auto v = store.value(subject_id, col.trait, now);
        if (v) {
            x[i] = (*v - col.mean.value_or(0.0)) / col.scale.value_or(1.0);
        }
        ++i;
        if (col.missing_indicator)
            x[i++] = v ? 0.0 : 1.0;
    }
    return x;
}

} // namespace adaptive
