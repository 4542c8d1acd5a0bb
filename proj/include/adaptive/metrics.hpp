#pragma once

#include <filesystem>
#include <iosfwd>

#include <adaptive/simulator.hpp>

namespace adaptive {

/// CSV with header "scenario,replication,round,metric,value". Rows keep
/// table order; numbers use the shortest round-trip representation.
void write_metrics(const MetricsTable & table, std::ostream & out);
void export_metrics(const MetricsTable & table, const std::filesystem::path & path);

MetricsTable read_metrics(std::istream & in);
MetricsTable read_metrics(const std::filesystem::path & path);

} // namespace adaptive
