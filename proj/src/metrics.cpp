#include <adaptive/metrics.hpp>

#include <charconv>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

namespace adaptive {

namespace {

const char * const kHeader = "scenario,replication,round,metric,value";

std::string quote(const std::string & field) {
    if (field.find_first_of(",\"\n\r") == std::string::npos)
        return field;
    std::string out = "\"";
    for (const char c : field) {
        if (c == '"')
            out += '"';
        out += c;
    }
    return out + "\"";
}

std::vector<std::string> split_csv(const std::string & line, std::size_t line_no) {
    std::vector<std::string> fields(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                fields.back() += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                fields.back() += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.emplace_back();
        } else {
            fields.back() += c;
        }
    }
    if (quoted)
        throw Error("input", "line " + std::to_string(line_no) + ": unterminated quote");
    return fields;
}

} // namespace

void write_metrics(const MetricsTable & table, std::ostream & out) {
    out << kHeader << '\n';
    for (const auto & row : table.rows)
        out << quote(row.scenario) << ',' << quote(row.replication) << ',' << quote(row.round) << ','
            << quote(row.metric) << ',' << format_double(row.value) << '\n';
}

void export_metrics(const MetricsTable & table, const std::filesystem::path & path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error("io", "cannot write metrics: " + path.string());
    write_metrics(table, out);
    if (!out)
        throw Error("io", "cannot write metrics: " + path.string());
}

MetricsTable read_metrics(std::istream & in) {
    MetricsTable table;
    std::string line;
    if (!std::getline(in, line) || line != kHeader)
        throw Error("input", "metrics file must start with header: " + std::string(kHeader));
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty())
            continue;
        auto f = split_csv(line, line_no);
        if (f.size() != 5)
            throw Error("input", "line " + std::to_string(line_no) + ": expected 5 columns");
        double value = 0.0;
        const auto [p, ec] = std::from_chars(f[4].data(), f[4].data() + f[4].size(), value);
        if (ec != std::errc() || p != f[4].data() + f[4].size())
            throw Error("input", "line " + std::to_string(line_no) + ": bad value: " + f[4]);
        table.rows.push_back({f[0], f[1], f[2], f[3], value});
    }
    return table;
}

MetricsTable read_metrics(const std::filesystem::path & path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("input", "cannot open metrics file: " + path.string());
    return read_metrics(in);
}

} // namespace adaptive
