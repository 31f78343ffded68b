#include "cli/table.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include <lepkit/errors.hpp>

namespace lep::cli {

void Table::add_row(std::vector<Cell> row) {
    if (row.size() != columns.size())
        throw ConsistencyError("table '" + name + "': row width does not match the column count");
    rows.push_back(std::move(row));
}

Format parse_format(const std::string& s) {
    if (s == "csv") return Format::Csv;
    if (s == "json") return Format::Json;
    throw ConfigError("format: expected csv or json, got '" + s + "'");
}

std::string format_number(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    if (x == 0.0) return "0"; // folds -0
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

namespace {

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string cell_text(const Cell& c) {
    if (const auto* d = std::get_if<double>(&c)) return format_number(*d);
    if (const auto* i = std::get_if<std::int64_t>(&c)) return std::to_string(*i);
    return csv_field(std::get<std::string>(c));
}

nlohmann::ordered_json cell_json(const Cell& c) {
    if (const auto* d = std::get_if<double>(&c)) {
        if (!std::isfinite(*d)) return nullptr;
        return std::stod(format_number(*d));
    }
    if (const auto* i = std::get_if<std::int64_t>(&c)) return *i;
    return std::get<std::string>(c);
}

} // namespace

std::string render_csv(const Provenance& prov, const Table& t) {
    std::ostringstream os;
    os << "# tool: lepkit " << prov.tool_version << "\n";
    os << "# command: " << prov.command << "\n";
    if (!t.name.empty()) os << "# table: " << t.name << "\n";
    os << "# config_hash: " << prov.config_hash << "\n";
    os << "# seed: " << (prov.seed ? std::to_string(*prov.seed) : std::string("none")) << "\n";
    os << "# config: " << prov.config.dump() << "\n";
    for (const auto& n : t.notes) os << "# " << n << "\n";
    os << "# rows: " << t.rows.size() << ", flagged: " << t.flagged_rows << "\n";
    for (std::size_t j = 0; j < t.columns.size(); ++j) os << (j ? "," : "") << t.columns[j];
    os << "\n";
    for (const auto& row : t.rows) {
        for (std::size_t j = 0; j < row.size(); ++j) os << (j ? "," : "") << cell_text(row[j]);
        os << "\n";
    }
    return os.str();
}

std::string render_json(const Provenance& prov, const Table& t) {
    nlohmann::ordered_json doc;
    doc["tool"] = "lepkit " + prov.tool_version;
    doc["command"] = prov.command;
    if (!t.name.empty()) doc["table"] = t.name;
    doc["config_hash"] = prov.config_hash;
    doc["seed"] = prov.seed ? nlohmann::ordered_json(*prov.seed) : nlohmann::ordered_json(nullptr);
    doc["config"] = nlohmann::ordered_json::parse(prov.config.dump());
    doc["notes"] = t.notes;
    doc["flagged_rows"] = t.flagged_rows;
    doc["columns"] = t.columns;
    auto rows = nlohmann::ordered_json::array();
    for (const auto& row : t.rows) {
        auto r = nlohmann::ordered_json::array();
        for (const auto& c : row) r.push_back(cell_json(c));
        rows.push_back(std::move(r));
    }
    doc["rows"] = std::move(rows);
    return doc.dump(1) + "\n";
}

std::string render(const Provenance& prov, const Table& t, Format f) {
    return f == Format::Csv ? render_csv(prov, t) : render_json(prov, t);
}

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace lep::cli
