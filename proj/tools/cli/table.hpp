// table.hpp: result tables and their CSV / JSON renderings
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

namespace lep::cli {

using Cell = std::variant<double, std::int64_t, std::string>;

struct Table {
    std::string name;                      // "" for the primary table
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;
    std::vector<std::string> notes;        // extra "# key: value" header lines
    std::size_t flagged_rows = 0;

    void add_row(std::vector<Cell> row);
};

// Metadata shared by every table of one run.
struct Provenance {
    std::string tool_version;
    std::string command;
    std::string config_hash;
    std::optional<std::uint64_t> seed;
    nlohmann::json config;
};

enum class Format { Csv, Json };
Format parse_format(const std::string& s);

// 12 significant digits; nan and +-inf spelled out.
std::string format_number(double x);

std::string render_csv(const Provenance& prov, const Table& t);
std::string render_json(const Provenance& prov, const Table& t);
std::string render(const Provenance& prov, const Table& t, Format f);

// FNV-1a 64-bit digest, as 16 hex digits.
std::string fnv1a_hex(const std::string& bytes);

} // namespace lep::cli
