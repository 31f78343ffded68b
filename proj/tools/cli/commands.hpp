// commands.hpp: subcommand implementations and the command-line driver
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "cli/table.hpp"

namespace lep::cli {

// One resolved invocation: the subcommand path ("spectrum", "ep locate",
// ...) and the merged configuration (file values, then flag overrides).
struct Invocation {
    std::string command;
    nlohmann::json config = nlohmann::json::object();
    unsigned workers = 0; // 0: available parallelism; never affects output
};

struct RunOutput {
    Provenance provenance;
    std::vector<Table> tables; // the first is the primary table

    std::size_t flagged_rows() const;
};

const std::vector<std::string>& command_names();

// Runs a subcommand in-process. Throws ConfigError for invalid
// configurations; per-point numerical failures become flagged rows.
RunOutput run(const Invocation& inv);

// Full driver: argument parsing, config file, output files and exit codes
// (0 success, 1 config error, 2 numerical failure, 3 I/O error).
int main_entry(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// Output path of a secondary table: "<stem>_<name><ext>".
std::string secondary_path(const std::string& primary, const std::string& name);

} // namespace lep::cli
