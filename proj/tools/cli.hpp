// mkvlab command layer: config schemas, command execution, CSV and manifest output.
#pragma once

#include <json.hpp>
#include <stdexcept>
#include <string>
#include <vector>

namespace mkvlab {

using json = nlohmann::ordered_json;

// Bad config or command line: exit code 2.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<json>> rows;  // scalar cells
    json summary = json::object();
};

std::vector<std::string> command_names();

// Validates a run config against its command schema and fills every default.
json resolve_run_config(const json& raw);

// Sweep configs carry "sweep": {param: [values...]} and optional "fit", "parallel".
json resolve_sweep_config(const json& raw);

// Runs one resolved config.
Table execute(const json& resolved);

// Cartesian-product sweep; the aggregated table holds the grid columns first.
Table execute_sweep(const json& resolved);

std::string csv_text(const std::string& command, const Table& table);
std::string sha256_hex(const std::string& bytes);
void write_atomic(const std::string& path, const std::string& content);

// Full command-line entry point; returns the process exit code.
int main_entry(int argc, char** argv);

}  // namespace mkvlab
