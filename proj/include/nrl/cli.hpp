#pragma once

// Batch front-end: `<tool> <command> --config <path> [--out <dir>] [--seed <u64>]`.
//
// Config layout (schema_version 1):
//   { "schema_version": 1, "command": "...", "seed": 1, "metric": {...},
//     "params": {...}, "tolerances": {...}, "out": "dir" }
// Only schema_version is required. "command", when present, must match the
// command line. Unknown keys anywhere are rejected with ConfigInvalid.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace nrl {

struct Check {
  std::string name;
  double value = 0.0;
  double bound = 0.0;
  std::string op;  // "<=", ">=", "=="
  bool passed = false;
};

struct CsvTable {
  std::string file;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

struct Outcome {
  std::string command;
  std::uint64_t seed = 1;
  std::vector<Check> checks;
  std::vector<CsvTable> tables;
  nlohmann::json summary = nlohmann::json::object();

  bool passed() const;
};

struct ExperimentConfig {
  std::string command;
  std::uint64_t seed = 1;
  nlohmann::json metric;  // null when absent
  nlohmann::json params = nlohmann::json::object();
  nlohmann::json tolerances = nlohmann::json::object();
  std::string out_dir;
};

const std::vector<std::string>& command_names();

// Throws ConfigInvalid on schema violations; `seed` overrides the config seed.
ExperimentConfig parse_config(const nlohmann::json& j, const std::string& command,
                              std::optional<std::uint64_t> seed = std::nullopt);

// Runs the named experiment. Parameter and tolerance keys are checked against
// the command's own lists. Errors raised by the experiment itself are
// recorded as a failed check named after the error.
Outcome run_experiment(const ExperimentConfig& cfg);

// CSV files (one timestamp comment line, header row, LF endings) and
// summary.json in `dir`, created when missing.
void write_artifacts(const Outcome& o, const std::string& dir);

std::string csv_number(double v);

// Exit status: 0 all checks pass, 1 some check failed, 2 invalid config.
int cli_main(int argc, char** argv);

}  // namespace nrl
