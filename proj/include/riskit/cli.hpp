// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

namespace riskit::cli {

using Json = nlohmann::json;

// A CSV cell: numbers are written with 17 significant digits, text is always quoted.
using Cell = std::variant<double, std::string>;

struct TableMeta {
    std::string scenario;
    std::uint64_t seed = 0;
    std::string git_describe;
    std::string timestamp;
};

struct ResultTable {
    std::string name;  // curve family, used in the file name
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;
    TableMeta meta;

    void add_row(std::vector<Cell> row);
    // Throws DimensionError unless every row has one cell per column.
    void validate() const;
    // Stable lexicographic sort on the first `keys` columns (numbers before text).
    void sort_rows(std::size_t keys);
    std::size_t column(const std::string& name) const;
    double number(std::size_t row, const std::string& col) const;
    std::string text(std::size_t row, const std::string& col) const;
};

// "nan", "inf", "-inf" for non-finite values, %.17g otherwise.
std::string format_number(double v);

// Header row, CRLF-free '\n' line ends, RFC 4180 quoting for text cells.
void write_csv(const ResultTable& table, std::ostream& os);
void write_csv(const ResultTable& table, const std::string& path);
// Inverse of write_csv: unquoted fields parse as numbers, quoted fields stay text.
ResultTable read_csv(std::istream& is);
ResultTable read_csv_file(const std::string& path);

struct ExperimentConfig {
    std::string scenario;
    std::uint64_t seed = 1;
    int trials = 0;       // 0: scenario default
    Json params = Json::object();  // overrides only; resolve() merges defaults
    std::string out_path = "out";
};

const std::vector<std::string>& scenario_names();

// Default parameter object of a built-in scenario, including "trials".
Json scenario_defaults(const std::string& name);

// Strict JSON document: {"scenario", "seed", "trials", "out", "params"}.
// Unknown keys and type mismatches throw ConfigError naming the key.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig parse_config_file(const std::string& path);

// KEY is a top-level field or a parameter name; VALUE is parsed as JSON and
// falls back to a plain string.
void apply_override(ExperimentConfig& cfg, const std::string& key, const std::string& value);

struct ResolvedConfig {
    std::string scenario;   // built-in name actually run (custom resolves to its base)
    std::uint64_t seed = 1;
    int trials = 1;
    Json params;            // complete parameter set
};

// Fills defaults and checks every override against the default's type.
// "custom" needs params.base plus every key of that base scenario.
ResolvedConfig resolve(const ExperimentConfig& cfg);

struct ScenarioOutput {
    std::vector<ResultTable> tables;
    Json notes = Json::object();
};

ScenarioOutput run_scenario(const ResolvedConfig& cfg);
ScenarioOutput run_scenario(const ExperimentConfig& cfg);

// Writes <scenario>_<table>.csv per table plus manifest.json; returns the paths.
std::vector<std::string> write_outputs(const ExperimentConfig& cfg, const ResolvedConfig& resolved,
                                       ScenarioOutput& out);

std::string git_describe();
std::string utc_timestamp();

} // namespace riskit::cli
