// SPDX-License-Identifier: Apache-2.0
#include "riskit/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "riskit/errors.hpp"
#include "scenarios.hpp"

#ifndef RISKIT_GIT_DESCRIBE
#define RISKIT_GIT_DESCRIBE "unknown"
#endif

namespace riskit::cli {

void ResultTable::add_row(std::vector<Cell> row)
{
    if (row.size() != columns.size())
        throw DimensionError("ResultTable " + name + ": row has " + std::to_string(row.size()) + " cells, expected " +
                             std::to_string(columns.size()));
    rows.push_back(std::move(row));
}

void ResultTable::validate() const
{
    for (const auto& r : rows)
        if (r.size() != columns.size())
            throw DimensionError("ResultTable " + name + ": ragged rows");
}

namespace {

// Numbers sort before text; NaN sorts last among numbers.
bool cell_less(const Cell& a, const Cell& b)
{
    if (a.index() != b.index())
        return a.index() < b.index();
    if (const double* x = std::get_if<double>(&a)) {
        const double y = std::get<double>(b);
        if (std::isnan(*x) || std::isnan(y))
            return !std::isnan(*x) && std::isnan(y);
        return *x < y;
    }
    return std::get<std::string>(a) < std::get<std::string>(b);
}

} // namespace

void ResultTable::sort_rows(std::size_t keys)
{
    keys = std::min(keys, columns.size());
    std::stable_sort(rows.begin(), rows.end(), [keys](const auto& a, const auto& b) {
        for (std::size_t i = 0; i < keys; ++i) {
            if (cell_less(a[i], b[i]))
                return true;
            if (cell_less(b[i], a[i]))
                return false;
        }
        return false;
    });
}

std::size_t ResultTable::column(const std::string& col) const
{
    auto it = std::find(columns.begin(), columns.end(), col);
    if (it == columns.end())
        throw DimensionError("ResultTable " + name + ": no column " + col);
    return static_cast<std::size_t>(it - columns.begin());
}

double ResultTable::number(std::size_t row, const std::string& col) const
{
    return std::get<double>(rows.at(row).at(column(col)));
}

std::string ResultTable::text(std::size_t row, const std::string& col) const
{
    return std::get<std::string>(rows.at(row).at(column(col)));
}

std::string format_number(double v)
{
    if (std::isnan(v))
        return "nan";
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace {

std::string quote(const std::string& s)
{
    std::string out = "\"";
    for (char c : s) {
        if (c == '"')
            out += '"';
        out += c;
    }
    out += '"';
    return out;
}

void write_field(std::ostream& os, const Cell& c)
{
    if (const double* v = std::get_if<double>(&c))
        os << format_number(*v);
    else
        os << quote(std::get<std::string>(c));
}

struct Field {
    std::string text;
    bool quoted = false;
};

// Splits one record; quoted fields may contain commas, doubled quotes and newlines.
bool read_record(std::istream& is, std::vector<Field>& out)
{
    out.clear();
    int ch = is.peek();
    if (ch == EOF)
        return false;
    Field f;
    bool in_quotes = false;
    while (true) {
        ch = is.get();
        if (ch == EOF) {
            if (in_quotes)
                throw ConfigError("read_csv: unterminated quoted field");
            out.push_back(f);
            return true;
        }
        const char c = static_cast<char>(ch);
        if (in_quotes) {
            if (c == '"') {
                if (is.peek() == '"') {
                    is.get();
                    f.text += '"';
                } else {
                    in_quotes = false;
                }
            } else {
                f.text += c;
            }
        } else if (c == '"' && f.text.empty()) {
            in_quotes = true;
            f.quoted = true;
        } else if (c == ',') {
            out.push_back(f);
            f = Field{};
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && is.peek() == '\n')
                is.get();
            out.push_back(f);
            return true;
        } else {
            f.text += c;
        }
    }
}

double parse_number(const std::string& s)
{
    if (s == "nan")
        return std::nan("");
    if (s == "inf")
        return INFINITY;
    if (s == "-inf")
        return -INFINITY;
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw ConfigError("read_csv: not a number: '" + s + "'");
    }
    if (used != s.size())
        throw ConfigError("read_csv: not a number: '" + s + "'");
    return v;
}

} // namespace

void write_csv(const ResultTable& table, std::ostream& os)
{
    table.validate();
    for (std::size_t i = 0; i < table.columns.size(); ++i)
        os << (i ? "," : "") << table.columns[i];
    os << '\n';
    for (const auto& row : table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i)
                os << ',';
            write_field(os, row[i]);
        }
        os << '\n';
    }
}

void write_csv(const ResultTable& table, const std::string& path)
{
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw ConfigError("cannot open " + path + " for writing");
    write_csv(table, os);
    os.flush();
    if (!os)
        throw ConfigError("write failed: " + path);
}

ResultTable read_csv(std::istream& is)
{
    ResultTable t;
    std::vector<Field> rec;
    if (!read_record(is, rec))
        throw ConfigError("read_csv: missing header");
    for (auto& f : rec)
        t.columns.push_back(f.text);
    while (read_record(is, rec)) {
        if (rec.size() == 1 && rec[0].text.empty() && !rec[0].quoted)
            continue;  // blank line
        std::vector<Cell> row;
        for (auto& f : rec) {
            if (f.quoted)
                row.emplace_back(f.text);
            else
                row.emplace_back(parse_number(f.text));
        }
        if (row.size() != t.columns.size())
            throw ConfigError("read_csv: row " + std::to_string(t.rows.size() + 1) + " has " +
                              std::to_string(row.size()) + " fields, header has " +
                              std::to_string(t.columns.size()));
        t.rows.push_back(std::move(row));
    }
    return t;
}

ResultTable read_csv_file(const std::string& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw ConfigError("cannot open " + path);
    return read_csv(is);
}

const std::vector<std::string>& scenario_names()
{
    static const std::vector<std::string> names{"fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "custom"};
    return names;
}

Json scenario_defaults(const std::string& name)
{
    if (name == "custom")
        throw ConfigError("scenario 'custom' has no defaults; give params.base and the full parameter set");
    return detail::defaults_for(name);
}

namespace {

std::uint64_t json_seed(const Json& v, const std::string& where)
{
    if (v.is_number_unsigned())
        return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0)
        return static_cast<std::uint64_t>(v.get<std::int64_t>());
    throw ConfigError(where + ": expected a non-negative integer, got " + v.dump());
}

int json_trials(const Json& v, const std::string& where)
{
    if (!v.is_number_integer())
        throw ConfigError(where + ": expected an integer, got " + v.dump());
    const auto t = v.get<std::int64_t>();
    if (t < 1 || t > 100000000)
        throw ConfigError(where + ": trials must be >= 1");
    return static_cast<int>(t);
}

bool known_scenario(const std::string& s)
{
    const auto& n = scenario_names();
    return std::find(n.begin(), n.end(), s) != n.end();
}

void set_top_level(ExperimentConfig& cfg, const std::string& key, const Json& v)
{
    if (key == "scenario") {
        if (!v.is_string())
            throw ConfigError("scenario: expected a string");
        cfg.scenario = v.get<std::string>();
    } else if (key == "seed") {
        cfg.seed = json_seed(v, "seed");
    } else if (key == "trials") {
        cfg.trials = json_trials(v, "trials");
    } else if (key == "out") {
        if (!v.is_string())
            throw ConfigError("out: expected a string");
        cfg.out_path = v.get<std::string>();
    } else if (key == "params") {
        if (!v.is_object())
            throw ConfigError("params: expected an object");
        for (auto it = v.begin(); it != v.end(); ++it)
            cfg.params[it.key()] = it.value();
    } else {
        throw ConfigError("unknown key '" + key + "'");
    }
}

// Same JSON kind as the default; integers where the default is an integer.
void check_type(const Json& def, const Json& v, const std::string& where)
{
    auto fail = [&](const char* want) {
        throw ConfigError("params." + where + ": expected " + want + ", got " + v.dump());
    };
    if (def.is_boolean()) {
        if (!v.is_boolean())
            fail("a boolean");
    } else if (def.is_number_integer()) {
        if (!v.is_number_integer())
            fail("an integer");
    } else if (def.is_number()) {
        if (!v.is_number())
            fail("a number");
    } else if (def.is_string()) {
        if (!v.is_string())
            fail("a string");
    } else if (def.is_array()) {
        if (!v.is_array())
            fail("an array");
        if (v.empty())
            fail("a non-empty array");
        if (!def.empty())
            for (std::size_t i = 0; i < v.size(); ++i)
                check_type(def[0], v[i], where + "[" + std::to_string(i) + "]");
    } else if (def.is_object()) {
        if (!v.is_object())
            fail("an object");
    }
}

} // namespace

ExperimentConfig parse_config(const std::string& text)
{
    Json doc;
    try {
        doc = Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (!doc.is_object())
        throw ConfigError("config: top level must be an object");
    ExperimentConfig cfg;
    for (auto it = doc.begin(); it != doc.end(); ++it)
        set_top_level(cfg, it.key(), it.value());
    return cfg;
}

ExperimentConfig parse_config_file(const std::string& path)
{
    std::ifstream is(path);
    if (!is)
        throw ConfigError("cannot read config " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_config(ss.str());
}

void apply_override(ExperimentConfig& cfg, const std::string& key, const std::string& value)
{
    if (key.empty())
        throw ConfigError("--set: empty key");
    Json v;
    try {
        v = Json::parse(value);
    } catch (const Json::parse_error&) {
        v = value;
    }
    if (key == "scenario" || key == "seed" || key == "trials" || key == "out") {
        if (key == "scenario" || key == "out")
            v = value;
        set_top_level(cfg, key, v);
    } else {
        cfg.params[key] = v;
    }
}

ResolvedConfig resolve(const ExperimentConfig& cfg)
{
    if (!known_scenario(cfg.scenario))
        throw ConfigError("unknown scenario '" + cfg.scenario + "'");
    ResolvedConfig r;
    r.seed = cfg.seed;
    Json given = cfg.params;
    if (cfg.scenario == "custom") {
        if (!given.contains("base") || !given["base"].is_string())
            throw ConfigError("custom scenario needs params.base naming a built-in scenario");
        r.scenario = given["base"].get<std::string>();
        given.erase("base");
        if (r.scenario == "custom" || !known_scenario(r.scenario))
            throw ConfigError("custom: unknown base scenario '" + r.scenario + "'");
        const Json def = detail::defaults_for(r.scenario);
        std::string missing;
        for (auto it = def.begin(); it != def.end(); ++it)
            if (it.key() != "trials" && !given.contains(it.key()))
                missing += (missing.empty() ? "" : ", ") + it.key();
        if (!missing.empty())
            throw ConfigError("custom: missing parameters: " + missing);
    } else {
        r.scenario = cfg.scenario;
    }
    Json params = detail::defaults_for(r.scenario);
    for (auto it = given.begin(); it != given.end(); ++it) {
        if (it.key() == "trials")
            throw ConfigError("params.trials: set trials at the top level");
        if (!params.contains(it.key()))
            throw ConfigError("unknown key '" + it.key() + "' for scenario " + r.scenario);
        check_type(params[it.key()], it.value(), it.key());
        params[it.key()] = it.value();
    }
    r.trials = cfg.trials > 0 ? cfg.trials : params["trials"].get<int>();
    params.erase("trials");
    r.params = std::move(params);
    detail::validate_params(r.scenario, r.params);
    return r;
}

ScenarioOutput run_scenario(const ResolvedConfig& cfg)
{
    ScenarioOutput out = detail::run(cfg.scenario, cfg.params, cfg.seed, cfg.trials);
    for (auto& t : out.tables) {
        t.validate();
        t.meta.scenario = cfg.scenario;
        t.meta.seed = cfg.seed;
        t.meta.git_describe = git_describe();
    }
    return out;
}

ScenarioOutput run_scenario(const ExperimentConfig& cfg) { return run_scenario(resolve(cfg)); }

std::string git_describe() { return RISKIT_GIT_DESCRIBE; }

std::string utc_timestamp()
{
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::vector<std::string> write_outputs(const ExperimentConfig& cfg, const ResolvedConfig& resolved,
                                       ScenarioOutput& out)
{
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(cfg.out_path, ec);
    if (ec || !fs::is_directory(cfg.out_path))
        throw ConfigError("cannot create output directory " + cfg.out_path);

    const std::string stamp = utc_timestamp();
    std::vector<std::string> files;
    Json manifest;
    manifest["scenario"] = cfg.scenario;
    manifest["resolved_scenario"] = resolved.scenario;
    manifest["seed"] = resolved.seed;
    manifest["trials"] = resolved.trials;
    manifest["params"] = resolved.params;
    manifest["git_describe"] = git_describe();
    manifest["timestamp"] = stamp;
    manifest["notes"] = out.notes;
    Json tables = Json::array();
    for (auto& t : out.tables) {
        t.meta.timestamp = stamp;
        const std::string file = resolved.scenario + "_" + t.name + ".csv";
        const std::string path = (fs::path(cfg.out_path) / file).string();
        write_csv(t, path);
        files.push_back(path);
        tables.push_back({{"file", file}, {"columns", t.columns}, {"rows", t.rows.size()}});
    }
    manifest["tables"] = tables;
    const std::string mpath = (fs::path(cfg.out_path) / "manifest.json").string();
    std::ofstream os(mpath);
    if (!os)
        throw ConfigError("cannot open " + mpath + " for writing");
    os << manifest.dump(2) << '\n';
    if (!os)
        throw ConfigError("write failed: " + mpath);
    files.push_back(mpath);
    return files;
}

} // namespace riskit::cli
