#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace gluekit {

using Json = nlohmann::json;

/// Experiment kinds accepted in the `kind` field.
const std::vector<std::string>& experiment_kinds();
const std::vector<std::string>& preset_names();

/// Shipped configuration by name; ConfigError if unknown.
Json preset(const std::string& name);

/// Reads a JSON config file (not yet validated).
Json load_config(const std::string& path);

/// Fills defaults and rejects unknown or mistyped fields.
Json validate_config(const Json& config);

/// `key=value`; keys are dotted paths, bare keys refer to `params`.
/// The value is parsed as JSON when possible, otherwise taken as a string.
void apply_override(Json& config, const std::string& assignment);

/// Worker count: GLUEKIT_THREADS, then the config's `threads`, then hardware.
unsigned resolve_threads(const Json& config);

std::string config_hash(const Json& config);

struct Column {
  std::string name;
  std::string description;
};

struct Table {
  std::string name;
  std::vector<Column> columns;
  std::vector<std::vector<double>> rows;

  std::size_t index(const std::string& column) const;
  double at(std::size_t row, const std::string& column) const { return rows.at(row).at(index(column)); }
};

/// One plot-data file: (series, x, y, err) taken from a table.
struct PlotSpec {
  std::string figure;
  std::string table;
  std::string series;  // empty: single series
  std::string x;
  std::string y;
  std::string err;  // empty: no error column
};

struct ReportBundle {
  std::string kind;
  Json config;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<Table> tables;
  std::vector<PlotSpec> plots;
  std::vector<std::string> summary;
  std::vector<std::string> warnings;

  const Table& table(const std::string& name) const;
};

/// Validates and runs a config; module errors carry the experiment kind.
ReportBundle run_experiment(const Json& config);

/// Writes <table>.csv, report.json, summary.txt and plot_<figure>.csv into dir.
std::vector<std::string> emit_reports(const ReportBundle& bundle, const std::string& dir);

std::string summary_text(const ReportBundle& bundle);

std::string version_string();

}  // namespace gluekit
