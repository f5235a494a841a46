#pragma once

// Report bundles: a JSON manifest, CSV tables and static figures.
//
// Layout under the output directory:
//   manifest.json   experiment, config hash, versions, seed, file index
//   config.txt      canonical configuration (its FNV-1a hash is in the manifest)
//   tables/*.csv
//   figures/*.svg, figures/*.pgm
//
// The manifest is checked against the published schema before anything is
// written. Nothing time- or host-dependent goes into any file.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "runner/config.hpp"
#include "runner/schema.hpp"

namespace divlab::cli {

using json = nlohmann::json;

class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Fixed-precision cell text. Zero is printed unsigned; non-finite values as inf, -inf, nan.
inline std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) return "0";
  return fmt::format("{:.12g}", v);
}

inline std::string num(Nats n) { return num(n.value()); }

struct CsvTable {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  void add(std::vector<std::string> row) { rows.push_back(std::move(row)); }

  std::string file() const { return "tables/" + name + ".csv"; }

  std::string render() const {
    std::string out;
    const auto line = [&out](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) out += (i ? "," : "") + cells[i];
      out += '\n';
    };
    line(columns);
    for (const auto& r : rows) line(r);
    return out;
  }

  /// Index of a named column; throws if absent.
  std::size_t column(const std::string& c) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (columns[i] == c) return i;
    }
    throw std::out_of_range("no column " + c + " in table " + name);
  }
};

struct Figure {
  std::string name;
  std::string format;  // svg | pgm
  std::string bytes;

  std::string file() const { return "figures/" + name + "." + format; }
};

struct RunLink {
  std::string label;
  std::uint64_t seed = 0;
  std::string table;
};

struct ReportBundle {
  std::string experiment;
  std::uint64_t seed = 0;
  std::string config_text;
  std::vector<CsvTable> tables;
  std::vector<Figure> figures;
  std::vector<RunLink> runs;

  const CsvTable& table(const std::string& name) const {
    for (const auto& t : tables) {
      if (t.name == name) return t;
    }
    throw std::out_of_range("no table " + name);
  }

  json manifest() const {
    json m;
    m["experiment"] = experiment;
    m["config_hash"] = hash_hex(detail::fnv1a64(config_text));
    m["seed"] = seed;
    m["versions"] = {{"divlab", DIVLAB_VERSION},
                     {"cli11", CLI11_VERSION},
                     {"nlohmann_json", fmt::format("{}.{}.{}", NLOHMANN_JSON_VERSION_MAJOR,
                                                   NLOHMANN_JSON_VERSION_MINOR, NLOHMANN_JSON_VERSION_PATCH)},
                     {"fmt", fmt::format("{}.{}.{}", FMT_VERSION / 10000, FMT_VERSION / 100 % 100, FMT_VERSION % 100)}};
    m["config_file"] = "config.txt";
    m["tables"] = json::array();
    for (const auto& t : tables) m["tables"].push_back({{"file", t.file()}, {"columns", t.columns}, {"rows", t.rows.size()}});
    m["figures"] = json::array();
    for (const auto& f : figures) m["figures"].push_back({{"file", f.file()}, {"format", f.format}});
    m["runs"] = json::array();
    for (const auto& r : runs) m["runs"].push_back({{"label", r.label}, {"seed", r.seed}, {"table", r.table}});
    return m;
  }
};

namespace detail {

/// Checks `value` against the subset of JSON Schema the report schema uses:
/// type, enum, pattern, minimum, required, properties, additionalProperties,
/// items and minItems.
inline void check_schema(const json& schema, const json& value, const std::string& path) {
  const auto fail = [&](const std::string& why) { throw SchemaError(path + ": " + why); };
  if (schema.contains("type")) {
    const std::string t = schema["type"];
    const bool ok = (t == "object" && value.is_object()) || (t == "array" && value.is_array()) ||
                    (t == "string" && value.is_string()) || (t == "boolean" && value.is_boolean()) ||
                    (t == "integer" && value.is_number_integer()) || (t == "number" && value.is_number());
    if (!ok) fail("expected " + t);
  }
  if (schema.contains("enum")) {
    bool found = false;
    for (const auto& e : schema["enum"]) found = found || e == value;
    if (!found) fail("value not in enum");
  }
  if (schema.contains("pattern") && !std::regex_search(value.get<std::string>(), std::regex(schema["pattern"].get<std::string>()))) {
    fail("'" + value.get<std::string>() + "' does not match " + schema["pattern"].get<std::string>());
  }
  if (schema.contains("minimum") && value.get<double>() < schema["minimum"].get<double>()) fail("below minimum");
  if (value.is_object()) {
    for (const auto& r : schema.value("required", json::array())) {
      if (!value.contains(r.get<std::string>())) fail("missing " + r.get<std::string>());
    }
    const json props = schema.value("properties", json::object());
    for (const auto& [k, v] : value.items()) {
      if (props.contains(k)) {
        check_schema(props[k], v, path + "." + k);
      } else if (!schema.value("additionalProperties", true)) {
        fail("unexpected property " + k);
      }
    }
  }
  if (value.is_array()) {
    if (schema.contains("minItems") && value.size() < schema["minItems"].get<std::size_t>()) fail("too few items");
    if (schema.contains("items")) {
      for (std::size_t i = 0; i < value.size(); ++i) check_schema(schema["items"], value[i], path + "[" + std::to_string(i) + "]");
    }
  }
}

}  // namespace detail

inline const json& report_schema() {
  static const json schema = json::parse(kReportSchema);
  return schema;
}

/// Schema check of the manifest plus the table and file invariants a schema
/// cannot express.
inline void validate_bundle(const ReportBundle& b) {
  detail::check_schema(report_schema(), b.manifest(), "manifest");
  std::set<std::string> files;
  for (const auto& t : b.tables) {
    if (!files.insert(t.file()).second) throw SchemaError("duplicate file " + t.file());
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      if (t.rows[r].size() != t.columns.size()) {
        throw SchemaError(fmt::format("{}: row {} has {} cells for {} columns", t.file(), r + 1, t.rows[r].size(),
                                      t.columns.size()));
      }
      for (const auto& cell : t.rows[r]) {
        if (cell.empty() || cell.find_first_of(",\n\"") != std::string::npos) {
          throw SchemaError(fmt::format("{}: row {} has an empty or unquotable cell", t.file(), r + 1));
        }
      }
    }
  }
  for (const auto& f : b.figures) {
    if (!files.insert(f.file()).second) throw SchemaError("duplicate file " + f.file());
    if (f.bytes.empty()) throw SchemaError(f.file() + " is empty");
  }
  for (const auto& r : b.runs) {
    if (!files.contains(r.table)) throw SchemaError("run " + r.label + " links missing table " + r.table);
  }
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

inline void write_bundle(const ReportBundle& b, const std::filesystem::path& dir) {
  validate_bundle(b);
  std::filesystem::create_directories(dir / "tables");
  if (!b.figures.empty()) std::filesystem::create_directories(dir / "figures");
  write_file(dir / "manifest.json", b.manifest().dump(2) + "\n");
  write_file(dir / "config.txt", b.config_text);
  for (const auto& t : b.tables) write_file(dir / t.file(), t.render());
  for (const auto& f : b.figures) write_file(dir / f.file(), f.bytes);
}

}  // namespace divlab::cli
