#include "reforce/catalog.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace reforce {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

std::string to_string(Dialect d) {
  switch (d) {
    case Dialect::snowflake: return "snowflake";
    case Dialect::bigquery: return "bigquery";
    case Dialect::sqlite: return "sqlite";
  }
  return "sqlite";
}

Dialect dialect_from_string(const std::string& s) {
  if (s == "snowflake") return Dialect::snowflake;
  if (s == "bigquery") return Dialect::bigquery;
  if (s == "sqlite") return Dialect::sqlite;
  throw std::runtime_error("unknown dialect: " + s);
}

const TableInfo* DatabaseCatalog::find_table(const std::string& name) const {
  for (const auto& t : tables) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

namespace {

// Minimal CSV cell escaping for sample-row rendering.
std::string csv_cell(const std::string& v) {
  if (v.find_first_of(",\"\n\r") == std::string::npos) return v;
  std::string out = "\"";
  for (char c : v) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += "\"";
  return out;
}

}  // namespace

std::string render_table(const TableInfo& t, bool full) {
  if (!full) return t.name;

  std::string out = "-- Table: " + t.name + "\n";
  out += t.ddl;
  if (!t.ddl.empty() && t.ddl.back() != '\n') out += '\n';
  if (!t.description.empty()) {
    out += "-- Description: " + t.description + "\n";
  }
  if (!t.sample_rows.empty()) {
    out += "-- Sample rows (" + std::to_string(t.sample_rows.size()) + " shown):\n";
    const auto& first = t.sample_rows.front();
    for (std::size_t i = 0; i < first.size(); ++i) {
      if (i > 0) out += ',';
      out += csv_cell(first[i].first);
    }
    out += '\n';
    for (const auto& row : t.sample_rows) {
      for (std::size_t i = 0; i < row.size(); ++i) {
        if (i > 0) out += ',';
        out += csv_cell(row[i].second);
      }
      out += '\n';
    }
  }
  return out;
}

void finalize_table(TableInfo& t) {
  t.byte_size = render_table(t, /*full=*/true).size();
}

std::vector<TaskInstance> load_tasks(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("task file not found: " + path);

  std::vector<TaskInstance> tasks;
  std::set<std::string> seen;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ordered_json rec = ordered_json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (rec.is_discarded() || !rec.is_object()) {
      throw std::runtime_error("task file parse error at line " + std::to_string(line_no) +
                               " of " + path);
    }
    TaskInstance t;
    try {
      t.instance_id = rec.at("instance_id").get<std::string>();
      t.db_id = rec.at("db_id").get<std::string>();
      t.question = rec.at("question").get<std::string>();
      if (rec.contains("external_knowledge") && rec["external_knowledge"].is_string()) {
        t.external_knowledge = rec["external_knowledge"].get<std::string>();
      }
      t.dialect = dialect_from_string(rec.at("dialect").get<std::string>());
    } catch (const std::exception& e) {
      throw std::runtime_error("task file parse error at line " + std::to_string(line_no) +
                               " of " + path + ": " + e.what());
    }
    if (!seen.insert(t.instance_id).second) {
      throw std::runtime_error("duplicate instance_id \"" + t.instance_id + "\" at line " +
                               std::to_string(line_no) + " of " + path);
    }
    tasks.push_back(std::move(t));
  }
  return tasks;
}

DatabaseCatalog load_catalog(const std::string& dir, const std::string& db_id,
                             int sample_row_cap) {
  fs::path root = fs::path(dir) / db_id;
  if (!fs::is_directory(root)) {
    throw std::runtime_error("catalog directory missing: " + root.string());
  }

  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_regular_file() && entry.path().extension() == ".tbl") {
      files.push_back(entry.path());
    }
  }
  if (files.empty()) {
    throw std::runtime_error("catalog has no table files: " + root.string());
  }
  std::sort(files.begin(), files.end());

  DatabaseCatalog catalog;
  catalog.db_id = db_id;
  std::set<std::string> names;
  for (const auto& f : files) {
    std::ifstream in(f);
    std::stringstream buf;
    buf << in.rdbuf();
    ordered_json rec = ordered_json::parse(buf.str(), nullptr, false);
    if (rec.is_discarded() || !rec.is_object()) {
      throw std::runtime_error("malformed table file: " + f.string());
    }
    TableInfo t;
    try {
      t.name = rec.at("table_name").get<std::string>();
      t.ddl = rec.at("ddl").get<std::string>();
      if (rec.contains("description") && rec["description"].is_string()) {
        t.description = rec["description"].get<std::string>();
      }
      if (rec.contains("sample_rows")) {
        for (const auto& row : rec["sample_rows"]) {
          if (static_cast<int>(t.sample_rows.size()) >= sample_row_cap) break;
          SampleRow r;
          for (const auto& [col, val] : row.items()) {
            r.emplace_back(col, val.is_string() ? val.get<std::string>() : val.dump());
          }
          t.sample_rows.push_back(std::move(r));
        }
      }
    } catch (const std::exception& e) {
      throw std::runtime_error("malformed table file: " + f.string() + ": " + e.what());
    }
    if (t.name.empty() || !names.insert(t.name).second) {
      throw std::runtime_error("malformed table file: " + f.string() +
                               ": empty or duplicate table name");
    }
    finalize_table(t);
    catalog.tables.push_back(std::move(t));
  }
  return catalog;
}

void save_catalog(const DatabaseCatalog& catalog, const std::string& dir) {
  fs::path root = fs::path(dir) / catalog.db_id;
  fs::create_directories(root);
  for (const auto& t : catalog.tables) {
    ordered_json rec;
    rec["table_name"] = t.name;
    rec["ddl"] = t.ddl;
    if (!t.description.empty()) rec["description"] = t.description;
    ordered_json rows = ordered_json::array();
    for (const auto& row : t.sample_rows) {
      ordered_json r = ordered_json::object();
      for (const auto& [col, val] : row) r[col] = val;
      rows.push_back(std::move(r));
    }
    rec["sample_rows"] = std::move(rows);
    std::ofstream out(root / (t.name + ".tbl"));
    out << rec.dump(2) << "\n";
  }
}

std::string sqlite_db_path(const std::string& dir, const std::string& db_id) {
  return (fs::path(dir) / db_id / (db_id + ".sqlite")).string();
}

}  // namespace reforce
