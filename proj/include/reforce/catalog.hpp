#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace reforce {

enum class Dialect { snowflake, bigquery, sqlite };

std::string to_string(Dialect d);
Dialect dialect_from_string(const std::string& s);

// One sample row; column order follows the on-disk record.
using SampleRow = std::vector<std::pair<std::string, std::string>>;

struct TableInfo {
  std::string name;
  std::string ddl;
  std::string description;  // empty means none
  std::vector<SampleRow> sample_rows;
  std::size_t byte_size = 0;  // length of render_table(*this, /*full=*/true)
};

struct DatabaseCatalog {
  std::string db_id;
  Dialect dialect = Dialect::sqlite;
  std::vector<TableInfo> tables;

  const TableInfo* find_table(const std::string& name) const;
};

struct TaskInstance {
  std::string instance_id;
  std::string db_id;
  std::string question;
  std::string external_knowledge;  // empty means none
  Dialect dialect = Dialect::sqlite;
};

inline constexpr int kDefaultSampleRowCap = 3;

// full=false renders exactly the table name; full=true renders name, DDL,
// description and sample rows.
std::string render_table(const TableInfo& t, bool full);

// Recomputes byte_size from the full rendering.
void finalize_table(TableInfo& t);

// Line-delimited JSON task file, one TaskInstance per line.
std::vector<TaskInstance> load_tasks(const std::string& path);

// Reads every <dir>/<db_id>/*.tbl record. Sample rows beyond the cap are
// discarded in file order. The on-disk layout carries no dialect; callers
// overwrite `dialect` from the task.
DatabaseCatalog load_catalog(const std::string& dir, const std::string& db_id,
                             int sample_row_cap = kDefaultSampleRowCap);

// Writes the catalog back as <dir>/<db_id>/<table>.tbl records.
void save_catalog(const DatabaseCatalog& catalog, const std::string& dir);

std::string sqlite_db_path(const std::string& dir, const std::string& db_id);

}  // namespace reforce
