#include "reforce/executor.hpp"

#include <sqlite3.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <numeric>
#include <stdexcept>

namespace reforce {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::string first_keyword(const std::string& sql) {
  std::size_t i = 0;
  // Skip whitespace and leading -- comments.
  while (i < sql.size()) {
    if (std::isspace(static_cast<unsigned char>(sql[i]))) {
      ++i;
    } else if (sql.compare(i, 2, "--") == 0) {
      std::size_t nl = sql.find('\n', i);
      if (nl == std::string::npos) return "";
      i = nl + 1;
    } else {
      break;
    }
  }
  std::size_t start = i;
  while (i < sql.size() && std::isalpha(static_cast<unsigned char>(sql[i]))) ++i;
  return lower(sql.substr(start, i - start));
}

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

struct TimeoutState {
  std::chrono::steady_clock::time_point deadline;
};

int progress_callback(void* arg) {
  auto* state = static_cast<TimeoutState*>(arg);
  return std::chrono::steady_clock::now() > state->deadline ? 1 : 0;
}

}  // namespace

struct SqliteAdapter::Impl {
  sqlite3* db = nullptr;
  std::chrono::milliseconds timeout{0};
};

SqliteAdapter::SqliteAdapter(const std::string& path, bool read_only,
                             std::chrono::milliseconds timeout)
    : impl_(std::make_unique<Impl>()) {
  impl_->timeout = timeout;
  int flags = read_only ? SQLITE_OPEN_READONLY : (SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE);
  if (sqlite3_open_v2(path.c_str(), &impl_->db, flags, nullptr) != SQLITE_OK) {
    std::string msg = impl_->db ? sqlite3_errmsg(impl_->db) : "open failed";
    if (impl_->db) sqlite3_close(impl_->db);
    impl_->db = nullptr;
    throw std::runtime_error("cannot open database " + path + ": " + msg);
  }
}

SqliteAdapter::~SqliteAdapter() {
  if (impl_ && impl_->db) sqlite3_close(impl_->db);
}

SqliteAdapter::SqliteAdapter(SqliteAdapter&&) noexcept = default;
SqliteAdapter& SqliteAdapter::operator=(SqliteAdapter&&) noexcept = default;

void SqliteAdapter::exec_script(const std::string& sql) {
  char* err = nullptr;
  if (sqlite3_exec(impl_->db, sql.c_str(), nullptr, nullptr, &err) != SQLITE_OK) {
    std::string msg = err ? err : "unknown error";
    sqlite3_free(err);
    throw std::runtime_error("sqlite script failed: " + msg);
  }
}

ExecutionResult SqliteAdapter::run(const std::string& sql) {
  ExecutionResult r;
  auto start = std::chrono::steady_clock::now();

  TimeoutState state{start + impl_->timeout};
  if (impl_->timeout.count() > 0) {
    sqlite3_progress_handler(impl_->db, 1000, progress_callback, &state);
  }

  sqlite3_stmt* stmt = nullptr;
  int rc = sqlite3_prepare_v2(impl_->db, sql.c_str(), -1, &stmt, nullptr);
  if (rc != SQLITE_OK) {
    r.status = ExecStatus::error;
    r.error_msg = sqlite3_errmsg(impl_->db);
    if (r.error_msg.empty()) r.error_msg = "prepare failed";
  } else {
    int cols = sqlite3_column_count(stmt);
    for (int i = 0; i < cols; ++i) {
      const char* name = sqlite3_column_name(stmt, i);
      r.columns.push_back(name ? name : "");
    }
    for (;;) {
      rc = sqlite3_step(stmt);
      if (rc == SQLITE_ROW) {
        std::vector<std::string> row;
        row.reserve(cols);
        for (int i = 0; i < cols; ++i) {
          const unsigned char* text = sqlite3_column_text(stmt, i);
          row.emplace_back(text ? reinterpret_cast<const char*>(text) : "");
        }
        r.rows.push_back(std::move(row));
      } else if (rc == SQLITE_DONE) {
        r.status = r.rows.empty() ? ExecStatus::empty : ExecStatus::ok;
        break;
      } else {
        r.status = ExecStatus::error;
        if (rc == SQLITE_INTERRUPT) {
          r.error_msg = "query timed out after " + std::to_string(impl_->timeout.count()) + " ms";
        } else {
          r.error_msg = sqlite3_errmsg(impl_->db);
        }
        r.columns.clear();
        r.rows.clear();
        break;
      }
    }
  }
  if (stmt) sqlite3_finalize(stmt);
  if (impl_->timeout.count() > 0) {
    sqlite3_progress_handler(impl_->db, 0, nullptr, nullptr);
  }

  if (r.status == ExecStatus::empty) {
    r.error_msg.clear();
  }
  r.elapsed_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                     std::chrono::steady_clock::now() - start)
                     .count();
  return r;
}

ExecutionResult UnconfiguredAdapter::run(const std::string&) {
  ExecutionResult r;
  r.status = ExecStatus::error;
  r.error_msg = to_string(dialect_) + " adapter is not configured: no warehouse credentials";
  return r;
}

std::unique_ptr<DbAdapter> make_adapter(Dialect d, const std::string& sqlite_path,
                                        std::chrono::milliseconds timeout) {
  if (d == Dialect::sqlite) {
    return std::make_unique<SqliteAdapter>(sqlite_path, /*read_only=*/true, timeout);
  }
  return std::make_unique<UnconfiguredAdapter>(d);
}

ExecutionResult execute(const std::string& sql, DbAdapter& db, CostLedger& ledger) {
  ledger.db_calls += 1;
  std::string keyword = first_keyword(sql);
  if (keyword != "select" && keyword != "with") {
    ExecutionResult r;
    r.status = ExecStatus::error;
    r.error_msg = "only SELECT/WITH statements are allowed (got \"" + keyword + "\")";
    return r;
  }
  try {
    return db.run(sql);
  } catch (const std::exception& e) {
    ExecutionResult r;
    r.status = ExecStatus::error;
    r.error_msg = e.what();
    return r;
  }
}

std::string format_result(const ExecutionResult& r, std::size_t max_rows,
                          std::size_t max_bytes) {
  if (r.status == ExecStatus::error) {
    return "##ERROR## " + r.error_msg;
  }
  std::string out;
  for (std::size_t i = 0; i < r.columns.size(); ++i) {
    if (i > 0) out += ',';
    out += csv_cell(r.columns[i]);
  }
  out += '\n';
  bool truncated = r.rows.size() > max_rows;
  std::size_t shown = std::min(r.rows.size(), max_rows);
  for (std::size_t i = 0; i < shown; ++i) {
    for (std::size_t j = 0; j < r.rows[i].size(); ++j) {
      if (j > 0) out += ',';
      out += csv_cell(r.rows[i][j]);
    }
    out += '\n';
  }
  if (out.size() > max_bytes) {
    out.resize(max_bytes);
    truncated = true;
  }
  if (truncated) {
    if (!out.empty() && out.back() != '\n') out += '\n';
    out += "-- truncated";
  }
  return out;
}

std::string canonical_cell(const std::string& cell, int round_decimals) {
  std::string t = trim(cell);
  if (t.empty()) return t;
  char* end = nullptr;
  errno = 0;
  double value = std::strtod(t.c_str(), &end);
  if (end == t.c_str() + t.size() && errno != ERANGE && std::isfinite(value)) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", round_decimals, value);
    std::string s(buf);
    if (s == "-0" || s.rfind("-0.", 0) == 0) {
      // Normalize negative zero.
      bool all_zero = true;
      for (char c : s) {
        if (c != '-' && c != '0' && c != '.') {
          all_zero = false;
          break;
        }
      }
      if (all_zero) s.erase(0, 1);
    }
    return s;
  }
  return t;
}

namespace {

std::string serialize_order(const std::vector<std::string>& names,
                            const std::vector<std::vector<std::string>>& cells,
                            const std::vector<std::size_t>& order) {
  std::vector<std::string> lines;
  lines.reserve(cells.size());
  for (const auto& row : cells) {
    std::string line;
    for (std::size_t c : order) {
      line += row[c];
      line += '\x1f';
    }
    lines.push_back(std::move(line));
  }
  std::sort(lines.begin(), lines.end());

  std::string canonical;
  for (std::size_t c : order) {
    canonical += names[c];
    canonical += '\x1f';
  }
  canonical += '\x1e';
  for (const auto& line : lines) {
    canonical += line;
    canonical += '\x1e';
  }
  return canonical;
}

}  // namespace

Fingerprint fingerprint(const ExecutionResult& r) {
  if (r.status != ExecStatus::ok) {
    throw std::logic_error("fingerprint requires a status==ok result");
  }

  const std::size_t ncols = r.columns.size();
  std::vector<std::string> names(ncols);
  for (std::size_t i = 0; i < ncols; ++i) names[i] = lower(trim(r.columns[i]));

  std::vector<std::vector<std::string>> cells(r.rows.size(),
                                              std::vector<std::string>(ncols));
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    for (std::size_t j = 0; j < ncols && j < r.rows[i].size(); ++j) {
      cells[i][j] = canonical_cell(r.rows[i][j]);
    }
  }

  std::vector<std::size_t> order(ncols);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return names[a] < names[b]; });

  // Duplicate column names leave the order ambiguous; the digest must not
  // depend on the input permutation, so take the minimal serialization over
  // permutations within each tied-name range (capped; ties beyond the cap are
  // pathological and keep the stable order).
  std::vector<std::pair<std::size_t, std::size_t>> tied_ranges;
  std::size_t perm_count = 1;
  for (std::size_t i = 0; i < ncols;) {
    std::size_t j = i + 1;
    while (j < ncols && names[order[j]] == names[order[i]]) ++j;
    if (j - i > 1) {
      tied_ranges.emplace_back(i, j);
      for (std::size_t f = 2; f <= j - i && perm_count <= 5040; ++f) perm_count *= f;
    }
    i = j;
  }

  std::string best = serialize_order(names, cells, order);
  if (!tied_ranges.empty() && perm_count <= 5040) {
    std::vector<std::size_t> current = order;
    std::function<void(std::size_t)> visit = [&](std::size_t range_idx) {
      if (range_idx == tied_ranges.size()) {
        std::string s = serialize_order(names, cells, current);
        if (s < best) best = std::move(s);
        return;
      }
      auto [lo, hi] = tied_ranges[range_idx];
      std::vector<std::size_t> slice(current.begin() + lo, current.begin() + hi);
      std::sort(slice.begin(), slice.end());
      do {
        std::copy(slice.begin(), slice.end(), current.begin() + lo);
        visit(range_idx + 1);
      } while (std::next_permutation(slice.begin(), slice.end()));
    };
    visit(0);
  }

  return Fingerprint{sha256_hex(best)};
}

std::string to_csv(const ExecutionResult& r) {
  std::string out;
  for (std::size_t i = 0; i < r.columns.size(); ++i) {
    if (i > 0) out += ',';
    out += csv_cell(r.columns[i]);
  }
  out += '\n';
  for (const auto& row : r.rows) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j > 0) out += ',';
      out += csv_cell(row[j]);
    }
    out += '\n';
  }
  return out;
}

}  // namespace reforce
