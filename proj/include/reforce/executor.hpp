#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "reforce/catalog.hpp"
#include "reforce/llm.hpp"

namespace reforce {

enum class ExecStatus { ok, empty, error };

struct ExecutionResult {
  ExecStatus status = ExecStatus::error;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
  std::string error_msg;
  std::int64_t elapsed_ms = 0;
};

struct Fingerprint {
  std::string digest;

  bool operator==(const Fingerprint& other) const { return digest == other.digest; }
  bool operator<(const Fingerprint& other) const { return digest < other.digest; }
};

class DbAdapter {
 public:
  virtual ~DbAdapter() = default;
  virtual ExecutionResult run(const std::string& sql) = 0;
  virtual std::string name() const = 0;
};

inline constexpr std::chrono::milliseconds kDefaultQueryTimeout{60000};

class SqliteAdapter : public DbAdapter {
 public:
  // path may be ":memory:". Pipeline databases are opened read-only on top of
  // the SELECT-only check in execute().
  explicit SqliteAdapter(const std::string& path, bool read_only = false,
                         std::chrono::milliseconds timeout = kDefaultQueryTimeout);
  ~SqliteAdapter() override;
  SqliteAdapter(const SqliteAdapter&) = delete;
  SqliteAdapter& operator=(const SqliteAdapter&) = delete;
  SqliteAdapter(SqliteAdapter&&) noexcept;
  SqliteAdapter& operator=(SqliteAdapter&&) noexcept;

  ExecutionResult run(const std::string& sql) override;
  std::string name() const override { return "sqlite"; }

  // Setup helper for fixtures and tests; throws on failure, not ledgered.
  void exec_script(const std::string& sql);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// snowflake / bigquery placeholder: every run() yields a configuration error
// so dialect prompt paths stay testable without cloud credentials.
class UnconfiguredAdapter : public DbAdapter {
 public:
  explicit UnconfiguredAdapter(Dialect d) : dialect_(d) {}
  ExecutionResult run(const std::string& sql) override;
  std::string name() const override { return to_string(dialect_); }

 private:
  Dialect dialect_;
};

std::unique_ptr<DbAdapter> make_adapter(Dialect d, const std::string& sqlite_path,
                                        std::chrono::milliseconds timeout = kDefaultQueryTimeout);

// Never throws: every failure (including non-SELECT statements) comes back as
// a status==error result. Counts one db call on the ledger per invocation.
ExecutionResult execute(const std::string& sql, DbAdapter& db, CostLedger& ledger);

// CSV header+rows capped to max_rows rows then max_bytes bytes with a
// `-- truncated` marker; error results render as `##ERROR## <msg>`.
std::string format_result(const ExecutionResult& r, std::size_t max_rows = 50,
                          std::size_t max_bytes = 5000);

// Canonical digest for voting: column names lowercased/trimmed and sorted
// (data permuted along), cells trimmed with numerics rounded to two decimals,
// rows sorted. Caller must pass a status==ok result.
Fingerprint fingerprint(const ExecutionResult& r);

// Shared cell canonicalization (trim; numeric -> fixed two-decimal form).
std::string canonical_cell(const std::string& cell, int round_decimals = 2);

std::string to_csv(const ExecutionResult& r);

}  // namespace reforce
