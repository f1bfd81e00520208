#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "reforce/catalog.hpp"
#include "reforce/compression.hpp"
#include "reforce/executor.hpp"
#include "reforce/llm.hpp"
#include "reforce/refinement.hpp"

namespace reforce {

struct DialectTemplates {
  std::string basic;
  std::string nested;  // empty for sqlite
  std::string string_matching;
};

DialectTemplates dialect_templates(Dialect d);

struct ExplorationStep {
  std::string description;  // text after the first --Description: line, if any
  std::string sql;          // as executed (LIMIT enforced)
  ExecutionResult result;
  std::vector<std::pair<std::string, ExecutionResult>> corrections;

  const std::string& final_sql() const;
  const ExecutionResult& final_result() const;
};

struct ExplorationTrace {
  std::vector<ExplorationStep> steps;
  // (sql, formatted result) for steps whose final status == ok, in step order.
  std::vector<std::pair<std::string, std::string>> result_dic;
};

inline constexpr int kDefaultMaxTry = 3;
inline constexpr std::size_t kMaxExplorationQueries = 10;

// Exploration request prompt with the dialect templates instantiated.
std::string build_exploration_request(const std::string& table_struct, Dialect d);

// Appends LIMIT 20 when the statement lacks a trailing LIMIT clause.
std::string enforce_limit(const std::string& sql);

// Executes the queries in order with a bounded self-correction loop; when a
// correction succeeds and queries are still pending, one batched call rewrites
// the pending queries so the same mistake is not repeated.
ExplorationTrace run_exploration(std::vector<std::string> sqls, LlmGateway& llm,
                                 DbAdapter& db, CostLedger& ledger,
                                 int max_try = kDefaultMaxTry,
                                 const CallContext& ctx = {});

// Schema text + collected (sql, result) evidence + question + answer
// instruction, as one PromptBundle.
PromptBundle build_final_prompt(const ExplorationTrace& trace, const TaskInstance& task,
                                const std::string& schema_text);

struct ExploreOptions {
  int max_try = kDefaultMaxTry;
  int max_refine = kDefaultMaxRefine;
};

// Full column-exploration pass for one example; the returned candidate has
// origin == exploration. A reply with no SQL blocks degrades to plain
// generation on the initial prompt.
SqlCandidate explore(const TaskInstance& task, const std::string& schema_text,
                     LlmGateway& llm, DbAdapter& db, CostLedger& ledger,
                     const ExploreOptions& opts = {}, const CallContext& ctx = {});

}  // namespace reforce
