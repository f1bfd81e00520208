#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "reforce/catalog.hpp"
#include "reforce/consensus.hpp"
#include "reforce/exploration.hpp"
#include "reforce/llm.hpp"
#include "reforce/refinement.hpp"

namespace reforce {

enum class ExplorationPolicy { auto_policy, always, never };

ExplorationPolicy exploration_policy_from_string(const std::string& s);
std::string to_string(ExplorationPolicy p);

enum class Provenance { consensus, exploration, random, null_answer };

std::string to_string(Provenance p);

struct RunConfig {
  std::string tasks_path;
  std::string catalog_dir;
  std::string output_dir;
  int votes = 3;
  int max_refine = kDefaultMaxRefine;
  int max_try = kDefaultMaxTry;
  ExplorationPolicy exploration = ExplorationPolicy::auto_policy;
  int workers = 1;
  std::uint64_t seed = 0;
  std::size_t token_threshold = kDefaultTokenThreshold;
  std::string gold_tables_path;          // optional: Table-3-style gold-table mode
  std::string backend;                   // "mock:FILE", "http:URL" or empty for env
  std::string model;
  double temperature = 1.0;
  int round_decimals = 2;
  std::optional<Dialect> dialect_override;
  std::chrono::milliseconds db_timeout = kDefaultQueryTimeout;
  std::chrono::milliseconds backoff_base{1000};
};

struct FinalAnswer {
  std::string instance_id;
  std::string sql;
  std::optional<ExecutionResult> result;  // absent iff provenance == null_answer
  Provenance provenance = Provenance::null_answer;
  CostLedger ledger;
};

// Everything run_example produced; the writer persists it.
struct ExampleOutcome {
  FinalAnswer answer;
  std::vector<SqlCandidate> candidates;  // stage B first, then exploration
  std::size_t stage_b_count = 0;
  ConsensusLabel stage_b_label = ConsensusLabel::all_failed;
  std::vector<std::string> log_lines;    // JSON event lines for log/<id>.jsonl
  std::string error;                     // set when provenance == null_answer
};

// Per-instance gold table annotations: line-delimited {instance_id, tables}.
std::map<std::string, std::vector<std::string>> load_gold_tables(const std::string& path);

ExampleOutcome run_example(const TaskInstance& task, const RunConfig& cfg, LlmGateway& llm);

struct RunSummary {
  std::size_t completed = 0;
  std::size_t skipped = 0;  // resumed from manifest
  std::map<std::string, std::size_t> provenance_histogram;
  CostLedger totals;
};

// Dispatches tasks to cfg.workers threads; per-example outputs land as they
// finish, report.json / calls.jsonl / manifest.txt are finalized in task order.
// Already-manifested examples are skipped on rerun.
RunSummary run_all(const std::vector<TaskInstance>& tasks, const RunConfig& cfg,
                   LlmGateway& llm);

std::shared_ptr<LlmBackend> make_backend(const RunConfig& cfg);

}  // namespace reforce
