#pragma once

#include <cstddef>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "reforce/executor.hpp"

namespace reforce {

struct ResultTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
};

struct CompareOutcome {
  bool match = false;
  // gold column -> matched pred column.
  std::vector<std::pair<std::string, std::string>> column_mapping;
};

// Lenient execution comparison: true iff an injective mapping from every gold
// column onto distinct pred columns makes the row-tuple multisets equal after
// cell canonicalization. Extra pred columns are ignored.
CompareOutcome compare(const ResultTable& pred, const ResultTable& gold,
                       int round_decimals = 2);
CompareOutcome compare(const ExecutionResult& pred, const ResultTable& gold,
                       int round_decimals = 2);

struct EvalOutcome {
  std::string instance_id;
  bool correct = false;
  std::vector<bool> per_candidate_correct;
  std::vector<std::pair<std::string, std::string>> matched_columns;
};

double execution_accuracy(const std::vector<EvalOutcome>& outcomes);

// Mean over examples of OR of the first k candidate flags; every outcome must
// carry at least k flags.
double ex_at_k(const std::vector<EvalOutcome>& outcomes, std::size_t k);

struct LinkMetrics {
  double recall = 0.0;
  double precision = 0.0;
  bool full_recall = false;
};

// gold must be non-empty; empty pred gives precision 0.
LinkMetrics linking_metrics(const std::set<std::string>& pred_tables,
                            const std::set<std::string>& gold_tables);

struct LinkAggregate {
  double mean_recall = 0.0;
  double mean_precision = 0.0;
  std::size_t full_recall_count = 0;
  std::size_t total = 0;
};

LinkAggregate aggregate_linking(const std::vector<LinkMetrics>& per_example);

struct CostStratum {
  std::string name;
  double count = 0;
  double llm_calls = 0;
  double db_calls = 0;
  double tokens = 0;
};

struct CostReport {
  std::vector<CostStratum> strata;
  double base_count = 0;
  double avg_llm_calls = 0;
  double avg_db_calls = 0;
  double avg_tokens = 0;
};

// Weighted averages sum(count_i * value_i) / base_count; strata may overlap
// the example universe. base_count == 0 is an error.
CostReport cost_report(const std::vector<CostStratum>& strata, double base_count);

// JSON array of stratum rows {name, count, llm_calls, db_calls, tokens}.
std::vector<CostStratum> load_strata(const std::string& path);

// Stratum table plus the weighted-average row; tokens shown in K.
std::string format_cost_report(const CostReport& rep);

ResultTable load_csv(const std::string& path);
ResultTable as_table(const ExecutionResult& r);

}  // namespace reforce
