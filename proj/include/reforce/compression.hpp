#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "reforce/catalog.hpp"
#include "reforce/llm.hpp"

namespace reforce {

struct TableGroup {
  std::string stem;
  std::vector<std::string> members;  // first-appearance order
  std::string representative;       // lexicographically smallest member

  bool is_singleton() const { return members.size() == 1; }
};

struct LinkedSchema {
  std::vector<std::string> kept_tables;  // catalog order
  std::map<std::string, std::vector<std::string>> kept_columns;
  std::vector<std::string> raw_responses;
};

struct PromptBundle {
  std::string schema_text;
  std::string external_text;
  std::string question_text;
  std::size_t estimated_tokens = 0;
};

inline constexpr std::size_t kDefaultTokenThreshold = 50000;

// Names sharing a stem (one trailing-or-leading [0-9_-] run of length >= 4
// stripped, boundary separators staying with the stem) and counting >= 3
// members form one group; everything else is a singleton. Groups come back in
// first-appearance order.
std::vector<TableGroup> group_tables(const std::vector<std::string>& names);

// Representative rendered in full, other members by name, non-singleton
// groups prefixed by a `-- group <stem> (<N> tables, 1 shown in full)` line.
std::string compress_catalog(const DatabaseCatalog& catalog,
                             const std::vector<TableGroup>& groups);

// ceil(bytes / 4); the fixed heuristic behind every token threshold here.
std::size_t estimate_tokens(const std::string& text);

// Table-level linking: one Y/N query per group representative. Y keeps the
// whole group, N drops it; an unparseable reply is retried once and then the
// group is kept.
LinkedSchema schema_link(const DatabaseCatalog& catalog,
                         const std::vector<TableGroup>& groups,
                         const TaskInstance& task, LlmGateway& llm,
                         CostLedger& ledger, const CallContext& ctx = {});

PromptBundle build_initial_prompt(std::string schema_text, std::string external,
                                  std::string question);

// Fixed instruction header + schema + external + question.
std::string render_prompt(const PromptBundle& bundle);

}  // namespace reforce
