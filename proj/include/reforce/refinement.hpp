#pragma once

#include <string>
#include <utility>
#include <vector>

#include "reforce/compression.hpp"
#include "reforce/executor.hpp"
#include "reforce/llm.hpp"

namespace reforce {

enum class CandidateOrigin { initial, refined, exploration };

std::string to_string(CandidateOrigin o);

struct SqlCandidate {
  std::string sql;
  ExecutionResult result;
  CandidateOrigin origin = CandidateOrigin::initial;
  int rounds_used = 0;
  // (prompt digest, response digest) per round.
  std::vector<std::pair<std::string, std::string>> transcript;
};

inline constexpr int kDefaultMaxRefine = 5;

// One self-refined candidate: complete -> take the last ```sql block ->
// execute; error or empty feeds the formatted result back and iterates, up to
// max_refine rounds. Backend errors propagate after gateway retries.
SqlCandidate generate_candidate(const PromptBundle& prompt, LlmGateway& llm,
                                DbAdapter& db, CostLedger& ledger,
                                int max_refine = kDefaultMaxRefine,
                                const CallContext& ctx = {});

}  // namespace reforce
