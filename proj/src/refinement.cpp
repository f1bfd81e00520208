#include "reforce/refinement.hpp"

namespace reforce {

namespace {

const char* kErrorInstruction =
    "\nThe last query failed. Fix it and reply with one corrected query in a "
    "```sql code block.\n";
const char* kEmptyInstruction =
    "\nquery returned no rows; revise the predicates and reply with one revised "
    "query in a ```sql code block.\n";

}  // namespace

std::string to_string(CandidateOrigin o) {
  switch (o) {
    case CandidateOrigin::initial: return "initial";
    case CandidateOrigin::refined: return "refined";
    case CandidateOrigin::exploration: return "exploration";
  }
  return "initial";
}

SqlCandidate generate_candidate(const PromptBundle& bundle, LlmGateway& llm,
                                DbAdapter& db, CostLedger& ledger, int max_refine,
                                const CallContext& ctx) {
  SqlCandidate cand;
  std::string prompt = render_prompt(bundle);

  CallContext call_ctx = ctx;
  if (call_ctx.phase.empty()) call_ctx.phase = "generate";

  for (int round = 1; round <= max_refine; ++round) {
    Completion c = llm.complete(llm.make_request(prompt), ledger, call_ctx);
    cand.rounds_used = round;
    cand.transcript.emplace_back(sha256_hex(prompt), sha256_hex(c.text));

    auto blocks = extract_sql(c.text);
    std::string feedback;
    if (blocks.empty()) {
      cand.sql.clear();
      cand.result = ExecutionResult{};
      cand.result.error_msg = "no sql block found";
      feedback = "##ERROR## no sql block found";
    } else {
      cand.sql = blocks.back();  // models often restate earlier drafts first
      cand.result = execute(cand.sql, db, ledger);
      if (cand.result.status == ExecStatus::ok) break;
      feedback = format_result(cand.result);
      if (cand.result.status == ExecStatus::empty) {
        feedback += "\n(query returned no rows)";
      }
    }
    if (round == max_refine) break;

    // Appendix-D-style framing; the prompt only ever grows across rounds.
    prompt += "\n[Try to run SQL in self-refine]\n" + cand.sql +
              "\n[Try to run SQL in self-refine]\n[Results]\n" + feedback + "\n[Results]\n";
    prompt += cand.result.status == ExecStatus::empty ? kEmptyInstruction : kErrorInstruction;
  }

  cand.origin = cand.rounds_used == 1 ? CandidateOrigin::initial : CandidateOrigin::refined;
  return cand;
}

}  // namespace reforce
