#include "reforce/exploration.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <sstream>

#include "reforce/prompts.hpp"

namespace reforce {

namespace {

std::string replace_all(std::string text, const std::string& token, const std::string& value) {
  std::size_t pos = 0;
  while ((pos = text.find(token, pos)) != std::string::npos) {
    text.replace(pos, token.size(), value);
    pos += value.size();
  }
  return text;
}

std::string rstrip_stmt(std::string sql) {
  while (!sql.empty() && (std::isspace(static_cast<unsigned char>(sql.back())) || sql.back() == ';')) {
    sql.pop_back();
  }
  return sql;
}

std::string description_of(const std::string& sql) {
  std::istringstream in(sql);
  std::string line;
  while (std::getline(in, line)) {
    auto pos = line.find("--Description:");
    if (pos != std::string::npos) {
      std::string d = line.substr(pos + 14);
      std::size_t b = d.find_first_not_of(" \t");
      return b == std::string::npos ? "" : d.substr(b);
    }
    if (line.find_first_not_of(" \t\r") != std::string::npos) break;
  }
  return "";
}

std::string correction_prompt(const std::string& sql, const ExecutionResult& result) {
  return "The following exploration query failed.\n[Try to execute]\n" + sql +
         "\n[Try to execute]\n[Error occurred]\n" + format_result(result) +
         "\n[Error occurred]\nRewrite it as one corrected SELECT query in a ```sql code "
         "block. Keep the --Description: annotation.\n";
}

std::string similar_error_prompt(const std::string& faulty, const std::string& corrected,
                                 const std::vector<std::string>& pending) {
  std::string p =
      "A query failed and was corrected as shown below. The remaining queries likely "
      "repeat the same mistake. Refine the faulty query pattern and adjust the related "
      "pending queries accordingly.\n[Faulty SQL]\n" +
      faulty + "\n[Faulty SQL]\n[Corrected SQL]\n" + corrected + "\n[Corrected SQL]\n" +
      "[Pending queries]\n";
  for (const auto& q : pending) {
    p += q;
    p += "\n\n";
  }
  p += "[Pending queries]\nReply with one ```sql code block per adjusted query, in the "
       "same order, keeping each --Description: annotation.\n";
  return p;
}

}  // namespace

DialectTemplates dialect_templates(Dialect d) {
  const std::string suffix = to_string(d);
  DialectTemplates t;
  t.basic = prompt_asset("exploration_basic_" + suffix);
  t.nested = prompt_asset("exploration_nested_" + suffix);
  t.string_matching = prompt_asset("exploration_string_matching_" + suffix);
  return t;
}

std::string build_exploration_request(const std::string& table_struct, Dialect d) {
  DialectTemplates t = dialect_templates(d);
  std::string prompt = prompt_asset("exploration_request");
  prompt = replace_all(prompt, "{api}", to_string(d));
  prompt = replace_all(prompt, "{basic}", t.basic);
  prompt = replace_all(prompt, "{nested}", t.nested);
  prompt = replace_all(prompt, "{string_matching}", t.string_matching);
  prompt = replace_all(prompt, "{table_struct}", table_struct);
  return prompt;
}

std::string enforce_limit(const std::string& sql) {
  static const std::regex limit_re(R"(\blimit\s+\d+\s*(offset\s+\d+\s*)?$)",
                                   std::regex::icase);
  std::string body = rstrip_stmt(sql);
  if (std::regex_search(body, limit_re)) return body;
  return body + " LIMIT 20";
}

const std::string& ExplorationStep::final_sql() const {
  return corrections.empty() ? sql : corrections.back().first;
}

const ExecutionResult& ExplorationStep::final_result() const {
  return corrections.empty() ? result : corrections.back().second;
}

ExplorationTrace run_exploration(std::vector<std::string> sqls, LlmGateway& llm,
                                 DbAdapter& db, CostLedger& ledger, int max_try,
                                 const CallContext& ctx) {
  if (sqls.size() > kMaxExplorationQueries) sqls.resize(kMaxExplorationQueries);

  CallContext call_ctx = ctx;
  if (call_ctx.phase.empty()) call_ctx.phase = "exploration";

  ExplorationTrace trace;
  std::size_t next = 0;
  while (next < sqls.size()) {
    ExplorationStep step;
    step.sql = enforce_limit(sqls[next]);
    step.description = description_of(step.sql);
    ++next;

    step.result = execute(step.sql, db, ledger);
    bool corrected_now = false;
    if (step.result.status != ExecStatus::ok) {
      ExecutionResult last = step.result;
      std::string last_sql = step.sql;
      for (int attempt = 0; attempt < max_try; ++attempt) {
        Completion c = llm.complete(llm.make_request(correction_prompt(last_sql, last)),
                                    ledger, call_ctx);
        auto blocks = extract_sql(c.text);
        if (blocks.empty()) continue;  // consumed one try without executing
        std::string corrected = enforce_limit(blocks.back());
        ExecutionResult res = execute(corrected, db, ledger);
        step.corrections.emplace_back(corrected, res);
        last = res;
        last_sql = corrected;
        if (res.status == ExecStatus::ok) {
          corrected_now = true;
          break;
        }
      }
    }

    if (step.final_result().status == ExecStatus::ok) {
      trace.result_dic.emplace_back(step.final_sql(), format_result(step.final_result()));
      // A corrected mistake is assumed to repeat downstream: one batched call
      // rewrites whatever is still pending.
      if (corrected_now && next < sqls.size()) {
        std::vector<std::string> pending(sqls.begin() + next, sqls.end());
        Completion c = llm.complete(
            llm.make_request(similar_error_prompt(step.sql, step.final_sql(), pending)),
            ledger, call_ctx);
        auto adjusted = extract_sql(c.text);
        if (!adjusted.empty()) {
          if (adjusted.size() > pending.size()) adjusted.resize(pending.size());
          sqls.erase(sqls.begin() + next, sqls.end());
          sqls.insert(sqls.end(), adjusted.begin(), adjusted.end());
        }
      }
    }
    trace.steps.push_back(std::move(step));
  }
  return trace;
}

PromptBundle build_final_prompt(const ExplorationTrace& trace, const TaskInstance& task,
                                const std::string& schema_text) {
  std::string schema = schema_text;
  if (!trace.result_dic.empty()) {
    schema += "\n[Exploration results]\n";
    for (const auto& [sql, formatted] : trace.result_dic) {
      schema += sql;
      schema += "\n[Successfully executed]\n";
      schema += formatted;
      schema += "\n[Successfully executed]\n";
    }
    schema += "[Exploration results]\n";
  }
  std::string question = task.question +
                         "\nUse the exploration results above where helpful and answer with "
                         "one final " +
                         to_string(task.dialect) + " SQL query in a ```sql code block.";
  return build_initial_prompt(std::move(schema), task.external_knowledge, std::move(question));
}

SqlCandidate explore(const TaskInstance& task, const std::string& schema_text,
                     LlmGateway& llm, DbAdapter& db, CostLedger& ledger,
                     const ExploreOptions& opts, const CallContext& ctx) {
  CallContext call_ctx = ctx;
  if (call_ctx.phase.empty()) call_ctx.phase = "exploration";

  // Algorithm feeds the initial-prompt content to the request: task first,
  // then the dialect-instantiated request template (which embeds the schema).
  std::string request = "Task: " + task.question + "\n";
  if (!task.external_knowledge.empty()) {
    request += "External knowledge: " + task.external_knowledge + "\n";
  }
  request += "\n" + build_exploration_request(schema_text, task.dialect);
  Completion c = llm.complete(llm.make_request(std::move(request)), ledger, call_ctx);
  auto sqls = extract_sql(c.text);

  ExplorationTrace trace;
  if (!sqls.empty()) {
    trace = run_exploration(std::move(sqls), llm, db, ledger, opts.max_try, call_ctx);
  }

  PromptBundle final_bundle = build_final_prompt(trace, task, schema_text);
  SqlCandidate cand =
      generate_candidate(final_bundle, llm, db, ledger, opts.max_refine, call_ctx);
  cand.origin = CandidateOrigin::exploration;
  return cand;
}

}  // namespace reforce
