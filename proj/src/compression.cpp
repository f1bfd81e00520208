#include "reforce/compression.hpp"

#include <map>
#include <stdexcept>

#include "reforce/prompts.hpp"

namespace reforce {

namespace {

bool is_run_char(char c) {
  return (c >= '0' && c <= '9') || c == '_' || c == '-';
}

bool is_separator(char c) { return c == '_' || c == '-'; }

constexpr std::size_t kMinRunLength = 4;
constexpr std::size_t kMinGroupSize = 3;

// Stem of a name: strip one maximal trailing (preferred) or leading run of
// [0-9_-] characters of length >= 4. Separators at the stem/run boundary stay
// with the stem, so GA_SESSIONS_20160801 stems to "GA_SESSIONS_" and T_2021
// to "T_". Names that would stem to "" keep themselves as stem.
std::string stem_of(const std::string& name) {
  // Trailing run.
  std::size_t start = name.size();
  while (start > 0 && is_run_char(name[start - 1])) --start;
  while (start < name.size() && is_separator(name[start])) ++start;
  if (name.size() - start >= kMinRunLength) {
    std::string stem = name.substr(0, start);
    return stem.empty() ? name : stem;
  }

  // Leading run.
  std::size_t end = 0;
  while (end < name.size() && is_run_char(name[end])) ++end;
  while (end > 0 && is_separator(name[end - 1])) --end;
  if (end >= kMinRunLength) {
    std::string stem = name.substr(end);
    return stem.empty() ? name : stem;
  }

  return name;
}

std::string group_block(const DatabaseCatalog& catalog, const TableGroup& g) {
  const TableInfo* rep = catalog.find_table(g.representative);
  if (rep == nullptr) {
    throw std::runtime_error("group representative not in catalog: " + g.representative);
  }
  if (g.is_singleton()) return render_table(*rep, /*full=*/true);

  std::string grouped = "-- group " + g.stem + " (" + std::to_string(g.members.size()) +
                        " tables, 1 shown in full)\n";
  grouped += render_table(*rep, /*full=*/true);
  std::string full_all;
  for (const auto& m : g.members) {
    const TableInfo* t = catalog.find_table(m);
    if (t == nullptr) throw std::runtime_error("group member not in catalog: " + m);
    full_all += render_table(*t, /*full=*/true);
    if (m != g.representative) {
      grouped += render_table(*t, /*full=*/false);
      grouped += '\n';
    }
  }
  // Degenerate groups (tiny DDLs) where the header outweighs the savings fall
  // back to full rendering, keeping compression monotone.
  return grouped.size() <= full_all.size() ? grouped : full_all;
}

std::string replace_all(std::string text, const std::string& token, const std::string& value) {
  std::size_t pos = 0;
  while ((pos = text.find(token, pos)) != std::string::npos) {
    text.replace(pos, token.size(), value);
    pos += value.size();
  }
  return text;
}

}  // namespace

std::vector<TableGroup> group_tables(const std::vector<std::string>& names) {
  std::map<std::string, std::size_t> stem_counts;
  std::vector<std::string> stems;
  stems.reserve(names.size());
  for (const auto& n : names) {
    stems.push_back(stem_of(n));
    ++stem_counts[stems.back()];
  }

  std::vector<TableGroup> groups;
  std::map<std::string, std::size_t> emitted;  // stem -> group index
  for (std::size_t i = 0; i < names.size(); ++i) {
    const std::string& stem = stems[i];
    if (stem_counts[stem] >= kMinGroupSize) {
      auto it = emitted.find(stem);
      if (it == emitted.end()) {
        TableGroup g;
        g.stem = stem;
        g.members.push_back(names[i]);
        g.representative = names[i];
        emitted[stem] = groups.size();
        groups.push_back(std::move(g));
      } else {
        TableGroup& g = groups[it->second];
        g.members.push_back(names[i]);
        if (names[i] < g.representative) g.representative = names[i];
      }
    } else {
      TableGroup g;
      g.stem = names[i];
      g.members.push_back(names[i]);
      g.representative = names[i];
      groups.push_back(std::move(g));
    }
  }
  return groups;
}

std::string compress_catalog(const DatabaseCatalog& catalog,
                             const std::vector<TableGroup>& groups) {
  std::string out;
  for (const auto& g : groups) out += group_block(catalog, g);
  return out;
}

std::size_t estimate_tokens(const std::string& text) {
  return (text.size() + 3) / 4;
}

LinkedSchema schema_link(const DatabaseCatalog& catalog,
                         const std::vector<TableGroup>& groups,
                         const TaskInstance& task, LlmGateway& llm,
                         CostLedger& ledger, const CallContext& ctx) {
  const std::string& tmpl = prompt_asset("schema_linking");
  LinkedSchema linked;

  CallContext link_ctx = ctx;
  if (link_ctx.phase.empty()) link_ctx.phase = "link";

  for (const auto& g : groups) {
    std::string prompt = tmpl;
    prompt = replace_all(prompt, "{table_info}", group_block(catalog, g));
    prompt = replace_all(prompt, "{task}", task.question);
    prompt = replace_all(prompt, "{external}", task.external_knowledge);

    bool keep = true;  // fail-open
    std::vector<std::string> columns;
    for (int attempt = 0; attempt < 2; ++attempt) {
      Completion c = llm.complete(llm.make_request(prompt), ledger, link_ctx);
      linked.raw_responses.push_back(c.text);
      auto parsed = extract_structured(c.text);
      if (!parsed) continue;
      if (parsed->answer == "Y") {
        keep = true;
        columns = parsed->columns;
        break;
      }
      if (parsed->answer == "N") {
        keep = false;
        break;
      }
      // Anything else counts as unparseable.
    }

    if (keep) {
      for (const auto& m : g.members) linked.kept_tables.push_back(m);
      linked.kept_columns[g.representative] = columns;
    }
  }
  return linked;
}

PromptBundle build_initial_prompt(std::string schema_text, std::string external,
                                  std::string question) {
  PromptBundle b;
  b.schema_text = std::move(schema_text);
  b.external_text = std::move(external);
  b.question_text = std::move(question);
  b.estimated_tokens = estimate_tokens(b.schema_text + b.external_text + b.question_text);
  return b;
}

std::string render_prompt(const PromptBundle& bundle) {
  return prompt_asset("initial_header") + bundle.schema_text + "\n" + bundle.external_text +
         "\n" + bundle.question_text;
}

}  // namespace reforce
