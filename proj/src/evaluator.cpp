#include "reforce/evaluator.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace reforce {

namespace {

using Column = std::vector<std::string>;

Column canonical_column(const std::vector<std::vector<std::string>>& rows, std::size_t idx,
                        int round_decimals) {
  Column col;
  col.reserve(rows.size());
  for (const auto& row : rows) {
    col.push_back(idx < row.size() ? canonical_cell(row[idx], round_decimals) : "");
  }
  return col;
}

std::multiset<std::string> as_multiset(const Column& col) {
  return {col.begin(), col.end()};
}

// Multiset equality of row tuples under a fixed gold->pred column assignment.
bool tuples_match(const std::vector<Column>& gold_cols, const std::vector<Column>& pred_cols,
                  const std::vector<std::size_t>& assignment, std::size_t n_rows) {
  std::vector<std::string> gold_lines(n_rows), pred_lines(n_rows);
  for (std::size_t r = 0; r < n_rows; ++r) {
    std::string g, p;
    for (std::size_t c = 0; c < gold_cols.size(); ++c) {
      g += gold_cols[c][r];
      g += '\x1f';
      p += pred_cols[assignment[c]][r];
      p += '\x1f';
    }
    gold_lines[r] = std::move(g);
    pred_lines[r] = std::move(p);
  }
  std::sort(gold_lines.begin(), gold_lines.end());
  std::sort(pred_lines.begin(), pred_lines.end());
  return gold_lines == pred_lines;
}

bool search_assignment(const std::vector<Column>& gold_cols,
                       const std::vector<Column>& pred_cols,
                       const std::vector<std::vector<std::size_t>>& candidates,
                       std::size_t depth, std::vector<bool>& used,
                       std::vector<std::size_t>& assignment, std::size_t n_rows) {
  if (depth == gold_cols.size()) {
    return tuples_match(gold_cols, pred_cols, assignment, n_rows);
  }
  for (std::size_t p : candidates[depth]) {
    if (used[p]) continue;
    used[p] = true;
    assignment[depth] = p;
    if (search_assignment(gold_cols, pred_cols, candidates, depth + 1, used, assignment,
                          n_rows)) {
      return true;
    }
    used[p] = false;
  }
  return false;
}

}  // namespace

CompareOutcome compare(const ResultTable& pred, const ResultTable& gold,
                       int round_decimals) {
  CompareOutcome out;
  if (gold.columns.empty() || gold.rows.empty()) {
    throw std::invalid_argument("compare requires a non-empty gold table");
  }
  if (pred.rows.size() != gold.rows.size()) return out;
  if (pred.columns.size() < gold.columns.size()) return out;

  const std::size_t n_rows = gold.rows.size();
  std::vector<Column> gold_cols(gold.columns.size());
  for (std::size_t c = 0; c < gold.columns.size(); ++c) {
    gold_cols[c] = canonical_column(gold.rows, c, round_decimals);
  }
  std::vector<Column> pred_cols(pred.columns.size());
  for (std::size_t c = 0; c < pred.columns.size(); ++c) {
    pred_cols[c] = canonical_column(pred.rows, c, round_decimals);
  }

  // Per-column multiset equality prunes the injective search; the tuple-level
  // check at the leaves decides.
  std::vector<std::multiset<std::string>> pred_sets(pred_cols.size());
  for (std::size_t c = 0; c < pred_cols.size(); ++c) pred_sets[c] = as_multiset(pred_cols[c]);

  std::vector<std::vector<std::size_t>> candidates(gold_cols.size());
  for (std::size_t g = 0; g < gold_cols.size(); ++g) {
    auto gset = as_multiset(gold_cols[g]);
    for (std::size_t p = 0; p < pred_cols.size(); ++p) {
      if (gset == pred_sets[p]) candidates[g].push_back(p);
    }
    if (candidates[g].empty()) return out;
  }

  std::vector<bool> used(pred_cols.size(), false);
  std::vector<std::size_t> assignment(gold_cols.size(), 0);
  if (!search_assignment(gold_cols, pred_cols, candidates, 0, used, assignment, n_rows)) {
    return out;
  }

  out.match = true;
  for (std::size_t g = 0; g < gold_cols.size(); ++g) {
    out.column_mapping.emplace_back(gold.columns[g], pred.columns[assignment[g]]);
  }
  return out;
}

CompareOutcome compare(const ExecutionResult& pred, const ResultTable& gold,
                       int round_decimals) {
  if (pred.status != ExecStatus::ok) return {};
  return compare(as_table(pred), gold, round_decimals);
}

double execution_accuracy(const std::vector<EvalOutcome>& outcomes) {
  if (outcomes.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& o : outcomes) correct += o.correct ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(outcomes.size());
}

double ex_at_k(const std::vector<EvalOutcome>& outcomes, std::size_t k) {
  if (outcomes.empty()) return 0.0;
  std::size_t hit = 0;
  for (const auto& o : outcomes) {
    if (o.per_candidate_correct.size() < k) {
      throw std::invalid_argument("outcome " + o.instance_id + " has fewer than k candidates");
    }
    for (std::size_t i = 0; i < k; ++i) {
      if (o.per_candidate_correct[i]) {
        ++hit;
        break;
      }
    }
  }
  return static_cast<double>(hit) / static_cast<double>(outcomes.size());
}

LinkMetrics linking_metrics(const std::set<std::string>& pred_tables,
                            const std::set<std::string>& gold_tables) {
  if (gold_tables.empty()) {
    throw std::invalid_argument("linking_metrics requires non-empty gold tables");
  }
  std::size_t hit = 0;
  for (const auto& t : pred_tables) hit += gold_tables.count(t);

  LinkMetrics m;
  m.recall = static_cast<double>(hit) / static_cast<double>(gold_tables.size());
  m.precision =
      pred_tables.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(pred_tables.size());
  m.full_recall = hit == gold_tables.size();
  return m;
}

LinkAggregate aggregate_linking(const std::vector<LinkMetrics>& per_example) {
  LinkAggregate agg;
  agg.total = per_example.size();
  if (per_example.empty()) return agg;
  for (const auto& m : per_example) {
    agg.mean_recall += m.recall;
    agg.mean_precision += m.precision;
    agg.full_recall_count += m.full_recall ? 1 : 0;
  }
  agg.mean_recall /= static_cast<double>(agg.total);
  agg.mean_precision /= static_cast<double>(agg.total);
  return agg;
}

CostReport cost_report(const std::vector<CostStratum>& strata, double base_count) {
  if (base_count <= 0) {
    throw std::invalid_argument("cost_report requires a positive base count");
  }
  CostReport rep;
  rep.strata = strata;
  rep.base_count = base_count;
  for (const auto& s : strata) {
    rep.avg_llm_calls += s.count * s.llm_calls;
    rep.avg_db_calls += s.count * s.db_calls;
    rep.avg_tokens += s.count * s.tokens;
  }
  rep.avg_llm_calls /= base_count;
  rep.avg_db_calls /= base_count;
  rep.avg_tokens /= base_count;
  return rep;
}

std::vector<CostStratum> load_strata(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("strata file not found: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  nlohmann::json parsed = nlohmann::json::parse(buf.str(), nullptr, false);
  if (parsed.is_discarded() || !parsed.is_array()) {
    throw std::runtime_error("strata file must be a JSON array: " + path);
  }
  std::vector<CostStratum> strata;
  for (const auto& row : parsed) {
    CostStratum s;
    s.name = row.value("name", "");
    s.count = row.at("count").get<double>();
    s.llm_calls = row.at("llm_calls").get<double>();
    s.db_calls = row.at("db_calls").get<double>();
    s.tokens = row.at("tokens").get<double>();
    strata.push_back(std::move(s));
  }
  return strata;
}

std::string format_cost_report(const CostReport& rep) {
  std::ostringstream out;
  auto row = [&](const std::string& name, double count, double llm, double db, double tokens) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-28s %8.0f %14.2f %13.2f %12.2fK\n", name.c_str(), count,
                  llm, db, tokens / 1000.0);
    out << buf;
  };
  out << "Setting                         Count  Avg LLM Calls  Avg DB Calls  Avg Tokens\n";
  for (const auto& s : rep.strata) row(s.name, s.count, s.llm_calls, s.db_calls, s.tokens);
  row("Weighted Average", rep.base_count, rep.avg_llm_calls, rep.avg_db_calls, rep.avg_tokens);
  return out.str();
}

ResultTable load_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("csv file not found: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();

  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      record.push_back(field);
      field.clear();
      any = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (any || !field.empty()) {
        record.push_back(field);
        records.push_back(record);
      }
      record.clear();
      field.clear();
      any = false;
    } else {
      field += c;
      any = true;
    }
  }
  if (any || !field.empty()) {
    record.push_back(field);
    records.push_back(record);
  }

  ResultTable t;
  if (records.empty()) return t;
  t.columns = records.front();
  t.rows.assign(records.begin() + 1, records.end());
  return t;
}

ResultTable as_table(const ExecutionResult& r) {
  return ResultTable{r.columns, r.rows};
}

}  // namespace reforce
