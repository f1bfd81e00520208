#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "reforce/catalog.hpp"
#include "reforce/compression.hpp"
#include "reforce/evaluator.hpp"
#include "reforce/fixtures.hpp"
#include "reforce/pipeline.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

// Fills options that were not given on the command line from an INI/TOML
// config file (same keys as the long flags; flags win).
void apply_config_file(CLI::App* cmd, const std::string& path) {
  CLI::ConfigINI ini;
  for (const auto& item : ini.from_file(path)) {
    CLI::Option* op = cmd->get_option_no_throw("--" + item.name);
    if (op == nullptr || op->get_name() == "--config" || op->count() > 0) continue;
    for (const auto& v : item.inputs) op->add_result(v);
    op->run_callback();
  }
}

int cmd_run(const reforce::RunConfig& cfg) {
  if (cfg.tasks_path.empty() || cfg.catalog_dir.empty() || cfg.output_dir.empty()) {
    throw std::runtime_error("run needs --tasks, --catalog and --output (flags or config)");
  }
  auto tasks = reforce::load_tasks(cfg.tasks_path);
  reforce::LlmGateway gateway(reforce::make_backend(cfg), 3, cfg.backoff_base);
  gateway.set_request_defaults(cfg.model, cfg.temperature);
  reforce::RunSummary summary = reforce::run_all(tasks, cfg, gateway);

  std::cout << "completed " << summary.completed << " example(s), skipped " << summary.skipped
            << " (resumed)\n";
  for (const auto& [prov, count] : summary.provenance_histogram) {
    std::cout << "  " << prov << ": " << count << "\n";
  }
  std::cout << "llm_calls=" << summary.totals.llm_calls
            << " db_calls=" << summary.totals.db_calls
            << " prompt_tokens=" << summary.totals.prompt_tokens_total << "\n";
  return 0;
}

int cmd_compress(const std::string& catalog_dir, const std::string& db_id,
                 const std::string& question_file, const std::string& out_path) {
  reforce::DatabaseCatalog catalog = reforce::load_catalog(catalog_dir, db_id);
  std::vector<std::string> names;
  for (const auto& t : catalog.tables) names.push_back(t.name);
  std::string schema = reforce::compress_catalog(catalog, reforce::group_tables(names));

  std::string question;
  if (!question_file.empty()) {
    std::ifstream in(question_file);
    if (!in) throw std::runtime_error("question file not found: " + question_file);
    std::stringstream buf;
    buf << in.rdbuf();
    question = buf.str();
  }
  reforce::PromptBundle bundle = reforce::build_initial_prompt(schema, "", question);
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + out_path);
  out << reforce::render_prompt(bundle);
  std::cout << "estimated_tokens=" << bundle.estimated_tokens << "\n";
  return 0;
}

int cmd_eval(const std::string& pred_dir, const std::string& gold_dir,
             const std::string& report_path, int round_decimals) {
  std::vector<std::string> ids;
  for (const auto& entry : fs::directory_iterator(gold_dir)) {
    if (entry.path().extension() == ".csv") ids.push_back(entry.path().stem().string());
  }
  std::sort(ids.begin(), ids.end());

  std::vector<reforce::EvalOutcome> outcomes;
  std::size_t max_candidates = 0;
  for (const auto& id : ids) {
    reforce::ResultTable gold = reforce::load_csv((fs::path(gold_dir) / (id + ".csv")).string());
    reforce::EvalOutcome o;
    o.instance_id = id;

    fs::path pred_csv = fs::path(pred_dir) / (id + ".csv");
    if (fs::exists(pred_csv) && !gold.rows.empty()) {
      auto cmp = reforce::compare(reforce::load_csv(pred_csv.string()), gold, round_decimals);
      o.correct = cmp.match;
      o.matched_columns = cmp.column_mapping;
    }

    // Candidate indices may have gaps (error candidates write no file), so
    // scan for the highest <id>.k<j>.csv present.
    std::size_t top = 0;
    const std::string prefix = id + ".k";
    for (const auto& entry : fs::directory_iterator(pred_dir)) {
      std::string name = entry.path().filename().string();
      if (name.rfind(prefix, 0) != 0 || entry.path().extension() != ".csv") continue;
      std::size_t j = std::strtoull(name.c_str() + prefix.size(), nullptr, 10);
      top = std::max(top, j);
    }
    for (std::size_t j = 1; j <= top; ++j) {
      fs::path cand = fs::path(pred_dir) / (id + ".k" + std::to_string(j) + ".csv");
      bool flag = false;
      if (fs::exists(cand) && !gold.rows.empty()) {
        flag = reforce::compare(reforce::load_csv(cand.string()), gold, round_decimals).match;
      }
      o.per_candidate_correct.push_back(flag);
    }
    max_candidates = std::max(max_candidates, o.per_candidate_correct.size());
    outcomes.push_back(std::move(o));
  }

  for (auto& o : outcomes) o.per_candidate_correct.resize(max_candidates, false);

  ordered_json report;
  report["ex"] = reforce::execution_accuracy(outcomes);
  ordered_json at_k = ordered_json::object();
  for (std::size_t k = 1; k <= max_candidates; ++k) {
    at_k[std::to_string(k)] = reforce::ex_at_k(outcomes, k);
  }
  report["ex_at_k"] = std::move(at_k);
  report["examples"] = ordered_json::array();
  for (const auto& o : outcomes) {
    ordered_json ex;
    ex["instance_id"] = o.instance_id;
    ex["correct"] = o.correct;
    ex["per_candidate_correct"] = o.per_candidate_correct;
    report["examples"].push_back(std::move(ex));
  }

  std::ofstream out(report_path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + report_path);
  out << report.dump(2) << "\n";
  std::cout << "ex=" << report["ex"].get<double>() << " over " << outcomes.size()
            << " example(s)\n";
  return 0;
}

int cmd_report_costs(const std::string& log_dir, const std::string& strata_path,
                     double base_count) {
  if (!strata_path.empty()) {
    if (base_count <= 0) throw std::runtime_error("--strata requires --base-count");
    auto rep = reforce::cost_report(reforce::load_strata(strata_path), base_count);
    std::cout << reforce::format_cost_report(rep);
    return 0;
  }
  if (log_dir.empty()) throw std::runtime_error("report-costs needs --log or --strata");

  // Derive per-instance strata from the run's call log; db calls come from
  // report.json ledgers (the call log records LLM calls only).
  struct PerInstance {
    std::size_t llm_calls = 0;
    std::size_t tokens = 0;
    bool ce = false;
    double db_calls = 0;
  };
  std::map<std::string, PerInstance> per;
  {
    std::ifstream in((fs::path(log_dir) / "log" / "calls.jsonl").string());
    if (!in) throw std::runtime_error("no call log under " + log_dir);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto rec = nlohmann::json::parse(line, nullptr, false);
      if (rec.is_discarded()) continue;
      auto& p = per[rec.value("instance_id", "")];
      p.llm_calls += 1;
      p.tokens += rec.value("prompt_tokens", 0);
      if (rec.value("phase", "") == "exploration") p.ce = true;
    }
  }
  {
    std::ifstream in((fs::path(log_dir) / "report.json").string());
    if (in) {
      std::stringstream buf;
      buf << in.rdbuf();
      auto report = nlohmann::json::parse(buf.str(), nullptr, false);
      if (!report.is_discarded() && report.contains("examples")) {
        for (const auto& ex : report["examples"]) {
          auto it = per.find(ex.value("instance_id", ""));
          if (it != per.end()) it->second.db_calls = ex.value("db_calls", 0.0);
        }
      }
    }
  }

  // One stratum per (llm-call count, CE flag) bucket.
  std::map<std::pair<bool, std::size_t>, std::vector<PerInstance>> buckets;
  for (const auto& [id, p] : per) buckets[{p.ce, p.llm_calls}].push_back(p);

  std::vector<reforce::CostStratum> strata;
  for (const auto& [key, members] : buckets) {
    reforce::CostStratum s;
    s.name = (key.first ? "with CE, " : "") + std::to_string(key.second) + " llm call(s)";
    s.count = static_cast<double>(members.size());
    double llm = 0, db = 0, tok = 0;
    for (const auto& m : members) {
      llm += static_cast<double>(m.llm_calls);
      db += m.db_calls;
      tok += m.llm_calls > 0 ? static_cast<double>(m.tokens) / m.llm_calls : 0.0;
    }
    s.llm_calls = llm / s.count;
    s.db_calls = db / s.count;
    s.tokens = tok / s.count;
    strata.push_back(std::move(s));
  }
  double base = base_count > 0 ? base_count : static_cast<double>(per.size());
  std::cout << reforce::format_cost_report(reforce::cost_report(strata, base));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ReFoRCE: schema-compressing, self-refining Text-to-SQL engine"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "Run the pipeline over a task file");
  reforce::RunConfig cfg;
  std::string exploration = "auto";
  std::string dialect_override;
  std::string config_path;
  run->add_option("--config", config_path, "Config file with the same keys as the flags");
  run->add_option("--tasks", cfg.tasks_path, "Task file (jsonl)");
  run->add_option("--catalog", cfg.catalog_dir, "Catalog root directory");
  run->add_option("--output", cfg.output_dir, "Output directory");
  run->add_option("--votes", cfg.votes, "Candidates per example");
  run->add_option("--max-refine", cfg.max_refine, "Self-refinement round cap");
  run->add_option("--exploration", exploration, "auto|always|never");
  run->add_option("--parallel", cfg.workers, "Worker threads");
  run->add_option("--seed", cfg.seed, "Run seed");
  run->add_option("--backend", cfg.backend, "mock:FILE or http(s)://... (default: env)");
  run->add_option("--model", cfg.model, "Model name");
  run->add_option("--temperature", cfg.temperature, "Sampling temperature");
  run->add_option("--token-threshold", cfg.token_threshold, "Schema-linking trigger");
  run->add_option("--gold-tables", cfg.gold_tables_path, "Gold table annotations (jsonl)");
  run->add_option("--round-decimals", cfg.round_decimals, "Numeric comparison precision");
  run->add_option("--max-try", cfg.max_try, "Exploration self-correction cap");
  run->add_option("--dialect", dialect_override, "Override task dialect");

  // compress
  auto* compress = app.add_subcommand("compress", "Write the compressed initial prompt");
  std::string c_catalog, c_db, c_question, c_out;
  compress->add_option("--catalog", c_catalog)->required();
  compress->add_option("--db", c_db)->required();
  compress->add_option("--question-file", c_question);
  compress->add_option("--out", c_out)->required();

  // eval
  auto* eval = app.add_subcommand("eval", "Score predictions against gold CSVs");
  std::string e_pred, e_gold, e_report = "report.json";
  int e_round = 2;
  eval->add_option("--pred", e_pred)->required();
  eval->add_option("--gold", e_gold)->required();
  eval->add_option("--report", e_report);
  eval->add_option("--round-decimals", e_round);

  // report-costs
  auto* costs = app.add_subcommand("report-costs", "Stratum table with weighted averages");
  std::string r_log, r_strata;
  double r_base = 0;
  costs->add_option("--log", r_log, "Run directory containing log/calls.jsonl");
  costs->add_option("--strata", r_strata, "Explicit stratum rows (JSON array)");
  costs->add_option("--base-count", r_base, "Weighted-average denominator");

  // gen-fixtures
  auto* gen = app.add_subcommand("gen-fixtures", "Generate the desk-scale benchmark");
  std::string g_out;
  std::uint64_t g_seed = 7;
  gen->add_option("--out", g_out)->required();
  gen->add_option("--seed", g_seed);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      if (!config_path.empty()) apply_config_file(run, config_path);
      cfg.exploration = reforce::exploration_policy_from_string(exploration);
      if (!dialect_override.empty()) {
        cfg.dialect_override = reforce::dialect_from_string(dialect_override);
      }
      return cmd_run(cfg);
    }
    if (compress->parsed()) return cmd_compress(c_catalog, c_db, c_question, c_out);
    if (eval->parsed()) return cmd_eval(e_pred, e_gold, e_report, e_round);
    if (costs->parsed()) return cmd_report_costs(r_log, r_strata, r_base);
    if (gen->parsed()) {
      std::string manifest = reforce::generate_fixtures(g_out, g_seed);
      std::cout << "wrote " << manifest << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
