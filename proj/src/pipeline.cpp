#include "reforce/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "reforce/compression.hpp"
#include "reforce/consensus.hpp"
#include "reforce/evaluator.hpp"
#include "reforce/executor.hpp"

namespace reforce {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

ExplorationPolicy exploration_policy_from_string(const std::string& s) {
  if (s == "auto") return ExplorationPolicy::auto_policy;
  if (s == "always") return ExplorationPolicy::always;
  if (s == "never") return ExplorationPolicy::never;
  throw std::runtime_error("unknown exploration policy: " + s);
}

std::string to_string(ExplorationPolicy p) {
  switch (p) {
    case ExplorationPolicy::auto_policy: return "auto";
    case ExplorationPolicy::always: return "always";
    case ExplorationPolicy::never: return "never";
  }
  return "auto";
}

std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::consensus: return "consensus";
    case Provenance::exploration: return "exploration";
    case Provenance::random: return "random";
    case Provenance::null_answer: return "null";
  }
  return "null";
}

std::map<std::string, std::vector<std::string>> load_gold_tables(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("gold tables file not found: " + path);
  std::map<std::string, std::vector<std::string>> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ordered_json rec = ordered_json::parse(line, nullptr, false);
    if (rec.is_discarded() || !rec.contains("instance_id") || !rec.contains("tables")) {
      throw std::runtime_error("gold tables parse error at line " + std::to_string(line_no));
    }
    std::vector<std::string> tables;
    for (const auto& t : rec["tables"]) tables.push_back(t.get<std::string>());
    out[rec["instance_id"].get<std::string>()] = std::move(tables);
  }
  return out;
}

std::shared_ptr<LlmBackend> make_backend(const RunConfig& cfg) {
  if (cfg.backend.rfind("mock:", 0) == 0) {
    return MockBackend::from_file(cfg.backend.substr(5));
  }
  if (!cfg.backend.empty()) {
    const char* key = std::getenv("REFORCE_API_KEY");
    return std::make_shared<HttpBackend>(cfg.backend, key ? key : "", cfg.model);
  }
  return HttpBackend::from_env();
}

namespace {

ordered_json partition_event(const std::string& instance_id, const std::string& stage,
                             const VoteTally& t, const ConsensusPartition& p) {
  ordered_json counts = ordered_json::object();
  for (const auto& b : t.buckets) {
    counts[b.fp.digest] = b.members.size();
  }
  ordered_json ev;
  ev["event"] = "partition";
  ev["instance_id"] = instance_id;
  ev["stage"] = stage;
  ev["label"] = to_string(p.label);
  ev["bucket_counts"] = std::move(counts);
  return ev;
}

ordered_json candidate_event(std::size_t index, const SqlCandidate& c) {
  ordered_json ev;
  ev["event"] = "candidate";
  ev["index"] = index;
  ev["origin"] = to_string(c.origin);
  ev["rounds_used"] = c.rounds_used;
  ev["status"] = c.result.status == ExecStatus::ok      ? "ok"
                 : c.result.status == ExecStatus::empty ? "empty"
                                                        : "error";
  ev["sql"] = c.sql;
  ordered_json transcript = ordered_json::array();
  for (const auto& [p, r] : c.transcript) {
    transcript.push_back(ordered_json::array({p, r}));
  }
  ev["transcript"] = std::move(transcript);
  return ev;
}

}  // namespace

ExampleOutcome run_example(const TaskInstance& task, const RunConfig& cfg, LlmGateway& llm) {
  ExampleOutcome out;
  out.answer.instance_id = task.instance_id;
  auto log = [&](const ordered_json& ev) { out.log_lines.push_back(ev.dump()); };

  try {
    Dialect dialect = cfg.dialect_override.value_or(task.dialect);
    DatabaseCatalog catalog = load_catalog(cfg.catalog_dir, task.db_id);
    catalog.dialect = dialect;

    // Table-3-style gold-table mode restricts the catalog before compression.
    if (!cfg.gold_tables_path.empty()) {
      auto gold = load_gold_tables(cfg.gold_tables_path);
      auto it = gold.find(task.instance_id);
      if (it != gold.end()) {
        std::set<std::string> keep(it->second.begin(), it->second.end());
        std::vector<TableInfo> filtered;
        for (auto& t : catalog.tables) {
          if (keep.count(t.name)) filtered.push_back(std::move(t));
        }
        catalog.tables = std::move(filtered);
      }
    }

    std::vector<std::string> names;
    for (const auto& t : catalog.tables) names.push_back(t.name);
    std::vector<TableGroup> groups = group_tables(names);
    std::string schema_text = compress_catalog(catalog, groups);

    PromptBundle bundle =
        build_initial_prompt(schema_text, task.external_knowledge, task.question);

    bool linked = false;
    if (bundle.estimated_tokens > cfg.token_threshold) {
      LinkedSchema link = schema_link(catalog, groups, task, llm, out.answer.ledger,
                                      {task.instance_id, "link"});
      std::set<std::string> kept(link.kept_tables.begin(), link.kept_tables.end());
      std::vector<TableGroup> kept_groups;
      for (const auto& g : groups) {
        if (kept.count(g.representative)) kept_groups.push_back(g);
      }
      schema_text = compress_catalog(catalog, kept_groups);
      bundle = build_initial_prompt(schema_text, task.external_knowledge, task.question);
      linked = true;

      ordered_json ev;
      ev["event"] = "link";
      ev["kept_tables"] = link.kept_tables;
      log(ev);
    }
    {
      ordered_json ev;
      ev["event"] = "prompt";
      ev["estimated_tokens"] = bundle.estimated_tokens;
      ev["linked"] = linked;
      log(ev);
    }

    TaskInstance dialect_task = task;
    dialect_task.dialect = dialect;
    std::string db_path = sqlite_db_path(cfg.catalog_dir, task.db_id);
    std::unique_ptr<DbAdapter> db = make_adapter(dialect, db_path, cfg.db_timeout);

    // Stage B: k self-refined candidates (skipped when exploration replaces
    // them wholesale under policy `always`).
    std::vector<SqlCandidate>& candidates = out.candidates;
    if (cfg.exploration != ExplorationPolicy::always) {
      for (int i = 0; i < cfg.votes; ++i) {
        candidates.push_back(generate_candidate(bundle, llm, *db, out.answer.ledger,
                                                cfg.max_refine,
                                                {task.instance_id, "generate"}));
        log(candidate_event(candidates.size() - 1, candidates.back()));
      }
    }
    out.stage_b_count = candidates.size();

    VoteTally stage_b_tally = tally(candidates);
    ConsensusPartition stage_b = partition(stage_b_tally);
    out.stage_b_label = stage_b.label;
    if (cfg.exploration != ExplorationPolicy::always) {
      log(partition_event(task.instance_id, "consensus", stage_b_tally, stage_b));
    }

    auto finish = [&](Provenance prov, const SqlCandidate& c) {
      out.answer.provenance = prov;
      out.answer.sql = c.sql;
      out.answer.result = c.result;
      ordered_json ev;
      ev["event"] = "final";
      ev["provenance"] = to_string(prov);
      ev["sql"] = c.sql;
      log(ev);
    };

    bool explore_now = false;
    switch (cfg.exploration) {
      case ExplorationPolicy::never:
        explore_now = false;
        break;
      case ExplorationPolicy::always:
        explore_now = true;
        break;
      case ExplorationPolicy::auto_policy:
        explore_now = stage_b.label != ConsensusLabel::high;
        break;
    }

    if (stage_b.label == ConsensusLabel::high && cfg.exploration != ExplorationPolicy::always) {
      finish(Provenance::consensus, candidates[*stage_b.winner]);
      return out;
    }

    if (explore_now) {
      std::vector<SqlCandidate> explored;
      ExploreOptions opts;
      opts.max_try = cfg.max_try;
      opts.max_refine = cfg.max_refine;
      for (int i = 0; i < cfg.votes; ++i) {
        explored.push_back(explore(dialect_task, schema_text, llm, *db, out.answer.ledger,
                                   opts, {task.instance_id, "exploration"}));
        log(candidate_event(candidates.size() + explored.size() - 1, explored.back()));
      }
      VoteTally explore_tally = tally(explored);
      ConsensusPartition explore_part = partition(explore_tally);
      log(partition_event(task.instance_id, "exploration", explore_tally, explore_part));

      std::size_t offset = candidates.size();
      candidates.insert(candidates.end(), explored.begin(), explored.end());
      if (explore_part.label == ConsensusLabel::high) {
        finish(Provenance::exploration, candidates[offset + *explore_part.winner]);
        return out;
      }
    }

    // Stage E: seeded random fallback over everything generated so far.
    auto pick = random_select(candidates, selection_seed(cfg.seed, task.instance_id));
    if (pick) {
      finish(Provenance::random, candidates[*pick]);
      return out;
    }

    out.answer.provenance = Provenance::null_answer;
    out.error = "no candidates to select from";
    ordered_json ev;
    ev["event"] = "final";
    ev["provenance"] = "null";
    ev["error"] = out.error;
    log(ev);
  } catch (const std::exception& e) {
    out.answer.provenance = Provenance::null_answer;
    out.answer.result.reset();
    out.answer.sql.clear();
    out.error = e.what();
    ordered_json ev;
    ev["event"] = "final";
    ev["provenance"] = "null";
    ev["error"] = out.error;
    out.log_lines.push_back(ev.dump());
  }
  return out;
}

namespace {

void write_text(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << content;
}

std::set<std::string> read_manifest(const fs::path& path) {
  std::set<std::string> ids;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) ids.insert(line);
  }
  return ids;
}

}  // namespace

RunSummary run_all(const std::vector<TaskInstance>& tasks, const RunConfig& cfg,
                   LlmGateway& llm) {
  fs::path out_root(cfg.output_dir);
  fs::path output_dir = out_root / "output";
  fs::path log_dir = out_root / "log";
  fs::create_directories(output_dir);
  fs::create_directories(log_dir);
  fs::path manifest_path = out_root / "manifest.txt";

  std::set<std::string> done = read_manifest(manifest_path);

  // Call records are buffered per instance and rewritten in task order at the
  // end so output bytes do not depend on worker interleaving.
  std::mutex mu;
  std::map<std::string, std::vector<CallRecord>> call_records;
  llm.set_call_sink([&](const CallRecord& rec) {
    std::lock_guard<std::mutex> lock(mu);
    call_records[rec.instance_id].push_back(rec);
  });

  RunSummary summary;
  std::vector<ExampleOutcome> outcomes(tasks.size());
  std::vector<bool> ran(tasks.size(), false);
  std::ofstream manifest_append(manifest_path, std::ios::app);

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) break;
      const TaskInstance& task = tasks[i];
      {
        std::lock_guard<std::mutex> lock(mu);
        if (done.count(task.instance_id)) {
          ++summary.skipped;
          continue;
        }
      }
      ExampleOutcome outcome = run_example(task, cfg, llm);

      // Per-example files can be written as soon as the example completes.
      const std::string& id = task.instance_id;
      if (outcome.answer.provenance != Provenance::null_answer) {
        write_text(output_dir / (id + ".sql"), outcome.answer.sql + "\n");
        if (outcome.answer.result && outcome.answer.result->status != ExecStatus::error) {
          write_text(output_dir / (id + ".csv"), to_csv(*outcome.answer.result));
        }
      }
      for (std::size_t j = 0; j < outcome.candidates.size(); ++j) {
        const auto& cand = outcome.candidates[j];
        if (cand.result.status == ExecStatus::error) continue;
        write_text(output_dir / (id + ".k" + std::to_string(j + 1) + ".csv"),
                   to_csv(cand.result));
      }
      std::string log_content;
      for (const auto& line : outcome.log_lines) log_content += line + "\n";
      write_text(log_dir / (id + ".jsonl"), log_content);

      {
        std::lock_guard<std::mutex> lock(mu);
        outcomes[i] = std::move(outcome);
        ran[i] = true;
        manifest_append << id << "\n";
        manifest_append.flush();
      }
    }
  };

  std::size_t n_workers = std::max(1, cfg.workers);
  std::vector<std::thread> threads;
  for (std::size_t w = 0; w < n_workers; ++w) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  llm.set_call_sink(nullptr);
  manifest_append.close();

  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (ran[i]) ++summary.completed;
  }
  if (summary.completed == 0) return summary;  // resume no-op: leave artifacts alone

  // Finalize run artifacts in task order.
  ordered_json report;
  report["config"] = ordered_json{{"votes", cfg.votes},
                                  {"max_refine", cfg.max_refine},
                                  {"exploration", to_string(cfg.exploration)},
                                  {"seed", cfg.seed},
                                  {"token_threshold", cfg.token_threshold}};
  report["examples"] = ordered_json::array();
  ordered_json histogram = ordered_json::object();
  for (const char* key : {"consensus", "exploration", "random", "null"}) histogram[key] = 0;

  std::string calls_jsonl;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (!ran[i]) continue;
    const ExampleOutcome& o = outcomes[i];
    const std::string prov = to_string(o.answer.provenance);
    histogram[prov] = histogram[prov].get<std::size_t>() + 1;
    ++summary.provenance_histogram[prov];
    summary.totals.merge(o.answer.ledger);

    ordered_json ex;
    ex["instance_id"] = o.answer.instance_id;
    ex["provenance"] = prov;
    ex["stage_b_label"] = to_string(o.stage_b_label);
    ex["llm_calls"] = o.answer.ledger.llm_calls;
    ex["db_calls"] = o.answer.ledger.db_calls;
    ex["prompt_tokens_total"] = o.answer.ledger.prompt_tokens_total;
    if (!o.error.empty()) ex["error"] = o.error;
    report["examples"].push_back(std::move(ex));

    for (const CallRecord& rec : call_records[o.answer.instance_id]) {
      ordered_json line;
      line["instance_id"] = rec.instance_id;
      line["phase"] = rec.phase;
      line["prompt_sha256"] = rec.prompt_sha256;
      line["prompt_tokens"] = rec.prompt_tokens;
      line["output_tokens"] = rec.output_tokens;
      calls_jsonl += line.dump() + "\n";
    }
  }
  report["totals"] = ordered_json{{"llm_calls", summary.totals.llm_calls},
                                  {"db_calls", summary.totals.db_calls},
                                  {"prompt_tokens_total", summary.totals.prompt_tokens_total}};
  report["provenance_histogram"] = std::move(histogram);

  write_text(out_root / "report.json", report.dump(2) + "\n");
  write_text(log_dir / "calls.jsonl", calls_jsonl);

  // Rewrite the manifest in task order (the append above is crash durability).
  std::string manifest_final;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (ran[i] || done.count(tasks[i].instance_id)) {
      manifest_final += tasks[i].instance_id + "\n";
    }
  }
  write_text(manifest_path, manifest_final);
  return summary;
}

}  // namespace reforce
