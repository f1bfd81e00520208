#include "reforce/fixtures.hpp"

#include <cassert>
#include <filesystem>
#include <fstream>
#include <random>
#include <stdexcept>

#include "json.hpp"
#include "reforce/executor.hpp"

namespace reforce {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

bool is_leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

int days_in_month(int y, int m) {
  static const int days[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  if (m == 2 && is_leap(y)) return 29;
  return days[m - 1];
}

// GA_SESSIONS_20160801 .. GA_SESSIONS_20170801 inclusive: 366 names.
std::vector<std::string> ga_table_names() {
  std::vector<std::string> names;
  int y = 2016, m = 8, d = 1;
  for (;;) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d%02u%02u", y, static_cast<unsigned>(m), static_cast<unsigned>(d));
    names.push_back(std::string("GA_SESSIONS_") + buf);
    if (y == 2017 && m == 8 && d == 1) break;
    if (++d > days_in_month(y, m)) {
      d = 1;
      if (++m > 12) {
        m = 1;
        ++y;
      }
    }
  }
  return names;
}

std::string ga_ddl(const std::string& name, std::size_t ddl_bytes) {
  std::string ddl = "CREATE TABLE " + name + " (\n";
  ddl += "  visit_id INTEGER,\n";
  ddl += "  visit_start_time INTEGER,\n";
  ddl += "  full_visitor_id TEXT,\n";
  for (int i = 0; i < 12; ++i) {
    ddl += "  session_field_" + std::to_string(i) + " TEXT,\n";
  }
  ddl += "  totals TEXT\n);\n";
  const std::string marker = "-- padding: ";
  if (ddl.size() + marker.size() + 1 > ddl_bytes) {
    throw std::invalid_argument("ddl_bytes too small for the ga schema");
  }
  ddl += marker;
  ddl.append(ddl_bytes - ddl.size() - 1, 'x');
  ddl += '\n';
  assert(ddl.size() == ddl_bytes);
  return ddl;
}

std::string sql_block(const std::string& sql) {
  return "```sql\n" + sql + "\n```";
}

struct MockRecord {
  std::vector<std::string> when;
  std::string respond;
};

struct TaskFixture {
  std::string id;
  std::string db_id;
  std::string question;
  std::string gold_sql;
  std::string expected_provenance;
  bool expected_correct = false;
};

void write_file(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

// Rebuilds the sqlite file from scratch so regeneration stays byte-stable.
void build_db(const fs::path& db_path, const std::string& script) {
  fs::create_directories(db_path.parent_path());
  fs::remove(db_path);
  SqliteAdapter db(db_path.string(), /*read_only=*/false);
  db.exec_script(script);
}

TableInfo make_table(std::string name, std::string ddl, std::string description,
                     std::vector<SampleRow> samples) {
  TableInfo t;
  t.name = std::move(name);
  t.ddl = std::move(ddl);
  t.description = std::move(description);
  t.sample_rows = std::move(samples);
  finalize_table(t);
  return t;
}

}  // namespace

DatabaseCatalog make_ga_replica_catalog(std::size_t ddl_bytes) {
  DatabaseCatalog catalog;
  catalog.db_id = "ga_replica";
  catalog.dialect = Dialect::bigquery;
  for (const auto& name : ga_table_names()) {
    catalog.tables.push_back(
        make_table(name, ga_ddl(name, ddl_bytes), "Daily web session export.", {}));
  }
  return catalog;
}

std::string generate_fixtures(const std::string& out_dir, std::uint64_t seed) {
  fs::path root(out_dir);
  fs::path databases = root / "databases";
  fs::create_directories(databases);

  std::mt19937_64 rng(seed);
  auto rand_in = [&](int lo, int hi) {
    return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
  };

  // --- ga_replica ---------------------------------------------------------
  save_catalog(make_ga_replica_catalog(), databases.string());

  // --- mini_shop ----------------------------------------------------------
  const std::string users_ddl =
      "CREATE TABLE USERS (id INTEGER PRIMARY KEY, name TEXT, city TEXT);";
  const std::string orders_ddl =
      "CREATE TABLE ORDERS (id INTEGER PRIMARY KEY, user_id INTEGER, amount INTEGER, "
      "status TEXT);";

  const std::vector<std::pair<std::string, std::string>> users = {
      {"Ava", "Springfield"}, {"Ben", "Shelbyville"}, {"Cara", "Springfield"},
      {"Dan", "Capital City"}};
  struct OrderRow {
    int id, user_id, amount;
    std::string status;
  };
  std::vector<OrderRow> orders;
  for (int i = 1; i <= 7; ++i) {
    orders.push_back({i, rand_in(1, 4), rand_in(10, 99), i % 2 == 1 ? "completed" : "pending"});
  }

  {
    std::string script = users_ddl + "\n" + orders_ddl + "\n";
    for (std::size_t i = 0; i < users.size(); ++i) {
      script += "INSERT INTO USERS VALUES(" + std::to_string(i + 1) + ", '" + users[i].first +
                "', '" + users[i].second + "');\n";
    }
    for (const auto& o : orders) {
      script += "INSERT INTO ORDERS VALUES(" + std::to_string(o.id) + ", " +
                std::to_string(o.user_id) + ", " + std::to_string(o.amount) + ", '" + o.status +
                "');\n";
    }
    build_db(databases / "mini_shop" / "mini_shop.sqlite", script);

    DatabaseCatalog cat;
    cat.db_id = "mini_shop";
    std::vector<SampleRow> user_samples;
    for (std::size_t i = 0; i < 3; ++i) {
      user_samples.push_back({{"id", std::to_string(i + 1)},
                              {"name", users[i].first},
                              {"city", users[i].second}});
    }
    std::vector<SampleRow> order_samples;
    for (std::size_t i = 0; i < 3; ++i) {
      order_samples.push_back({{"id", std::to_string(orders[i].id)},
                               {"user_id", std::to_string(orders[i].user_id)},
                               {"amount", std::to_string(orders[i].amount)},
                               {"status", orders[i].status}});
    }
    cat.tables.push_back(make_table("USERS", users_ddl, "Store customers.", user_samples));
    cat.tables.push_back(make_table("ORDERS", orders_ddl, "Customer orders.", order_samples));
    save_catalog(cat, databases.string());
  }

  // --- logs_db (exercises table grouping in the pipeline) ------------------
  {
    std::string script;
    DatabaseCatalog cat;
    cat.db_id = "logs_db";
    for (const std::string year : {"2021", "2022", "2023"}) {
      std::string ddl = "CREATE TABLE T_" + year + " (val INTEGER);";
      script += ddl + "\n";
      std::vector<SampleRow> samples;
      for (int i = 0; i < 3; ++i) {
        int v = rand_in(1, 500);
        script += "INSERT INTO T_" + year + " VALUES(" + std::to_string(v) + ");\n";
        samples.push_back({{"val", std::to_string(v)}});
      }
      cat.tables.push_back(make_table("T_" + year, ddl, "Yearly log partition.", samples));
    }
    std::string orders_log_ddl = "CREATE TABLE ORDERS (id INTEGER PRIMARY KEY, amount INTEGER);";
    script += orders_log_ddl + "\n";
    std::vector<SampleRow> samples;
    for (int i = 1; i <= 5; ++i) {
      int v = rand_in(10, 99);
      script += "INSERT INTO ORDERS VALUES(" + std::to_string(i) + ", " + std::to_string(v) +
                ");\n";
      if (samples.size() < 3) {
        samples.push_back({{"id", std::to_string(i)}, {"amount", std::to_string(v)}});
      }
    }
    cat.tables.push_back(make_table("ORDERS", orders_log_ddl, "Archived orders.", samples));
    build_db(databases / "logs_db" / "logs_db.sqlite", script);
    save_catalog(cat, databases.string());
  }

  // --- nested_demo (serialized nested text values) --------------------------
  const std::vector<std::string> way_tags = {
      R"([{"key": "highway", "value": "primary"}])",
      R"([{"key": "highway", "value": "primary"}, {"key": "bridge", "value": "yes"}])",
      R"([{"key": "highway", "value": "footway"}])",
      R"([{"key": "highway", "value": "secondary"}])",
      R"([{"key": "highway", "value": "residential"}])",
      R"([{"key": "waterway", "value": "river"}])",
      R"([{"key": "highway", "value": "residential"}, {"key": "name", "value": "Elm Street"}])",
      R"([{"key": "bridge", "value": "yes"}])",
      R"([{"key": "highway", "value": "trunk"}])",
      R"([{"key": "highway", "value": "secondary"}, {"key": "bridge", "value": "viaduct"}])",
  };
  {
    const std::string ways_ddl = "CREATE TABLE WAYS (id INTEGER PRIMARY KEY, tags TEXT);";
    std::string script = ways_ddl + "\n";
    for (std::size_t i = 0; i < way_tags.size(); ++i) {
      std::string escaped;
      for (char c : way_tags[i]) {
        escaped += c;
        if (c == '\'') escaped += '\'';
      }
      script += "INSERT INTO WAYS VALUES(" + std::to_string(i + 1) + ", '" + escaped + "');\n";
    }
    build_db(databases / "nested_demo" / "nested_demo.sqlite", script);

    DatabaseCatalog cat;
    cat.db_id = "nested_demo";
    std::vector<SampleRow> samples;
    for (std::size_t i = 0; i < 3; ++i) {
      samples.push_back({{"id", std::to_string(i + 1)}, {"tags", way_tags[i]}});
    }
    cat.tables.push_back(make_table(
        "WAYS", ways_ddl, "Road segments; tags holds a serialized key/value array.", samples));
    save_catalog(cat, databases.string());
  }

  // --- mini8 tasks, gold and mock script ------------------------------------
  const std::string gold6 =
      "SELECT COUNT(*) AS road_count FROM WAYS WHERE tags LIKE '%\"key\": \"highway\"%' AND "
      "(tags LIKE '%\"value\": \"primary\"%' OR tags LIKE '%\"value\": \"secondary\"%' OR "
      "tags LIKE '%\"value\": \"residential\"%') AND tags NOT LIKE '%\"key\": \"bridge\"%'";

  std::vector<TaskFixture> tasks = {
      {"mini8_01", "mini_shop", "How many orders are in the store?",
       "SELECT COUNT(*) AS order_count FROM ORDERS", "consensus", true},
      {"mini8_02", "mini_shop", "What is the total amount of completed orders?",
       "SELECT SUM(amount) AS total_completed FROM ORDERS WHERE status = 'completed'",
       "consensus", true},
      {"mini8_03", "logs_db", "What is the maximum order amount in the logs database?",
       "SELECT MAX(amount) AS max_amount FROM ORDERS", "consensus", true},
      {"mini8_04", "mini_shop", "List the distinct cities users live in.",
       "SELECT DISTINCT city FROM USERS ORDER BY city", "consensus", true},
      {"mini8_05", "mini_shop", "How many orders were placed by users living in Springfield?",
       "SELECT COUNT(*) AS n FROM ORDERS JOIN USERS ON ORDERS.user_id = USERS.id WHERE "
       "USERS.city = 'Springfield'",
       "exploration", true},
      {"mini8_06", "nested_demo",
       "How many ways are tagged as primary, secondary or residential highways without a "
       "bridge tag?",
       gold6, "exploration", true},
      {"mini8_07", "mini_shop", "How many orders does the store have in total?",
       "SELECT COUNT(*) AS order_count FROM ORDERS", "random", false},
      {"mini8_08", "mini_shop", "Which city has the highest total order amount?",
       "SELECT city FROM USERS JOIN ORDERS ON ORDERS.user_id = USERS.id GROUP BY city ORDER "
       "BY SUM(amount) DESC LIMIT 1",
       "null", false},
  };

  std::string tasks_jsonl;
  for (const auto& t : tasks) {
    ordered_json rec;
    rec["instance_id"] = t.id;
    rec["db_id"] = t.db_id;
    rec["question"] = t.question;
    rec["dialect"] = "sqlite";
    tasks_jsonl += rec.dump() + "\n";
  }
  write_file(root / "tasks.jsonl", tasks_jsonl);

  // Gold CSVs come from executing the gold SQL against the generated databases.
  for (const auto& t : tasks) {
    SqliteAdapter db((databases / t.db_id / (t.db_id + ".sqlite")).string(),
                     /*read_only=*/true);
    ExecutionResult gold = db.run(t.gold_sql);
    if (gold.status != ExecStatus::ok) {
      throw std::runtime_error("gold SQL failed for " + t.id + ": " + gold.error_msg);
    }
    write_file(root / "gold" / (t.id + ".csv"), to_csv(gold));
  }

  // Mock script. Every record keys on its instance's full question so that
  // concurrent workers can only consume their own records.
  std::vector<MockRecord> script;
  auto add = [&](std::vector<std::string> when, std::string respond) {
    script.push_back({std::move(when), std::move(respond)});
  };
  const auto& q = tasks;  // shorthand

  // mini8_01: three identical valid candidates.
  for (int i = 0; i < 3; ++i) add({q[0].question}, sql_block(q[0].gold_sql));

  // mini8_02: candidate 1 self-refines once, candidates 2 and 3 are clean.
  add({q[1].question}, sql_block("SELEC SUM(amount) FROM ORDERS"));
  add({q[1].question, "##ERROR##"}, sql_block(q[1].gold_sql));
  add({q[1].question}, sql_block(q[1].gold_sql));
  add({q[1].question}, sql_block(q[1].gold_sql));

  // mini8_03: three SQL spellings, one execution result.
  add({q[2].question}, sql_block("SELECT MAX(amount) AS max_amount FROM ORDERS"));
  add({q[2].question}, sql_block("SELECT MAX(amount) AS MAX_AMOUNT FROM ORDERS"));
  add({q[2].question}, sql_block("SELECT MAX(amount) AS max_amount FROM ORDERS WHERE 1=1"));

  // mini8_04: row order differs per candidate, fingerprints agree.
  add({q[3].question}, sql_block("SELECT DISTINCT city FROM USERS ORDER BY city ASC"));
  add({q[3].question}, sql_block("SELECT DISTINCT city FROM USERS ORDER BY city DESC"));
  add({q[3].question}, sql_block("SELECT DISTINCT city FROM USERS"));

  // mini8_05: three-way tie, then exploration converges (queries lack LIMIT on
  // purpose to exercise enforcement).
  add({q[4].question}, sql_block("SELECT 991 AS answer"));
  add({q[4].question}, sql_block("SELECT 992 AS answer"));
  add({q[4].question}, sql_block("SELECT 993 AS answer"));
  const std::string q5_exploration =
      sql_block("--Description: 1) Look at user cities.\nSELECT DISTINCT \"city\" FROM \"USERS\"") +
      "\n" +
      sql_block("--Description: 2) Sample completed orders.\nSELECT \"id\", \"amount\" FROM "
                "\"ORDERS\" WHERE \"status\" = 'completed'");
  for (int i = 0; i < 3; ++i) {
    add({q[4].question, "at most 10"}, q5_exploration);
    add({q[4].question, "[Exploration results]"}, sql_block(q[4].gold_sql));
  }

  // mini8_06: tie, then the nested-column exploration with a corrected query
  // and a similar-error rewrite of the pending one.
  add({q[5].question}, sql_block("SELECT 971 AS answer"));
  add({q[5].question}, sql_block("SELECT 972 AS answer"));
  add({q[5].question}, sql_block("SELECT 973 AS answer"));
  const std::string q6_peek =
      "--Description: 1) Peek at tagged ways.\nSELECT \"id\", \"tags\" FROM \"WAYS\" LIMIT 20";
  const std::string q6_faulty =
      "--Description: 2) List distinct highway tag rows.\nSELECT tag.value FROM WAYS w, "
      "LATERAL FLATTEN(input => w.\"tags\") tag LIMIT 20";
  const std::string q6_pending =
      "--Description: 3) Count candidate roads without bridge tags.\nSELECT COUNT(*) FROM "
      "WAYS w, LATERAL FLATTEN(input => w.\"tags\") tag WHERE tag.value = 'highway' LIMIT 20";
  const std::string q6_corrected =
      "--Description: 2) List distinct highway tag rows.\nSELECT DISTINCT \"tags\" FROM "
      "\"WAYS\" WHERE \"tags\" LIKE '%\"key\": \"highway\"%' LIMIT 20";
  const std::string q6_adjusted =
      "--Description: 3) Count candidate roads without bridge tags.\nSELECT COUNT(*) AS "
      "candidate_roads FROM \"WAYS\" WHERE \"tags\" LIKE '%\"key\": \"highway\"%' AND "
      "\"tags\" NOT LIKE '%\"key\": \"bridge\"%' LIMIT 20";
  add({q[5].question, "at most 10"},
      sql_block(q6_peek) + "\n" + sql_block(q6_faulty) + "\n" + sql_block(q6_pending));
  add({"LATERAL FLATTEN(input => w.\"tags\")", "[Error occurred]"}, sql_block(q6_corrected));
  add({"[Pending queries]", "3) Count candidate roads"}, sql_block(q6_adjusted));
  add({q[5].question, "[Exploration results]"}, sql_block(q[5].gold_sql));
  const std::string q6_simple =
      sql_block("--Description: 1) Peek at tagged ways.\nSELECT \"id\", \"tags\" FROM \"WAYS\" "
                "LIMIT 20");
  for (int i = 0; i < 2; ++i) {
    add({q[5].question, "at most 10"}, q6_simple);
    add({q[5].question, "[Exploration results]"}, sql_block(q[5].gold_sql));
  }

  // mini8_07: tie persists through exploration; random fallback picks a wrong
  // answer whichever index the seed lands on.
  add({q[6].question}, sql_block("SELECT 994 AS answer"));
  add({q[6].question}, sql_block("SELECT 995 AS answer"));
  add({q[6].question}, sql_block("SELECT 996 AS answer"));
  const std::string q7_exploration = sql_block(
      "--Description: 1) Peek at orders.\nSELECT \"id\" FROM \"ORDERS\" LIMIT 20");
  for (int i = 0; i < 3; ++i) {
    add({q[6].question, "at most 10"}, q7_exploration);
    add({q[6].question, "[Exploration results]"},
        sql_block("SELECT 98" + std::to_string(i + 1) + " AS answer"));
  }

  // mini8_08: no records at all; every call fails and the answer stays null.

  std::string script_jsonl;
  for (const auto& r : script) {
    ordered_json rec;
    rec["when_contains"] = r.when;
    rec["respond"] = r.respond;
    script_jsonl += rec.dump() + "\n";
  }
  write_file(root / "mock_script.jsonl", script_jsonl);

  // --- manifest --------------------------------------------------------------
  ordered_json manifest;
  manifest["seed"] = seed;
  manifest["fixtures"] = ordered_json::array();
  {
    ordered_json ga;
    ga["name"] = "ga_replica";
    ga["table_count"] = 366;
    ga["name_pattern"] = "GA_SESSIONS_YYYYMMDD";
    ga["row_count"] = 0;
    manifest["fixtures"].push_back(ga);
  }
  for (const auto& t : tasks) {
    ordered_json f;
    f["name"] = t.id;
    f["db_id"] = t.db_id;
    f["mock_script"] = "mock_script.jsonl";
    f["expected_provenance"] = t.expected_provenance;
    f["expected_correct"] = t.expected_correct;
    manifest["fixtures"].push_back(f);
  }
  {
    ordered_json nested;
    nested["name"] = "nested_demo";
    nested["table_count"] = 1;
    nested["row_count"] = way_tags.size();
    manifest["fixtures"].push_back(nested);
  }
  std::string manifest_path = (root / "manifest.json").string();
  write_file(manifest_path, manifest.dump(2) + "\n");
  return manifest_path;
}

}  // namespace reforce
