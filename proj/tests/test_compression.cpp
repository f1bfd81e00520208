#include "doctest.h"

#include <algorithm>
#include <map>
#include <random>
#include <set>

#include "reforce/compression.hpp"
#include "reforce/fixtures.hpp"
#include "test_util.hpp"

using namespace reforce;

namespace {

// Independent oracle for the stem rule: strip one maximal trailing (preferred)
// or leading [0-9_-] run of length >= 4, boundary separators staying with the
// stem. Kept deliberately separate from the implementation.
std::string oracle_stem(const std::string& name) {
  auto in_class = [](char c) { return (c >= '0' && c <= '9') || c == '_' || c == '-'; };
  auto sep = [](char c) { return c == '_' || c == '-'; };

  std::size_t i = name.size();
  while (i > 0 && in_class(name[i - 1])) --i;
  while (i < name.size() && sep(name[i])) ++i;
  if (name.size() - i >= 4) return name.substr(0, i).empty() ? name : name.substr(0, i);

  std::size_t j = 0;
  while (j < name.size() && in_class(name[j])) ++j;
  while (j > 0 && sep(name[j - 1])) --j;
  if (j >= 4) return name.substr(j).empty() ? name : name.substr(j);
  return name;
}

// Oracle grouping: stems with >= 3 members group, everything else singleton.
std::map<std::string, std::vector<std::string>> oracle_groups(
    const std::vector<std::string>& names) {
  std::map<std::string, int> counts;
  for (const auto& n : names) counts[oracle_stem(n)]++;
  std::map<std::string, std::vector<std::string>> grouped;
  for (const auto& n : names) {
    std::string s = oracle_stem(n);
    grouped[counts[s] >= 3 ? s : n].push_back(n);
  }
  return grouped;
}

std::vector<std::string> ga_names() {
  DatabaseCatalog cat = make_ga_replica_catalog(600);
  std::vector<std::string> names;
  for (const auto& t : cat.tables) names.push_back(t.name);
  return names;
}

DatabaseCatalog tiny_catalog(const std::vector<std::string>& names,
                             const std::string& ddl_stub = "CREATE TABLE X(a INT, b TEXT, c REAL)") {
  DatabaseCatalog cat;
  cat.db_id = "t";
  for (const auto& n : names) {
    TableInfo t;
    t.name = n;
    t.ddl = ddl_stub + " -- " + n;
    finalize_table(t);
    cat.tables.push_back(std::move(t));
  }
  return cat;
}

}  // namespace

TEST_CASE("group_tables matches the frozen oracle example") {
  // Expected values computed by the oracle and frozen below.
  std::vector<std::string> names = {"T_2021", "T_2022", "ORDERS", "T_2023"};
  auto expected = oracle_groups(names);
  REQUIRE(expected.size() == 2);
  REQUIRE(expected.count("T_") == 1);
  REQUIRE(expected.at("T_") == std::vector<std::string>{"T_2021", "T_2022", "T_2023"});
  REQUIRE(expected.count("ORDERS") == 1);

  auto groups = group_tables(names);
  REQUIRE(groups.size() == 2);
  CHECK(groups[0].stem == "T_");
  CHECK(groups[0].members == std::vector<std::string>{"T_2021", "T_2022", "T_2023"});
  CHECK(groups[0].representative == "T_2021");
  CHECK(groups[1].stem == "ORDERS");
  CHECK(groups[1].members == std::vector<std::string>{"ORDERS"});
}

TEST_CASE("group_tables on the ga replica names") {
  auto names = ga_names();
  REQUIRE(names.size() == 366);
  auto groups = group_tables(names);
  REQUIRE(groups.size() == 1);
  CHECK(groups[0].stem == "GA_SESSIONS_");
  CHECK(groups[0].members.size() == 366);
  CHECK(groups[0].representative == "GA_SESSIONS_20160801");
}

TEST_CASE("group_tables singleton") {
  auto groups = group_tables({"USERS"});
  REQUIRE(groups.size() == 1);
  CHECK(groups[0].representative == "USERS");
  CHECK(groups[0].members == std::vector<std::string>{"USERS"});
}

TEST_CASE("grouping properties against the oracle on random names") {
  std::mt19937 rng(20240811);
  const std::vector<std::string> stems = {"LOG", "EVENTS_", "t-", "SESS", "X", "20"};
  for (int iter = 0; iter < 200; ++iter) {
    std::set<std::string> unique;
    int n = 1 + static_cast<int>(rng() % 12);
    for (int i = 0; i < n; ++i) {
      std::string name = stems[rng() % stems.size()];
      int digits = static_cast<int>(rng() % 7);
      for (int d = 0; d < digits; ++d) name += static_cast<char>('0' + rng() % 10);
      unique.insert(name);
    }
    std::vector<std::string> names(unique.begin(), unique.end());
    std::shuffle(names.begin(), names.end(), rng);

    auto groups = group_tables(names);

    // Partition: union of members equals the input set, pairwise disjoint.
    std::set<std::string> seen;
    std::size_t total = 0;
    for (const auto& g : groups) {
      REQUIRE(!g.members.empty());
      CHECK(std::find(g.members.begin(), g.members.end(), g.representative) != g.members.end());
      for (const auto& m : g.members) {
        CHECK(seen.insert(m).second);
        ++total;
      }
    }
    CHECK(total == names.size());

    // Same member sets as the oracle grouping.
    auto expected = oracle_groups(names);
    REQUIRE(groups.size() == expected.size());
    for (const auto& g : groups) {
      auto members = g.members;
      std::sort(members.begin(), members.end());
      auto it = expected.find(g.stem);
      REQUIRE(it != expected.end());
      auto want = it->second;
      std::sort(want.begin(), want.end());
      CHECK(members == want);
    }

    // Idempotence: grouping {representatives} u {stems} yields singletons.
    std::set<std::string> again_set;
    for (const auto& g : groups) {
      again_set.insert(g.representative);
      again_set.insert(g.stem);
    }
    std::vector<std::string> again(again_set.begin(), again_set.end());
    for (const auto& g2 : group_tables(again)) CHECK(g2.members.size() == 1);
  }
}

TEST_CASE("compress_catalog single table equals its full render") {
  DatabaseCatalog cat = tiny_catalog({"USERS"});
  auto groups = group_tables({"USERS"});
  CHECK(compress_catalog(cat, groups) == render_table(cat.tables[0], true));
}

TEST_CASE("compress_catalog grouped output shape") {
  std::vector<std::string> names = {"T_2021", "T_2022", "ORDERS", "T_2023"};
  DatabaseCatalog cat = tiny_catalog(names);
  auto groups = group_tables(names);
  std::string out = compress_catalog(cat, groups);

  CHECK(out.find("-- group T_ (3 tables, 1 shown in full)") != std::string::npos);
  CHECK(out.find(render_table(*cat.find_table("T_2021"), true)) != std::string::npos);
  // Non-representatives appear as bare names, not as DDL.
  CHECK(out.find("CREATE TABLE X(a INT, b TEXT, c REAL) -- T_2022") == std::string::npos);
  CHECK(out.find("T_2022\n") != std::string::npos);
  CHECK(out.find(render_table(*cat.find_table("ORDERS"), true)) != std::string::npos);
}

TEST_CASE("compression monotonicity on random catalogs") {
  std::mt19937 rng(7);
  for (int iter = 0; iter < 50; ++iter) {
    std::set<std::string> unique;
    int n = 1 + static_cast<int>(rng() % 10);
    for (int i = 0; i < n; ++i) {
      std::string name = (rng() % 2 ? "EV_" : "W");
      int digits = static_cast<int>(rng() % 6);
      for (int d = 0; d < digits; ++d) name += static_cast<char>('0' + rng() % 10);
      unique.insert(name);
    }
    std::vector<std::string> names(unique.begin(), unique.end());
    std::string ddl(rng() % 80, 'd');  // includes near-empty DDLs
    DatabaseCatalog cat = tiny_catalog(names, "CREATE TABLE Z(" + ddl + ")");

    std::size_t uncompressed = 0;
    for (const auto& t : cat.tables) uncompressed += render_table(t, true).size();
    std::string compressed = compress_catalog(cat, group_tables(names));
    CHECK(compressed.size() <= uncompressed);

    bool all_singletons = true;
    for (const auto& g : group_tables(names)) all_singletons &= g.members.size() == 1;
    if (all_singletons) CHECK(compressed.size() == uncompressed);
  }
}

TEST_CASE("estimate_tokens is ceil(bytes/4)") {
  CHECK(estimate_tokens("") == 0);
  CHECK(estimate_tokens(std::string(4000, 'x')) == 1000);
  CHECK(estimate_tokens(std::string(4001, 'x')) == 1001);
  CHECK(estimate_tokens("abc") == 1);
}

TEST_CASE("schema_link keeps Y groups and drops N groups") {
  DatabaseCatalog cat = tiny_catalog({"A", "B"});
  auto groups = group_tables({"A", "B"});
  TaskInstance task;
  task.question = "which rows of A matter?";

  auto mock = MockBackend::from_string(
      "{\"when_contains\": [\"-- A\"], \"respond\": \"```json\\n{\\\"answer\\\": \\\"Y\\\", "
      "\\\"columns\\\": [\\\"a\\\"]}\\n```\"}\n"
      "{\"when_contains\": [\"-- B\"], \"respond\": \"```json\\n{\\\"answer\\\": \\\"N\\\"}\\n```\"}\n");
  LlmGateway gw(mock, 3, std::chrono::milliseconds(0));
  CostLedger ledger;

  LinkedSchema linked = schema_link(cat, groups, task, gw, ledger);
  CHECK(linked.kept_tables == std::vector<std::string>{"A"});
  REQUIRE(linked.kept_columns.count("A") == 1);
  CHECK(linked.kept_columns.at("A") == std::vector<std::string>{"a"});
  CHECK(ledger.llm_calls == 2);
}

TEST_CASE("schema_link fails open after two bad replies") {
  DatabaseCatalog cat = tiny_catalog({"C"});
  auto groups = group_tables({"C"});
  TaskInstance task;
  task.question = "anything";

  auto mock = MockBackend::from_string(
      "{\"when_contains\": [], \"respond\": \"garbage\"}\n"
      "{\"when_contains\": [], \"respond\": \"more garbage\"}\n");
  LlmGateway gw(mock, 3, std::chrono::milliseconds(0));
  CostLedger ledger;

  LinkedSchema linked = schema_link(cat, groups, task, gw, ledger);
  CHECK(linked.kept_tables == std::vector<std::string>{"C"});
  CHECK(ledger.llm_calls == 2);  // one retry
  CHECK(mock->remaining() == 0);
}

TEST_CASE("linking soundness under a random-answer mock") {
  std::mt19937 rng(99);
  for (int iter = 0; iter < 25; ++iter) {
    std::vector<std::string> names;
    int n = 1 + static_cast<int>(rng() % 6);
    for (int i = 0; i < n; ++i) names.push_back("TBL" + std::to_string(i));
    DatabaseCatalog cat = tiny_catalog(names);
    auto groups = group_tables(names);

    std::string script;
    for (int i = 0; i < 2 * n; ++i) {
      switch (rng() % 3) {
        case 0: script += "{\"when_contains\": [], \"respond\": \"```json\\n{\\\"answer\\\": \\\"Y\\\"}\\n```\"}\n"; break;
        case 1: script += "{\"when_contains\": [], \"respond\": \"```json\\n{\\\"answer\\\": \\\"N\\\"}\\n```\"}\n"; break;
        default: script += "{\"when_contains\": [], \"respond\": \"junk\"}\n"; break;
      }
    }
    auto mock = MockBackend::from_string(script);
    LlmGateway gw(mock, 3, std::chrono::milliseconds(0));
    CostLedger ledger;
    TaskInstance task;

    LinkedSchema linked = schema_link(cat, groups, task, gw, ledger);
    std::set<std::string> input(names.begin(), names.end());
    std::set<std::string> kept(linked.kept_tables.begin(), linked.kept_tables.end());
    CHECK(kept.size() == linked.kept_tables.size());
    for (const auto& k : kept) CHECK(input.count(k) == 1);
  }
}

TEST_CASE("build_initial_prompt segments and rendering") {
  PromptBundle b = build_initial_prompt("SCHEMA", "", "QUESTION");
  CHECK(b.estimated_tokens == estimate_tokens("SCHEMAQUESTION"));

  std::string rendered = render_prompt(b);
  CHECK(rendered.find("SCHEMA\n\nQUESTION") != std::string::npos);  // blank external segment

  PromptBundle c = build_initial_prompt("S", "EXT", "Q");
  CHECK(c.estimated_tokens == estimate_tokens(std::string("S") + "EXT" + "Q"));
  CHECK(render_prompt(c).find("S\nEXT\nQ") != std::string::npos);
}

TEST_CASE("long-context replica: grouping plus linking lands under the threshold") {
  // 40 tables x 20 columns = 800 columns; padded DDLs push the raw prompt well
  // past 50K estimated tokens.
  std::vector<std::string> names;
  DatabaseCatalog cat;
  cat.db_id = "wide";
  const std::vector<std::string> prefixes = {"ALPHA", "BETA", "GAMMA", "DELTA"};
  for (int g = 0; g < 4; ++g) {
    for (int i = 0; i < 10; ++i) {
      std::string name = prefixes[g] + "_202001" + (i < 9 ? "0" : "") + std::to_string(i + 1);
      std::string ddl = "CREATE TABLE " + name + " (\n";
      for (int c = 0; c < 20; ++c) ddl += "  col_" + std::to_string(c) + " TEXT,\n";
      ddl += "  filler TEXT -- " + std::string(12000, 'p') + "\n)";
      TableInfo t;
      t.name = name;
      t.ddl = ddl;
      finalize_table(t);
      cat.tables.push_back(std::move(t));
      names.push_back(name);
    }
  }

  std::size_t raw = 0;
  for (const auto& t : cat.tables) raw += render_table(t, true).size();
  REQUIRE(estimate_tokens(std::string(raw, 'x')) > kDefaultTokenThreshold);

  auto groups = group_tables(names);
  REQUIRE(groups.size() == 4);

  // Linking keeps one group out of four.
  std::string script;
  script += "{\"when_contains\": [\"ALPHA\"], \"respond\": \"```json\\n{\\\"answer\\\": \\\"Y\\\"}\\n```\"}\n";
  for (const char* g : {"BETA", "GAMMA", "DELTA"}) {
    script += std::string("{\"when_contains\": [\"") + g +
              "\"], \"respond\": \"```json\\n{\\\"answer\\\": \\\"N\\\"}\\n```\"}\n";
  }
  auto mock = MockBackend::from_string(script);
  LlmGateway gw(mock, 3, std::chrono::milliseconds(0));
  CostLedger ledger;
  TaskInstance task;
  task.question = "how many rows in the ALPHA tables?";

  LinkedSchema linked = schema_link(cat, groups, task, gw, ledger);
  std::set<std::string> kept(linked.kept_tables.begin(), linked.kept_tables.end());
  std::vector<TableGroup> kept_groups;
  for (const auto& g : groups) {
    if (kept.count(g.representative)) kept_groups.push_back(g);
  }
  REQUIRE(kept_groups.size() == 1);

  PromptBundle bundle =
      build_initial_prompt(compress_catalog(cat, kept_groups), "", task.question);
  CHECK(bundle.estimated_tokens <= kDefaultTokenThreshold);
}
