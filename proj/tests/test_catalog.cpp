#include "doctest.h"

#include "reforce/catalog.hpp"
#include "test_util.hpp"

using namespace reforce;

namespace {

std::string task_line(const std::string& id, const std::string& question) {
  return "{\"instance_id\": \"" + id + "\", \"db_id\": \"db1\", \"question\": \"" + question +
         "\", \"dialect\": \"sqlite\"}\n";
}

std::string tbl_record(const std::string& name, const std::string& ddl, int sample_rows) {
  std::string samples;
  for (int i = 0; i < sample_rows; ++i) {
    if (i > 0) samples += ", ";
    samples += "{\"a\": \"" + std::to_string(i) + "\", \"b\": \"v" + std::to_string(i) + "\"}";
  }
  return "{\"table_name\": \"" + name + "\", \"ddl\": \"" + ddl + "\", \"sample_rows\": [" +
         samples + "]}";
}

}  // namespace

TEST_CASE("load_tasks keeps file order") {
  TempDir tmp("tasks");
  write_file(tmp.file("tasks.jsonl"),
             task_line("q1", "first") + task_line("q2", "second") + task_line("q3", "third"));
  auto tasks = load_tasks(tmp.file("tasks.jsonl"));
  REQUIRE(tasks.size() == 3);
  CHECK(tasks[0].instance_id == "q1");
  CHECK(tasks[1].question == "second");
  CHECK(tasks[2].instance_id == "q3");
}

TEST_CASE("load_tasks edge cases") {
  TempDir tmp("tasks2");

  SUBCASE("empty file gives empty list") {
    write_file(tmp.file("empty.jsonl"), "");
    CHECK(load_tasks(tmp.file("empty.jsonl")).empty());
  }

  SUBCASE("duplicate instance_id is rejected by name") {
    write_file(tmp.file("dup.jsonl"), task_line("q1", "a") + task_line("q1", "b"));
    CHECK_THROWS_WITH_AS(load_tasks(tmp.file("dup.jsonl")),
                         doctest::Contains("q1"), std::runtime_error);
  }

  SUBCASE("parse error names the line") {
    write_file(tmp.file("bad.jsonl"), task_line("q1", "a") + "not json\n");
    CHECK_THROWS_WITH_AS(load_tasks(tmp.file("bad.jsonl")),
                         doctest::Contains("line 2"), std::runtime_error);
  }

  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_tasks(tmp.file("nope.jsonl")), std::runtime_error);
  }
}

TEST_CASE("load_catalog reads table files and caps sample rows") {
  TempDir tmp("catalog");
  write_file(tmp.file("db1/A.tbl"), tbl_record("A", "CREATE TABLE A(a INT, b TEXT)", 10));
  write_file(tmp.file("db1/B.tbl"), tbl_record("B", "CREATE TABLE B(a INT, b TEXT)", 0));

  DatabaseCatalog cat = load_catalog(tmp.str(), "db1");
  REQUIRE(cat.tables.size() == 2);
  const TableInfo* a = cat.find_table("A");
  REQUIRE(a != nullptr);
  REQUIRE(a->sample_rows.size() == 3);  // first 3 in file order
  CHECK(a->sample_rows[0][0].second == "0");
  CHECK(a->sample_rows[2][0].second == "2");
  CHECK(cat.find_table("B")->sample_rows.empty());

  SUBCASE("missing directory") {
    CHECK_THROWS_WITH_AS(load_catalog(tmp.str(), "db_missing"),
                         doctest::Contains("db_missing"), std::runtime_error);
  }

  SUBCASE("malformed table file names the file") {
    write_file(tmp.file("db2/C.tbl"), "not json");
    CHECK_THROWS_WITH_AS(load_catalog(tmp.str(), "db2"), doctest::Contains("C.tbl"),
                         std::runtime_error);
  }
}

TEST_CASE("render_table") {
  TableInfo t;
  t.name = "GA_SESSIONS_20160801";
  t.ddl = "CREATE TABLE T(a INT)";
  finalize_table(t);

  SUBCASE("short form is exactly the name") {
    std::string s = render_table(t, false);
    CHECK(s == "GA_SESSIONS_20160801");
    CHECK(s.find('\n') == std::string::npos);
  }

  SUBCASE("full form carries the DDL verbatim and matches byte_size") {
    std::string s = render_table(t, true);
    CHECK(s.find("CREATE TABLE T(a INT)") != std::string::npos);
    CHECK(s.size() == t.byte_size);
    CHECK(render_table(t, false).size() < s.size());
  }

  SUBCASE("description and sample rows show up in the full form") {
    t.description = "session table";
    t.sample_rows = {{{"a", "1"}}, {{"a", "2"}}};
    finalize_table(t);
    std::string s = render_table(t, true);
    CHECK(s.find("session table") != std::string::npos);
    CHECK(s.find("Sample rows (2 shown)") != std::string::npos);
    CHECK(s.size() == t.byte_size);
  }
}

TEST_CASE("catalog round-trips through the on-disk format") {
  TempDir tmp("roundtrip");
  DatabaseCatalog cat;
  cat.db_id = "shop";
  TableInfo t1;
  t1.name = "USERS";
  t1.ddl = "CREATE TABLE USERS(id INT, name TEXT)";
  t1.description = "people";
  t1.sample_rows = {{{"id", "1"}, {"name", "Ann"}}, {{"id", "2"}, {"name", "Bo, \"Jr\""}}};
  finalize_table(t1);
  TableInfo t2;
  t2.name = "ORDERS";
  t2.ddl = "CREATE TABLE ORDERS(id INT)";
  finalize_table(t2);
  cat.tables = {t1, t2};

  save_catalog(cat, tmp.str());
  DatabaseCatalog back = load_catalog(tmp.str(), "shop");

  REQUIRE(back.tables.size() == 2);
  for (const auto& orig : cat.tables) {
    const TableInfo* got = back.find_table(orig.name);
    REQUIRE(got != nullptr);
    CHECK(got->ddl == orig.ddl);
    CHECK(got->description == orig.description);
    CHECK(got->sample_rows == orig.sample_rows);
    CHECK(got->byte_size == orig.byte_size);
  }
}

TEST_CASE("dialect parsing") {
  CHECK(dialect_from_string("snowflake") == Dialect::snowflake);
  CHECK(to_string(Dialect::bigquery) == "bigquery");
  CHECK_THROWS_AS(dialect_from_string("oracle"), std::runtime_error);
}
