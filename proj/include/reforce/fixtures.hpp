#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "reforce/catalog.hpp"

namespace reforce {

struct FixtureSpec {
  std::string name;
  std::size_t table_count = 0;
  std::string name_pattern;
  std::size_t row_count = 0;
  std::string mock_script;          // path relative to the fixture root
  std::string expected_provenance;  // empty for non-task fixtures
  bool expected_correct = false;
};

// 366 GA_SESSIONS_YYYYMMDD tables sharing one schema, each DDL padded to
// exactly ddl_bytes. In-memory variant of the ga_replica fixture.
DatabaseCatalog make_ga_replica_catalog(std::size_t ddl_bytes = 150000);

// Writes the full desk-scale fixture tree (ga_replica catalog, mini8 tasks +
// databases + gold + mock script, nested_demo) under out_dir and returns the
// manifest path. Byte-stable for a fixed seed.
std::string generate_fixtures(const std::string& out_dir, std::uint64_t seed);

}  // namespace reforce
