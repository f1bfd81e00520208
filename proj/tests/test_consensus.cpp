#include "doctest.h"

#include <algorithm>
#include <map>
#include <random>

#include "reforce/consensus.hpp"
#include "test_util.hpp"

using namespace reforce;

namespace {

// Candidates whose fingerprints are driven by a single-letter payload.
SqlCandidate cand(char letter, ExecStatus status = ExecStatus::ok) {
  SqlCandidate c;
  c.result.status = status;
  if (status == ExecStatus::ok) {
    c.result.columns = {"v"};
    c.result.rows = {{std::string(1, letter)}};
  } else if (status == ExecStatus::error) {
    c.result.error_msg = "boom";
  }
  return c;
}

std::vector<SqlCandidate> cands(const std::string& letters) {
  std::vector<SqlCandidate> out;
  for (char c : letters) out.push_back(cand(c));
  return out;
}

// Independent argmax-uniqueness oracle over the payload letters.
std::string oracle_label(const std::string& letters) {
  if (letters.empty()) return "all_failed";
  std::map<char, int> counts;
  for (char c : letters) counts[c]++;
  int best = 0, at_best = 0;
  for (const auto& [letter, n] : counts) {
    if (n > best) {
      best = n;
      at_best = 1;
    } else if (n == best) {
      ++at_best;
    }
  }
  return at_best == 1 ? "high" : "low";
}

char oracle_winner(const std::string& letters) {
  std::map<char, int> counts;
  for (char c : letters) counts[c]++;
  char best_letter = 0;
  int best = -1;
  for (const auto& [letter, n] : counts) {
    if (n > best) {
      best = n;
      best_letter = letter;
    }
  }
  return best_letter;
}

}  // namespace

TEST_CASE("tally buckets by fingerprint and skips failures") {
  SUBCASE("A A B") {
    VoteTally t = tally(cands("AAB"));
    CHECK(t.valid_count == 3);
    REQUIRE(t.buckets.size() == 2);
    CHECK(t.buckets[0].members == std::vector<std::size_t>{0, 1});
    CHECK(t.buckets[1].members == std::vector<std::size_t>{2});
  }

  SUBCASE("failed candidates do not vote") {
    std::vector<SqlCandidate> cs = {cand('A'), cand('X', ExecStatus::error),
                                    cand('Y', ExecStatus::empty)};
    VoteTally t = tally(cs);
    CHECK(t.valid_count == 1);
    REQUIRE(t.buckets.size() == 1);
    CHECK(t.buckets[0].members == std::vector<std::size_t>{0});
  }

  SUBCASE("empty input") {
    VoteTally t = tally({});
    CHECK(t.valid_count == 0);
    CHECK(t.buckets.empty());
  }
}

TEST_CASE("partition follows unique-max semantics") {
  SUBCASE("2-1 is high confidence") {
    ConsensusPartition p = partition(tally(cands("AAB")));
    CHECK(p.label == ConsensusLabel::high);
    REQUIRE(p.winner.has_value());
    CHECK(*p.winner == 0);  // lowest index in the winning bucket
    CHECK(p.tied.size() == 1);
  }

  SUBCASE("2-2 is a tie") {
    ConsensusPartition p = partition(tally(cands("AABB")));
    CHECK(p.label == ConsensusLabel::low);
    CHECK_FALSE(p.winner.has_value());
    CHECK(p.tied.size() == 2);
  }

  SUBCASE("a single candidate is trivially high") {
    ConsensusPartition p = partition(tally(cands("A")));
    CHECK(p.label == ConsensusLabel::high);
    CHECK(*p.winner == 0);
  }

  SUBCASE("no valid candidates") {
    std::vector<SqlCandidate> cs = {cand('X', ExecStatus::error)};
    CHECK(partition(tally(cs)).label == ConsensusLabel::all_failed);
  }
}

TEST_CASE("exhaustive oracle equivalence, all multisets of size <= 6 over 3 letters") {
  const std::string alphabet = "ABC";
  std::size_t checked = 0;
  for (int len = 0; len <= 6; ++len) {
    std::vector<int> idx(len, 0);
    for (;;) {
      std::string letters;
      for (int i : idx) letters += alphabet[i];

      ConsensusPartition p = partition(tally(cands(letters)));
      CHECK(to_string(p.label) == oracle_label(letters));
      if (p.label == ConsensusLabel::high) {
        // Winner's payload must match the oracle's argmax letter.
        CHECK(letters[*p.winner] == oracle_winner(letters));
      }
      ++checked;

      int pos = len - 1;
      while (pos >= 0 && idx[pos] == 2) idx[pos--] = 0;
      if (pos < 0) break;
      ++idx[pos];
    }
  }
  CHECK(checked == 1093);  // sum of 3^n for n = 0..6
}

TEST_CASE("permutation invariance of the label and winning fingerprint") {
  std::mt19937 rng(5150);
  for (int iter = 0; iter < 200; ++iter) {
    int len = 1 + static_cast<int>(rng() % 6);
    std::string letters;
    for (int i = 0; i < len; ++i) letters += static_cast<char>('A' + rng() % 3);

    ConsensusPartition base = partition(tally(cands(letters)));
    std::string shuffled = letters;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    ConsensusPartition perm = partition(tally(cands(shuffled)));

    CHECK(base.label == perm.label);
    if (base.label == ConsensusLabel::high) {
      CHECK(letters[*base.winner] == shuffled[*perm.winner]);
    }
    auto tied_digests = [](const ConsensusPartition& p) {
      std::vector<std::string> d;
      for (const auto& fp : p.tied) d.push_back(fp.digest);
      std::sort(d.begin(), d.end());
      return d;
    };
    CHECK(tied_digests(base) == tied_digests(perm));
  }
}

TEST_CASE("random_select determinism and strata") {
  SUBCASE("single candidate") {
    auto idx = random_select(cands("A"), 1);
    REQUIRE(idx.has_value());
    CHECK(*idx == 0);
  }

  SUBCASE("fixed seed, fixed choice") {
    auto first = random_select(cands("ABCD"), selection_seed(42, "q9"));
    for (int i = 0; i < 10; ++i) {
      CHECK(random_select(cands("ABCD"), selection_seed(42, "q9")) == first);
    }
  }

  SUBCASE("ok candidates shadow failed ones") {
    std::vector<SqlCandidate> cs = {cand('X', ExecStatus::error), cand('A'),
                                    cand('Y', ExecStatus::error), cand('B')};
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      auto idx = random_select(cs, seed);
      REQUIRE(idx.has_value());
      CHECK((*idx == 1 || *idx == 3));
    }
  }

  SUBCASE("empty beats error when nothing succeeded") {
    std::vector<SqlCandidate> cs = {cand('X', ExecStatus::error), cand('Y', ExecStatus::empty)};
    auto idx = random_select(cs, 7);
    REQUIRE(idx.has_value());
    CHECK(*idx == 1);
  }

  SUBCASE("empty input is a selection error") {
    CHECK_FALSE(random_select({}, 7).has_value());
  }
}

TEST_CASE("selection_seed differs per instance and per run seed") {
  CHECK(selection_seed(7, "a") != selection_seed(7, "b"));
  CHECK(selection_seed(7, "a") != selection_seed(8, "a"));
  CHECK(selection_seed(7, "a") == selection_seed(7, "a"));
}
