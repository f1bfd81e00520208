#include "reforce/consensus.hpp"

#include <algorithm>
#include <map>
#include <random>

namespace reforce {

std::string to_string(ConsensusLabel label) {
  switch (label) {
    case ConsensusLabel::high: return "high";
    case ConsensusLabel::low: return "low";
    case ConsensusLabel::all_failed: return "all_failed";
  }
  return "all_failed";
}

VoteTally tally(const std::vector<SqlCandidate>& candidates) {
  VoteTally t;
  std::map<std::string, std::size_t> bucket_index;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i].result.status != ExecStatus::ok) continue;
    Fingerprint fp = fingerprint(candidates[i].result);
    auto it = bucket_index.find(fp.digest);
    if (it == bucket_index.end()) {
      bucket_index[fp.digest] = t.buckets.size();
      t.buckets.push_back(VoteBucket{fp, {i}});
    } else {
      t.buckets[it->second].members.push_back(i);
    }
    ++t.valid_count;
  }
  return t;
}

ConsensusPartition partition(const VoteTally& t) {
  ConsensusPartition p;
  if (t.valid_count == 0) {
    p.label = ConsensusLabel::all_failed;
    return p;
  }
  std::size_t max_count = 0;
  for (const auto& b : t.buckets) max_count = std::max(max_count, b.members.size());

  for (const auto& b : t.buckets) {
    if (b.members.size() == max_count) p.tied.push_back(b.fp);
  }
  if (p.tied.size() == 1) {
    p.label = ConsensusLabel::high;
    for (const auto& b : t.buckets) {
      if (b.members.size() == max_count) {
        p.winner = b.members.front();
        break;
      }
    }
  } else {
    p.label = ConsensusLabel::low;
  }
  return p;
}

std::uint64_t selection_seed(std::uint64_t run_seed, const std::string& instance_id) {
  // FNV-1a over the id, mixed with the run seed; stable across platforms.
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : instance_id) {
    h ^= c;
    h *= 1099511628211ull;
  }
  h ^= run_seed + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
  return h;
}

std::optional<std::size_t> random_select(const std::vector<SqlCandidate>& candidates,
                                         std::uint64_t rng_seed) {
  if (candidates.empty()) return std::nullopt;

  auto pick_stratum = [&](ExecStatus status) {
    std::vector<std::size_t> stratum;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      if (candidates[i].result.status == status) stratum.push_back(i);
    }
    return stratum;
  };

  std::vector<std::size_t> stratum = pick_stratum(ExecStatus::ok);
  if (stratum.empty()) stratum = pick_stratum(ExecStatus::empty);
  if (stratum.empty()) stratum = pick_stratum(ExecStatus::error);

  std::mt19937_64 rng(rng_seed);
  std::uniform_int_distribution<std::size_t> dist(0, stratum.size() - 1);
  return stratum[dist(rng)];
}

}  // namespace reforce
