#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "reforce/executor.hpp"
#include "reforce/refinement.hpp"

namespace reforce {

struct VoteBucket {
  Fingerprint fp;
  std::vector<std::size_t> members;  // candidate indices, ascending
};

struct VoteTally {
  std::vector<VoteBucket> buckets;  // first-appearance order
  std::size_t valid_count = 0;
};

enum class ConsensusLabel { high, low, all_failed };

std::string to_string(ConsensusLabel label);

struct ConsensusPartition {
  ConsensusLabel label = ConsensusLabel::all_failed;
  std::optional<std::size_t> winner;  // lowest index in the winning bucket
  std::vector<Fingerprint> tied;      // buckets at max count
};

// Only status==ok candidates vote.
VoteTally tally(const std::vector<SqlCandidate>& candidates);

ConsensusPartition partition(const VoteTally& t);

// Stable (platform-independent) seed derivation for one example.
std::uint64_t selection_seed(std::uint64_t run_seed, const std::string& instance_id);

// Uniform over the best available stratum (ok > empty > error). Empty input
// yields nullopt; the pipeline turns that into a null answer.
std::optional<std::size_t> random_select(const std::vector<SqlCandidate>& candidates,
                                         std::uint64_t rng_seed);

}  // namespace reforce
