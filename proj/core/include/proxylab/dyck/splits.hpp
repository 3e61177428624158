#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "proxylab/dyck/dyck.hpp"

namespace proxylab::dyck {

inline constexpr const char* kTrain = "train";
inline constexpr const char* kIid = "iid";
inline constexpr const char* kSeenStruct = "seen_struct";
inline constexpr const char* kUnseenStructShort = "unseen_struct_short";
inline constexpr const char* kUnseenStructLong = "unseen_struct_long";
inline constexpr const char* kUnseenDepth = "unseen_depth";

/// All split names in bundle order.
const std::vector<std::string>& split_names();

struct SplitSizes {
  std::size_t train = 200000;
  std::size_t iid = 20000;
  std::size_t seen_struct = 20000;
  std::size_t unseen_struct_short = 20000;
  std::size_t unseen_struct_long = 20000;
  std::size_t unseen_depth = 20000;

  std::size_t of(const std::string& split) const;
};

struct SplitProvenance {
  DyckSpec spec;  ///< the distribution actually sampled (2m for unseen_depth)
  std::uint64_t seed = 0;
  std::size_t attempts = 0;
  /// Rejection reason -> count.
  std::map<std::string, std::size_t> rejections;
};

struct Dataset {
  std::string name;
  int bracket_types = 0;
  std::vector<DyckSample> samples;
  SplitProvenance provenance;
};

struct SplitBundle {
  DyckSpec spec;
  std::uint64_t seed = 0;
  std::vector<Dataset> datasets;

  const Dataset& get(const std::string& name) const;
  bool has(const std::string& name) const;
};

struct SplitOptions {
  /// A split gives up after max(min_attempts, factor * size) draws.
  double attempt_factor = 2000.0;
  std::size_t min_attempts = 1000000;
  /// Length threshold (BOS/EOS included) between the two unseen-structure splits.
  int short_max_len = 32;
};

class SplitStarved : public std::runtime_error {
 public:
  SplitStarved(const std::string& split, std::size_t attempts, std::size_t have,
               std::size_t want);
  const std::string& split() const { return split_; }

 private:
  std::string split_;
};

/// Builds every split. Each split draws from its own stream
/// derive_seed(seed, name); both unseen-structure splits share the stream
/// "unseen_struct" and are partitioned by length. Evaluation splits are
/// deduplicated against Train by exact token sequence.
SplitBundle build_splits(const DyckSpec& spec, const SplitSizes& sizes, std::uint64_t seed,
                         const SplitOptions& options = {});

/// Checks the set relations between splits: seen_struct structures are
/// train structures; unseen-structure splits share none with train;
/// unseen_depth sentences exceed the train depth bound; iid shares no
/// sentence with train. Returns one message per violated relation.
std::vector<std::string> integrity_violations(const SplitBundle& bundle);

/// Catalan(n), the number of balanced O/C strings with n pairs.
std::uint64_t catalan(unsigned n);

}  // namespace proxylab::dyck
