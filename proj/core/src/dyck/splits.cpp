#include "proxylab/dyck/splits.hpp"

#include <algorithm>
#include <functional>
#include <set>
#include <unordered_set>

namespace proxylab::dyck {
namespace {

struct TokenHash {
  std::size_t operator()(const std::vector<Token>& v) const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (Token t : v) {
      h ^= static_cast<std::uint64_t>(t);
      h *= 0x100000001b3ULL;
    }
    return static_cast<std::size_t>(h);
  }
};

using SentenceSet = std::unordered_set<std::vector<Token>, TokenHash>;
using StructureSet = std::unordered_set<std::string>;

std::size_t attempt_cap(const SplitOptions& o, std::size_t want) {
  const auto scaled = static_cast<std::size_t>(o.attempt_factor * static_cast<double>(want));
  return std::max(o.min_attempts, scaled);
}

/// Draws until `accept` has filled the dataset. `accept` returns an empty
/// string to keep the sample, otherwise the rejection reason.
Dataset fill(const std::string& name, const DyckSpec& spec, std::uint64_t seed, std::size_t want,
             const SplitOptions& options,
             const std::function<std::string(const DyckSample&)>& accept) {
  Dataset ds;
  ds.name = name;
  ds.bracket_types = spec.bracket_types;
  ds.provenance.spec = spec;
  ds.provenance.seed = seed;
  Rng rng(seed);
  const std::size_t cap = attempt_cap(options, want);
  while (ds.samples.size() < want) {
    if (ds.provenance.attempts >= cap) {
      throw SplitStarved(name, ds.provenance.attempts, ds.samples.size(), want);
    }
    ++ds.provenance.attempts;
    DyckSample s = sample_sentence(spec, rng);
    const std::string reason = accept(s);
    if (reason.empty()) {
      ds.samples.push_back(std::move(s));
    } else {
      ++ds.provenance.rejections[reason];
    }
  }
  return ds;
}

}  // namespace

const std::vector<std::string>& split_names() {
  static const std::vector<std::string> names = {kTrain,           kIid,
                                                 kSeenStruct,      kUnseenStructShort,
                                                 kUnseenStructLong, kUnseenDepth};
  return names;
}

std::size_t SplitSizes::of(const std::string& split) const {
  if (split == kTrain) return train;
  if (split == kIid) return iid;
  if (split == kSeenStruct) return seen_struct;
  if (split == kUnseenStructShort) return unseen_struct_short;
  if (split == kUnseenStructLong) return unseen_struct_long;
  if (split == kUnseenDepth) return unseen_depth;
  throw std::invalid_argument("unknown split '" + split + "'");
}

SplitStarved::SplitStarved(const std::string& split, std::size_t attempts, std::size_t have,
                           std::size_t want)
    : std::runtime_error("split '" + split + "' starved: " + std::to_string(have) + " of " +
                         std::to_string(want) + " samples after " + std::to_string(attempts) +
                         " attempts"),
      split_(split) {}

const Dataset& SplitBundle::get(const std::string& name) const {
  for (const auto& d : datasets) {
    if (d.name == name) return d;
  }
  throw std::out_of_range("bundle has no split '" + name + "'");
}

bool SplitBundle::has(const std::string& name) const {
  return std::any_of(datasets.begin(), datasets.end(),
                     [&](const Dataset& d) { return d.name == name; });
}

SplitBundle build_splits(const DyckSpec& spec, const SplitSizes& sizes, std::uint64_t seed,
                         const SplitOptions& options) {
  spec.validate();
  SplitBundle bundle;
  bundle.spec = spec;
  bundle.seed = seed;

  Dataset train = fill(kTrain, spec, derive_seed(seed, kTrain), sizes.train, options,
                       [](const DyckSample&) { return std::string(); });
  SentenceSet seen_sentences;
  StructureSet seen_structures;
  for (const auto& s : train.samples) {
    seen_sentences.insert(s.tokens);
    seen_structures.insert(s.structure);
  }
  bundle.datasets.push_back(std::move(train));

  bundle.datasets.push_back(fill(kIid, spec, derive_seed(seed, kIid), sizes.iid, options,
                                 [&](const DyckSample& s) -> std::string {
                                   if (seen_sentences.count(s.tokens)) return "seen_sentence";
                                   return {};
                                 }));

  bundle.datasets.push_back(
      fill(kSeenStruct, spec, derive_seed(seed, kSeenStruct), sizes.seen_struct, options,
           [&](const DyckSample& s) -> std::string {
             if (seen_sentences.count(s.tokens)) return "seen_sentence";
             if (!seen_structures.count(s.structure)) return "unseen_structure";
             return {};
           }));

  // Both unseen-structure splits come from one stream, partitioned by length.
  {
    const std::uint64_t stream = derive_seed(seed, "unseen_struct");
    Dataset shorter, longer;
    shorter.name = kUnseenStructShort;
    longer.name = kUnseenStructLong;
    for (Dataset* d : {&shorter, &longer}) {
      d->bracket_types = spec.bracket_types;
      d->provenance.spec = spec;
      d->provenance.seed = stream;
    }
    const std::size_t want_short = sizes.unseen_struct_short;
    const std::size_t want_long = sizes.unseen_struct_long;
    const std::size_t cap = attempt_cap(options, want_short + want_long);
    Rng rng(stream);
    std::size_t attempts = 0;
    std::map<std::string, std::size_t> rejections;
    while (shorter.samples.size() < want_short || longer.samples.size() < want_long) {
      if (attempts >= cap) {
        const bool short_starved = shorter.samples.size() < want_short;
        const Dataset& starving = short_starved ? shorter : longer;
        throw SplitStarved(starving.name, attempts, starving.samples.size(),
                           short_starved ? want_short : want_long);
      }
      ++attempts;
      DyckSample s = sample_sentence(spec, rng);
      if (seen_structures.count(s.structure)) {
        ++rejections["seen_structure"];
        continue;
      }
      const bool is_short = static_cast<int>(s.length()) <= options.short_max_len;
      Dataset& target = is_short ? shorter : longer;
      if (target.samples.size() >= (is_short ? want_short : want_long)) {
        ++rejections[is_short ? "short_partition_full" : "long_partition_full"];
        continue;
      }
      target.samples.push_back(std::move(s));
    }
    for (Dataset* d : {&shorter, &longer}) {
      d->provenance.attempts = attempts;
      d->provenance.rejections = rejections;
    }
    bundle.datasets.push_back(std::move(shorter));
    bundle.datasets.push_back(std::move(longer));
  }

  DyckSpec deep = spec;
  deep.max_depth = 2 * spec.max_depth;
  bundle.datasets.push_back(fill(kUnseenDepth, deep, derive_seed(seed, kUnseenDepth),
                                 sizes.unseen_depth, options,
                                 [&](const DyckSample& s) -> std::string {
                                   if (s.max_depth() <= spec.max_depth) return "too_shallow";
                                   if (seen_sentences.count(s.tokens)) return "seen_sentence";
                                   return {};
                                 }));
  return bundle;
}

std::vector<std::string> integrity_violations(const SplitBundle& bundle) {
  std::vector<std::string> out;
  if (!bundle.has(kTrain)) return {"bundle has no train split"};
  SentenceSet sentences;
  StructureSet structures;
  for (const auto& s : bundle.get(kTrain).samples) {
    sentences.insert(s.tokens);
    structures.insert(s.structure);
  }
  auto count_if = [&](const char* split, auto&& bad) {
    if (!bundle.has(split)) return std::size_t{0};
    const auto& ss = bundle.get(split).samples;
    return static_cast<std::size_t>(std::count_if(ss.begin(), ss.end(), bad));
  };
  auto report = [&](std::size_t n, const std::string& what) {
    if (n) out.push_back(std::to_string(n) + " " + what);
  };
  report(count_if(kSeenStruct, [&](const DyckSample& s) { return !structures.count(s.structure); }),
         "seen_struct sentences have a structure absent from train");
  for (const char* split : {kUnseenStructShort, kUnseenStructLong}) {
    report(count_if(split, [&](const DyckSample& s) { return structures.count(s.structure) > 0; }),
           std::string(split) + " sentences have a train structure");
  }
  report(count_if(kUnseenDepth,
                  [&](const DyckSample& s) { return s.max_depth() <= bundle.spec.max_depth; }),
         "unseen_depth sentences are within the train depth bound");
  report(count_if(kIid, [&](const DyckSample& s) { return sentences.count(s.tokens) > 0; }),
         "iid sentences also occur in train");
  return out;
}

std::uint64_t catalan(unsigned n) {
  // C(i+1) = C(i) * 2(2i+1) / (i+2), exact with a 128-bit intermediate.
  if (n > 35) throw std::overflow_error("catalan: n too large for 64 bits");
  __extension__ using Wide = unsigned __int128;
  Wide c = 1;
  for (unsigned i = 0; i < n; ++i) {
    c = c * 2 * (2 * i + 1) / (i + 2);
  }
  return static_cast<std::uint64_t>(c);
}

}  // namespace proxylab::dyck
