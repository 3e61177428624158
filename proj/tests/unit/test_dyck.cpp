#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "oracles.hpp"
#include "proxylab/dyck/dataset_io.hpp"
#include "proxylab/dyck/dyck.hpp"
#include "proxylab/dyck/splits.hpp"

namespace proxylab::dyck {
namespace {

namespace fs = std::filesystem;
using testing::explicit_stack_opener;
using testing::stack_check;

std::vector<Token> sentence(const char* text, int k = 4) { return parse_sentence(text, k); }

// ---- structure ----

TEST(Structure, ExamplesFromTheDefinition) {
  EXPECT_EQ(structure_of(sentence("([])[]"), 4), "OOCCOC");
  EXPECT_EQ(structure_of(sentence("[[]()]"), 4), "OOCOCC");
  EXPECT_EQ(structure_of(sentence(""), 4), "");
  EXPECT_EQ(structure_of(std::vector<Token>{}, 4), "");
}

TEST(Structure, RejectsInteriorSpecials) {
  std::vector<Token> t{kBos, 1, kBos, 2};
  EXPECT_THROW(structure_of(t, 4), std::invalid_argument);
  std::vector<Token> eos_inside{kBos, 1, 9, 2, 9};
  EXPECT_THROW(structure_of(eos_inside, 4), std::invalid_argument);
}

// ---- depths and matches ----

TEST(Depths, TableExample) {
  const auto t = parse_brackets("[[]()]");
  const auto info = depths_and_matches(t, 4);
  EXPECT_EQ(info.token_depths, (std::vector<int>{1, 2, 2, 2, 2, 1}));
  EXPECT_EQ(info.prefix_depths, (std::vector<int>{1, 2, 1, 2, 1, 0}));
}

TEST(Depths, SinglePair) {
  const auto info = depths_and_matches(parse_brackets("()"), 4);
  EXPECT_EQ(info.prefix_depths, (std::vector<int>{1, 0}));
  EXPECT_EQ(info.match_index[1], 0);
  EXPECT_EQ(info.match_index[0], 1);
}

TEST(Depths, HandStackCount) {
  const auto info = depths_and_matches(parse_brackets("{}{}({{}})"), 4);
  EXPECT_EQ(info.token_depths, (std::vector<int>{1, 1, 1, 1, 1, 2, 3, 3, 2, 1}));
}

TEST(Depths, SpecialsAreDepthNeutral) {
  const auto s = annotate(sentence("(())"), 4);
  EXPECT_EQ(s.token_depths.front(), 0);
  EXPECT_EQ(s.token_depths.back(), 0);
  EXPECT_EQ(s.match_index.front(), -1);
  EXPECT_EQ(s.match_index.back(), -1);
  EXPECT_EQ(s.max_depth(), 2);
}

TEST(Depths, UnbalancedReportsFirstViolation) {
  auto expect_violation = [](const char* text, std::size_t at) {
    try {
      depths_and_matches(parse_brackets(text), 4);
      FAIL() << text << " accepted";
    } catch (const UnbalancedError& e) {
      EXPECT_EQ(e.position(), at) << text;
    }
  };
  expect_violation("())", 2);
  expect_violation("(]", 1);
  expect_violation("(()", 0);  // the opener that is never closed
  expect_violation(")", 0);
}

// ---- most recent unmatched opener ----

TEST(MostRecentUnmatchedOpener, Examples) {
  const auto t = parse_brackets("(()");
  EXPECT_EQ(most_recent_unmatched_opener(t, 2, 4), std::optional<std::size_t>(1));
  const auto pair = parse_brackets("()");
  EXPECT_EQ(most_recent_unmatched_opener(pair, 0, 4), std::optional<std::size_t>(0));
  EXPECT_EQ(most_recent_unmatched_opener(pair, 1, 4), std::optional<std::size_t>(0));
  const auto s = sentence("()");
  EXPECT_EQ(most_recent_unmatched_opener(s, 0, 4), std::nullopt);
  EXPECT_EQ(most_recent_unmatched_opener(s, 3, 4), std::nullopt);
}

TEST(MostRecentUnmatchedOpener, AgreesWithExplicitStackOn10kCases) {
  const DyckSpec spec{5, 6, 80};
  Rng rng(123);
  std::size_t cases = 0;
  while (cases < 10000) {
    const auto s = sample_sentence(spec, rng);
    for (std::size_t i = 1; i + 1 < s.tokens.size() && cases < 10000; ++i, ++cases) {
      const auto got = most_recent_unmatched_opener(s.tokens, i, spec.bracket_types);
      const auto want = explicit_stack_opener(s.tokens, i, spec.bracket_types);
      ASSERT_EQ(got, want) << "position " << i;
      // definition: its prefix depth equals the query's token depth
      ASSERT_TRUE(got.has_value());
      EXPECT_EQ(s.prefix_depths[*got], s.token_depths[i]);
    }
  }
}

// ---- legal continuations ----

TEST(LegalNext, Examples) {
  const DyckSpec spec{4, 4, 32};
  const auto top = legal_next(spec, parse_brackets("(["));
  ASSERT_TRUE(top.closer.has_value());
  EXPECT_EQ(*top.closer, closer_of_type(2));
  EXPECT_FALSE(top.eos);
  const auto empty = legal_next(spec, std::vector<Token>{kBos});
  EXPECT_FALSE(empty.closer.has_value());
  EXPECT_TRUE(empty.eos);
  EXPECT_EQ(empty.openers.size(), 4u);
  const auto full = legal_next(spec, parse_brackets("(((("));
  EXPECT_TRUE(full.openers.empty());
  EXPECT_THROW(legal_next(spec, parse_brackets("(]")), UnbalancedError);
}

TEST(LegalNext, RespectsLengthBudget) {
  // BOS ( [ ... : 3 tokens used, 2 closers + EOS still owed; max_len 6 has no room to open.
  const DyckSpec spec{4, 4, 6};
  const auto r = legal_next(spec, std::vector<Token>{kBos, 1, 3});
  EXPECT_TRUE(r.openers.empty());
  ASSERT_TRUE(r.closer);
  EXPECT_EQ(*r.closer, 4);
}

TEST(LegalNext, CloserMatchesStackTopOnRandomPrefixes) {
  const DyckSpec spec{6, 5, 100};
  Rng rng(9);
  for (int n = 0; n < 500; ++n) {
    const auto s = sample_sentence(spec, rng);
    const std::size_t cut = 1 + rng.below(s.tokens.size() - 1);
    const std::vector<Token> prefix(s.tokens.begin(), s.tokens.begin() + static_cast<std::ptrdiff_t>(cut));
    const auto r = legal_next(spec, prefix);
    std::vector<Token> stack;
    for (std::size_t i = 1; i < prefix.size(); ++i) {
      if (prefix[i] % 2 == 1) stack.push_back(prefix[i]);
      else stack.pop_back();
    }
    if (stack.empty()) {
      EXPECT_FALSE(r.closer);
      EXPECT_TRUE(r.eos);
    } else {
      ASSERT_TRUE(r.closer);
      EXPECT_EQ(*r.closer, stack.back() + 1);
      EXPECT_FALSE(r.eos);
    }
    // the continuation the sampler actually took is legal
    const Token next = s.tokens[cut];
    const bool legal = (r.closer && *r.closer == next) || (r.eos && next == spec.eos()) ||
                       std::find(r.openers.begin(), r.openers.end(), next) != r.openers.end();
    EXPECT_TRUE(legal);
  }
}

// ---- sampler ----

TEST(Sampler, SoundAgainstStackOracle) {
  const DyckSpec spec{20, 10, 512};
  Rng rng(1);
  for (int i = 0; i < 5000; ++i) {
    const auto s = sample_sentence(spec, rng);
    const auto check = stack_check(s.tokens, spec.bracket_types);
    ASSERT_TRUE(check.balanced);
    ASSERT_LE(check.max_depth, spec.max_depth);
    ASSERT_LE(s.length(), 512u);
    ASSERT_EQ(s.tokens.front(), kBos);
    ASSERT_EQ(s.tokens.back(), spec.eos());
    ASSERT_GE(s.length(), 4u);
    ASSERT_EQ(s.max_depth(), check.max_depth);
  }
}

TEST(Sampler, TinySpecEnumeratesBothSentences) {
  // Depth-1 strings with at most 4 brackets: "()" and "()()".
  const DyckSpec spec{1, 1, 6};
  Rng rng(5);
  std::set<std::string> seen;
  for (int i = 0; i < 2000; ++i) seen.insert(render(sample_sentence(spec, rng).tokens, 1));
  EXPECT_EQ(seen, (std::set<std::string>{"()", "()()"}));
}

TEST(Sampler, AnnotationsAreConsistent) {
  const DyckSpec spec{3, 4, 64};
  Rng rng(8);
  for (int i = 0; i < 1000; ++i) {
    const auto s = sample_sentence(spec, rng);
    const auto again = annotate(s.tokens, 3);
    EXPECT_EQ(s.prefix_depths, again.prefix_depths);
    EXPECT_EQ(s.token_depths, again.token_depths);
    EXPECT_EQ(s.match_index, again.match_index);
    EXPECT_EQ(s.structure, structure_of(s.tokens, 3));
    EXPECT_EQ(s.prefix_depths.back(), 0);
    for (std::size_t p = 1; p + 1 < s.tokens.size(); ++p) {
      EXPECT_GE(s.prefix_depths[p], 0);
      if (is_closer(s.tokens[p], 3)) {
        const auto j = static_cast<std::size_t>(s.match_index[p]);
        EXPECT_EQ(s.token_depths[p], s.token_depths[j]);
        EXPECT_EQ(s.token_depths[j], s.prefix_depths[j]);
        // matching brackets are an odd number of positions apart
        EXPECT_EQ((p - j) % 2, 1u);
        // depth parity follows the opener's position parity among brackets
        EXPECT_EQ(s.token_depths[j] % 2, static_cast<int>(j % 2));
      }
    }
  }
}

TEST(Sampler, DeterministicGivenSeed) {
  const DyckSpec spec{20, 10, 512};
  Rng a(77), b(77);
  for (int i = 0; i < 200; ++i) EXPECT_EQ(sample_sentence(spec, a).tokens, sample_sentence(spec, b).tokens);
}

// ---- eval positions ----

TEST(EvalPositions, Examples) {
  EXPECT_TRUE(closing_eval_positions(annotate(sentence("()"), 4), 10).empty());
  const auto s = annotate(sentence("([][][][][])"), 4);
  EXPECT_EQ(closing_eval_positions(s, 10), (std::vector<std::size_t>{12}));
  EXPECT_EQ(closing_eval_positions(s, 0), (std::vector<std::size_t>{3, 5, 7, 9, 11, 12}));
  EXPECT_EQ(closing_eval_positions(s, 11), (std::vector<std::size_t>{12}));
  EXPECT_TRUE(closing_eval_positions(s, 12).empty());
}

// ---- render / parse ----

TEST(Render, RoundTripAndWideAlphabet) {
  const auto t = parse_brackets("<{[()]}>");
  EXPECT_EQ(render(t, 4), "<{[()]}>");
  const std::vector<Token> wide{kBos, 39, 40, 41};
  EXPECT_EQ(render(wide, 20), "(20 20)");
  EXPECT_THROW(parse_brackets("(x)"), std::invalid_argument);
}

// ---- splits ----

SplitSizes small_sizes() {
  SplitSizes s;
  s.train = 3000;
  s.iid = 300;
  s.seen_struct = 300;
  s.unseen_struct_short = 200;
  s.unseen_struct_long = 200;
  s.unseen_depth = 200;
  return s;
}

const SplitBundle& small_bundle() {
  static const SplitBundle b = build_splits(DyckSpec{20, 10, 512}, small_sizes(), 4);
  return b;
}

TEST(Splits, SetRelationsHold) {
  const auto& b = small_bundle();
  std::set<std::vector<Token>> train_sentences;
  std::set<std::string> train_structures;
  for (const auto& s : b.get(kTrain).samples) {
    train_sentences.insert(s.tokens);
    train_structures.insert(s.structure);
  }
  for (const auto& s : b.get(kSeenStruct).samples) {
    EXPECT_TRUE(train_structures.count(s.structure));
    EXPECT_FALSE(train_sentences.count(s.tokens));
  }
  for (const char* name : {kUnseenStructShort, kUnseenStructLong}) {
    for (const auto& s : b.get(name).samples) EXPECT_FALSE(train_structures.count(s.structure));
  }
  for (const auto& s : b.get(kUnseenStructShort).samples) EXPECT_LE(s.length(), 32u);
  for (const auto& s : b.get(kUnseenStructLong).samples) EXPECT_GT(s.length(), 32u);
  for (const auto& s : b.get(kUnseenDepth).samples) {
    EXPECT_GT(stack_check(s.tokens, 20).max_depth, 10);
    EXPECT_LE(s.length(), 512u);
  }
  for (const auto& d : b.datasets) {
    if (d.name == kTrain) continue;
    for (const auto& s : d.samples) EXPECT_FALSE(train_sentences.count(s.tokens)) << d.name;
  }
  for (const auto& d : b.datasets) {
    EXPECT_EQ(d.samples.size(), small_sizes().of(d.name)) << d.name;
    for (const auto& s : d.samples) ASSERT_TRUE(stack_check(s.tokens, 20).balanced);
  }
  EXPECT_TRUE(integrity_violations(b).empty());
  EXPECT_EQ(b.get(kUnseenDepth).provenance.spec.max_depth, 20);
}

TEST(Splits, IntegrityCheckCatchesTampering) {
  SplitBundle b = small_bundle();
  auto& iid = const_cast<Dataset&>(b.get(kIid));
  iid.samples.push_back(b.get(kTrain).samples.front());
  auto& deep = const_cast<Dataset&>(b.get(kUnseenDepth));
  deep.samples.push_back(b.get(kTrain).samples.front());
  EXPECT_EQ(integrity_violations(b).size(), 2u);
}

TEST(Splits, TableScaleSpec) {
  SplitSizes s;
  s.train = 200;
  s.iid = 10;
  s.seen_struct = 10;
  s.unseen_struct_short = 5;
  s.unseen_struct_long = 5;
  s.unseen_depth = 10;
  const auto b = build_splits(DyckSpec{3, 2, 64}, s, 11);
  EXPECT_TRUE(integrity_violations(b).empty());
  for (const auto& x : b.get(kUnseenDepth).samples) EXPECT_GT(x.max_depth(), 2);
}

TEST(Splits, StarvedSplitIsNamed) {
  SplitSizes s;
  s.train = 50;
  s.iid = 5;  // only two sentences exist and train holds both
  s.seen_struct = 0;
  s.unseen_struct_short = 0;
  s.unseen_struct_long = 0;
  s.unseen_depth = 0;
  SplitOptions opts;
  opts.min_attempts = 1000;
  opts.attempt_factor = 10;
  try {
    build_splits(DyckSpec{1, 1, 6}, s, 3, opts);
    FAIL() << "expected starvation";
  } catch (const SplitStarved& e) {
    EXPECT_EQ(e.split(), kIid);
  }
}

TEST(Splits, CatalanBoundsDistinctStructures) {
  // Oracle: brute-force count of balanced O/C strings.
  for (unsigned n = 0; n <= 8; ++n) {
    std::uint64_t count = 0;
    for (std::uint32_t mask = 0; mask < (1u << (2 * n)); ++mask) {
      int depth = 0;
      bool ok = true;
      for (unsigned i = 0; i < 2 * n && ok; ++i) {
        depth += ((mask >> i) & 1u) ? 1 : -1;
        ok = depth >= 0;
      }
      if (ok && depth == 0) ++count;
    }
    EXPECT_EQ(catalan(n), count) << n;
  }
  // Sampled structures never exceed the bound, and small n is exhausted.
  const DyckSpec spec{2, 8, 2 * 4 + 2};
  Rng rng(6);
  std::map<std::size_t, std::set<std::string>> by_pairs;
  for (int i = 0; i < 50000; ++i) {
    const auto s = sample_sentence(spec, rng);
    by_pairs[s.structure.size() / 2].insert(s.structure);
  }
  for (const auto& [n, set] : by_pairs) {
    EXPECT_LE(set.size(), catalan(static_cast<unsigned>(n)));
    EXPECT_EQ(set.size(), catalan(static_cast<unsigned>(n))) << "pairs " << n;
  }
}

TEST(Splits, ByteIdenticalAcrossRuns) {
  const fs::path a = fs::temp_directory_path() / "proxylab_dyck_a";
  const fs::path c = fs::temp_directory_path() / "proxylab_dyck_b";
  fs::remove_all(a);
  fs::remove_all(c);
  write_bundle(a, small_bundle());
  write_bundle(c, build_splits(DyckSpec{20, 10, 512}, small_sizes(), 4));
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(a)) {
    EXPECT_EQ(slurp(e.path()), slurp(c / e.path().filename())) << e.path();
    ++files;
  }
  EXPECT_GE(files, 7u);
  const auto back = read_bundle(a);
  EXPECT_EQ(back.spec, small_bundle().spec);
  ASSERT_EQ(back.datasets.size(), small_bundle().datasets.size());
  for (std::size_t i = 0; i < back.datasets.size(); ++i) {
    ASSERT_EQ(back.datasets[i].samples.size(), small_bundle().datasets[i].samples.size());
    for (std::size_t j = 0; j < back.datasets[i].samples.size(); ++j) {
      EXPECT_EQ(back.datasets[i].samples[j].tokens, small_bundle().datasets[i].samples[j].tokens);
    }
  }
  fs::remove_all(a);
  fs::remove_all(c);
}

TEST(Splits, NdjsonRecordFields) {
  const fs::path p = fs::temp_directory_path() / "proxylab_one.ndjson";
  Dataset d;
  d.name = "x";
  d.bracket_types = 4;
  d.samples.push_back(annotate(sentence("[()]"), 4));
  write_ndjson(p, d);
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  for (const char* field : {"\"tokens\"", "\"text\"", "\"structure\"", "\"max_depth\"", "\"length\""}) {
    EXPECT_NE(line.find(field), std::string::npos) << field;
  }
  const auto back = read_ndjson(p, "x", 4);
  ASSERT_EQ(back.samples.size(), 1u);
  EXPECT_EQ(back.samples[0].tokens, d.samples[0].tokens);
  fs::remove(p);
}

}  // namespace
}  // namespace proxylab::dyck
