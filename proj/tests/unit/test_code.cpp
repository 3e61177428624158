#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "proxylab/code/analysis.hpp"
#include "proxylab/code/corpus.hpp"
#include "proxylab/numerics/special.hpp"

namespace proxylab::code {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

const fs::path kData = PROXYLAB_TEST_DATA;

std::vector<json> fixture_records() {
  std::ifstream in(kData / "code_fixture.ndjson");
  std::vector<json> out;
  std::string line;
  while (std::getline(in, line)) out.push_back(json::parse(line));
  return out;
}

std::string ingest_input(const std::vector<json>& records) {
  std::string s;
  for (const auto& r : records) {
    s += r.contains("_raw") ? r["_raw"].get<std::string>() : r.dump();
    s += '\n';
  }
  return s;
}

std::string letters(const std::vector<Category>& labels) {
  std::string s;
  for (Category c : labels) s.push_back("WKNRCO"[static_cast<int>(c)]);
  return s;
}

// ---- vocabulary ----

TEST(Vocab, PrintableAsciiRoundTrips) {
  std::u32string all;
  for (char32_t c = 0x20; c <= 0x7E; ++c) all.push_back(c);
  const auto ids = CharVocab::encode(all);
  ASSERT_EQ(ids.size(), all.size() + 2);
  EXPECT_EQ(ids.front(), CharVocab::kBos);
  EXPECT_EQ(ids.back(), CharVocab::kEos);
  EXPECT_EQ(ids[1], 1);
  EXPECT_EQ(ids[95], 95);
  EXPECT_EQ(CharVocab::decode(ids), all);
}

TEST(Vocab, EverythingElseIsUnknown) {
  for (char32_t c : {U'\n', U'\t', U'\x7f', U'é', U'☃', U'\0'}) EXPECT_EQ(CharVocab::id(c), CharVocab::kUnknown);
  EXPECT_EQ(CharVocab::character(CharVocab::kUnknown), U'�');
  EXPECT_THROW(CharVocab::character(CharVocab::kBos), std::invalid_argument);
  EXPECT_THROW(CharVocab::character(CharVocab::kEos), std::invalid_argument);
  const auto ids = CharVocab::encode_utf8("a\xC3\xA9z");
  EXPECT_EQ(ids, (std::vector<Token>{0, CharVocab::id(U'a'), 96, CharVocab::id(U'z'), 97}));
}

TEST(Vocab, Utf8DecodingReplacesEachBadByte) {
  EXPECT_EQ(decode_utf8("\xE2\x98\x83x"), U"☃x");
  EXPECT_EQ(decode_utf8("a\xE2\x98"), U"a��");
  EXPECT_EQ(decode_utf8("\xFF"), U"�");
  EXPECT_EQ(encode_utf8(U"café☃"), "caf\xC3\xA9\xE2\x98\x83");
}

// ---- labels and depth ----

TEST(Labels, WorkedExamples) {
  const auto& kw = java_keywords();
  EXPECT_EQ(letters(categorize_characters(U"if (x) {", kw)), "KKWONCWO");
  EXPECT_EQ(letters(categorize_characters(U"foo(foo)", kw)), "NNNORRRC");
  EXPECT_EQ(letters(categorize_characters(U"a_b a b\n\tnull", kw)), "NONWRWRWWKKKK");
  EXPECT_TRUE(kw.contains("true"));
  EXPECT_TRUE(kw.contains("synchronized"));
  EXPECT_FALSE(kw.contains("String"));
}

TEST(Depth, RunningCountIncludesOpener) {
  EXPECT_EQ(bracket_depths(U"a(b[c]){"), (std::vector<int>{0, 1, 1, 2, 2, 1, 0, 1}));
  EXPECT_EQ(bracket_depths(U"(]"), (std::vector<int>{1, 0}));
  const auto f = make_function("java", U"int f(){return g([1]);}", java_keywords());
  EXPECT_EQ(f.max_depth, 3);
  EXPECT_THROW(make_function("java", U")(", java_keywords()), std::invalid_argument);
}

// ---- ingest against the fixture ----

TEST(Ingest, FixtureRoutingLabelsAndDepthsMatchReference) {
  const auto records = fixture_records();
  ASSERT_EQ(records.size(), 1000u);
  std::istringstream in(ingest_input(records));
  IngestOptions opt;
  opt.holdout_fraction = 0.25;
  opt.seed = 11;
  const auto corpus = ingest(in, opt, java_keywords());
  EXPECT_EQ(corpus.report.records, records.size());

  std::map<std::string, std::size_t> cursor, want_skips;
  std::size_t shallow_java = 0;
  for (const auto& r : records) {
    const std::string expected = r["_expected"];
    if (expected.rfind("skip:", 0) == 0) {
      ++want_skips[expected.substr(5)];
      continue;
    }
    const std::u32string text = decode_utf8(r["code"].get<std::string>());
    const CodeFunction* got = nullptr;
    if (expected == "train_or_heldout") {
      ++shallow_java;
      for (const char* name : {kCodeTrain, kCodeHeldout}) {
        const auto& split = corpus.get(name);
        auto& c = cursor[name];
        if (c < split.functions.size() && split.functions[c].text == text && !got) got = &split.functions[c++];
      }
    } else {
      const auto& split = corpus.get(expected);
      auto& c = cursor[expected];
      ASSERT_LT(c, split.functions.size()) << expected;
      got = &split.functions[c++];
      EXPECT_TRUE(got->text == text) << r["code"];
    }
    ASSERT_NE(got, nullptr) << r.dump();
    EXPECT_EQ(got->max_depth, r["_max_depth"].get<int>());
    EXPECT_EQ(letters(got->labels), r["_labels"].get<std::string>()) << r["code"];
    // independent running depth
    int d = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
      if (text[i] == U'(' || text[i] == U'[' || text[i] == U'{') ++d;
      if (text[i] == U')' || text[i] == U']' || text[i] == U'}') --d;
      EXPECT_EQ(got->depths[i], d);
    }
  }
  for (const auto& s : corpus.splits) EXPECT_EQ(cursor[s.name], s.functions.size()) << s.name;
  EXPECT_EQ(corpus.report.skipped, want_skips);
  EXPECT_EQ(corpus.get(kCodeTrain).functions.size() + corpus.get(kCodeHeldout).functions.size(), shallow_java);
  // the holdout coin should land near its rate on 170 draws
  const double share = static_cast<double>(corpus.get(kCodeHeldout).functions.size()) / static_cast<double>(shallow_java);
  EXPECT_GT(share, 0.1);
  EXPECT_LT(share, 0.4);
  std::vector<std::string> names;
  for (const auto& s : corpus.splits) names.push_back(s.name);
  EXPECT_EQ(names, (std::vector<std::string>{"train", "heldout", "unseen_depth", "go", "javascript", "php"}));
}

TEST(Ingest, DeterministicAndLanguageFilter) {
  const auto records = fixture_records();
  IngestOptions opt;
  opt.seed = 3;
  std::istringstream a(ingest_input(records)), b(ingest_input(records));
  const auto ca = ingest(a, opt, java_keywords()), cb = ingest(b, opt, java_keywords());
  EXPECT_EQ(ca.get(kCodeHeldout).functions.size(), cb.get(kCodeHeldout).functions.size());
  opt.languages = {"go"};
  std::istringstream c(ingest_input(records));
  const auto cc = ingest(c, opt, java_keywords());
  EXPECT_FALSE(cc.has("php"));
  EXPECT_TRUE(cc.has("go"));
  EXPECT_GT(cc.report.skipped.at("language_filtered"), 0u);
}

TEST(Ingest, SplitFilesRoundTrip) {
  const auto records = fixture_records();
  std::istringstream in(ingest_input(records));
  const auto corpus = ingest(in, IngestOptions{}, java_keywords());
  const fs::path p = fs::temp_directory_path() / "proxylab_split.ndjson";
  for (const auto& split : corpus.splits) {
    write_split_ndjson(p, split);
    const auto back = read_split_ndjson(p, split.name, java_keywords());
    ASSERT_EQ(back.functions.size(), split.functions.size());
    for (std::size_t i = 0; i < back.functions.size(); ++i) {
      EXPECT_TRUE(back.functions[i].text == split.functions[i].text);
      EXPECT_EQ(back.functions[i].labels, split.functions[i].labels);
    }
  }
  std::ofstream(p) << "{\"language\":\"java\",\"code\":\"x\"}\nnot json\n";
  try {
    read_split_ndjson(p, "x", java_keywords());
    FAIL();
  } catch (const std::exception& e) {
    EXPECT_NE(std::string(e.what()).find(":2"), std::string::npos) << e.what();
  }
  fs::remove(p);
}

// ---- paired t-test ----

TEST(TTest, HandComputedCases) {
  const std::vector<double> zero{0, 0, 0}, inc{1, 2, 3};
  const auto d = paired_t_test(zero, zero);
  EXPECT_TRUE(d.degenerate);
  EXPECT_EQ(d.p, 1.0);
  const auto c = paired_t_test(std::vector<double>{2, 3, 4}, inc);
  EXPECT_TRUE(c.degenerate);
  EXPECT_EQ(c.p, 0.0);
  const auto r = paired_t_test(inc, zero);
  EXPECT_NEAR(r.t, 2.0 * std::sqrt(3.0), 1e-12);
  EXPECT_EQ(r.dof, 2.0);
  EXPECT_EQ(r.n, 3u);
  EXPECT_NEAR(r.mean_difference, 2.0, 1e-15);
  // two-sided p for t = 2√3 with 2 dof: 1 - t/sqrt(t²+2)
  EXPECT_NEAR(r.p, 1.0 - r.t / std::sqrt(r.t * r.t + 2.0), 1e-12);
  EXPECT_THROW(paired_t_test(std::vector<double>{1}, std::vector<double>{1}), std::invalid_argument);
  EXPECT_THROW(paired_t_test(inc, std::vector<double>{1, 2}), std::invalid_argument);
}

TEST(TTest, MatchesScipyReference) {
  std::ifstream in(kData / "ttest_oracle.json");
  const json doc = json::parse(in);
  ASSERT_EQ(doc["paired"].size(), 50u);
  for (const auto& c : doc["paired"]) {
    const auto a = c["a"].get<std::vector<double>>(), b = c["b"].get<std::vector<double>>();
    const auto r = paired_t_test(a, b);
    EXPECT_NEAR(r.t, c["t"].get<double>(), 1e-6 * std::max(1.0, std::abs(r.t)));
    EXPECT_NEAR(r.p, c["p"].get<double>(), 1e-6);
  }
  for (const auto& c : doc["cdf"]) {
    EXPECT_NEAR(student_t_cdf(c["t"], c["dof"]), c["cdf"].get<double>(), 1e-9);
  }
}

// ---- head inspection ----

TEST(Inspect, InductionTargets) {
  const std::vector<Token> abcab{1, 2, 3, 1, 2};
  EXPECT_TRUE(induction_targets(abcab, 2).empty());
  EXPECT_EQ(induction_targets(abcab, 3), (std::vector<std::size_t>{1}));
  EXPECT_EQ(induction_targets(abcab, 4), (std::vector<std::size_t>{2}));
  const std::vector<Token> aaa{5, 5, 5};
  EXPECT_EQ(induction_targets(aaa, 2), (std::vector<std::size_t>{1, 2}));
}

TEST(Inspect, ConstructedHeadsScoreAsDesigned) {
  const std::vector<Token> abcab{1, 2, 3, 1, 2};
  const std::size_t n = abcab.size();
  auto previous = Tensor<float>::matrix(n, n), induction = Tensor<float>::matrix(n, n),
       uniform = Tensor<float>::matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    previous(i, i == 0 ? 0 : i - 1) = 1.0f;
    for (std::size_t j = 0; j <= i; ++j) uniform(i, j) = 1.0f / static_cast<float>(i + 1);
    const auto t = induction_targets(abcab, i);
    if (t.empty()) {
      induction(i, i) = 1.0f;
    } else {
      for (std::size_t j : t) induction(i, j) = 1.0f / static_cast<float>(t.size());
    }
  }
  HeadInspection p, ind, uni;
  accumulate_head_scores(p, previous, abcab);
  accumulate_head_scores(ind, induction, abcab);
  accumulate_head_scores(uni, uniform, abcab);
  EXPECT_EQ(p.previous_token_count, n - 1);
  EXPECT_DOUBLE_EQ(*p.previous_token_score(), 1.0);
  EXPECT_EQ(ind.induction_count, 2u);
  EXPECT_NEAR(*ind.induction_score(), 1.0, 1e-7);
  EXPECT_NEAR(*uni.previous_token_score(), (1.0 / 2 + 1.0 / 3 + 1.0 / 4 + 1.0 / 5) / 4, 1e-7);
  EXPECT_NEAR(*uni.induction_score(), (1.0 / 4 + 1.0 / 5) / 2, 1e-7);
  EXPECT_FALSE(HeadInspection{}.induction_score().has_value());
}

TEST(Inspect, ModelHeadScoresAreProbabilities) {
  auto c = model::ModelConfig::code_desk(CharVocab::kSize, 64);
  c.model_dim = 16;
  c.head_dim = 8;
  c.mlp_dim = 16;
  const auto params = model::init_model<float>(c, 2);
  const std::vector<std::vector<Token>> seqs{CharVocab::encode(U"abcabcabc"), CharVocab::encode(U"int x = x + 1;")};
  const auto r = inspect_head(params, 1, 0, seqs, 4);
  ASSERT_EQ(r.attention.size(), 2u);
  EXPECT_EQ(r.attention[0].rows(), 4u);
  EXPECT_GT(*r.previous_token_score(), 0.0);
  EXPECT_LE(*r.previous_token_score(), 1.0);
  EXPECT_EQ(r.previous_token_count, (seqs[0].size() - 1) + (seqs[1].size() - 1));
}

// ---- per-head sweep and gaps ----

struct SweepFixture {
  model::ModelParameters<float> params;
  CodeSplit train, other;

  SweepFixture() {
    auto c = model::ModelConfig::code_desk(CharVocab::kSize, 64);
    c.layers = 1;
    c.model_dim = 16;
    c.head_dim = 4;
    c.mlp_dim = 16;
    params = model::init_model<float>(c, 9);
    for (auto& h : params.layers[0].heads) {
      for (std::size_t i = 0; i < h.wq.size(); ++i) h.wq[i] *= 8.0f, h.wk[i] *= 8.0f, h.wv[i] *= 4.0f;
    }
    train.name = "train";
    other.name = "go";
    const std::vector<std::u32string> java{U"int f(int x) { return x + 1; }", U"void g() { h(a[0]); }",
                                           U"if (a > b) { return a; }"};
    for (const auto& t : java) train.functions.push_back(make_function("java", t, java_keywords()));
    other.functions.push_back(make_function("go", U"func f(x int) int { return x }", java_keywords()));
  }
};

TEST(HeadSweep, FullRankIsExactAndRecordsAreOrdered) {
  const SweepFixture fx;
  SweepOptions opt;
  opt.ranks = {1, 4};
  const auto recs = per_head_sweep(fx.params, fx.train, {&fx.train, &fx.other}, opt);
  // 2 heads × 2 ranks × 2 splits × (all + 6 categories)
  ASSERT_EQ(recs.size(), 2u * 2 * 2 * 7);
  EXPECT_EQ(recs[0].category, "all");
  EXPECT_EQ(recs[0].rank, 1);
  EXPECT_EQ(recs[0].split, "train");
  EXPECT_EQ(recs.back().head, 1);
  std::size_t positions = 0;
  for (const auto& f : fx.train.functions) positions += f.text.size();
  double low_rank_same = 0.0;
  for (const auto& r : recs) {
    if (r.category != "all") continue;
    if (r.split == "train") {
      EXPECT_EQ(r.same.total, positions);
    }
    if (r.rank == 4) {
      EXPECT_EQ(r.same.hits, r.same.total) << r.layer << r.head;
    } else {
      low_rank_same += *r.same.value();
    }
  }
  EXPECT_LT(low_rank_same, 4.0);

  std::ostringstream out;
  write_head_sweep_csv(out, recs);
  const fs::path p = fs::temp_directory_path() / "proxylab_heads.csv";
  std::ofstream(p) << out.str();
  const auto back = read_head_sweep_csv(p);
  ASSERT_EQ(back.size(), recs.size());
  EXPECT_EQ(back[5].category, recs[5].category);
  EXPECT_EQ(back[5].same_correct.hits, recs[5].same_correct.hits);
  fs::remove(p);
}

TEST(HeadSweep, GapsAndHeadAveragesByHand) {
  auto rec = [](int head, const std::string& split, std::size_t hits, std::size_t total) {
    HeadSweepRecord r;
    r.head = head;
    r.rank = 2;
    r.split = split;
    r.category = "all";
    r.same = r.same_correct = {hits, total};
    return r;
  };
  const std::vector<HeadSweepRecord> recs{rec(0, "heldout", 9, 10), rec(0, "go", 1, 4), rec(0, "php", 5, 6),
                                          rec(1, "heldout", 1, 2), rec(1, "go", 0, 0), rec(1, "php", 1, 4)};
  EXPECT_NEAR(*generalization_gap(recs, 0, 0, 2, "all", "heldout", {"go", "php"}), 0.9 - 0.6, 1e-12);
  EXPECT_FALSE(generalization_gap(recs, 0, 1, 2, "all", "heldout", {"go"}).has_value());
  EXPECT_FALSE(generalization_gap(recs, 0, 0, 3, "all", "heldout", {"go"}).has_value());
  const auto s = head_averaged_scores(recs, 2, "heldout", {"go", "php"});
  EXPECT_NEAR(*s.in_domain, (0.9 + 0.5) / 2, 1e-12);
  EXPECT_NEAR(*s.out_domain, (0.6 + 0.25) / 2, 1e-12);
}

}  // namespace
}  // namespace proxylab::code
