#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "oracles.hpp"
#include "proxylab/dyck/splits.hpp"
#include "proxylab/faithfulness/analysis.hpp"
#include "proxylab/faithfulness/metrics.hpp"
#include "proxylab/faithfulness/report.hpp"
#include "proxylab/simplify/simplifier.hpp"

namespace proxylab::faithfulness {
namespace {

namespace fs = std::filesystem;
using model::ModelConfig;
using simplify::Kind;
using simplify::SimplifierSpec;

constexpr int kTypes = 6;

struct Fixture {
  model::ModelParameters<float> params;
  dyck::Dataset data;
  std::vector<std::vector<Token>> sequences;

  Fixture() {
    auto c = ModelConfig::dyck(2 * kTypes + 2, 96);
    c.heads = 2;
    c.model_dim = 16;
    c.head_dim = 8;
    c.mlp_dim = 24;
    params = model::init_model<float>(c, 5);
    const auto bundle =
        dyck::build_splits(dyck::DyckSpec{kTypes, 6, 96}, dyck::SplitSizes{120, 0, 0, 0, 0, 0}, 8);
    data = bundle.get(dyck::kTrain);
    sequences = model::token_sequences(data);
  }
};

const Fixture& fx() {
  static const Fixture f;
  return f;
}

SimplifierSpec svd_spec(int rank) {
  SimplifierSpec s;
  s.kind = Kind::Svd;
  s.strength = rank;
  s.layer = 1;
  s.head = 1;
  return s;
}

// Independent eval-position oracle: closers at distance >= 10 from their opener.
struct Target {
  std::size_t sample, position;
  int depth, max_depth;
};
std::vector<Target> long_range_targets(const dyck::Dataset& data) {
  std::vector<Target> out;
  for (std::size_t s = 0; s < data.samples.size(); ++s) {
    const auto& t = data.samples[s].tokens;
    const int max_depth = testing::stack_check(t, data.bracket_types).max_depth;
    std::vector<std::size_t> stack;
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (t[i] < 1 || t[i] > 2 * data.bracket_types) continue;
      if (t[i] % 2 == 1) {
        stack.push_back(i);
        continue;
      }
      const int depth = static_cast<int>(stack.size());
      if (i - stack.back() >= 10) out.push_back({s, i, depth, max_depth});
      stack.pop_back();
    }
  }
  return out;
}

// ---- same-prediction, JSD, accuracies ----

TEST(Faithfulness, SelfComparisonIsPerfect) {
  const model::ModelRunner runner(fx().params);
  const auto eval = dyck_eval_set(fx().data);
  const auto r = evaluate_faithfulness(runner, runner, eval, {"train", "self", 0, 1, 1});
  EXPECT_EQ(*r.same_prediction.value(), 1.0);
  EXPECT_EQ(*r.same_prediction_full.value(), 1.0);
  EXPECT_EQ(*r.mean_jsd(), 0.0);
  EXPECT_EQ(*r.mean_jsd_eval(), 0.0);
  EXPECT_EQ(r.accuracy_original.hits, r.accuracy_simplified.hits);
}

TEST(Faithfulness, EvalPositionsMatchIndependentCount) {
  const auto eval = dyck_eval_set(fx().data);
  const auto targets = long_range_targets(fx().data);
  ASSERT_GT(targets.size(), 50u);
  EXPECT_EQ(eval.n_positions(), targets.size());
  EXPECT_EQ(eval.candidates, model::closer_tokens(kTypes));
  std::size_t n = 0;
  for (const auto& t : targets) {
    const auto& p = eval.positions[t.sample];
    EXPECT_NE(std::find(p.begin(), p.end(), t.position), p.end());
    ++n;
  }
  EXPECT_EQ(n, eval.n_positions());
}

TEST(Faithfulness, CountsAreConservedUnderCorrectOnlyFilter) {
  const auto f = simplify::fit(svd_spec(2), fx().params, fx().sequences);
  const auto eval = dyck_eval_set(fx().data);
  EvalOptions all, correct;
  correct.original_correct_only = true;
  correct.threads = 3;
  const auto a = evaluate_faithfulness(fx().params, f, eval, all);
  const auto b = evaluate_faithfulness(fx().params, f, eval, correct);
  EXPECT_EQ(a.n_eval_positions, eval.n_positions());
  EXPECT_EQ(b.n_eval_positions, eval.n_positions());
  EXPECT_EQ(a.same_prediction.total, eval.n_positions());
  EXPECT_EQ(b.same_prediction.total, a.accuracy_original.hits);
  EXPECT_EQ(a.accuracy_simplified.hits, b.accuracy_simplified.hits);
  EXPECT_EQ(a.jsd_eval_rows, eval.n_positions());
  std::size_t rows = 0;
  for (const auto& s : fx().sequences) rows += s.size();
  EXPECT_EQ(a.jsd_rows, rows);
  EXPECT_EQ(a.same_prediction_full.total, rows);
  EXPECT_EQ(a.key.simplifier, "svd");
  EXPECT_EQ(a.key.strength, 2);
}

TEST(Faithfulness, MergeIsCountWeighted) {
  FaithfulnessRecord a, b;
  a.same_prediction = {3, 4};
  a.jsd_sum = 1.0;
  a.jsd_rows = 4;
  b.same_prediction = {1, 6};
  b.jsd_sum = 0.0;
  b.jsd_rows = 1;
  a += b;
  EXPECT_DOUBLE_EQ(*a.same_prediction.value(), 0.4);
  EXPECT_DOUBLE_EQ(*a.mean_jsd(), 0.2);
  EXPECT_FALSE(FaithfulnessRecord{}.mean_jsd().has_value());
}

TEST(Faithfulness, SweepOrderAndFullRank) {
  const auto evals = std::vector<EvalSet>{dyck_eval_set(fx().data), all_positions_eval_set("all", fx().sequences)};
  const auto records = sweep(fx().params, svd_spec(0), {0, 4, 8}, fx().sequences, evals);
  ASSERT_EQ(records.size(), 6u);
  EXPECT_EQ(records[0].key.strength, 0);
  EXPECT_EQ(records[1].key.split, "all");
  EXPECT_EQ(records[5].key.strength, 8);
  EXPECT_EQ(*records[4].same_prediction.value(), 1.0);
  EXPECT_LT(*records[4].mean_jsd(), 1e-6);
  SimplifierSpec oh = svd_spec(0);
  oh.kind = Kind::OneHot;
  EXPECT_EQ(sweep(fx().params, oh, {0, 3}, fx().sequences, evals).size(), 2u);
}

// ---- depth grid ----

TEST(Grid, MarginalizesToHeadlineAccuracy) {
  const model::ModelRunner runner(fx().params);
  const auto grid = depth_error_grid(runner, fx().data, 10, 2);
  const auto headline = model::closing_bracket_accuracy(runner, fx().data, 10, 1);
  EXPECT_EQ(grid.total().hits, headline.hits);
  EXPECT_EQ(grid.total().total, headline.total);
  EXPECT_NEAR(*grid.total().value(), *headline.value(), 1e-9);
}

TEST(Grid, OracleCellsAreAllCorrectAndEmptyCellsAbsent) {
  const auto grid = depth_error_grid(testing::StackOracleRunner(kTypes), fx().data);
  std::map<std::pair<int, int>, std::size_t> want;
  for (const auto& t : long_range_targets(fx().data)) ++want[{t.depth, t.max_depth}];
  ASSERT_EQ(grid.cells.size(), want.size());
  for (const auto& [cell, frac] : grid.cells) {
    EXPECT_EQ(frac.total, want.at(cell));
    EXPECT_EQ(frac.hits, frac.total);
    EXPECT_EQ(grid.accuracy(cell.first, cell.second), 1.0);
  }
  EXPECT_FALSE(grid.accuracy(99, 99).has_value());
}

// ---- attention error profile ----

TEST(Profile, IdentityProxyOffsetsConcentrateAtZero) {
  const model::ModelRunner runner(fx().params);
  const auto f = simplify::fit(svd_spec(8), fx().params, fx().sequences);
  const simplify::SimplifiedRunner proxy(fx().params, f);
  const auto p = attention_error_profile(runner, proxy, 1, 1, fx().data);
  ASSERT_GT(p.positions, 0u);  // an untrained model errs often
  std::size_t total = 0;
  for (const auto& [off, n] : p.offset) total += n;
  EXPECT_EQ(total, p.positions);
  EXPECT_GE(static_cast<double>(p.offset.count(0) ? p.offset.at(0) : 0), 0.99 * static_cast<double>(total));
}

TEST(Profile, DepthDifferenceAndParity) {
  AttentionErrorProfile p;
  p.depth = {{{3, 3}, 2}, {{3, 1}, 1}, {{2, 4}, 5}};
  p.offset = {{0, 4}, {-2, 3}, {1, 1}, {4, 2}};
  const auto d = p.depth_difference();
  EXPECT_EQ(d.at(0), 2u);
  EXPECT_EQ(d.at(-2), 1u);
  EXPECT_EQ(d.at(2), 5u);
  EXPECT_EQ(p.even_nonzero_offsets().hits, 5u);
  EXPECT_EQ(p.even_nonzero_offsets().total, 6u);
  EXPECT_FALSE(AttentionErrorProfile{}.even_nonzero_offsets().value().has_value());
  const std::vector<float> row{0.1f, 0.4f, 0.4f, 0.1f};
  EXPECT_EQ(attention_argmax(row), 2u);
}

// ---- projections ----

TEST(Projection, FullBasisPreservesNormAndLabelsMatchStack) {
  const auto f = simplify::fit(svd_spec(8), fx().params, fx().sequences);
  std::vector<std::size_t> all(8);
  std::iota(all.begin(), all.end(), std::size_t{0});
  const auto table = export_projection(fx().params, 1, 1, f.basis, fx().data, all, 2);
  std::size_t rows = 0;
  for (const auto& s : fx().sequences) rows += s.size();
  EXPECT_EQ(table.points.size(), 2 * rows);
  for (const auto& p : table.points) {
    double sq = 0.0;
    for (double c : p.coords) sq += c * c;
    EXPECT_NEAR(std::sqrt(sq), p.norm, 1e-4 * std::max(1.0, p.norm));
    const auto& t = fx().data.samples[p.sequence].tokens;
    ASSERT_LT(p.position, t.size());
    EXPECT_EQ(p.token, t[p.position]);
    // explicit stack replay up to this position
    int depth = 0, token_depth = 0;
    for (std::size_t i = 0; i <= p.position; ++i) {
      const Token x = t[i];
      if (x < 1 || x > 2 * kTypes) {
        token_depth = 0;
      } else if (x % 2 == 1) {
        token_depth = ++depth;
      } else {
        token_depth = depth--;
      }
    }
    EXPECT_EQ(p.prefix_depth, depth);
    EXPECT_EQ(p.token_depth, token_depth);
    EXPECT_EQ(p.bracket_type, (p.token >= 1 && p.token <= 2 * kTypes) ? (p.token + 1) / 2 : 0);
  }
  EXPECT_THROW(export_projection(fx().params, 1, 1, simplify::truncate(f, 2).basis, fx().data, {2}),
               std::invalid_argument);
}

TEST(Projection, ParityClassifierSeparatesSeparableData) {
  ProjectionTable table;
  table.components = {0, 1};
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    ProjectedPoint p;
    p.role = Role::Key;
    p.token_depth = 1 + static_cast<int>(rng.below(6));
    const double sign = p.token_depth % 2 == 1 ? 1.0 : -1.0;
    p.coords = {sign * (1.0 + rng.uniform()), rng.uniform() - 0.5};
    table.points.push_back(p);
  }
  ProjectedPoint skipped;
  skipped.role = Role::Key;
  skipped.coords = {0.0, 0.0};
  table.points.push_back(skipped);
  const auto fit = depth_parity_classifier(table, Role::Key);
  EXPECT_EQ(fit.accuracy.total, 200u);
  EXPECT_EQ(*fit.accuracy.value(), 1.0);
  EXPECT_EQ(fit.weights.size(), 3u);
  EXPECT_FALSE(depth_parity_classifier(table, Role::Query).accuracy.value().has_value());
}

// ---- cluster profiles ----

TEST(Clusters, SyntheticProfileByHand) {
  // key centers at depth 1 (x=0) and depth 2 (x=10); query centers placed
  // near the key center of the same depth, plus one stray query center.
  Tensor<float> kc = Tensor<float>::matrix(2, 1), qc = Tensor<float>::matrix(3, 1);
  kc[0] = 0.0f, kc[1] = 10.0f;
  qc[0] = 9.0f, qc[1] = 1.0f, qc[2] = 6.0f;
  Tensor<double> keys = Tensor<double>::matrix(5, 1), queries = Tensor<double>::matrix(5, 1);
  const std::vector<double> kv{0.1, -0.2, 9.8, 10.3, 0.4}, qv{8.9, 1.2, 9.2, 6.1, 1.0};
  for (std::size_t i = 0; i < 5; ++i) keys[i] = kv[i], queries[i] = qv[i];
  const std::vector<int> depths{1, 1, 2, 2, 1};
  const auto p = cluster_depth_profile(kc, qc, keys, queries, depths);
  EXPECT_EQ(p.nearest_key, (std::vector<std::size_t>{1, 0, 1}));
  EXPECT_EQ(p.key_depths[0], (std::vector<std::size_t>{0, 3}));
  EXPECT_EQ(p.key_depths[1], (std::vector<std::size_t>{0, 0, 2}));
  // query rows: 8.9->c0 (d1), 1.2->c1 (d1), 9.2->c0 (d2), 6.1->c2 (d2), 1.0->c1 (d1)
  EXPECT_EQ(ClusterProfile::mode(p.query_depths[0]), 1);  // tie 1 vs 2 goes shallow
  EXPECT_EQ(ClusterProfile::mode(p.query_depths[1]), 1);
  EXPECT_EQ(ClusterProfile::mode(p.query_depths[2]), 2);
  EXPECT_EQ(p.matching_modes().hits, 2u);
  EXPECT_EQ(p.matching_modes().total, 3u);
  EXPECT_EQ(ClusterProfile::mode({}), -1);
}

TEST(Clusters, DepthLabelsFollowEmbeddingOrder) {
  const auto labels = token_depth_labels(fx().data);
  std::size_t i = 0;
  for (const auto& s : fx().data.samples) {
    for (int d : s.token_depths) EXPECT_EQ(labels.at(i++), d);
  }
  EXPECT_EQ(i, labels.size());
}

// ---- reports ----

std::vector<FaithfulnessRecord> some_records() {
  const auto evals = std::vector<EvalSet>{dyck_eval_set(fx().data)};
  auto r = sweep(fx().params, svd_spec(0), {1, 3}, fx().sequences, evals);
  FaithfulnessRecord empty;
  empty.key = {"nothing", "svd", 2, 1, 1};
  r.push_back(empty);
  return r;
}

TEST(Report, WideCsvRoundTripsExactly) {
  const auto records = some_records();
  const fs::path p = fs::temp_directory_path() / "proxylab_wide.csv";
  {
    std::ofstream out(p);
    write_records_wide(out, records);
  }
  const auto back = read_records_wide(p);
  ASSERT_EQ(back.size(), records.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].key.split, records[i].key.split);
    EXPECT_EQ(back[i].key.strength, records[i].key.strength);
    EXPECT_EQ(back[i].jsd_sum, records[i].jsd_sum);
    EXPECT_EQ(back[i].jsd_eval_rows, records[i].jsd_eval_rows);
    EXPECT_EQ(back[i].same_prediction.hits, records[i].same_prediction.hits);
    EXPECT_EQ(back[i].accuracy_simplified.total, records[i].accuracy_simplified.total);
    EXPECT_EQ(back[i].n_eval_positions, records[i].n_eval_positions);
  }
  fs::remove(p);
}

TEST(Report, LongCsvHasSixMetricsPerRecordAndNA) {
  const auto records = some_records();
  std::ostringstream a, b;
  write_records_long(a, records);
  write_records_long(b, records);
  EXPECT_EQ(a.str(), b.str());
  const std::string s = a.str();
  EXPECT_EQ(s.substr(0, s.find('\n')), "split,simplifier,strength,metric,value,n");
  EXPECT_EQ(static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')), 1 + 6 * records.size());
  EXPECT_NE(s.find("nothing,svd,2,mean_jsd,NA,0"), std::string::npos);
  EXPECT_EQ(format_value(std::nullopt), "NA");
  EXPECT_EQ(format_value(0.25), "0.25");
  EXPECT_THROW(metric_value(records[0], "no_such_metric"), std::invalid_argument);
}

TEST(Report, ChartsAreDeterministicSvg) {
  const auto records = some_records();
  const model::ModelRunner runner(fx().params);
  const auto grid = depth_error_grid(runner, fx().data);
  for (const std::string& svg : {sweep_chart(records, "same_prediction"), grid_chart("grid", grid),
                                 svg::bar_chart("b", {"x", "y"}, {1.0, 2.0})}) {
    EXPECT_EQ(svg.rfind("<svg", 0), 0u);
    EXPECT_NE(svg.find("</svg>"), std::string::npos);
  }
  EXPECT_EQ(sweep_chart(records, "mean_jsd"), sweep_chart(records, "mean_jsd"));
  std::ostringstream g1, g2;
  write_grid_csv(g1, grid);
  write_grid_csv(g2, grid);
  EXPECT_EQ(g1.str(), g2.str());
  EXPECT_EQ(g1.str().substr(0, g1.str().find('\n')), "query_depth,max_depth,hits,total,accuracy");
}

}  // namespace
}  // namespace proxylab::faithfulness
