#include "proxylab/faithfulness/metrics.hpp"

#include <stdexcept>

#include "proxylab/numerics/divergence.hpp"
#include "proxylab/numerics/parallel.hpp"

namespace proxylab::faithfulness {
namespace {

std::span<const float> row_of(const Tensor<float>& t, std::size_t r) {
  return {t.data() + r * t.cols(), t.cols()};
}

Token predict(const Tensor<float>& logits, std::size_t target, std::span<const Token> candidates) {
  const auto row = row_of(logits, target - 1);
  return candidates.empty() ? model::argmax(row) : model::restricted_argmax(row, candidates);
}

/// Causal prefix of an attention row (entries beyond the query are masked).
std::span<const float> causal_row(const Tensor<float>& attention, std::size_t q) {
  return {attention.data() + q * attention.cols(), q + 1};
}

const model::HeadTrace<float>& head_of(const model::ForwardResult<float>& r, int layer, int head) {
  if (!r.trace) throw std::logic_error("runner returned no attention trace");
  return r.trace->at(layer, head);
}

}  // namespace

std::size_t EvalSet::n_positions() const {
  std::size_t n = 0;
  for (const auto& p : positions) n += p.size();
  return n;
}

EvalSet dyck_eval_set(const dyck::Dataset& dataset, int min_distance) {
  EvalSet e;
  e.name = dataset.name;
  e.candidates = model::closer_tokens(dataset.bracket_types);
  e.sequences.reserve(dataset.samples.size());
  for (const auto& s : dataset.samples) {
    e.sequences.push_back(s.tokens);
    e.positions.push_back(dyck::closing_eval_positions(s, min_distance));
  }
  return e;
}

EvalSet all_positions_eval_set(std::string name, std::vector<std::vector<Token>> sequences) {
  EvalSet e;
  e.name = std::move(name);
  e.positions.reserve(sequences.size());
  for (const auto& s : sequences) {
    std::vector<std::size_t> p;
    for (std::size_t i = 1; i < s.size(); ++i) p.push_back(i);
    e.positions.push_back(std::move(p));
  }
  e.sequences = std::move(sequences);
  return e;
}

std::optional<double> FaithfulnessRecord::mean_jsd() const {
  if (jsd_rows == 0) return std::nullopt;
  return jsd_sum / static_cast<double>(jsd_rows);
}

std::optional<double> FaithfulnessRecord::mean_jsd_eval() const {
  if (jsd_eval_rows == 0) return std::nullopt;
  return jsd_eval_sum / static_cast<double>(jsd_eval_rows);
}

FaithfulnessRecord& FaithfulnessRecord::operator+=(const FaithfulnessRecord& o) {
  jsd_sum += o.jsd_sum;
  jsd_rows += o.jsd_rows;
  jsd_eval_sum += o.jsd_eval_sum;
  jsd_eval_rows += o.jsd_eval_rows;
  same_prediction += o.same_prediction;
  same_prediction_full += o.same_prediction_full;
  accuracy_original += o.accuracy_original;
  accuracy_simplified += o.accuracy_simplified;
  n_eval_positions += o.n_eval_positions;
  return *this;
}

FaithfulnessRecord evaluate_faithfulness(const model::Runner& original,
                                         const model::Runner& simplified, const EvalSet& eval,
                                         const RecordKey& key, const EvalOptions& options) {
  if (eval.positions.size() != eval.sequences.size()) {
    throw std::invalid_argument("eval set '" + eval.name + "': positions do not match sequences");
  }
  std::vector<FaithfulnessRecord> per(eval.sequences.size());
  parallel_for(eval.sequences.size(), options.threads, [&](std::size_t s) {
    const auto& tokens = eval.sequences[s];
    const auto a = original.run(tokens, true);
    const auto b = simplified.run(tokens, true);
    const auto& ha = head_of(a, key.layer, key.head);
    const auto& hb = head_of(b, key.layer, key.head);
    FaithfulnessRecord& r = per[s];
    const std::size_t n = tokens.size();
    std::vector<char> is_eval_query(n, 0);
    for (std::size_t i : eval.positions[s]) {
      if (i == 0 || i >= n) throw std::out_of_range("eval position outside sequence");
      is_eval_query[i - 1] = 1;
    }
    for (std::size_t q = 0; q < n; ++q) {
      const double d = jsd(causal_row(ha.attention, q), causal_row(hb.attention, q));
      r.jsd_sum += d;
      r.jsd_rows += 1;
      if (is_eval_query[q]) {
        r.jsd_eval_sum += d;
        r.jsd_eval_rows += 1;
      }
      r.same_prediction_full.total += 1;
      r.same_prediction_full.hits +=
          model::argmax(row_of(a.logits, q)) == model::argmax(row_of(b.logits, q)) ? 1 : 0;
    }
    for (std::size_t i : eval.positions[s]) {
      const Token pa = predict(a.logits, i, eval.candidates);
      const Token pb = predict(b.logits, i, eval.candidates);
      const bool correct_a = pa == tokens[i];
      r.n_eval_positions += 1;
      r.accuracy_original.total += 1;
      r.accuracy_original.hits += correct_a ? 1 : 0;
      r.accuracy_simplified.total += 1;
      r.accuracy_simplified.hits += pb == tokens[i] ? 1 : 0;
      if (options.original_correct_only && !correct_a) continue;
      r.same_prediction.total += 1;
      r.same_prediction.hits += pa == pb ? 1 : 0;
    }
  });
  FaithfulnessRecord total;
  total.key = key;
  total.key.split = key.split.empty() ? eval.name : key.split;
  total.original_correct_only = options.original_correct_only;
  for (const auto& r : per) total += r;
  return total;
}

FaithfulnessRecord evaluate_faithfulness(const model::ModelParameters<float>& params,
                                         const simplify::FittedSimplifier& fitted,
                                         const EvalSet& eval, const EvalOptions& options) {
  const model::ModelRunner original(params);
  const simplify::SimplifiedRunner simplified(params, fitted);
  RecordKey key{eval.name, fitted.spec.kind_name(), fitted.spec.strength, fitted.spec.layer,
                fitted.spec.head};
  return evaluate_faithfulness(original, simplified, eval, key, options);
}

std::optional<double> DepthErrorGrid::accuracy(int query_depth, int max_depth) const {
  const auto it = cells.find({query_depth, max_depth});
  if (it == cells.end()) return std::nullopt;
  return it->second.value();
}

Fraction DepthErrorGrid::total() const {
  Fraction f;
  for (const auto& [_, c] : cells) f += c;
  return f;
}

DepthErrorGrid depth_error_grid(const model::Runner& runner, const dyck::Dataset& dataset,
                                int min_distance, int threads) {
  const auto closers = model::closer_tokens(dataset.bracket_types);
  std::vector<std::map<std::pair<int, int>, Fraction>> per(dataset.samples.size());
  parallel_for(dataset.samples.size(), threads, [&](std::size_t s) {
    const auto& sample = dataset.samples[s];
    const auto positions = dyck::closing_eval_positions(sample, min_distance);
    if (positions.empty()) return;
    const auto out = runner.run(sample.tokens, false);
    const int max_depth = sample.max_depth();
    for (std::size_t i : positions) {
      Fraction& cell = per[s][{sample.token_depths[i], max_depth}];
      cell.total += 1;
      cell.hits += model::predicted_closer(out.logits, i, closers) == sample.tokens[i] ? 1 : 0;
    }
  });
  DepthErrorGrid grid;
  for (const auto& m : per) {
    for (const auto& [k, f] : m) grid.cells[k] += f;
  }
  return grid;
}

std::map<int, std::size_t> AttentionErrorProfile::depth_difference() const {
  std::map<int, std::size_t> out;
  for (const auto& [k, c] : depth) out[k.second - k.first] += c;
  return out;
}

Fraction AttentionErrorProfile::even_nonzero_offsets() const {
  Fraction f;
  for (const auto& [off, c] : offset) {
    if (off == 0) continue;
    f.total += c;
    if (off % 2 == 0) f.hits += c;
  }
  return f;
}

std::size_t attention_argmax(std::span<const float> row) {
  if (row.empty()) throw std::invalid_argument("attention_argmax: empty row");
  std::size_t best = 0;
  for (std::size_t j = 1; j < row.size(); ++j) {
    if (row[j] >= row[best]) best = j;
  }
  return best;
}

AttentionErrorProfile attention_error_profile(const model::Runner& original,
                                              const model::Runner& simplified, int layer,
                                              int head, const dyck::Dataset& dataset,
                                              int min_distance, int threads) {
  const auto closers = model::closer_tokens(dataset.bracket_types);
  std::vector<AttentionErrorProfile> per(dataset.samples.size());
  parallel_for(dataset.samples.size(), threads, [&](std::size_t s) {
    const auto& sample = dataset.samples[s];
    const auto positions = dyck::closing_eval_positions(sample, min_distance);
    if (positions.empty()) return;
    const auto b = simplified.run(sample.tokens, true);
    std::vector<std::size_t> wrong;
    for (std::size_t i : positions) {
      if (model::predicted_closer(b.logits, i, closers) != sample.tokens[i]) wrong.push_back(i);
    }
    if (wrong.empty()) return;
    const auto a = original.run(sample.tokens, true);
    const auto& ha = head_of(a, layer, head);
    const auto& hb = head_of(b, layer, head);
    AttentionErrorProfile& p = per[s];
    for (std::size_t i : wrong) {
      const std::size_t q = i - 1;
      const std::size_t kb = attention_argmax(causal_row(hb.attention, q));
      const std::size_t ka = attention_argmax(causal_row(ha.attention, q));
      p.depth[{sample.token_depths[i], sample.token_depths[kb]}] += 1;
      p.offset[static_cast<long>(kb) - static_cast<long>(ka)] += 1;
      p.positions += 1;
    }
  });
  AttentionErrorProfile total;
  for (const auto& p : per) {
    for (const auto& [k, c] : p.depth) total.depth[k] += c;
    for (const auto& [k, c] : p.offset) total.offset[k] += c;
    total.positions += p.positions;
  }
  return total;
}

AttentionErrorProfile attention_error_profile(const model::ModelParameters<float>& params,
                                              const simplify::FittedSimplifier& fitted,
                                              const dyck::Dataset& dataset, int min_distance,
                                              int threads) {
  const model::ModelRunner original(params);
  const simplify::SimplifiedRunner simplified(params, fitted);
  return attention_error_profile(original, simplified, fitted.spec.layer, fitted.spec.head,
                                 dataset, min_distance, threads);
}

}  // namespace proxylab::faithfulness
