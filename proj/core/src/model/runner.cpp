#include "proxylab/model/runner.hpp"

#include <stdexcept>

#include "proxylab/numerics/parallel.hpp"

namespace proxylab::model {

ForwardResult<float> ModelRunner::run(std::span<const Token> tokens, bool capture) const {
  ForwardOptions<float> options;
  options.capture = capture;
  options.hooks = hooks_;
  return forward(params_, tokens, options);
}

std::vector<Token> closer_tokens(int k) {
  std::vector<Token> out;
  for (int t = 1; t <= k; ++t) out.push_back(dyck::closer_of_type(t));
  return out;
}

Token restricted_argmax(std::span<const float> logits, std::span<const Token> candidates) {
  if (candidates.empty()) throw std::invalid_argument("restricted_argmax: no candidates");
  Token best = candidates.front();
  for (Token c : candidates) {
    if (static_cast<std::size_t>(c) >= logits.size()) {
      throw std::invalid_argument("restricted_argmax: candidate outside logits");
    }
    if (logits[static_cast<std::size_t>(c)] > logits[static_cast<std::size_t>(best)]) best = c;
  }
  return best;
}

Token argmax(std::span<const float> logits) {
  if (logits.empty()) throw std::invalid_argument("argmax: empty row");
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i) {
    if (logits[i] > logits[best]) best = i;
  }
  return static_cast<Token>(best);
}

Token predicted_closer(const Tensor<float>& logits, std::size_t position,
                       std::span<const Token> closers) {
  if (position == 0 || position > logits.rows()) {
    throw std::out_of_range("predicted_closer: position has no preceding query");
  }
  const std::size_t v = logits.cols();
  return restricted_argmax(std::span<const float>(logits.data() + (position - 1) * v, v), closers);
}

Fraction closing_bracket_accuracy(const Runner& runner, const dyck::Dataset& dataset,
                                  int min_distance, int threads) {
  const std::vector<Token> closers = closer_tokens(dataset.bracket_types);
  std::vector<Fraction> per(dataset.samples.size());
  parallel_for(dataset.samples.size(), threads, [&](std::size_t s) {
    const auto& sample = dataset.samples[s];
    const auto positions = dyck::closing_eval_positions(sample, min_distance);
    if (positions.empty()) return;
    const ForwardResult<float> out = runner.run(sample.tokens, false);
    for (std::size_t i : positions) {
      per[s].total += 1;
      per[s].hits += predicted_closer(out.logits, i, closers) == sample.tokens[i] ? 1 : 0;
    }
  });
  Fraction total;
  for (const auto& f : per) total += f;
  return total;
}

std::vector<std::vector<Token>> token_sequences(const dyck::Dataset& dataset) {
  std::vector<std::vector<Token>> out;
  out.reserve(dataset.samples.size());
  for (const auto& s : dataset.samples) out.push_back(s.tokens);
  return out;
}

std::vector<CurvePoint> closing_accuracy_curve(const ModelParameters<float>& params,
                                               const dyck::SplitBundle& bundle, std::size_t step,
                                               std::size_t subsample, int threads) {
  const ModelRunner runner(params);
  std::vector<CurvePoint> out;
  for (const auto& ds : bundle.datasets) {
    dyck::Dataset head;
    head.name = ds.name;
    head.bracket_types = ds.bracket_types;
    const std::size_t n = std::min(subsample, ds.samples.size());
    head.samples.assign(ds.samples.begin(), ds.samples.begin() + static_cast<std::ptrdiff_t>(n));
    const auto acc = closing_bracket_accuracy(runner, head, 10, threads).value();
    if (acc) out.push_back({step, ds.name, "closing_accuracy", *acc});
  }
  return out;
}

}  // namespace proxylab::model
