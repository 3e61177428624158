#include "proxylab/code/analysis.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <map>
#include <stdexcept>

#include "proxylab/numerics/parallel.hpp"
#include "proxylab/numerics/special.hpp"

namespace proxylab::code {
namespace {

std::span<const float> row_of(const Tensor<float>& t, std::size_t r) {
  return {t.data() + r * t.cols(), t.cols()};
}

std::string rate(const Fraction& f) {
  const auto v = f.value();
  if (!v) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", *v);
  return buf;
}

/// Argmax next-character prediction for every character position.
std::vector<Token> predictions(const model::Runner& runner, const CodeFunction& f) {
  const auto tokens = f.tokens();
  const auto out = runner.run(tokens, false);
  std::vector<Token> p(f.text.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = model::argmax(row_of(out.logits, i));
  return p;
}

}  // namespace

PairedTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("paired_t_test: samples differ in length");
  if (a.size() < 2) throw std::invalid_argument("paired_t_test: needs at least two pairs");
  PairedTestResult r;
  r.n = a.size();
  r.dof = static_cast<double>(r.n - 1);
  double mean = 0.0;
  for (std::size_t i = 0; i < r.n; ++i) mean += a[i] - b[i];
  mean /= static_cast<double>(r.n);
  double ss = 0.0;
  for (std::size_t i = 0; i < r.n; ++i) {
    const double d = a[i] - b[i] - mean;
    ss += d * d;
  }
  r.mean_difference = mean;
  const double sd = std::sqrt(ss / r.dof);
  if (sd == 0.0) {
    r.degenerate = true;
    r.t = mean == 0.0 ? 0.0 : std::copysign(INFINITY, mean);
    r.p = mean == 0.0 ? 1.0 : 0.0;
    return r;
  }
  r.t = mean / (sd / std::sqrt(static_cast<double>(r.n)));
  r.p = student_t_two_sided_p(r.t, r.dof);
  return r;
}

std::vector<std::vector<std::size_t>> character_positions(const CodeSplit& split) {
  std::vector<std::vector<std::size_t>> out;
  for (const auto& f : split.functions) {
    std::vector<std::size_t> p(f.text.size());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = i + 1;
    out.push_back(std::move(p));
  }
  return out;
}

CategoryAccuracy category_accuracy(const model::Runner& runner, const CodeSplit& split, int threads) {
  std::vector<CategoryAccuracy> per(split.functions.size());
  parallel_for(split.functions.size(), threads, [&](std::size_t s) {
    const auto& f = split.functions[s];
    const auto pred = predictions(runner, f);
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const bool hit = pred[i] == CharVocab::id(f.text[i]);
      auto& cell = per[s].per_category[static_cast<int>(f.labels[i])];
      cell.total += 1;
      cell.hits += hit ? 1 : 0;
      per[s].overall.total += 1;
      per[s].overall.hits += hit ? 1 : 0;
    }
  });
  CategoryAccuracy total;
  for (const auto& p : per) {
    for (int c = 0; c < kCategoryCount; ++c) total.per_category[c] += p.per_category[c];
    total.overall += p.overall;
  }
  return total;
}

std::vector<HeadSweepRecord> per_head_sweep(const model::ModelParameters<float>& params,
                                            const CodeSplit& fit_split,
                                            const std::vector<const CodeSplit*>& splits,
                                            const SweepOptions& options) {
  if (options.ranks.empty()) throw std::invalid_argument("per_head_sweep: no ranks");
  const int max_rank = *std::max_element(options.ranks.begin(), options.ranks.end());
  const model::ModelRunner original(params);
  // Original predictions are shared by every head and rank.
  std::vector<std::vector<std::vector<Token>>> base(splits.size());
  for (std::size_t s = 0; s < splits.size(); ++s) {
    base[s].resize(splits[s]->functions.size());
    parallel_for(splits[s]->functions.size(), options.threads,
                 [&](std::size_t i) { base[s][i] = predictions(original, splits[s]->functions[i]); });
  }
  simplify::FitSample sample;
  sample.dataset = fit_split.name;
  sample.sequences = options.fit_sequences;
  sample.seed = options.seed;
  const auto fit_seqs = simplify::select_fit_sequences(token_sequences(fit_split), sample);
  std::vector<HeadSweepRecord> out;
  for (int l = 0; l < params.config.layers; ++l) {
    for (int h = 0; h < params.config.heads; ++h) {
      simplify::SimplifierSpec spec;
      spec.layer = l;
      spec.head = h;
      spec.kind = simplify::Kind::Svd;
      spec.strength = max_rank;
      spec.fit = sample;
      const auto full = simplify::fit(spec, params, fit_seqs, options.threads);
      for (int r : options.ranks) {
        const auto fitted = simplify::truncate(full, r);
        const simplify::SimplifiedRunner proxy(params, fitted);
        for (std::size_t s = 0; s < splits.size(); ++s) {
          const auto& split = *splits[s];
          // Slot 0 is "all", then one per category.
          std::vector<std::array<Fraction, 2 * (kCategoryCount + 1)>> per(split.functions.size());
          parallel_for(split.functions.size(), options.threads, [&](std::size_t i) {
            const auto& f = split.functions[i];
            const auto pred = predictions(proxy, f);
            for (std::size_t j = 0; j < pred.size(); ++j) {
              const bool same = pred[j] == base[s][i][j];
              const bool correct = base[s][i][j] == CharVocab::id(f.text[j]);
              for (std::size_t slot : {std::size_t{0}, static_cast<std::size_t>(f.labels[j]) + 1}) {
                per[i][2 * slot].total += 1;
                per[i][2 * slot].hits += same ? 1 : 0;
                if (correct) {
                  per[i][2 * slot + 1].total += 1;
                  per[i][2 * slot + 1].hits += same ? 1 : 0;
                }
              }
            }
          });
          std::array<Fraction, 2 * (kCategoryCount + 1)> total{};
          for (const auto& p : per) {
            for (std::size_t k = 0; k < total.size(); ++k) total[k] += p[k];
          }
          for (std::size_t slot = 0; slot <= static_cast<std::size_t>(kCategoryCount); ++slot) {
            HeadSweepRecord rec;
            rec.layer = l;
            rec.head = h;
            rec.rank = r;
            rec.split = split.name;
            rec.category = slot == 0 ? "all" : to_string(all_categories()[slot - 1]);
            rec.same = total[2 * slot];
            rec.same_correct = total[2 * slot + 1];
            out.push_back(std::move(rec));
          }
        }
      }
    }
  }
  return out;
}

std::optional<double> generalization_gap(const std::vector<HeadSweepRecord>& records, int layer,
                                         int head, int rank, const std::string& category,
                                         const std::string& in_split,
                                         const std::vector<std::string>& out_splits,
                                         bool correct_only) {
  Fraction in, out;
  for (const auto& r : records) {
    if (r.layer != layer || r.head != head || r.rank != rank || r.category != category) continue;
    const Fraction& f = correct_only ? r.same_correct : r.same;
    if (r.split == in_split) in += f;
    if (std::find(out_splits.begin(), out_splits.end(), r.split) != out_splits.end()) out += f;
  }
  const auto a = in.value(), b = out.value();
  if (!a || !b) return std::nullopt;
  return *a - *b;
}

void write_head_sweep_csv(std::ostream& out, const std::vector<HeadSweepRecord>& records) {
  out << "layer,head,rank,split,category,same_hits,same_total,same_rate,correct_hits,"
         "correct_total,correct_rate\n";
  for (const auto& r : records) {
    out << r.layer << ',' << r.head << ',' << r.rank << ',' << r.split << ',' << r.category << ','
        << r.same.hits << ',' << r.same.total << ',' << rate(r.same) << ',' << r.same_correct.hits
        << ',' << r.same_correct.total << ',' << rate(r.same_correct) << '\n';
  }
}

std::vector<HeadSweepRecord> read_head_sweep_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line.rfind("layer,head,rank,split,category", 0) != 0) {
    throw std::runtime_error(path.string() + ": not a head sweep CSV");
  }
  std::vector<HeadSweepRecord> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 11) throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected 11 fields");
    HeadSweepRecord r;
    r.layer = std::stoi(f[0]);
    r.head = std::stoi(f[1]);
    r.rank = std::stoi(f[2]);
    r.split = f[3];
    r.category = f[4];
    r.same = {std::stoull(f[5]), std::stoull(f[6])};
    r.same_correct = {std::stoull(f[8]), std::stoull(f[9])};
    out.push_back(std::move(r));
  }
  return out;
}

RunScores head_averaged_scores(const std::vector<HeadSweepRecord>& records, int rank,
                               const std::string& in_split,
                               const std::vector<std::string>& out_splits, bool correct_only) {
  std::map<std::pair<int, int>, std::pair<Fraction, Fraction>> per_head;
  for (const auto& r : records) {
    if (r.rank != rank || r.category != "all") continue;
    const Fraction& f = correct_only ? r.same_correct : r.same;
    auto& cell = per_head[{r.layer, r.head}];
    if (r.split == in_split) cell.first += f;
    if (std::find(out_splits.begin(), out_splits.end(), r.split) != out_splits.end()) cell.second += f;
  }
  double in_sum = 0, out_sum = 0;
  std::size_t in_n = 0, out_n = 0;
  for (const auto& [_, cell] : per_head) {
    if (const auto v = cell.first.value()) {
      in_sum += *v;
      ++in_n;
    }
    if (const auto v = cell.second.value()) {
      out_sum += *v;
      ++out_n;
    }
  }
  RunScores s;
  if (in_n) s.in_domain = in_sum / static_cast<double>(in_n);
  if (out_n) s.out_domain = out_sum / static_cast<double>(out_n);
  return s;
}

void write_category_csv(std::ostream& out, const std::string& split, const CategoryAccuracy& acc) {
  out << "split,category,hits,total,accuracy\n";
  for (Category c : all_categories()) {
    const auto& f = acc.per_category[static_cast<int>(c)];
    out << split << ',' << to_string(c) << ',' << f.hits << ',' << f.total << ',' << rate(f) << '\n';
  }
  out << split << ",all," << acc.overall.hits << ',' << acc.overall.total << ','
      << rate(acc.overall) << '\n';
}

std::optional<double> HeadInspection::previous_token_score() const {
  if (previous_token_count == 0) return std::nullopt;
  return previous_token_sum / static_cast<double>(previous_token_count);
}

std::optional<double> HeadInspection::induction_score() const {
  if (induction_count == 0) return std::nullopt;
  return induction_sum / static_cast<double>(induction_count);
}

std::vector<std::size_t> induction_targets(std::span<const Token> tokens, std::size_t i) {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < i; ++j) {
    if (tokens[j] == tokens[i] && j + 1 <= i) out.push_back(j + 1);
  }
  return out;
}

void accumulate_head_scores(HeadInspection& ins, const Tensor<float>& attention,
                            std::span<const Token> tokens) {
  for (std::size_t i = 1; i < tokens.size(); ++i) {
    ins.previous_token_sum += attention(i, i - 1);
    ins.previous_token_count += 1;
    const auto targets = induction_targets(tokens, i);
    if (targets.empty()) continue;
    double mass = 0.0;
    for (std::size_t t : targets) mass += attention(i, t);
    ins.induction_sum += mass;
    ins.induction_count += 1;
  }
}

HeadInspection inspect_head(const model::ModelParameters<float>& params, int layer, int head,
                            const std::vector<std::vector<Token>>& sequences, std::size_t first_n,
                            int threads) {
  std::vector<HeadInspection> per(sequences.size());
  std::vector<Tensor<float>> crops(sequences.size());
  parallel_for(sequences.size(), threads, [&](std::size_t s) {
    model::ForwardOptions<float> options;
    options.capture = true;
    const auto out = model::forward(params, sequences[s], options);
    const auto& a = out.trace->at(layer, head).attention;
    accumulate_head_scores(per[s], a, sequences[s]);
    const std::size_t n = std::min(first_n, sequences[s].size());
    crops[s] = Tensor<float>::matrix(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) crops[s](i, j) = a(i, j);
    }
  });
  HeadInspection total;
  for (std::size_t s = 0; s < per.size(); ++s) {
    total.previous_token_sum += per[s].previous_token_sum;
    total.previous_token_count += per[s].previous_token_count;
    total.induction_sum += per[s].induction_sum;
    total.induction_count += per[s].induction_count;
    total.attention.push_back(std::move(crops[s]));
  }
  return total;
}

}  // namespace proxylab::code
