#include "proxylab/faithfulness/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "proxylab/numerics/parallel.hpp"

namespace proxylab::faithfulness {
namespace {

void histogram_add(std::vector<std::size_t>& h, int depth) {
  if (depth < 0) throw std::invalid_argument("negative depth label");
  if (static_cast<std::size_t>(depth) >= h.size()) h.resize(static_cast<std::size_t>(depth) + 1, 0);
  h[static_cast<std::size_t>(depth)] += 1;
}

std::size_t nearest_double(const Tensor<float>& centers, const double* x) {
  const std::size_t d = centers.cols();
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centers.rows(); ++c) {
    double acc = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double diff = x[i] - centers(c, i);
      acc += diff * diff;
    }
    if (acc < best_d) {
      best_d = acc;
      best = c;
    }
  }
  return best;
}

/// Solves the small dense system A x = b (Gaussian elimination, partial pivoting).
std::vector<double> solve(std::vector<double> a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t p = c;
    for (std::size_t r = c + 1; r < n; ++r) {
      if (std::abs(a[r * n + c]) > std::abs(a[p * n + c])) p = r;
    }
    if (a[p * n + c] == 0.0) throw std::runtime_error("singular system in parity fit");
    for (std::size_t j = 0; j < n; ++j) std::swap(a[c * n + j], a[p * n + j]);
    std::swap(b[c], b[p]);
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = a[r * n + c] / a[c * n + c];
      for (std::size_t j = c; j < n; ++j) a[r * n + j] -= f * a[c * n + j];
      b[r] -= f * b[c];
    }
  }
  std::vector<double> x(n);
  for (std::size_t r = n; r-- > 0;) {
    double acc = b[r];
    for (std::size_t j = r + 1; j < n; ++j) acc -= a[r * n + j] * x[j];
    x[r] = acc / a[r * n + r];
  }
  return x;
}

}  // namespace

const char* to_string(Role role) { return role == Role::Key ? "key" : "query"; }

ProjectionTable export_projection(const model::ModelParameters<float>& params, int layer,
                                  int head, const Tensor<float>& basis,
                                  const dyck::Dataset& dataset,
                                  const std::vector<std::size_t>& components, int threads) {
  const std::size_t dh = static_cast<std::size_t>(params.config.head_dim);
  if (basis.rows() != dh) throw std::invalid_argument("basis rows do not match the head dimension");
  for (std::size_t c : components) {
    if (c >= basis.cols()) {
      throw std::invalid_argument("component " + std::to_string(c) + " outside basis of rank " +
                                  std::to_string(basis.cols()));
    }
  }
  std::vector<std::vector<ProjectedPoint>> per(dataset.samples.size());
  parallel_for(dataset.samples.size(), threads, [&](std::size_t s) {
    const auto& sample = dataset.samples[s];
    model::ForwardOptions<float> options;
    options.capture = true;
    const auto out = model::forward(params, sample.tokens, options);
    const auto& h = out.trace->at(layer, head);
    for (Role role : {Role::Key, Role::Query}) {
      const Tensor<float>& emb = role == Role::Key ? h.keys : h.queries;
      for (std::size_t i = 0; i < sample.tokens.size(); ++i) {
        ProjectedPoint p;
        p.sequence = s;
        p.position = i;
        p.role = role;
        p.token = sample.tokens[i];
        p.token_depth = sample.token_depths[i];
        p.prefix_depth = sample.prefix_depths[i];
        p.bracket_type = dyck::is_bracket(p.token, dataset.bracket_types) ? dyck::bracket_type(p.token) : 0;
        double sq = 0.0;
        for (std::size_t k = 0; k < dh; ++k) sq += static_cast<double>(emb(i, k)) * emb(i, k);
        p.norm = std::sqrt(sq);
        for (std::size_t c : components) {
          double acc = 0.0;
          for (std::size_t k = 0; k < dh; ++k) acc += static_cast<double>(emb(i, k)) * basis(k, c);
          p.coords.push_back(acc);
        }
        per[s].push_back(std::move(p));
      }
    }
  });
  ProjectionTable table;
  table.components = components;
  for (auto& v : per) {
    for (auto& p : v) table.points.push_back(std::move(p));
  }
  return table;
}

ParityFit depth_parity_classifier(const ProjectionTable& table, Role role) {
  std::vector<const ProjectedPoint*> pts;
  for (const auto& p : table.points) {
    if (p.role == role && p.token_depth > 0) pts.push_back(&p);
  }
  const std::size_t d = table.components.size() + 1;
  ParityFit fit;
  fit.weights.assign(d, 0.0);
  if (pts.empty()) return fit;
  constexpr double kRidge = 1e-6;
  auto features = [&](const ProjectedPoint& p, std::size_t j) { return j == 0 ? 1.0 : p.coords[j - 1]; };
  for (int iter = 0; iter < 50; ++iter) {
    std::vector<double> grad(d, 0.0), hess(d * d, 0.0);
    for (const auto* p : pts) {
      double z = 0.0;
      for (std::size_t j = 0; j < d; ++j) z += fit.weights[j] * features(*p, j);
      const double mu = 1.0 / (1.0 + std::exp(-z));
      const double y = p->token_depth % 2 == 1 ? 1.0 : 0.0;
      const double w = std::max(mu * (1.0 - mu), 1e-12);
      for (std::size_t j = 0; j < d; ++j) {
        grad[j] += (mu - y) * features(*p, j);
        for (std::size_t k = 0; k < d; ++k) hess[j * d + k] += w * features(*p, j) * features(*p, k);
      }
    }
    for (std::size_t j = 0; j < d; ++j) {
      grad[j] += kRidge * fit.weights[j];
      hess[j * d + j] += kRidge;
    }
    const auto step = solve(hess, grad);
    double change = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      fit.weights[j] -= step[j];
      change = std::max(change, std::abs(step[j]));
    }
    if (change < 1e-10) break;
  }
  for (const auto* p : pts) {
    double z = 0.0;
    for (std::size_t j = 0; j < d; ++j) z += fit.weights[j] * features(*p, j);
    fit.accuracy.total += 1;
    fit.accuracy.hits += (z > 0.0) == (p->token_depth % 2 == 1) ? 1 : 0;
  }
  return fit;
}

int ClusterProfile::mode(const std::vector<std::size_t>& h) {
  int best = -1;
  std::size_t best_count = 0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (h[i] > best_count) {
      best_count = h[i];
      best = static_cast<int>(i);
    }
  }
  return best;
}

Fraction ClusterProfile::matching_modes() const {
  Fraction f;
  for (std::size_t q = 0; q < query_depths.size(); ++q) {
    const int mq = mode(query_depths[q]);
    if (mq < 0) continue;
    f.total += 1;
    f.hits += mode(key_depths[nearest_key[q]]) == mq ? 1 : 0;
  }
  return f;
}

ClusterProfile cluster_depth_profile(const Tensor<float>& key_centers,
                                     const Tensor<float>& query_centers,
                                     const Tensor<double>& keys, const Tensor<double>& queries,
                                     const std::vector<int>& depths) {
  if (keys.rows() != depths.size() || queries.rows() != depths.size()) {
    throw std::invalid_argument("cluster_depth_profile: depth labels do not match embeddings");
  }
  ClusterProfile p;
  p.key_depths.assign(key_centers.rows(), {});
  p.query_depths.assign(query_centers.rows(), {});
  for (std::size_t i = 0; i < depths.size(); ++i) {
    histogram_add(p.key_depths[nearest_double(key_centers, keys.data() + i * keys.cols())], depths[i]);
    histogram_add(p.query_depths[nearest_double(query_centers, queries.data() + i * queries.cols())],
                  depths[i]);
  }
  for (std::size_t q = 0; q < query_centers.rows(); ++q) {
    p.nearest_key.push_back(simplify::nearest_row(key_centers, query_centers.data() + q * query_centers.cols()));
  }
  return p;
}

std::vector<int> token_depth_labels(const dyck::Dataset& dataset) {
  std::vector<int> out;
  for (const auto& s : dataset.samples) out.insert(out.end(), s.token_depths.begin(), s.token_depths.end());
  return out;
}

ClusterProfile cluster_depth_profile(const simplify::FittedSimplifier& fitted,
                                     const model::ModelParameters<float>& params,
                                     const dyck::Dataset& dataset, int threads) {
  if (fitted.spec.kind != simplify::Kind::KMeans) {
    throw std::invalid_argument("cluster_depth_profile needs a kmeans simplifier");
  }
  const auto emb = simplify::collect_embeddings(params, fitted.spec.layer, fitted.spec.head,
                                                model::token_sequences(dataset), threads);
  return cluster_depth_profile(fitted.key_centers, fitted.query_centers, emb.keys, emb.queries,
                               token_depth_labels(dataset));
}

std::vector<FaithfulnessRecord> sweep(const model::ModelParameters<float>& params,
                                      const simplify::SimplifierSpec& base,
                                      const std::vector<int>& strengths,
                                      const std::vector<std::vector<Token>>& fit_sequences,
                                      const std::vector<EvalSet>& evals,
                                      const EvalOptions& options) {
  using simplify::Kind;
  std::vector<simplify::FittedSimplifier> fits;
  if (base.kind == Kind::OneHot) {
    fits.push_back(simplify::fit(base, params, fit_sequences, options.threads));
  } else {
    if (strengths.empty()) throw std::invalid_argument("sweep: no strengths given");
    const auto emb = simplify::collect_embeddings(params, base.layer, base.head, fit_sequences,
                                                  options.threads);
    if (base.kind == Kind::Svd) {
      simplify::SimplifierSpec top = base;
      top.strength = *std::max_element(strengths.begin(), strengths.end());
      top.validate(params.config);
      const auto full = simplify::fit_embeddings(top, emb, fit_sequences.size());
      for (int r : strengths) fits.push_back(simplify::truncate(full, r));
    } else {
      for (int k : strengths) {
        simplify::SimplifierSpec s = base;
        s.strength = k;
        s.validate(params.config);
        fits.push_back(simplify::fit_embeddings(s, emb, fit_sequences.size()));
      }
    }
  }
  std::vector<FaithfulnessRecord> out;
  for (const auto& f : fits) {
    for (const auto& e : evals) out.push_back(evaluate_faithfulness(params, f, e, options));
  }
  return out;
}

}  // namespace proxylab::faithfulness
