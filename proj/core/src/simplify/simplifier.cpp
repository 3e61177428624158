#include "proxylab/simplify/simplifier.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "proxylab/model/checkpoint.hpp"
#include "proxylab/numerics/gemm.hpp"
#include "proxylab/numerics/kmeans.hpp"
#include "proxylab/numerics/parallel.hpp"
#include "proxylab/numerics/svd.hpp"

namespace proxylab::simplify {
namespace {

using nlohmann::json;

Tensor<double> stack_rows(const Tensor<double>& a, const Tensor<double>& b) {
  Tensor<double> out = Tensor<double>::matrix(a.rows() + b.rows(), a.cols());
  std::copy_n(a.data(), a.size(), out.data());
  std::copy_n(b.data(), b.size(), out.data() + a.size());
  return out;
}

Tensor<float> to_float(const Tensor<double>& t) { return t.cast<float>(); }

void quantize(Tensor<float>& rows, const Tensor<float>& centers) {
  const std::size_t d = rows.cols();
  for (std::size_t r = 0; r < rows.rows(); ++r) {
    float* row = rows.data() + r * d;
    const std::size_t c = nearest_row(centers, row);
    std::copy_n(centers.data() + c * d, d, row);
  }
}

void project(Tensor<float>& rows, const Tensor<float>& projection) {
  Tensor<float> out = Tensor<float>::matrix(rows.rows(), projection.cols());
  gemm::nn(rows.rows(), projection.cols(), rows.cols(), rows.data(), rows.cols(),
           projection.data(), projection.cols(), out.data(), out.cols());
  rows = std::move(out);
}

json spec_json(const SimplifierSpec& s) {
  return {{"layer", s.layer},
          {"head", s.head},
          {"kind", to_string(s.kind)},
          {"strength", s.strength},
          {"fit", {{"dataset", s.fit.dataset}, {"sequences", s.fit.sequences}, {"seed", s.fit.seed}}}};
}

SimplifierSpec spec_from(const json& j) {
  SimplifierSpec s;
  s.layer = j.at("layer").get<int>();
  s.head = j.at("head").get<int>();
  s.kind = kind_from(j.at("kind").get<std::string>());
  s.strength = j.at("strength").get<int>();
  const json& f = j.at("fit");
  s.fit.dataset = f.at("dataset").get<std::string>();
  s.fit.sequences = f.at("sequences").get<std::size_t>();
  s.fit.seed = f.at("seed").get<std::uint64_t>();
  return s;
}

}  // namespace

std::string to_string(Kind kind) {
  switch (kind) {
    case Kind::Svd: return "svd";
    case Kind::KMeans: return "kmeans";
    case Kind::OneHot: return "onehot";
  }
  return "svd";
}

Kind kind_from(const std::string& name) {
  if (name == "svd") return Kind::Svd;
  if (name == "kmeans") return Kind::KMeans;
  if (name == "onehot") return Kind::OneHot;
  throw std::invalid_argument("simplifier kind must be svd, kmeans or onehot, got '" + name + "'");
}

void SimplifierSpec::validate(const model::ModelConfig& config) const {
  if (layer < 0 || layer >= config.layers || head < 0 || head >= config.heads) {
    throw std::invalid_argument("simplifier targets layer " + std::to_string(layer) + " head " +
                                std::to_string(head) + ", model has " +
                                std::to_string(config.layers) + "x" + std::to_string(config.heads));
  }
  if (kind == Kind::Svd && (strength < 0 || strength > config.head_dim)) {
    throw std::invalid_argument("svd rank " + std::to_string(strength) + " outside [0, " +
                                std::to_string(config.head_dim) + "]");
  }
  if (kind == Kind::KMeans && strength < 1) {
    throw std::invalid_argument("kmeans needs at least one cluster");
  }
}

std::vector<std::vector<Token>> select_fit_sequences(const std::vector<std::vector<Token>>& pool,
                                                     const FitSample& sample) {
  std::vector<std::size_t> idx(pool.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(derive_seed(sample.seed, "fit-sample"));
  rng.shuffle(idx.begin(), idx.end());
  const std::size_t n = std::min(sample.sequences, pool.size());
  std::vector<std::vector<Token>> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(pool[idx[i]]);
  return out;
}

Embeddings collect_embeddings(const model::ModelParameters<float>& params, int layer, int head,
                              const std::vector<std::vector<Token>>& sequences, int threads) {
  const std::size_t dh = static_cast<std::size_t>(params.config.head_dim);
  std::vector<model::HeadTrace<float>> per(sequences.size());
  parallel_for(sequences.size(), threads, [&](std::size_t i) {
    model::ForwardOptions<float> options;
    options.capture = true;
    auto out = model::forward(params, sequences[i], options);
    per[i] = std::move(out.trace->at(layer, head));
  });
  std::size_t rows = 0;
  for (const auto& s : sequences) rows += s.size();
  Embeddings e{Tensor<double>::matrix(rows, dh), Tensor<double>::matrix(rows, dh)};
  std::size_t r = 0;
  for (const auto& ht : per) {
    for (std::size_t i = 0; i < ht.keys.size(); ++i) {
      e.keys[r * dh + i] = ht.keys[i];
      e.queries[r * dh + i] = ht.queries[i];
    }
    r += ht.keys.rows();
  }
  return e;
}

FittedSimplifier fit_embeddings(const SimplifierSpec& spec, const Embeddings& emb,
                                std::size_t fit_sequences) {
  FittedSimplifier f;
  f.spec = spec;
  f.fit_sequences = fit_sequences;
  f.fit_rows = emb.keys.rows();
  const std::size_t dh = emb.keys.cols();
  switch (spec.kind) {
    case Kind::OneHot:
      break;
    case Kind::Svd: {
      if (emb.keys.rows() == 0) throw std::invalid_argument("svd fit: no embeddings");
      SvdOptions opts;
      opts.compute_u = false;
      const SvdResult s = svd(stack_rows(emb.keys, emb.queries), opts);
      f.singular_values = s.s;
      const double smax = s.s.empty() ? 0.0 : s.s.front();
      const double tol = smax * static_cast<double>(std::max(emb.keys.rows() * 2, dh)) * 1e-15;
      const auto data_rank = static_cast<int>(
          std::count_if(s.s.begin(), s.s.end(), [&](double v) { return v > tol; }));
      if (spec.strength > data_rank) {
        throw std::invalid_argument("svd rank " + std::to_string(spec.strength) +
                                    " exceeds the numerical rank " + std::to_string(data_rank) +
                                    " of the fit embeddings");
      }
      const auto r = static_cast<std::size_t>(spec.strength);
      f.basis = Tensor<float>::matrix(dh, r);
      for (std::size_t i = 0; i < dh; ++i) {
        for (std::size_t c = 0; c < r; ++c) f.basis(i, c) = static_cast<float>(s.v(i, c));
      }
      break;
    }
    case Kind::KMeans: {
      const auto k = static_cast<std::size_t>(spec.strength);
      if (k > emb.keys.rows()) {
        throw std::invalid_argument("kmeans: " + std::to_string(k) + " clusters but only " +
                                    std::to_string(emb.keys.rows()) + " embeddings");
      }
      f.key_centers = to_float(kmeans(emb.keys, k, derive_seed(spec.fit.seed, "kmeans-keys")).centers);
      f.query_centers =
          to_float(kmeans(emb.queries, k, derive_seed(spec.fit.seed, "kmeans-queries")).centers);
      break;
    }
  }
  return f;
}

FittedSimplifier fit(const SimplifierSpec& spec, const model::ModelParameters<float>& params,
                     const std::vector<std::vector<Token>>& fit_sequences, int threads) {
  spec.validate(params.config);
  if (fit_sequences.empty()) throw std::invalid_argument("simplifier fit: empty fit dataset");
  if (spec.kind == Kind::OneHot) {
    FittedSimplifier f;
    f.spec = spec;
    f.fit_sequences = fit_sequences.size();
    return f;
  }
  const Embeddings emb = collect_embeddings(params, spec.layer, spec.head, fit_sequences, threads);
  return fit_embeddings(spec, emb, fit_sequences.size());
}

FittedSimplifier truncate(const FittedSimplifier& svd_fit, int rank) {
  if (svd_fit.spec.kind != Kind::Svd) throw std::invalid_argument("truncate: not an svd fit");
  if (rank < 0 || rank > svd_fit.spec.strength) {
    throw std::invalid_argument("truncate: rank " + std::to_string(rank) + " above fitted rank " +
                                std::to_string(svd_fit.spec.strength));
  }
  FittedSimplifier f = svd_fit;
  f.spec.strength = rank;
  const std::size_t dh = svd_fit.basis.rows();
  f.basis = Tensor<float>::matrix(dh, static_cast<std::size_t>(rank));
  for (std::size_t i = 0; i < dh; ++i) {
    for (std::size_t c = 0; c < static_cast<std::size_t>(rank); ++c) f.basis(i, c) = svd_fit.basis(i, c);
  }
  return f;
}

std::size_t nearest_row(const Tensor<float>& centers, const float* point) {
  const std::size_t d = centers.cols();
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centers.rows(); ++c) {
    const float* row = centers.data() + c * d;
    double acc = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double diff = static_cast<double>(point[i]) - row[i];
      acc += diff * diff;
    }
    if (acc < best_d) {
      best_d = acc;
      best = c;
    }
  }
  return best;
}

SimplifierIntervention::SimplifierIntervention(const FittedSimplifier& fitted)
    : kind_(fitted.spec.kind) {
  if (kind_ == Kind::Svd) {
    const std::size_t dh = fitted.basis.rows(), r = fitted.basis.cols();
    projection_ = Tensor<float>::matrix(dh, dh);
    for (std::size_t i = 0; i < dh; ++i) {
      for (std::size_t j = 0; j < dh; ++j) {
        double acc = 0.0;
        for (std::size_t c = 0; c < r; ++c) {
          acc += static_cast<double>(fitted.basis(i, c)) * fitted.basis(j, c);
        }
        projection_(i, j) = static_cast<float>(acc);
      }
    }
  } else if (kind_ == Kind::KMeans) {
    key_centers_ = fitted.key_centers;
    query_centers_ = fitted.query_centers;
  }
}

void SimplifierIntervention::transform_queries(Tensor<float>& queries) const {
  if (kind_ == Kind::Svd) project(queries, projection_);
  if (kind_ == Kind::KMeans) quantize(queries, query_centers_);
}

void SimplifierIntervention::transform_keys(Tensor<float>& keys) const {
  if (kind_ == Kind::Svd) project(keys, projection_);
  if (kind_ == Kind::KMeans) quantize(keys, key_centers_);
}

SimplifiedRunner::SimplifiedRunner(const model::ModelParameters<float>& params,
                                   const FittedSimplifier& fitted,
                                   std::vector<model::HeadHook<float>> extra_hooks)
    : params_(params), fitted_(fitted), intervention_(fitted), extra_hooks_(std::move(extra_hooks)) {
  fitted.spec.validate(params.config);
}

model::ForwardResult<float> SimplifiedRunner::run(std::span<const Token> tokens, bool capture) const {
  model::ForwardOptions<float> options;
  options.capture = capture;
  options.hooks.push_back({fitted_.spec.layer, fitted_.spec.head, &intervention_});
  options.hooks.insert(options.hooks.end(), extra_hooks_.begin(), extra_hooks_.end());
  return model::forward(params_, tokens, options);
}

model::ForwardResult<float> run_simplified(const model::ModelParameters<float>& params,
                                           const FittedSimplifier& fitted,
                                           std::span<const Token> tokens) {
  return SimplifiedRunner(params, fitted).run(tokens, true);
}

void save_fitted(const std::filesystem::path& path, const FittedSimplifier& f) {
  const json meta = {{"spec", spec_json(f.spec)},
                     {"singular_values", f.singular_values},
                     {"fit_sequences", f.fit_sequences},
                     {"fit_rows", f.fit_rows}};
  std::vector<std::pair<std::string, const Tensor<float>*>> tensors;
  if (f.spec.kind == Kind::Svd) tensors.emplace_back("basis", &f.basis);
  if (f.spec.kind == Kind::KMeans) {
    tensors.emplace_back("key_centers", &f.key_centers);
    tensors.emplace_back("query_centers", &f.query_centers);
  }
  model::write_container(path, "simplifier", meta.dump(), tensors);
}

FittedSimplifier load_fitted(const std::filesystem::path& path) {
  model::ContainerHeader header;
  auto tensors = model::read_container<float>(path, &header);
  if (header.kind != "simplifier") {
    throw std::runtime_error(path.string() + " holds a '" + header.kind + "', not a simplifier");
  }
  const json meta = json::parse(header.meta_json);
  FittedSimplifier f;
  f.spec = spec_from(meta.at("spec"));
  f.singular_values = meta.at("singular_values").get<std::vector<double>>();
  f.fit_sequences = meta.at("fit_sequences").get<std::size_t>();
  f.fit_rows = meta.at("fit_rows").get<std::size_t>();
  for (auto& [name, t] : tensors) {
    if (name == "basis") f.basis = std::move(t);
    else if (name == "key_centers") f.key_centers = std::move(t);
    else if (name == "query_centers") f.query_centers = std::move(t);
    else throw std::runtime_error(path.string() + ": unexpected tensor '" + name + "'");
  }
  return f;
}

}  // namespace proxylab::simplify
