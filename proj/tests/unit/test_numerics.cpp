#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "proxylab/numerics/divergence.hpp"
#include "proxylab/numerics/gemm.hpp"
#include "proxylab/numerics/grad_check.hpp"
#include "proxylab/numerics/kmeans.hpp"
#include "proxylab/numerics/ops.hpp"
#include "proxylab/numerics/parallel.hpp"
#include "proxylab/numerics/rng.hpp"
#include "proxylab/numerics/special.hpp"
#include "proxylab/numerics/svd.hpp"
#include "proxylab/numerics/tape.hpp"

namespace proxylab {
namespace {

Tensor<double> random_matrix(std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  Tensor<double> m = Tensor<double>::matrix(n, d);
  for (auto& v : m.values()) v = rng.normal();
  return m;
}

std::vector<double> random_distribution(std::size_t n, Rng& rng, double zero_rate = 0.0) {
  std::vector<double> p(n);
  double total = 0.0;
  for (auto& v : p) {
    v = rng.bernoulli(zero_rate) ? 0.0 : rng.uniform();
    total += v;
  }
  if (total == 0.0) p[0] = total = 1.0;
  for (auto& v : p) v /= total;
  return p;
}

// ---- jsd ----

TEST(Jsd, IdenticalDistributionsAreZero) {
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    const auto p = random_distribution(1 + rng.below(30), rng, 0.2);
    EXPECT_NEAR(jsd(p, p), 0.0, 1e-15);
  }
}

TEST(Jsd, DisjointSupportIsOneBit) {
  const std::vector<double> p{1, 0}, q{0, 1};
  EXPECT_DOUBLE_EQ(jsd(p, q), 1.0);
}

TEST(Jsd, HalfAgainstPointMass) {
  // m = (3/4, 1/4): KL(p||m) = ½log2(2/3) + ½log2(2), KL(q||m) = log2(4/3).
  const double expected = 0.5 * (0.5 * std::log2(2.0 / 3.0) + 0.5) + 0.5 * std::log2(4.0 / 3.0);
  const std::vector<double> p{0.5, 0.5}, q{1, 0};
  EXPECT_NEAR(jsd(p, q), expected, 1e-12);
  EXPECT_NEAR(jsd(p, q), 0.3113, 5e-5);
}

TEST(Jsd, SymmetricAndBounded) {
  Rng rng(2);
  for (int i = 0; i < 500; ++i) {
    const std::size_t n = 1 + rng.below(20);
    const auto p = random_distribution(n, rng, 0.3);
    const auto q = random_distribution(n, rng, 0.3);
    const double a = jsd(p, q), b = jsd(q, p);
    EXPECT_NEAR(a, b, 1e-14);
    EXPECT_GE(a, 0.0);
    EXPECT_LE(a, 1.0 + 1e-12);
    if (p != q) { EXPECT_GT(a, 0.0); }
  }
}

TEST(Jsd, RenormalizesAndValidates) {
  const std::vector<double> p{2, 2}, q{3, 0};
  EXPECT_NEAR(jsd(p, q), jsd(std::vector<double>{0.5, 0.5}, std::vector<double>{1, 0}), 1e-14);
  EXPECT_THROW(jsd(std::vector<double>{1, 0}, std::vector<double>{1}), std::invalid_argument);
  EXPECT_THROW(jsd(std::vector<double>{-0.5, 1.5}, std::vector<double>{0.5, 0.5}), std::invalid_argument);
  EXPECT_THROW(jsd(std::vector<double>{0, 0}, std::vector<double>{0.5, 0.5}), std::invalid_argument);
}

TEST(Jsd, FloatOverloadMatchesDouble) {
  Rng rng(3);
  const auto p = random_distribution(17, rng), q = random_distribution(17, rng);
  std::vector<float> pf(p.begin(), p.end()), qf(q.begin(), q.end());
  EXPECT_NEAR(jsd(pf, qf), jsd(p, q), 1e-6);
}

TEST(KlDivergence, InfiniteWhenSupportMissing) {
  EXPECT_TRUE(std::isinf(kl_divergence_bits(std::vector<double>{0.5, 0.5}, std::vector<double>{1, 0})));
  EXPECT_DOUBLE_EQ(kl_divergence_bits(std::vector<double>{1, 0}, std::vector<double>{0.5, 0.5}), 1.0);
}

// ---- svd ----

void expect_svd_invariants(const Tensor<double>& a, const SvdResult& r) {
  const std::size_t n = a.rows(), d = a.cols(), p = std::min(n, d);
  ASSERT_EQ(r.s.size(), p);
  ASSERT_EQ(r.u.rows(), n);
  ASSERT_EQ(r.u.cols(), p);
  ASSERT_EQ(r.v.rows(), d);
  ASSERT_EQ(r.v.cols(), p);
  double amax = max_abs(a);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      double rec = 0.0;
      for (std::size_t c = 0; c < p; ++c) rec += r.u(i, c) * r.s[c] * r.v(j, c);
      ASSERT_LT(std::abs(rec - a(i, j)), 1e-5 * std::max(amax, 1e-300) + 1e-300);
    }
  }
  for (std::size_t c = 0; c < p; ++c) {
    EXPECT_GE(r.s[c], 0.0);
    if (c + 1 < p) { EXPECT_GE(r.s[c], r.s[c + 1]); }
  }
  auto check_orthonormal = [&](const Tensor<double>& m, bool skip_null) {
    for (std::size_t x = 0; x < p; ++x) {
      if (skip_null && r.s[x] <= 1e-12 * std::max(r.s[0], 1e-300)) continue;
      for (std::size_t y = x; y < p; ++y) {
        if (skip_null && r.s[y] <= 1e-12 * std::max(r.s[0], 1e-300)) continue;
        double dot = 0.0;
        for (std::size_t i = 0; i < m.rows(); ++i) dot += m(i, x) * m(i, y);
        EXPECT_NEAR(dot, x == y ? 1.0 : 0.0, 1e-6);
      }
    }
  };
  check_orthonormal(r.v, false);
  check_orthonormal(r.u, true);
  // sign convention: largest-magnitude entry of each U column is positive
  for (std::size_t c = 0; c < p; ++c) {
    double best = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (std::abs(r.u(i, c)) > std::abs(best)) best = r.u(i, c);
    }
    if (best != 0.0) { EXPECT_GT(best, 0.0); }
  }
}

TEST(Svd, Identity) {
  Tensor<double> eye = Tensor<double>::matrix(3, 3);
  for (std::size_t i = 0; i < 3; ++i) eye(i, i) = 1.0;
  const auto r = svd(eye);
  ASSERT_EQ(r.s.size(), 3u);
  for (double s : r.s) EXPECT_NEAR(s, 1.0, 1e-14);
  expect_svd_invariants(eye, r);
}

TEST(Svd, RankOneTwoByTwo) {
  // AᵀA = [[5,10],[10,20]] has eigenvalues {25, 0}.
  const Tensor<double> a({2, 2}, {1, 2, 2, 4});
  const auto r = svd(a);
  EXPECT_NEAR(r.s[0], 5.0, 1e-12);
  EXPECT_NEAR(r.s[1], 0.0, 1e-12);
  expect_svd_invariants(a, r);
}

TEST(Svd, RandomShapesUpTo512x64) {
  const std::vector<std::pair<std::size_t, std::size_t>> shapes{
      {1, 1}, {1, 7}, {7, 1}, {5, 3}, {3, 5}, {32, 32}, {100, 16}, {512, 64}, {64, 128}};
  std::uint64_t seed = 10;
  for (auto [n, d] : shapes) {
    const auto a = random_matrix(n, d, seed++);
    expect_svd_invariants(a, svd(a));
  }
}

TEST(Svd, RankDeficientAndScaled) {
  auto a = random_matrix(40, 3, 5);
  Tensor<double> b = Tensor<double>::matrix(40, 6);
  for (std::size_t i = 0; i < 40; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      b(i, j) = 1e6 * a(i, j);
      b(i, j + 3) = 1e6 * (a(i, j) + a(i, (j + 1) % 3));
    }
  }
  const auto r = svd(b);
  EXPECT_LT(r.s[3], 1e-6 * r.s[0]);
  expect_svd_invariants(b, r);
}

TEST(Svd, SingularValuesMatchGramEigenvalues) {
  // Independent oracle: power iteration with deflation on AᵀA.
  const auto a = random_matrix(30, 5, 77);
  Tensor<double> g = Tensor<double>::matrix(5, 5);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j)
      for (std::size_t r = 0; r < 30; ++r) g(i, j) += a(r, i) * a(r, j);
  const auto res = svd(a);
  for (std::size_t c = 0; c < 5; ++c) {
    std::vector<double> x(5, 1.0), y(5);
    double lambda = 0.0;
    for (int it = 0; it < 5000; ++it) {
      for (std::size_t i = 0; i < 5; ++i) {
        y[i] = 0.0;
        for (std::size_t j = 0; j < 5; ++j) y[i] += g(i, j) * x[j];
      }
      double norm = 0.0;
      for (double v : y) norm += v * v;
      norm = std::sqrt(norm);
      lambda = norm;
      for (std::size_t i = 0; i < 5; ++i) x[i] = y[i] / norm;
    }
    EXPECT_NEAR(std::sqrt(lambda), res.s[c], 1e-8 * res.s[0]);
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 5; ++j) g(i, j) -= lambda * x[i] * x[j];
  }
}

TEST(Svd, VIdenticalWithoutU) {
  const auto a = random_matrix(50, 8, 9);
  SvdOptions no_u;
  no_u.compute_u = false;
  const auto full = svd(a), thin = svd(a, no_u);
  EXPECT_TRUE(thin.u.empty());
  EXPECT_EQ(full.s, thin.s);
  EXPECT_EQ(full.v, thin.v);
}

TEST(Svd, NonConvergenceIsReported) {
  SvdOptions opts;
  opts.max_sweeps = 1;
  EXPECT_THROW(svd(random_matrix(20, 10, 4), opts), SvdNotConverged);
}

// ---- kmeans ----

TEST(KMeans, FourPointsBruteForce) {
  const Tensor<double> pts({4, 2}, {0, 0, 0, 1, 10, 0, 10, 1});
  // Oracle: best of all 2-partitions (nonempty) by within-cluster SSE.
  double best = std::numeric_limits<double>::infinity();
  for (unsigned mask = 1; mask < 15; ++mask) {
    double sse = 0.0;
    for (unsigned side = 0; side < 2; ++side) {
      double cx = 0, cy = 0;
      int n = 0;
      for (unsigned i = 0; i < 4; ++i) {
        if (((mask >> i) & 1u) == side) cx += pts(i, 0), cy += pts(i, 1), ++n;
      }
      cx /= n, cy /= n;
      for (unsigned i = 0; i < 4; ++i) {
        if (((mask >> i) & 1u) == side) sse += std::pow(pts(i, 0) - cx, 2) + std::pow(pts(i, 1) - cy, 2);
      }
    }
    best = std::min(best, sse);
  }
  ASSERT_DOUBLE_EQ(best, 1.0);
  const auto m = kmeans(pts, 2, 42);
  EXPECT_NEAR(m.inertia, best, 1e-12);
  std::vector<std::pair<double, double>> centers{{m.centers(0, 0), m.centers(0, 1)},
                                                 {m.centers(1, 0), m.centers(1, 1)}};
  std::sort(centers.begin(), centers.end());
  EXPECT_NEAR(centers[0].first, 0.0, 1e-12);
  EXPECT_NEAR(centers[0].second, 0.5, 1e-12);
  EXPECT_NEAR(centers[1].first, 10.0, 1e-12);
  EXPECT_NEAR(centers[1].second, 0.5, 1e-12);
}

TEST(KMeans, KEqualsNHasZeroInertia) {
  const auto pts = random_matrix(12, 3, 3);
  EXPECT_NEAR(kmeans(pts, 12, 1).inertia, 0.0, 1e-20);
}

TEST(KMeans, IdenticalPoints) {
  Tensor<double> pts = Tensor<double>::matrix(9, 2, 3.5);
  const auto m = kmeans(pts, 3, 5);
  EXPECT_EQ(m.inertia, 0.0);
  for (double v : m.centers.values()) EXPECT_EQ(v, 3.5);
}

TEST(KMeans, RejectsTooManyClusters) {
  EXPECT_THROW(kmeans(random_matrix(3, 2, 1), 4, 0), std::invalid_argument);
  EXPECT_THROW(kmeans(random_matrix(3, 2, 1), 0, 0), std::invalid_argument);
}

TEST(KMeans, InertiaMonotoneAndAssignmentsNearest) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto pts = random_matrix(200, 4, 100 + seed);
    const auto m = kmeans(pts, 2 + seed % 9, seed);
    for (std::size_t i = 1; i < m.inertia_history.size(); ++i) {
      EXPECT_LE(m.inertia_history[i], m.inertia_history[i - 1] * (1 + 1e-12));
    }
    double inertia = 0.0;
    for (std::size_t i = 0; i < pts.rows(); ++i) {
      const auto c = nearest_center(m.centers, pts.row(i).data());
      EXPECT_EQ(c, m.assignment[i]);
      for (std::size_t d = 0; d < 4; ++d) inertia += std::pow(pts(i, d) - m.centers(c, d), 2);
    }
    EXPECT_NEAR(inertia, m.inertia, 1e-9 * std::max(1.0, inertia));
  }
}

TEST(KMeans, NearestCenterTiesGoLow) {
  const Tensor<double> centers({3, 1}, {-1, 1, 1});
  const double x = 0.0, y = 1.0;
  EXPECT_EQ(nearest_center(centers, &x), 0u);
  EXPECT_EQ(nearest_center(centers, &y), 1u);
}

TEST(KMeans, BitDeterministic) {
  const auto pts = random_matrix(300, 5, 8);
  const auto a = kmeans(pts, 7, 99), b = kmeans(pts, 7, 99);
  EXPECT_EQ(a.centers, b.centers);
  EXPECT_EQ(a.assignment, b.assignment);
  EXPECT_EQ(a.inertia, b.inertia);
}

// ---- grad check ----

TEST(GradCheck, Square) {
  const ScalarFunction f = [](const Tensor<double>& x, Tensor<double>* g) {
    if (g) (*g)[0] = 2 * x[0];
    return x[0] * x[0];
  };
  const Tensor<double> x({1}, {3.0});
  Tensor<double> g({1});
  f(x, &g);
  EXPECT_EQ(g[0], 6.0);
  EXPECT_LT(grad_check(f, x, 1e-5).max_relative_error, 1e-8);
}

TEST(GradCheck, Constant) {
  const ScalarFunction f = [](const Tensor<double>&, Tensor<double>* g) {
    if (g) g->fill(0.0);
    return 4.2;
  };
  const Tensor<double> x({3}, {1, 2, 3});
  const auto r = grad_check(f, x);
  EXPECT_LT(r.max_relative_error, 1e-10);
  EXPECT_TRUE(r.ok(1e-10));
}

TEST(GradCheck, DetectsWrongGradient) {
  const ScalarFunction f = [](const Tensor<double>& x, Tensor<double>* g) {
    if (g) (*g)[0] = 3 * x[0];
    return x[0] * x[0];
  };
  const auto r = grad_check(f, Tensor<double>({1}, {2.0}));
  EXPECT_NEAR(r.max_relative_error, 2.0 / 4.0, 1e-6);
  EXPECT_FALSE(r.ok(1e-4));
}

TEST(GradCheck, ReportsNonFiniteCoordinate) {
  const ScalarFunction f = [](const Tensor<double>& x, Tensor<double>* g) {
    if (g) (*g)[0] = 1.0 / x[0], (*g)[1] = 1.0;
    return std::log(x[0]) + x[1];
  };
  const auto r = grad_check(f, Tensor<double>({2}, {1e-7, 1.0}), 1e-5);
  ASSERT_TRUE(r.failed_coordinate.has_value());
  EXPECT_EQ(*r.failed_coordinate, 0u);
  EXPECT_FALSE(r.ok(1.0));
}

// ---- tape ops against finite differences ----

template <typename Build>
void check_op(Build build, std::vector<Tensor<double>> inputs, double tol = 1e-7) {
  std::vector<std::size_t> offsets{0};
  for (const auto& t : inputs) offsets.push_back(offsets.back() + t.size());
  Tensor<double> point({offsets.back()});
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    std::copy(inputs[i].values().begin(), inputs[i].values().end(), point.data() + offsets[i]);
  }
  const ScalarFunction f = [&](const Tensor<double>& x, Tensor<double>* g) {
    Tape<double> tape;
    std::vector<Var> vars;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      Tensor<double> t(inputs[i].shape());
      std::copy(x.data() + offsets[i], x.data() + offsets[i + 1], t.data());
      vars.push_back(tape.leaf(std::move(t)));
    }
    const Var out = build(tape, vars);
    const double value = tape.value(out)[0];
    if (g) {
      tape.backward(out);
      for (std::size_t i = 0; i < vars.size(); ++i) {
        if (tape.has_grad(vars[i])) {
          const auto& gr = tape.grad(vars[i]);
          std::copy(gr.values().begin(), gr.values().end(), g->data() + offsets[i]);
        } else {
          std::fill(g->data() + offsets[i], g->data() + offsets[i + 1], 0.0);
        }
      }
    }
    return value;
  };
  const auto r = grad_check(f, point, 1e-6);
  EXPECT_TRUE(r.ok(tol)) << "max relative error " << r.max_relative_error << " " << r.failure;
}

Tensor<double> rnd(Shape shape, std::uint64_t seed) {
  Rng rng(seed);
  Tensor<double> t(std::move(shape));
  for (auto& v : t.values()) v = rng.normal();
  return t;
}

TEST(TapeOps, MatmulFamilies) {
  check_op([](Tape<double>& t, std::vector<Var>& v) { return ops::sum(t, ops::tanh(t, ops::matmul(t, v[0], v[1]))); },
           {rnd({3, 4}, 1), rnd({4, 2}, 2)});
  check_op([](Tape<double>& t, std::vector<Var>& v) { return ops::sum(t, ops::tanh(t, ops::matmul_nt(t, v[0], v[1]))); },
           {rnd({3, 4}, 3), rnd({5, 4}, 4)});
}

TEST(TapeOps, Elementwise) {
  check_op([](Tape<double>& t, std::vector<Var>& v) {
    return ops::sum(t, ops::mul(t, ops::add(t, v[0], v[1]), ops::scale(t, v[1], 0.3)));
  }, {rnd({2, 3}, 5), rnd({2, 3}, 6)});
  check_op([](Tape<double>& t, std::vector<Var>& v) {
    return ops::sum(t, ops::tanh(t, ops::add_row(t, v[0], v[1])));
  }, {rnd({4, 3}, 7), rnd({3}, 8)});
  // relu away from the kink
  Tensor<double> x = rnd({10}, 9);
  for (auto& e : x.values()) e += (e >= 0 ? 0.1 : -0.1);
  check_op([](Tape<double>& t, std::vector<Var>& v) { return ops::sum(t, ops::mul(t, ops::relu(t, v[0]), v[0])); }, {x});
}

TEST(TapeOps, LayerNormGatherCrossEntropy) {
  check_op([](Tape<double>& t, std::vector<Var>& v) {
    return ops::sum(t, ops::tanh(t, ops::layer_norm(t, v[0], v[1], v[2])));
  }, {rnd({3, 5}, 10), rnd({5}, 11), rnd({5}, 12)});
  const std::vector<std::int32_t> ids{2, 0, 2, 1};
  check_op([&](Tape<double>& t, std::vector<Var>& v) {
    return ops::sum(t, ops::tanh(t, ops::gather_rows(t, v[0], ids)));
  }, {rnd({3, 4}, 13)});
  const std::vector<std::int32_t> targets{1, -1, 3};
  const std::vector<double> weights{0.5, 1.0, 2.0};
  check_op([&](Tape<double>& t, std::vector<Var>& v) {
    return ops::cross_entropy(t, v[0], targets, weights);
  }, {rnd({3, 4}, 14)});
}

TEST(TapeOps, CrossEntropyValue) {
  Tape<double> tape;
  const Var logits = tape.leaf(Tensor<double>({2, 3}, {0, 0, 0, 1, 2, 3}));
  const std::vector<std::int32_t> targets{0, 2};
  const std::vector<double> weights{1.0, 0.5};
  const double expected = std::log(3.0) + 0.5 * (std::log(std::exp(1.0) + std::exp(2.0) + std::exp(3.0)) - 3.0);
  EXPECT_NEAR(tape.value(ops::cross_entropy(tape, logits, targets, weights))[0], expected, 1e-12);
}

TEST(Tape, BackwardNeedsScalar) {
  Tape<double> tape;
  const Var x = tape.leaf(Tensor<double>({2}, {1, 2}));
  EXPECT_THROW(tape.backward(x), std::invalid_argument);
}

// ---- gemm ----

TEST(Gemm, VariantsMatchNaive) {
  const std::size_t m = 7, n = 5, k = 9;
  const auto a = random_matrix(m, k, 1), b = random_matrix(k, n, 2), bt = transpose(b), at = transpose(a);
  auto naive = [&] {
    Tensor<double> c = Tensor<double>::matrix(m, n);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t p = 0; p < k; ++p) c(i, j) += a(i, p) * b(p, j);
    return c;
  }();
  Tensor<double> c1 = Tensor<double>::matrix(m, n), c2 = c1, c3 = c1;
  gemm::nn(m, n, k, a.data(), k, b.data(), n, c1.data(), n);
  gemm::nt(m, n, k, a.data(), k, bt.data(), k, c2.data(), n);
  gemm::tn(m, n, k, at.data(), m, b.data(), n, c3.data(), n);
  for (std::size_t i = 0; i < m * n; ++i) {
    EXPECT_NEAR(c1[i], naive[i], 1e-12);
    EXPECT_NEAR(c2[i], naive[i], 1e-12);
    EXPECT_NEAR(c3[i], naive[i], 1e-12);
  }
}

// ---- special functions ----

double t_pdf(double x, double nu) {
  return std::exp(std::lgamma((nu + 1) / 2) - std::lgamma(nu / 2)) / std::sqrt(nu * std::numbers::pi) *
         std::pow(1 + x * x / nu, -(nu + 1) / 2);
}

// Oracle: composite Simpson integration of the density from 0 to |t|.
double t_cdf_by_integration(double t, double nu) {
  const int n = 200000;
  const double h = std::abs(t) / n;
  double s = t_pdf(0, nu) + t_pdf(std::abs(t), nu);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4 : 2) * t_pdf(i * h, nu);
  const double half = s * h / 3;
  return t >= 0 ? 0.5 + half : 0.5 - half;
}

TEST(Special, StudentTAgainstIntegration) {
  const std::vector<std::pair<double, double>> points{
      {-6.0, 1}, {-2.5, 1}, {0.0, 1}, {0.7, 1}, {3.0, 1}, {-3.1, 2}, {1.0, 2}, {4.303, 2}, {-1.2, 3}, {2.0, 4},
      {0.25, 5}, {-0.9, 7}, {2.262, 9}, {1.5, 12}, {-2.8, 15}, {0.05, 20}, {3.5, 29}, {-1.96, 60}, {1.0, 100}, {-4.0, 250}};
  for (auto [t, nu] : points) {
    EXPECT_NEAR(student_t_cdf(t, nu), t_cdf_by_integration(t, nu), 1e-9) << "t=" << t << " dof=" << nu;
  }
}

TEST(Special, ClosedForms) {
  // dof 1 is Cauchy; dof 2 has F(t) = ½ + t / (2 sqrt(t² + 2)).
  for (double t : {-5.0, -0.3, 0.0, 1.0, 7.5}) {
    EXPECT_NEAR(student_t_cdf(t, 1), 0.5 + std::atan(t) / std::numbers::pi, 1e-13);
    EXPECT_NEAR(student_t_cdf(t, 2), 0.5 + t / (2 * std::sqrt(t * t + 2)), 1e-13);
  }
  EXPECT_NEAR(student_t_two_sided_p(4.303, 2), 0.05, 1e-4);
  EXPECT_NEAR(regularized_incomplete_beta(2, 3, 0.4), 0.5248, 1e-12);  // 1 - (1-x)^4 - 4x(1-x)^3
  EXPECT_EQ(regularized_incomplete_beta(2, 3, 0.0), 0.0);
  EXPECT_EQ(regularized_incomplete_beta(2, 3, 1.0), 1.0);
}

// ---- rng / parallel ----

TEST(Rng, DerivedStreamsDifferAndRepeat) {
  EXPECT_EQ(derive_seed(5, "init"), derive_seed(5, "init"));
  EXPECT_NE(derive_seed(5, "init"), derive_seed(5, "order"));
  EXPECT_NE(derive_seed(5, "init"), derive_seed(6, "init"));
  Rng a(11), b(11);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, BelowIsInRangeAndRoughlyUniform) {
  Rng rng(4);
  std::vector<int> counts(7);
  for (int i = 0; i < 70000; ++i) counts[rng.below(7)]++;
  for (int c : counts) EXPECT_NEAR(c, 10000, 500);
}

TEST(Parallel, CoversEveryIndexOnceAndRethrows) {
  std::vector<int> hits(1000);
  parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i]++; });
  for (int h : hits) EXPECT_EQ(h, 1);
  EXPECT_THROW(parallel_for(10, 3, [](std::size_t i) {
    if (i == 7) throw std::runtime_error("boom");
  }), std::runtime_error);
}

}  // namespace
}  // namespace proxylab
