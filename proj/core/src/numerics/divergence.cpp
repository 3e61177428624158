#include "proxylab/numerics/divergence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace proxylab {
namespace {

template <typename T>
double mass(std::span<const T> p, const char* name) {
  double total = 0.0;
  for (T v : p) {
    if (!(v >= T{0})) {
      throw std::invalid_argument(std::string("jsd: ") + name +
                                  " has a negative or non-finite entry");
    }
    total += static_cast<double>(v);
  }
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw std::invalid_argument(std::string("jsd: ") + name + " has no probability mass");
  }
  return total;
}

template <typename T>
double jsd_impl(std::span<const T> p, std::span<const T> q) {
  if (p.size() != q.size()) {
    throw std::invalid_argument("jsd: length mismatch " + std::to_string(p.size()) +
                                " vs " + std::to_string(q.size()));
  }
  const double zp = mass(p, "p");
  const double zq = mass(q, "q");
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pi = static_cast<double>(p[i]) / zp;
    const double qi = static_cast<double>(q[i]) / zq;
    const double mi = 0.5 * (pi + qi);
    if (pi > 0.0) acc += pi * std::log2(pi / mi);
    if (qi > 0.0) acc += qi * std::log2(qi / mi);
  }
  return std::clamp(0.5 * acc, 0.0, 1.0);
}

}  // namespace

double kl_divergence_bits(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw std::invalid_argument("kl: length mismatch");
  const double zp = mass(p, "p");
  const double zq = mass(q, "q");
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pi = p[i] / zp;
    const double qi = q[i] / zq;
    if (pi == 0.0) continue;
    if (qi == 0.0) return std::numeric_limits<double>::infinity();
    acc += pi * std::log2(pi / qi);
  }
  return acc;
}

double jsd(std::span<const double> p, std::span<const double> q) { return jsd_impl(p, q); }

double jsd(std::span<const float> p, std::span<const float> q) { return jsd_impl(p, q); }

}  // namespace proxylab
