#pragma once

#include <span>

namespace proxylab {

/// Kullback-Leibler divergence in bits; 0·log0 terms vanish. Inputs are
/// renormalized. Returns +inf when p has mass where q has none.
double kl_divergence_bits(std::span<const double> p, std::span<const double> q);

/// Jensen-Shannon divergence in bits, bounded in [0, 1]:
/// JSD = ½KL(p‖m) + ½KL(q‖m), m = (p+q)/2.
/// Throws on length mismatch, negative entries, or an empty/zero-mass vector.
double jsd(std::span<const double> p, std::span<const double> q);

/// Same as jsd() for single-precision rows (accumulated in double).
double jsd(std::span<const float> p, std::span<const float> q);

}  // namespace proxylab
