#pragma once

namespace proxylab {

/// Regularized incomplete beta I_x(a, b) by Lentz's continued fraction,
/// relative accuracy ~1e-14.
double regularized_incomplete_beta(double a, double b, double x);

/// Student-t cumulative distribution with `dof` degrees of freedom.
double student_t_cdf(double t, double dof);

/// Two-sided tail probability P(|T| >= |t|).
double student_t_two_sided_p(double t, double dof);

}  // namespace proxylab
