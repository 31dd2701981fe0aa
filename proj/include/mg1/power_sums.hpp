#pragma once

namespace mg1 {

/// Exact tail sums for the two analytic weight families used by chain
/// tails: geometric w(k) = r^k and power law w(k) = k^(-s).
///
/// The power-law sums are evaluated by direct summation up to a fixed
/// pivot followed by an Euler-Maclaurin closure; the truncation
/// remainder is below 1e-14 relative for every s >= 1.3, which is what
/// the tail evaluators guarantee downstream.

/// Sum_{l=n..inf} l^(-s), n >= 1, s > 1.
double power_tail_sum(double s, long n);

/// Sum_{l=m..inf} r^l, 0 < r < 1, m >= 0.
double geo_tail_sum(double r, long m);

/// Sum_{l=m..inf} l * r^l.
double geo_tail_sum_m1(double r, long m);

/// Sum_{l=m..inf} l^2 * r^l.
double geo_tail_sum_m2(double r, long m);

}  // namespace mg1
