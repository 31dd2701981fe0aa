#include "mg1/power_sums.hpp"

#include <cmath>
#include <stdexcept>

namespace mg1 {

double power_tail_sum(double s, long n) {
    if (s <= 1.0) throw std::invalid_argument("power_tail_sum: s must exceed 1");
    if (n < 1) throw std::invalid_argument("power_tail_sum: n must be >= 1");
    // Direct part up to the pivot M, Euler-Maclaurin closure from M on.
    const long pivot = 256;
    long m = n > pivot ? n : pivot;
    double direct = 0.0;
    for (long l = m - 1; l >= n; --l) direct += std::pow(static_cast<double>(l), -s);
    const double x = static_cast<double>(m);
    double closure = std::pow(x, 1.0 - s) / (s - 1.0) + 0.5 * std::pow(x, -s) +
                     s * std::pow(x, -s - 1.0) / 12.0 -
                     s * (s + 1.0) * (s + 2.0) * std::pow(x, -s - 3.0) / 720.0;
    // Next Euler-Maclaurin term is O(s^5 m^(-s-5)); at m >= 256 that is
    // below 1e-14 of the closure for all s of interest.
    return direct + closure;
}

double geo_tail_sum(double r, long m) {
    return std::pow(r, static_cast<double>(m)) / (1.0 - r);
}

double geo_tail_sum_m1(double r, long m) {
    const double rm = std::pow(r, static_cast<double>(m));
    const double d = 1.0 - r;
    return rm * (static_cast<double>(m) - static_cast<double>(m - 1) * r) / (d * d);
}

double geo_tail_sum_m2(double r, long m) {
    const double rm = std::pow(r, static_cast<double>(m));
    const double d = 1.0 - r;
    const double md = static_cast<double>(m);
    const double c0 = md * md;
    const double c1 = 2.0 * md * md - 2.0 * md - 1.0;
    const double c2 = (md - 1.0) * (md - 1.0);
    return rm * (c0 - c1 * r + c2 * r * r) / (d * d * d);
}

}  // namespace mg1
