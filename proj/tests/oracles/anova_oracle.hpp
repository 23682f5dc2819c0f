#pragma once

// Textbook one-way ANOVA via the computational (sum of squares of totals)
// form, with the tail probability from Boost's F distribution.

#include <vector>

#include <boost/math/distributions/fisher_f.hpp>

namespace oracle {

struct Anova {
  double ssb, ssw, f, p;
};

inline Anova anova(const std::vector<std::vector<double>>& groups) {
  double grand_total = 0, sum_sq = 0, between_terms = 0;
  std::size_t N = 0;
  for (const auto& g : groups) {
    double t = 0;
    for (double x : g) {
      t += x;
      sum_sq += x * x;
    }
    grand_total += t;
    between_terms += t * t / g.size();
    N += g.size();
  }
  const double correction = grand_total * grand_total / N;
  const double sst = sum_sq - correction;
  const double ssb = between_terms - correction;
  const double ssw = sst - ssb;
  const double k = static_cast<double>(groups.size());
  const double df1 = k - 1, df2 = N - k;
  const double f = (ssb / df1) / (ssw / df2);
  boost::math::fisher_f dist(df1, df2);
  return {ssb, ssw, f, boost::math::cdf(boost::math::complement(dist, f))};
}

}  // namespace oracle
