#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace couplex {

struct SampleStats {
    std::size_t n = 0;
    double mean = 0.0;
    double variance = 0.0;  // unbiased
    double std_error = 0.0;
};

/// Two-pass mean/variance with pairwise sums (order fixed by index).
SampleStats summarize(std::span<const double> xs);

/// Statistics of a paired difference a_i − b_i.
SampleStats summarize_difference(std::span<const double> a, std::span<const double> b);

double median(std::vector<double> xs);

/// Intercept of a weighted straight-line fit q ≈ c + a·r. Weights are
/// 1/stderr² (equal weights if any stderr is zero). If the residual
/// chi²/dof exceeds 1 the intercept stderr is widened by √(chi²/dof).
struct SlopeExtrapolation {
    double slope = 0.0;      // intercept at r = 0
    double std_error = 0.0;
    double gradient = 0.0;   // fitted a
    double chi2_per_dof = 0.0;
    bool widened = false;
};

SlopeExtrapolation extrapolate_slope(std::span<const double> r, std::span<const double> quotients,
                                     std::span<const double> std_errors);

}  // namespace couplex
