#include "couplex/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string>

#include "couplex/error.hpp"
#include "couplex/parallel.hpp"

namespace couplex {

unsigned resolve_workers(int requested) {
    if (requested > 0) return static_cast<unsigned>(requested);
    if (const char* env = std::getenv("COUPLEX_WORKERS")) {
        try {
            const int n = std::stoi(env);
            if (n > 0) return static_cast<unsigned>(n);
        } catch (const std::exception&) {
        }
        fail(ErrorCode::config, std::string("COUPLEX_WORKERS: expected a positive integer, got '") + env + "'");
    }
    return 1;
}

double pairwise_sum(std::span<const double> xs) noexcept {
    if (xs.size() <= 8) {
        double s = 0.0;
        for (double x : xs) s += x;
        return s;
    }
    const std::size_t half = xs.size() / 2;
    return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

SampleStats summarize(std::span<const double> xs) {
    SampleStats s;
    s.n = xs.size();
    if (s.n == 0) return s;
    s.mean = pairwise_sum(xs) / static_cast<double>(s.n);
    if (s.n > 1) {
        std::vector<double> sq(xs.size());
        std::transform(xs.begin(), xs.end(), sq.begin(), [&](double x) { return (x - s.mean) * (x - s.mean); });
        s.variance = pairwise_sum(sq) / static_cast<double>(s.n - 1);
        s.std_error = std::sqrt(s.variance / static_cast<double>(s.n));
    }
    return s;
}

SampleStats summarize_difference(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) fail(ErrorCode::internal, "summarize_difference: size mismatch");
    std::vector<double> diff(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - b[i];
    return summarize(diff);
}

double median(std::vector<double> xs) {
    if (xs.empty()) return 0.0;
    const std::size_t mid = xs.size() / 2;
    std::nth_element(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(mid), xs.end());
    const double hi = xs[mid];
    if (xs.size() % 2 == 1) return hi;
    const double lo = *std::max_element(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lo + hi);
}

SlopeExtrapolation extrapolate_slope(std::span<const double> r, std::span<const double> q,
                                     std::span<const double> se) {
    const std::size_t n = r.size();
    if (n < 3 || q.size() != n || se.size() != n)
        fail(ErrorCode::domain, "extrapolate_slope: need at least 3 separation levels with matching stderrs");

    const bool weighted = std::all_of(se.begin(), se.end(), [](double s) { return s > 0.0; });
    double sw = 0, swr = 0, swrr = 0, swq = 0, swrq = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double w = weighted ? 1.0 / (se[i] * se[i]) : 1.0;
        sw += w;
        swr += w * r[i];
        swrr += w * r[i] * r[i];
        swq += w * q[i];
        swrq += w * r[i] * q[i];
    }
    const double det = sw * swrr - swr * swr;
    if (!(det > 0.0)) fail(ErrorCode::domain, "extrapolate_slope: separations must be distinct");

    SlopeExtrapolation out;
    out.gradient = (sw * swrq - swr * swq) / det;
    out.slope = (swrr * swq - swr * swrq) / det;

    double chi2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double w = weighted ? 1.0 / (se[i] * se[i]) : 1.0;
        const double res = q[i] - (out.slope + out.gradient * r[i]);
        chi2 += w * res * res;
    }
    out.chi2_per_dof = chi2 / static_cast<double>(n - 2);
    // Var(intercept) = swrr/det in units where the weights are exact.
    double var = swrr / det;
    if (weighted) {
        if (out.chi2_per_dof > 1.0) {
            var *= out.chi2_per_dof;
            out.widened = true;
        }
    } else {
        var *= out.chi2_per_dof;
    }
    out.std_error = std::sqrt(std::max(0.0, var));
    return out;
}

}  // namespace couplex
