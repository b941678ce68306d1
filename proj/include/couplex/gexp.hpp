#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "couplex/coupling.hpp"
#include "couplex/model.hpp"
#include "couplex/stats.hpp"

namespace couplex {

enum class SearchPolicy { automatic, exhaustive, coordinate_ascent };

const char* to_string(SearchPolicy p) noexcept;

/// Piecewise-constant volatility controls: `cells` equal time slices, each
/// taking one of `candidates` (by default the generators of Γ). With
/// space_bins > 1 (d = 1 only) each time slice is further split by the
/// current state into equal bins over x0 ± bin_half_width, the outer bins
/// extending to infinity, which gives Markov feedback controls.
struct ControlFamily {
    std::size_t cells = 8;
    std::size_t space_bins = 1;
    double bin_half_width = 0.0;  // 0: 3·Λ_σΛ_Γ√T
    std::vector<Mat> candidates;
    SearchPolicy policy = SearchPolicy::automatic;
    std::size_t budget = 4096;  // maximum number of controls evaluated

    static ControlFamily extreme_points(const UncertaintySet& gamma, std::size_t cells,
                                        SearchPolicy policy = SearchPolicy::automatic,
                                        std::size_t budget = 4096);

    std::size_t slots() const noexcept { return cells * space_bins; }
    /// Throws Error(invalid_spec) if a candidate lies outside Γ's spectral bounds.
    void check_within(const UncertaintySet& gamma) const;
    /// Number of distinct controls, saturating at SIZE_MAX.
    std::size_t count() const;
};

struct GMcParams {
    std::size_t n_paths = 100000;   // final evaluation of the chosen control
    std::size_t search_paths = 0;   // paths used during the search; 0 means n_paths
    std::size_t steps_per_cell = 8;
    std::size_t policy_steps = 512;  // time steps for evaluate_fd_policy in cross_validate
    std::uint64_t seed = 1;
    unsigned workers = 1;
};

struct GSemigroupResult {
    double value = 0.0;       // chosen control on fresh paths
    double std_error = 0.0;
    double search_value = 0.0;  // the maximum found during the search (biased upwards)
    std::vector<std::size_t> best_choice;  // candidate index per slot (cell-major)
    bool lower_bound = true;
    SearchPolicy policy = SearchPolicy::automatic;  // the policy actually run
    std::size_t evaluations = 0;
    std::size_t sweeps = 0;
    bool converged = false;
    bool budget_exhausted = false;
    std::vector<double> samples;  // per-path values of the final evaluation
};

/// Searches the control family with common random numbers, then re-evaluates
/// the best control on an independent set of paths so that the reported
/// value carries no selection bias. The value is a lower bound for the
/// sublinear expectation. If the budget runs out the best control so far is
/// used and budget_exhausted is set.
GSemigroupResult evaluate_g_semigroup(const ProblemSpec& spec, const Vec& x0, const ControlFamily& family,
                                      const GMcParams& params);

struct FdParams {
    double x_lo = -10.0;
    double x_hi = 10.0;
    double dx = 0.02;
    double cfl_safety = 0.9;
    bool record_convexity = false;
};

struct FdSolution {
    Vec x;             // space nodes
    Vec u;             // u(T, x)
    double dt = 0.0;
    std::size_t n_steps = 0;
    double value = 0.0;         // u(T, x0) by linear interpolation
    double error_estimate = 0.0;  // |u_dx(T,x0) − u_2dx(T,x0)|
    double max_abs = 0.0;       // max over all steps of max_i |u_i|
    bool comparison_ok = true;  // max_abs ≤ ‖φ‖_∞ (bounded φ only)
    double x_lo = 0.0, dx = 0.0;
    // With record_convexity: convex[m·x.size() + i] = 1 iff the second
    // difference of u at node i was non-negative at the start of step m.
    std::vector<std::uint8_t> convex;

    /// u(T, x) by linear interpolation, clamped to the domain.
    double at(double x) const;
};

/// Explicit monotone scheme for ∂_t u = ½σ²(Λ_Γ²(u_xx)⁺ − λ_Γ²(u_xx)⁻) + b u_x
/// in d = 1 with u(0) = φ, upwind drift and frozen Dirichlet boundaries.
/// With estimate_error the solve is repeated at 2·dx.
FdSolution solve_g_heat_fd(const ProblemSpec& spec, double x0, const FdParams& params, bool estimate_error = true);

/// Monte Carlo value of the bang-bang feedback control read off a recorded
/// FD solution: the largest candidate where u is locally convex and the
/// smallest elsewhere. Uses the evaluation stream of evaluate_g_semigroup, so
/// the two values share their random numbers.
SampleStats evaluate_fd_policy(const ProblemSpec& spec, double x0, const FdSolution& fd, const GMcParams& params,
                               std::size_t steps);

struct CrossReport {
    double mc = 0.0;
    double mc_std_error = 0.0;
    double fd = 0.0;
    double fd_error = 0.0;
    double search_gap = 0.0;  // max(0, policy − mc)
    double policy = 0.0;      // MC value of the FD feedback policy
    double policy_std_error = 0.0;
    double budget = 0.0;
    double difference = 0.0;  // mc − fd
    bool mc_above_fd = false;  // mc > fd + 3·stderr
    bool pass = false;
    GSemigroupResult search;
};

/// |MC − FD| against 3·stderr + FD error + search gap. The gap is what the
/// searched family loses against the FD feedback policy; since that policy is
/// itself simulated, a wrong FD value still shows up as a failure.
CrossReport cross_validate(const ProblemSpec& spec, double x0, const ControlFamily& family, const GMcParams& mc,
                           const FdParams& fd);

}  // namespace couplex
