#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "couplex/bsde.hpp"
#include "couplex/gexp.hpp"
#include "couplex/model.hpp"
#include "couplex/stats.hpp"

namespace couplex {

/// Rays through each center: the coordinate axes, then `random_directions`
/// uniform directions (skipped in d = 1). On every ray the pairs sit
/// symmetrically about the center at separations r₀·2^{−j}, j < levels.
struct PairOptions {
    double r0 = 0.5;
    std::size_t levels = 5;
    std::vector<Vec> centers;  // empty: the origin
    std::size_t random_directions = 1;
    std::uint64_t seed = 1;
};

struct Pair {
    std::size_t id = 0;
    std::size_t ray = 0;
    std::size_t level = 0;
    Vec x, y;
    double r = 0.0;
};

struct Ray {
    Vec center, direction;
};

struct PairGrid {
    std::vector<Ray> rays;
    std::vector<Pair> pairs;  // ray-major, level-minor
};

PairGrid make_pairs(int d, const PairOptions& options);

struct PairRow {
    std::size_t pair_id = 0;
    std::size_t ray = 0;
    double r = 0.0;
    double u_x = 0.0, u_y = 0.0;
    double quotient = 0.0;
    double std_error = 0.0;
    bool pass = false;  // quotient ≤ bound slope + 3·stderr
};

struct RayFit {
    std::size_t ray = 0;
    SlopeExtrapolation fit;
    bool pass = false;
};

struct GradientReport {
    std::string spec_id;
    Mode mode = Mode::classical;
    BoundKind bound = BoundKind::main1;
    std::string estimator;  // bsde, mc, fd, g-mc or quadrature
    DerivedConstants constants;
    PairGrid grid;
    std::vector<PairRow> rows;
    std::vector<RayFit> rays;
    double slope = 0.0;  // extrapolated slope of the ray closest to violating
    double slope_std_error = 0.0;
    double bound_slope = 0.0;
    double margin = 0.0;  // bound_slope − (slope + 3·stderr)
    double lipschitz_sup = -1.0;  // quadrature only: max |∂ₓu(T,·)| on a dense grid
    bool pass = false;
};

/// u(T,·) via estimate_u at both ends of each pair with common random
/// numbers, against the main1 bound.
GradientReport verify_main1(const ProblemSpec& spec, const PairOptions& pairs, const BsdeParams& params,
                            const ConstantConfig& config = {});

/// Driver must be zero; direct Monte Carlo against the corollary bound.
GradientReport verify_corollary(const ProblemSpec& spec, const PairOptions& pairs, const BsdeParams& params,
                                const ConstantConfig& config = {});

/// Exact version for constant σ, zero drift and d = 1: u(T,·) by
/// Gaussian quadrature, plus the sup of |∂ₓu| over x ∈ [−span, span].
GradientReport verify_corollary_quadrature(const ProblemSpec& spec, const PairOptions& pairs,
                                           const ConstantConfig& config = {}, double span = 6.0);

/// G-mode. d = 1 uses finite differences (the quotient error is the change
/// under dx → 2dx); other dimensions use control-sup Monte Carlo.
GradientReport verify_main2(const ProblemSpec& spec, const PairOptions& pairs, const FdParams& fd,
                            const ControlFamily* family, const GMcParams& mc, const ConstantConfig& config = {});

/// E φ(x + s Z), Z ~ N(0,1), by composite Simpson on z ∈ [−12, 12].
double gaussian_smoothing(const TerminalSpec& phi, double x, double s);

}  // namespace couplex
