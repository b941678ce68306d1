#include "couplex/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "couplex/error.hpp"
#include "couplex/rng.hpp"

namespace couplex {

PairGrid make_pairs(int d, const PairOptions& options) {
    if (d < 1) fail(ErrorCode::invalid_spec, "pairs: dimension must be positive");
    if (!(options.r0 > 0.0)) fail(ErrorCode::config, "pairs.r0: must be positive");
    if (options.levels < 3) fail(ErrorCode::config, "pairs.levels: need at least 3 separation levels");
    std::vector<Vec> centers = options.centers;
    if (centers.empty()) centers.push_back(Vec::Zero(d));
    for (const auto& c : centers)
        if (c.size() != d) fail(ErrorCode::config, "pairs.centers: dimension does not match spec.d");

    std::vector<Vec> directions;
    for (int j = 0; j < d; ++j) directions.push_back(Vec::Unit(d, j));
    if (d > 1) {
        for (std::size_t k = 0; k < options.random_directions; ++k) {
            const RngStream rng(options.seed, streams::pairs, static_cast<std::uint32_t>(k));
            Vec v(d);
            rng.normals(0, {v.data(), static_cast<std::size_t>(d)});
            directions.push_back(v / v.norm());
        }
    }

    PairGrid grid;
    for (const auto& c : centers)
        for (const auto& e : directions) grid.rays.push_back({c, e});
    for (std::size_t ray = 0; ray < grid.rays.size(); ++ray) {
        const auto& [c, e] = grid.rays[ray];
        for (std::size_t j = 0; j < options.levels; ++j) {
            const double r = options.r0 * std::ldexp(1.0, -static_cast<int>(j));
            grid.pairs.push_back({grid.pairs.size(), ray, j, c - 0.5 * r * e, c + 0.5 * r * e, r});
        }
    }
    return grid;
}

namespace {

GradientReport start_report(const ProblemSpec& spec, const PairOptions& pairs, Mode mode, BoundKind bound,
                            const ConstantConfig& config, const char* estimator) {
    GradientReport rep;
    rep.spec_id = spec.id;
    rep.mode = mode;
    rep.bound = bound;
    rep.estimator = estimator;
    rep.constants = derive_constants(spec, mode, config);
    rep.bound_slope = theorem_bound(rep.constants, spec, bound).slope;
    rep.grid = make_pairs(spec.d, pairs);
    return rep;
}

PairRow row_from(const Pair& p, double ux, double uy, double diff_se) {
    PairRow row;
    row.pair_id = p.id;
    row.ray = p.ray;
    row.r = p.r;
    row.u_x = ux;
    row.u_y = uy;
    row.quotient = std::abs(ux - uy) / p.r;
    row.std_error = diff_se / p.r;
    return row;
}

PairRow paired_row(const Pair& p, double ux, double uy, const std::vector<double>& sx,
                   const std::vector<double>& sy) {
    const double se = sx.size() == sy.size() && sx.size() > 1 ? summarize_difference(sx, sy).std_error : 0.0;
    return row_from(p, ux, uy, se);
}

void finish_report(GradientReport& rep) {
    const double bound = rep.bound_slope;
    for (auto& row : rep.rows) row.pass = row.quotient <= bound + 3.0 * row.std_error;
    rep.rays.clear();
    double worst = -std::numeric_limits<double>::infinity();
    rep.pass = true;
    for (std::size_t ray = 0; ray < rep.grid.rays.size(); ++ray) {
        std::vector<double> r, q, se;
        for (const auto& row : rep.rows)
            if (row.ray == ray) {
                r.push_back(row.r);
                q.push_back(row.quotient);
                se.push_back(row.std_error);
            }
        RayFit fit{ray, extrapolate_slope(r, q, se), false};
        const double excess = fit.fit.slope + 3.0 * fit.fit.std_error - bound;
        fit.pass = excess <= 0.0;
        rep.pass = rep.pass && fit.pass;
        if (excess > worst) {
            worst = excess;
            rep.slope = fit.fit.slope;
            rep.slope_std_error = fit.fit.std_error;
        }
        rep.rays.push_back(fit);
    }
    rep.margin = -worst;
}

bool zero_field(const CoefficientField& f) {
    if (f.kind == FieldKind::sine_perturbed) return false;
    if (f.offset.size() && f.offset.cwiseAbs().maxCoeff() != 0.0) return false;
    return f.kind == FieldKind::constant || f.matrix.size() == 0 || f.matrix.cwiseAbs().maxCoeff() == 0.0;
}

GradientReport verify_estimate_u(const ProblemSpec& spec, const PairOptions& pairs, const BsdeParams& params,
                                 const ConstantConfig& config, BoundKind bound) {
    spec.validate();
    const bool zero = spec.driver.kind == DriverKind::zero;
    auto rep = start_report(spec, pairs, Mode::classical, bound, config, zero ? "mc" : "bsde");
    for (const auto& p : rep.grid.pairs) {
        const auto ux = estimate_u(spec, p.x, params);
        const auto uy = estimate_u(spec, p.y, params);
        rep.rows.push_back(paired_row(p, ux.value, uy.value, ux.samples, uy.samples));
    }
    finish_report(rep);
    return rep;
}

}  // namespace

GradientReport verify_main1(const ProblemSpec& spec, const PairOptions& pairs, const BsdeParams& params,
                            const ConstantConfig& config) {
    return verify_estimate_u(spec, pairs, params, config, BoundKind::main1);
}

GradientReport verify_corollary(const ProblemSpec& spec, const PairOptions& pairs, const BsdeParams& params,
                                const ConstantConfig& config) {
    if (spec.driver.kind != DriverKind::zero)
        fail(ErrorCode::invalid_spec, "driver: the corollary needs a zero driver");
    return verify_estimate_u(spec, pairs, params, config, BoundKind::corollary);
}

double gaussian_smoothing(const TerminalSpec& phi, double x, double s) {
    constexpr int n = 8000;  // even
    constexpr double a = 12.0;
    const double h = 2.0 * a / n;
    Vec pt(1);
    double acc = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double z = -a + h * i;
        pt[0] = x + s * z;
        const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        acc += w * phi(pt) * std::exp(-0.5 * z * z);
    }
    return acc * h / 3.0 / std::sqrt(2.0 * 3.14159265358979323846);
}

namespace {

// ∂ₓ E φ(x + sZ) = E[φ(x + sZ) Z]/s.
double gaussian_derivative(const TerminalSpec& phi, double x, double s) {
    constexpr int n = 8000;
    constexpr double a = 12.0;
    const double h = 2.0 * a / n;
    Vec pt(1);
    double acc = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double z = -a + h * i;
        pt[0] = x + s * z;
        const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        acc += w * phi(pt) * z * std::exp(-0.5 * z * z);
    }
    return acc * h / 3.0 / std::sqrt(2.0 * 3.14159265358979323846) / s;
}

}  // namespace

GradientReport verify_corollary_quadrature(const ProblemSpec& spec, const PairOptions& pairs,
                                           const ConstantConfig& config, double span) {
    spec.validate();
    if (spec.d != 1) fail(ErrorCode::config, "quadrature: needs d = 1");
    if (spec.driver.kind != DriverKind::zero) fail(ErrorCode::invalid_spec, "driver: the corollary needs a zero driver");
    if (spec.sigma.kind != FieldKind::constant) fail(ErrorCode::config, "quadrature: needs constant sigma");
    if (!zero_field(spec.b)) fail(ErrorCode::config, "quadrature: needs zero drift");
    auto rep = start_report(spec, pairs, Mode::classical, BoundKind::corollary, config, "quadrature");
    const double s = std::abs(spec.sigma.offset[0]) * std::sqrt(spec.T);
    for (const auto& p : rep.grid.pairs)
        rep.rows.push_back(row_from(p, gaussian_smoothing(spec.terminal, p.x[0], s),
                                    gaussian_smoothing(spec.terminal, p.y[0], s), 0.0));
    finish_report(rep);
    double sup = 0.0;
    const int n = static_cast<int>(std::ceil(2.0 * span / 0.01));
    for (int i = 0; i <= n; ++i) sup = std::max(sup, std::abs(gaussian_derivative(spec.terminal, -span + 2.0 * span * i / n, s)));
    rep.lipschitz_sup = sup;
    rep.pass = rep.pass && sup <= rep.bound_slope;
    return rep;
}

GradientReport verify_main2(const ProblemSpec& spec, const PairOptions& pairs, const FdParams& fd,
                            const ControlFamily* family, const GMcParams& mc, const ConstantConfig& config) {
    spec.validate();
    if (!spec.gamma) fail(ErrorCode::invalid_spec, "gamma: main2 needs a G-mode spec");
    if (spec.d == 1) {
        auto rep = start_report(spec, pairs, Mode::g_mode, BoundKind::main2, config, "fd");
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (const auto& p : rep.grid.pairs) {
            lo = std::min({lo, p.x[0], p.y[0]});
            hi = std::max({hi, p.x[0], p.y[0]});
        }
        FdParams coarse_params = fd;
        coarse_params.dx = 2.0 * fd.dx;
        const auto fine = solve_g_heat_fd(spec, lo, fd, false);
        const auto coarse = solve_g_heat_fd(spec, lo, coarse_params, false);
        if (!(hi < fd.x_hi)) fail(ErrorCode::config, "pairs: outside the fd domain");
        for (const auto& p : rep.grid.pairs) {
            const double qf = std::abs(fine.at(p.x[0]) - fine.at(p.y[0])) / p.r;
            const double qc = std::abs(coarse.at(p.x[0]) - coarse.at(p.y[0])) / p.r;
            auto row = row_from(p, fine.at(p.x[0]), fine.at(p.y[0]), 0.0);
            row.std_error = std::abs(qf - qc);
            rep.rows.push_back(row);
        }
        finish_report(rep);
        return rep;
    }
    auto rep = start_report(spec, pairs, Mode::g_mode, BoundKind::main2, config, "g-mc");
    const auto fam = family ? *family : ControlFamily::extreme_points(*spec.gamma, 8);
    for (const auto& p : rep.grid.pairs) {
        const auto ux = evaluate_g_semigroup(spec, p.x, fam, mc);
        const auto uy = evaluate_g_semigroup(spec, p.y, fam, mc);
        rep.rows.push_back(paired_row(p, ux.value, uy.value, ux.samples, uy.samples));
    }
    finish_report(rep);
    return rep;
}

}  // namespace couplex
