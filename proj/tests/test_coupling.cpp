#include "doctest.h"

#include <cmath>
#include <vector>

#include "couplex/catalogue.hpp"
#include "couplex/coupling.hpp"
#include "couplex/stats.hpp"

using namespace couplex;

namespace {

Vec v1(double a) { return Vec::Constant(1, a); }

// Midpoint quadrature of ∫_a^b ds/ξ_s, independent of the closed form.
double quad_reciprocal(const CouplingSchedule& s, double a, double b, int n = 400000) {
    // Substitute s = T − e^u to resolve the singularity at T.
    const double T = s.horizon();
    const double ua = std::log(T - a), ub = std::log(T - b);
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        const double u = ub + (ua - ub) * (i + 0.5) / n;
        acc += std::exp(u) / s.value(T - std::exp(u));
    }
    return acc * (ua - ub) / n;
}

}  // namespace

TEST_CASE("forward: no dynamics") {
    ProblemSpec s = builtin_spec("brownian-1d");
    s.sigma = CoefficientField::constant(v1(0.0));
    const auto grid = TimeGrid::uniform(1.0, 10);
    const auto path = simulate_forward(s, grid, RngStream(1, streams::forward, 0), v1(0.3));
    for (const auto& x : path) CHECK(x[0] == 0.3);
}

TEST_CASE("forward: Brownian variance, classical and G-mode") {
    const auto grid = TimeGrid::uniform(1.0, 4);
    const std::size_t n = 1000000;
    std::vector<double> xs(n), gs(n);
    const auto& bm = builtin_spec("brownian-1d");
    const auto& gb = builtin_spec("g-brownian-1d");
    const auto control = ControlPath::constant(grid, Mat::Constant(1, 1, 4.0));
    for (std::size_t i = 0; i < n; ++i) {
        const RngStream rng(9, streams::forward, static_cast<std::uint32_t>(i));
        xs[i] = forward_terminal(bm, grid, rng, v1(0.0))[0];
        gs[i] = forward_terminal(gb, grid, rng, v1(0.0), &control)[0];
    }
    CHECK(summarize(xs).variance == doctest::Approx(1.0).epsilon(0.01));
    CHECK(summarize(gs).variance == doctest::Approx(4.0).epsilon(0.01));
}

TEST_CASE("forward: blowup is reported") {
    ProblemSpec s = builtin_spec("brownian-1d");
    s.b = CoefficientField::affine(Mat::Constant(1, 1, 1e300), v1(0.0));
    const auto grid = TimeGrid::uniform(1.0, 10);
    try {
        simulate_forward(s, grid, RngStream(1, streams::forward, 0), v1(1.0));
        FAIL("expected blowup");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::numerical_blowup);
    }
}

TEST_CASE("control path") {
    const auto grid = TimeGrid::uniform(1.0, 8);
    std::vector<Mat> cands{Mat::Constant(1, 1, 1.0), Mat::Constant(1, 1, 4.0)};
    std::vector<std::size_t> choice{0, 1};
    const auto c = ControlPath::piecewise(grid, cands, choice);
    CHECK(c.gamma(0)(0, 0) == 1.0);
    CHECK(c.gamma(3)(0, 0) == 1.0);
    CHECK(c.gamma(4)(0, 0) == 4.0);
    CHECK(c.root(4)(0, 0) == doctest::Approx(2.0));
    CHECK(c.inverse_root(4)(0, 0) == doctest::Approx(0.5));
    c.check_within(UncertaintySet::interval(1.0, 4.0));
    CHECK_THROWS_AS(c.check_within(UncertaintySet::interval(1.0, 2.0)), Error);
}

TEST_CASE("coupled: equal starts stay coupled") {
    const auto& s = builtin_spec("sine-1d");
    const auto c = derive_constants(s, Mode::classical);
    const auto sched = CouplingSchedule::from_constants(c, s.T);
    const auto grid = TimeGrid::refined(s.T, 20, 0.75, 1e-3);
    const auto b = simulate_coupled(s, sched, grid, RngStream(1, streams::coupled, 0), v1(0.4), v1(0.4));
    for (double h : b.H) CHECK(h == 0.0);
    CHECK(b.log_weight == 0.0);
    CHECK(girsanov_weight(b) == 1.0);
    CHECK(b.gap_energy == 0.0);
}

TEST_CASE("coupled: ODE oracle for unit diffusion") {
    const auto& s = builtin_spec("brownian-1d");
    const auto c = derive_constants(s, Mode::classical);
    const auto sched = CouplingSchedule::from_constants(c, s.T);
    const auto grid = TimeGrid::refined(s.T, 20, 0.75, 1e-4);
    const double r = 0.3;
    const auto b = simulate_coupled(s, sched, grid, RngStream(1, streams::coupled, 0), v1(r), v1(0.0));
    const double oracle = r * r * std::exp(-2.0 * quad_reciprocal(sched, 0.0, grid.end()));
    CHECK(b.H.back() == doctest::Approx(oracle).epsilon(1e-3));
    for (std::size_t k = 1; k < b.H.size(); ++k) CHECK(b.H[k] < b.H[k - 1]);

    // The exponential functional is deterministic: ∫ r² e^{−2J(0,s)}/ξ_s² ds.
    const int n = 200000;
    const double T = s.T, ua = std::log(T), ub = std::log(T - grid.end());
    double q = 0.0;
    for (int i = 0; i < n; ++i) {
        const double u = ub + (ua - ub) * (i + 0.5) / n;
        const double t = T - std::exp(u), xi = sched.value(t);
        q += std::exp(u) * r * r * std::exp(-2.0 * sched.reciprocal_integral(0.0, t)) / (xi * xi);
    }
    q *= (ua - ub) / n;
    CHECK(b.gap_energy == doctest::Approx(q).epsilon(1e-4));
}

TEST_CASE("coupled: tilted Y is the plain diffusion from y") {
    const auto& s = builtin_spec("sine-1d");
    const auto c = derive_constants(s, Mode::classical);
    const auto sched = CouplingSchedule::from_constants(c, s.T);
    const auto grid = TimeGrid::refined(s.T, 20, 0.75, 1e-3);
    const RngStream rng(4, streams::coupled, 11);
    CouplingOptions opt;
    opt.measure = Measure::tilted;
    const auto b = simulate_coupled(s, sched, grid, rng, v1(0.2), v1(-0.1), opt);
    const auto plain = simulate_forward(s, grid, rng, v1(-0.1));
    for (std::size_t k = 0; k < plain.size(); ++k) CHECK(b.y_at(k)[0] == doctest::Approx(plain[k][0]).epsilon(1e-10));
    CHECK(b.H.back() < 1e-6);
}

TEST_CASE("coupled: drift cap") {
    const auto& s = builtin_spec("brownian-1d");
    const auto c = derive_constants(s, Mode::classical);
    const auto sched = CouplingSchedule::from_constants(c, s.T);
    const auto grid = TimeGrid::refined(s.T, 20, 0.75, 1e-4);
    CouplingOptions opt;
    opt.drift_cap = 0.5;
    const auto b = simulate_coupled(s, sched, grid, RngStream(1, streams::coupled, 0), v1(1.0), v1(0.0), opt);
    CHECK(b.drift_capped);
    CHECK(b.capped_steps > 0);
    CHECK(std::isfinite(b.log_weight));
}

TEST_CASE("coupled: weight has mean one and sets are worker independent") {
    const auto& s = builtin_spec("sine-1d");
    auto setup = CouplingSetup::make(s, Mode::classical, {}, TimeGrid::refined(s.T, 20, 0.75, 1e-3), 17, 20000, 1);
    const auto one = simulate_coupled_set(setup, v1(0.1), v1(0.0), Measure::original);
    setup.workers = 3;
    const auto three = simulate_coupled_set(setup, v1(0.1), v1(0.0), Measure::original);
    std::vector<double> u(one.size());
    for (std::size_t i = 0; i < one.size(); ++i) {
        CHECK(one[i].log_weight == three[i].log_weight);
        u[i] = girsanov_weight(one[i]);
    }
    const auto st = summarize(u);
    CHECK(std::abs(st.mean - 1.0) <= 3.0 * st.std_error);
}

TEST_CASE("coupled: moment and functional checks at zero separation") {
    const auto& s = builtin_spec("sine-1d");
    const auto setup = CouplingSetup::make(s, Mode::classical, {}, TimeGrid::refined(s.T, 10, 0.75, 1e-2), 1, 100, 1);
    const auto b = simulate_coupled_set(setup, v1(0.0), v1(0.0), Measure::tilted);
    const auto row = exp_functional_check(b, setup.constants, setup.schedule, 0.0);
    CHECK(row.empirical == 1.0);
    CHECK(row.bound == 1.0);
    CHECK(row.pass);
}

TEST_CASE("coupled: supermartingale and contraction on the sine spec") {
    const auto& s = builtin_spec("sine-1d");
    const auto setup = CouplingSetup::make(s, Mode::classical, {}, TimeGrid::refined(s.T, 20, 0.75, 1e-3), 5, 4000, 1);
    const auto sm = supermartingale_check(setup, v1(0.3), v1(0.0));
    CHECK(sm.pass);
    const auto tc = terminal_contraction(setup, v1(0.3), v1(0.0), 20, 0.75, 1e-3, 4);
    CHECK(tc.pass);
}
