#include "doctest.h"

#include <cmath>
#include <numbers>

#include "couplex/catalogue.hpp"
#include "couplex/error.hpp"
#include "couplex/harness.hpp"

using namespace couplex;

namespace {

BsdeParams small(std::size_t n = 4000) {
    BsdeParams p;
    p.n_paths = n;
    p.n_steps = 20;
    p.seed = 5;
    return p;
}

PairOptions at(double c, std::size_t levels = 5) {
    PairOptions o;
    o.centers = {Vec::Constant(1, c)};
    o.levels = levels;
    return o;
}

}  // namespace

TEST_CASE("pair grid layout") {
    PairOptions o;
    o.centers = {Vec::Zero(2), Vec::Ones(2)};
    o.random_directions = 2;
    const auto g = make_pairs(2, o);
    CHECK(g.rays.size() == 8);
    CHECK(g.pairs.size() == 40);
    for (const auto& p : g.pairs) {
        CHECK((p.y - p.x).norm() == doctest::Approx(p.r).epsilon(1e-14));
        CHECK(p.r == doctest::Approx(0.5 * std::pow(0.5, static_cast<double>(p.level))));
        CHECK(((p.x + p.y) / 2 - g.rays[p.ray].center).norm() < 1e-14);
    }
    CHECK(make_pairs(1, PairOptions{}).rays.size() == 1);
    PairOptions bad;
    bad.levels = 2;
    CHECK_THROWS_AS(make_pairs(1, bad), Error);
}

TEST_CASE("gaussian smoothing of cos") {
    TerminalSpec phi;
    phi.kind = TerminalKind::cosine;
    for (double x : {0.0, 0.4, 2.0}) CHECK(gaussian_smoothing(phi, x, 1.0) == doctest::Approx(std::cos(x) * std::exp(-0.5)).epsilon(1e-10));
    CHECK(gaussian_smoothing(phi, 0.3, 0.5) == doctest::Approx(std::cos(0.3) * std::exp(-0.125)).epsilon(1e-10));
}

TEST_CASE("quadrature corollary on the Gaussian case") {
    ProblemSpec s = builtin_spec("brownian-1d");
    s.terminal = TerminalSpec{};
    s.terminal.kind = TerminalKind::cosine;
    const auto rep = verify_corollary_quadrature(s, at(std::numbers::pi / 2));
    // u(1, x) = e^{-1/2} cos x, so the slope at π/2 and the sup of |u'| are e^{-1/2}.
    CHECK(rep.lipschitz_sup == doctest::Approx(std::exp(-0.5)).epsilon(1e-6));
    CHECK(rep.slope == doctest::Approx(std::exp(-0.5)).epsilon(1e-3));
    CHECK(rep.slope_std_error < 1e-3);
    CHECK(rep.pass);
    CHECK(rep.bound_slope == theorem_bound(derive_constants(s, Mode::classical), s, BoundKind::corollary).slope);
    CHECK_THROWS_AS(verify_corollary_quadrature(builtin_spec("sine-1d"), at(0.0)), Error);
}

TEST_CASE("constant terminal gives zero quotients") {
    ProblemSpec s = builtin_spec("sine-1d");
    s.terminal = TerminalSpec{};
    s.terminal.offset = 0.3;
    const auto rep = verify_corollary(s, at(0.1), small());
    for (const auto& row : rep.rows) CHECK(row.quotient == 0.0);
    CHECK(rep.pass);
    CHECK(rep.estimator == "mc");
}

TEST_CASE("main1 on the semilinear spec") {
    const auto s = builtin_spec("semilinear-1d");
    const auto rep = verify_main1(s, at(0.2, 3), small());
    CHECK(rep.estimator == "bsde");
    CHECK(rep.rows.size() == 3);
    CHECK(rep.constants.mu == doctest::Approx(2.0));
    CHECK(rep.constants.L == doctest::Approx(0.54));
    CHECK(rep.bound_slope == theorem_bound(derive_constants(s, Mode::classical), s, BoundKind::main1).slope);
    for (const auto& row : rep.rows) {
        CHECK(row.quotient >= 0.0);
        CHECK(row.std_error > 0.0);
        CHECK(row.quotient < 2.0);
    }
    CHECK(rep.pass);
}

TEST_CASE("main1 with zero driver reproduces the corollary values") {
    ProblemSpec s = builtin_spec("semilinear-1d");
    s.driver = DriverSpec{};
    const auto a = verify_main1(s, at(0.0, 3), small());
    const auto b = verify_corollary(s, at(0.0, 3), small());
    REQUIRE(a.rows.size() == b.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        CHECK(a.rows[i].u_x == b.rows[i].u_x);
        CHECK(a.rows[i].u_y == b.rows[i].u_y);
    }
}

TEST_CASE("four times the paths halves the stderr") {
    const auto s = builtin_spec("sine-1d");
    const auto a = verify_corollary(s, at(0.3, 3), small(4000));
    const auto b = verify_corollary(s, at(0.3, 3), small(16000));
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        const double ratio = a.rows[i].std_error / b.rows[i].std_error;
        CHECK(ratio > 1.5);
        CHECK(ratio < 2.5);
    }
}

TEST_CASE("main2 by finite differences") {
    const auto s = builtin_spec("g-drift-1d");
    PairOptions o = at(0.0);
    o.centers.push_back(Vec::Constant(1, 0.5));
    const auto rep = verify_main2(s, o, FdParams{}, nullptr, GMcParams{});
    CHECK(rep.rows.size() == 10);
    CHECK(rep.estimator == "fd");
    CHECK(rep.bound_slope == doctest::Approx(2.515533).epsilon(1e-6));
    CHECK(rep.pass);
}

TEST_CASE("main2 in the linear region at short horizon") {
    ProblemSpec s = builtin_spec("g-brownian-1d");
    s.T = 0.01;
    s.terminal = TerminalSpec{};
    s.terminal.kind = TerminalKind::linear;
    s.terminal.cap = 3.0;
    FdParams fd;
    fd.x_lo = -5.0;
    fd.x_hi = 5.0;
    fd.dx = 0.01;
    const auto rep = verify_main2(s, at(0.0), fd, nullptr, GMcParams{});
    for (const auto& row : rep.rows) CHECK(row.quotient == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(rep.pass);
}

TEST_CASE("main2 by control-sup Monte Carlo in d = 2") {
    const auto s = builtin_spec("g-diag-2d");
    PairOptions o;
    o.levels = 3;
    o.random_directions = 0;
    GMcParams mc;
    mc.n_paths = 2000;
    mc.steps_per_cell = 4;
    auto fam = ControlFamily::extreme_points(*s.gamma, 2);
    const auto rep = verify_main2(s, o, FdParams{}, &fam, mc);
    CHECK(rep.estimator == "g-mc");
    CHECK(rep.rows.size() == 6);
    for (const auto& row : rep.rows) CHECK(std::isfinite(row.quotient));
    CHECK(rep.pass);
}
