#include "doctest.h"

#include <cmath>
#include <numbers>

#include "couplex/catalogue.hpp"
#include "couplex/error.hpp"
#include "couplex/gexp.hpp"

using namespace couplex;

namespace {

Vec v1(double a) { return Vec::Constant(1, a); }

GMcParams mc(std::size_t n = 20000) {
    GMcParams p;
    p.n_paths = n;
    p.search_paths = 5000;
    p.seed = 11;
    return p;
}

ControlFamily family(const ProblemSpec& s, std::size_t cells = 4) {
    return ControlFamily::extreme_points(*s.gamma, cells);
}

ProblemSpec with_terminal(ProblemSpec s, TerminalKind kind, double amplitude, double phase = 0.0, double offset = 0.0) {
    s.terminal = TerminalSpec{};
    s.terminal.kind = kind;
    s.terminal.amplitude = amplitude;
    s.terminal.phase = phase;
    s.terminal.offset = offset;
    return s;
}

}  // namespace

TEST_CASE("linear terminal is preserved") {
    const auto s = with_terminal(builtin_spec("g-brownian-1d"), TerminalKind::linear, 1.0, 0.0, 0.25);
    const auto r = evaluate_g_semigroup(s, v1(0.3), family(s), mc());
    CHECK(std::abs(r.value - 0.55) <= 3 * r.std_error);
    const auto fd = solve_g_heat_fd(s, 0.3, FdParams{});
    CHECK(fd.value == doctest::Approx(0.55).epsilon(1e-9));
}

TEST_CASE("convex and concave quadratic") {
    auto s = with_terminal(builtin_spec("g-brownian-1d"), TerminalKind::quadratic, 1.0);
    const auto fd = solve_g_heat_fd(s, 0.0, FdParams{});
    CHECK(std::abs(fd.value - 4.0) < 1e-2);
    auto r = evaluate_g_semigroup(s, v1(0.0), family(s), mc());
    CHECK(r.best_choice == std::vector<std::size_t>(4, 1));
    CHECK(std::abs(r.value - 4.0) <= 3 * r.std_error);

    s.terminal.amplitude = -1.0;
    CHECK(std::abs(solve_g_heat_fd(s, 0.0, FdParams{}).value + 1.0) < 1e-2);
    r = evaluate_g_semigroup(s, v1(0.0), family(s), mc());
    CHECK(r.best_choice == std::vector<std::size_t>(4, 0));
    CHECK(std::abs(r.value + 1.0) <= 3 * r.std_error);
}

TEST_CASE("singleton gamma matches the heat kernel") {
    auto s = with_terminal(builtin_spec("g-brownian-1d"), TerminalKind::cosine, 1.0);
    s.gamma = UncertaintySet::interval(1.0, 1.0);
    // E cos(x + B_1) = cos(x)e^{-1/2}
    const double exact = std::cos(0.3) * std::exp(-0.5);
    const auto fd = solve_g_heat_fd(s, 0.3, FdParams{});
    CHECK(std::abs(fd.value - exact) < 1e-2);
    CHECK(fd.error_estimate < 1e-3);
}

TEST_CASE("fd comparison principle and CFL") {
    for (const char* id : {"g-brownian-1d", "g-sine-1d", "g-drift-1d"}) {
        CAPTURE(id);
        const auto fd = solve_g_heat_fd(builtin_spec(id), 0.0, FdParams{});
        CHECK(fd.comparison_ok);
        CHECK(fd.max_abs <= builtin_spec(id).terminal.sup_norm() + 1e-12);
    }
    FdParams p;
    p.x_lo = -2.0;
    p.x_hi = 2.0;
    CHECK_THROWS_AS(solve_g_heat_fd(builtin_spec("g-sine-1d"), 0.0, p), Error);
    CHECK_THROWS_AS(solve_g_heat_fd(builtin_spec("g-diag-2d"), 0.0, FdParams{}), Error);
}

TEST_CASE("constant shift") {
    const auto s = builtin_spec("g-sine-1d");
    const auto t = with_terminal(s, TerminalKind::cosine, 1.0, 0.0, 0.5);
    const auto a = solve_g_heat_fd(s, 0.1, FdParams{}, false);
    const auto b = solve_g_heat_fd(t, 0.1, FdParams{}, false);
    CHECK(std::abs(b.value - a.value - 0.5) < 1e-12);
    const auto ma = evaluate_g_semigroup(s, v1(0.1), family(s), mc());
    const auto mb = evaluate_g_semigroup(t, v1(0.1), family(s), mc());
    CHECK(ma.best_choice == mb.best_choice);
    CHECK(std::abs(mb.value - ma.value - 0.5) < 1e-9);
}

TEST_CASE("monotonicity and sub-additivity") {
    const auto s = builtin_spec("g-sine-1d");
    const auto lower = with_terminal(s, TerminalKind::cosine, 1.0, 0.0, -0.2);
    const auto upper = with_terminal(s, TerminalKind::cosine, 1.0);
    const auto lo = evaluate_g_semigroup(lower, v1(0.0), family(s), mc());
    const auto hi = evaluate_g_semigroup(upper, v1(0.0), family(s), mc());
    CHECK(lo.value <= hi.value + 2 * hi.std_error);

    // cos x + cos(x + π/2) = √2 cos(x + π/4)
    const double pi = std::numbers::pi;
    const auto f1 = with_terminal(s, TerminalKind::cosine, 1.0);
    const auto f2 = with_terminal(s, TerminalKind::cosine, 1.0, pi / 2);
    const auto sum = with_terminal(s, TerminalKind::cosine, std::sqrt(2.0), pi / 4);
    const auto e1 = evaluate_g_semigroup(f1, v1(0.0), family(s), mc());
    const auto e2 = evaluate_g_semigroup(f2, v1(0.0), family(s), mc());
    const auto es = evaluate_g_semigroup(sum, v1(0.0), family(s), mc());
    CHECK(es.value <= e1.value + e2.value + 3 * es.std_error);
    const FdParams fp;
    CHECK(solve_g_heat_fd(sum, 0.0, fp, false).value <=
          solve_g_heat_fd(f1, 0.0, fp, false).value + solve_g_heat_fd(f2, 0.0, fp, false).value + 1e-9);
}

TEST_CASE("refining the control family") {
    const auto s = builtin_spec("g-sine-1d");
    const auto a = evaluate_g_semigroup(s, v1(0.0), family(s, 2), mc());
    const auto b = evaluate_g_semigroup(s, v1(0.0), family(s, 4), mc());
    CHECK(b.value >= a.value - 2 * b.std_error);
    auto fb = family(s, 4);
    fb.space_bins = 3;
    fb.policy = SearchPolicy::coordinate_ascent;
    const auto c = evaluate_g_semigroup(s, v1(0.0), fb, mc());
    CHECK(c.policy == SearchPolicy::coordinate_ascent);
    CHECK(c.converged);
    CHECK(c.best_choice.size() == 12);
    CHECK(c.value >= b.value - 2 * c.std_error);
}

TEST_CASE("search policies agree on a small family") {
    const auto s = builtin_spec("g-drift-1d");
    auto f = family(s, 3);
    f.policy = SearchPolicy::exhaustive;
    const auto ex = evaluate_g_semigroup(s, v1(0.2), f, mc());
    CHECK(ex.evaluations == 8);
    f.policy = SearchPolicy::coordinate_ascent;
    const auto ca = evaluate_g_semigroup(s, v1(0.2), f, mc());
    CHECK(ca.search_value <= ex.search_value);
    CHECK(ca.converged);
}

TEST_CASE("budget exhaustion keeps the best control so far") {
    const auto s = builtin_spec("g-sine-1d");
    auto f = family(s, 8);
    f.budget = 5;
    const auto r = evaluate_g_semigroup(s, v1(0.0), f, mc(5000));
    CHECK(r.budget_exhausted);
    CHECK_FALSE(r.converged);
    CHECK(r.evaluations == 5);
    CHECK(r.best_choice.size() == 8);
    CHECK(std::isfinite(r.value));
}

TEST_CASE("worker count does not change the result") {
    const auto s = builtin_spec("g-sine-1d");
    auto p = mc(6000);
    const auto a = evaluate_g_semigroup(s, v1(0.0), family(s), p);
    p.workers = 3;
    const auto b = evaluate_g_semigroup(s, v1(0.0), family(s), p);
    CHECK(a.value == b.value);
    CHECK(a.std_error == b.std_error);
    CHECK(a.best_choice == b.best_choice);
}

TEST_CASE("invalid control families") {
    const auto s = builtin_spec("g-sine-1d");
    auto f = family(s);
    f.candidates.push_back(Mat::Constant(1, 1, 9.0));
    CHECK_THROWS_AS(evaluate_g_semigroup(s, v1(0.0), f, mc()), Error);
    CHECK_THROWS_AS(evaluate_g_semigroup(builtin_spec("sine-1d"), v1(0.0), f, mc()), Error);
    auto g = family(builtin_spec("g-diag-2d"));
    g.space_bins = 2;
    CHECK_THROWS_AS(evaluate_g_semigroup(builtin_spec("g-diag-2d"), Vec::Zero(2), g, mc()), Error);
}

TEST_CASE("cross validation on the sine-perturbed spec") {
    const auto s = builtin_spec("g-sine-1d");
    auto p = mc(40000);
    p.search_paths = 10000;
    const auto rep = cross_validate(s, 0.0, family(s, 8), p, FdParams{});
    CHECK(rep.pass);
    CHECK_FALSE(rep.mc_above_fd);
    CHECK(rep.policy <= rep.fd + 3 * rep.policy_std_error + rep.fd_error);
}
