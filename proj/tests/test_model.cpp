#include "doctest.h"

#include <cmath>
#include <random>

#include "couplex/catalogue.hpp"
#include "couplex/model.hpp"

using namespace couplex;

namespace {

ProblemSpec unit_brownian() {
    ProblemSpec s = builtin_spec("brownian-1d");
    return s;
}

}  // namespace

TEST_CASE("delta at beta = 1") {
    ProblemSpec s = unit_brownian();
    const auto c = derive_constants(s, Mode::classical);
    CHECK(c.beta_sigma == doctest::Approx(1.0));
    CHECK(c.delta == doctest::Approx(1.0 / 24.0).epsilon(1e-14));
}

TEST_CASE("C_alpha with c_{5/2} = 4") {
    const auto c = derive_constants(unit_brownian(), Mode::classical);
    // 4^{2/5} (1/5)^{1/5} (4/5)^{4/5}
    const double oracle = std::pow(4.0, 0.4) * std::pow(0.2, 0.2) * std::pow(0.8, 0.8);
    CHECK(c.C_alpha == doctest::Approx(oracle).epsilon(1e-14));
    CHECK(c.C_alpha == doctest::Approx(1.05560).epsilon(1e-5));
    CHECK(c.bdg_used == 4.0);
}

TEST_CASE("missing BDG constant is a config error") {
    ConstantConfig cfg;
    cfg.alpha = 6.0;
    try {
        derive_constants(unit_brownian(), Mode::classical, cfg);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::config);
    }
}

TEST_CASE("C_main2 for unit ellipticity") {
    const auto c = derive_constants(builtin_spec("g-drift-1d"), Mode::g_mode);
    CHECK(c.C_main2 == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(c.L == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("semilinear built-in: mu and L") {
    const auto c = derive_constants(builtin_spec("semilinear-1d"), Mode::classical);
    CHECK(c.mu == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(c.L == doctest::Approx(0.54).epsilon(1e-14));
    REQUIRE(c.C_g.has_value());
    CHECK(*c.C_g == doctest::Approx(1.0 + 1.0 / 0.25));
    CHECK(c.hyp.L_sigma == doctest::Approx(0.1));
    CHECK(c.hyp.L_b == doctest::Approx(0.2));
}

TEST_CASE("C_g undefined with K_g > 0, L_g = 0") {
    ProblemSpec s = builtin_spec("semilinear-1d");
    s.driver = DriverSpec::sine_lipschitz(0.0, 1.0, 0.0);
    CHECK_THROWS_AS(derive_constants(s, Mode::classical), Error);
}

TEST_CASE("g-mode requires gamma and a valid theta") {
    CHECK_THROWS_AS(derive_constants(builtin_spec("sine-1d"), Mode::g_mode), Error);
    ConstantConfig cfg;
    cfg.theta = 5.0;
    CHECK_THROWS_AS(derive_constants(builtin_spec("g-sine-1d"), Mode::g_mode, cfg), Error);
}

TEST_CASE("validate names the offending field") {
    ProblemSpec s = unit_brownian();
    s.T = -1;
    try {
        s.validate();
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::invalid_spec);
        CHECK(std::string(e.what()).rfind("T:", 0) == 0);
    }
    s = unit_brownian();
    s.sigma = CoefficientField::sine_perturbed(Vec::Constant(1, 0.1), 0.2, Vec::Constant(1, 1.0));
    CHECK_THROWS_AS(s.validate(), Error);
}

TEST_CASE("schedule values") {
    const auto s = CouplingSchedule::classical(5.0, 0.5, 2.0, 1.0);
    // 0.625 (1 − e^{−2}) / 2
    CHECK(s.value(0.0) == doctest::Approx(0.625 * (1.0 - std::exp(-2.0)) / 2.0).epsilon(1e-14));
    CHECK(s.value(0.0) == doctest::Approx(0.2702077).epsilon(1e-7));
    CHECK(s.value(1.0) == 0.0);
    CHECK_THROWS_AS(s.eval(1.5), Error);
    CHECK_THROWS_AS(s.eval(-0.1), Error);

    const auto g = CouplingSchedule::g_mode(1.0, 1.0, 0.5, 1.0, 1.0);
    CHECK(g.value(0.0) == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-14));

    const auto flat = CouplingSchedule::classical(5.0, 0.5, 0.0, 1.0);
    CHECK(flat.value(0.25) == doctest::Approx(0.625 * 0.75));
    CHECK(flat.unit(0.0) == doctest::Approx(1.0));
}

TEST_CASE("schedule derivative matches finite differences and is negative") {
    const auto s = CouplingSchedule::classical(5.0, 0.3, 1.3, 2.0);
    for (double t = 0.0; t < 1.99; t += 0.07) {
        const double h = 1e-6;
        const double fd = (s.value(std::min(2.0, t + h)) - s.value(std::max(0.0, t - h))) /
                          (std::min(2.0, t + h) - std::max(0.0, t - h));
        CHECK(s.eval(t).derivative < 0.0);
        CHECK(s.eval(t).derivative == doctest::Approx(fd).epsilon(1e-6));
        if (t > 0) CHECK(s.value(t) < s.value(t - 0.07));
    }
}

TEST_CASE("reciprocal integral matches quadrature") {
    for (double rate : {0.0, 0.54, 3.0}) {
        const auto s = CouplingSchedule::classical(5.0, 0.4, rate, 1.0);
        const double a = 0.1, b = 0.93;
        const int n = 200000;
        double q = 0.0;
        for (int i = 0; i < n; ++i) {
            const double t = a + (b - a) * (i + 0.5) / n;
            q += 1.0 / s.value(t);
        }
        q *= (b - a) / n;
        CHECK(s.reciprocal_integral(a, b) == doctest::Approx(q).epsilon(1e-7));
    }
}

TEST_CASE("delta identity over random ellipticity pairs") {
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> u(0.1, 3.0);
    for (int i = 0; i < 100; ++i) {
        double lam = u(gen), Lam = u(gen);
        if (lam > Lam) std::swap(lam, Lam);
        const double theta = lam * lam / Lam / 2.0, beta = Lam / lam;
        const double lhs = theta * theta / (4 * Lam * Lam * beta * beta + 4 * theta * Lam * beta);
        const double rhs = 1.0 / (16 * std::pow(beta, 6) + 8 * std::pow(beta, 3));
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));

        ProblemSpec s = unit_brownian();
        s.sigma = CoefficientField::sine_perturbed(Vec::Constant(1, 0.5 * (lam + Lam)), 0.5 * (Lam - lam),
                                                   Vec::Constant(1, 1.0));
        CHECK(derive_constants(s, Mode::classical).delta == doctest::Approx(rhs).epsilon(1e-10));
    }
}

TEST_CASE("built-in coefficients respect their declared constants") {
    std::mt19937_64 gen(11);
    std::normal_distribution<double> n(0.0, 3.0);
    for (const auto& spec : builtin_specs()) {
        const auto h = hypothesis_constants(spec);
        CAPTURE(spec.id);
        for (int i = 0; i < 1000; ++i) {
            Vec x(spec.d), y(spec.d);
            for (int j = 0; j < spec.d; ++j) {
                x[j] = n(gen);
                y[j] = n(gen);
            }
            const double r = (x - y).norm();
            CHECK((spec.sigma(x) - spec.sigma(y)).norm() <= h.L_sigma * r * (1 + 1e-12) + 1e-15);
            CHECK((spec.b(x) - spec.b(y)).norm() <= h.L_b * r * (1 + 1e-12) + 1e-15);
            const Vec s = spec.sigma(x);
            CHECK(s.minCoeff() >= h.lambda_sigma - 1e-15);
            CHECK(s.maxCoeff() <= h.Lambda_sigma + 1e-15);

            const double y1 = n(gen), y2 = n(gen);
            const double gap = std::abs(spec.driver(y1, x) - spec.driver(y2, y));
            CHECK(gap <= h.K_g * std::abs(y1 - y2) + h.L_g * r + 1e-12);
            CHECK(std::abs(spec.terminal(x)) <= h.phi_sup + 1e-15);
        }
    }
}

TEST_CASE("schedule inequality on every built-in") {
    std::vector<double> ts;
    for (int i = 0; i < 1000; ++i) ts.push_back(static_cast<double>(i) / 1000.0);
    for (const auto& spec : builtin_specs()) {
        CAPTURE(spec.id);
        for (double& t : ts) t = std::min(t, spec.T * (1 - 1e-9));
        const auto c = derive_constants(spec, Mode::classical);
        const auto s = CouplingSchedule::from_constants(c, spec.T);
        const auto rep = check_schedule_inequality(s, c, {1.0, 1.5, 2.0, 2.5}, ts);
        CHECK(rep.pass);
        CHECK(rep.max_excess <= 1e-12);
        if (spec.g_mode()) {
            const auto cg = derive_constants(spec, Mode::g_mode);
            const auto sg = CouplingSchedule::from_constants(cg, spec.T);
            CHECK(check_schedule_inequality(sg, cg, {1.0}, ts).pass);
        }
    }
}

TEST_CASE("inequality is binding as t approaches T") {
    const auto c = derive_constants(builtin_spec("sine-1d"), Mode::classical);
    const auto s = CouplingSchedule::from_constants(c, 1.0);
    const auto rep = check_schedule_inequality(s, c, {2.5}, {1.0 - 1e-12});
    CHECK(rep.rows[0].excess == doctest::Approx(0.0).epsilon(1e-9).scale(1.0));
}

TEST_CASE("theorem bounds") {
    const auto& gd = builtin_spec("g-drift-1d");
    const auto cg = derive_constants(gd, Mode::g_mode);
    const auto b2 = theorem_bound(cg, gd, BoundKind::main2);
    CHECK(b2.slope == doctest::Approx(2.0 / std::sqrt(1.0 - std::exp(-1.0))).epsilon(1e-14));
    CHECK(b2.slope == doctest::Approx(2.515533).epsilon(1e-6));
    CHECK(b2(0.1) == doctest::Approx(0.1 * b2.slope));

    // L = 0: denominator √T.
    const auto& bm = builtin_spec("brownian-1d");
    const auto cb = derive_constants(bm, Mode::classical);
    const auto bc = theorem_bound(cb, bm, BoundKind::corollary);
    CHECK(bc.slope == doctest::Approx(cb.C_corollary * 1.0 / std::sqrt(1.0)));

    // main1 with g ≡ 0 has no exponential factor.
    const auto b1 = theorem_bound(cb, bm, BoundKind::main1);
    CHECK(b1.slope == doctest::Approx(bc.slope).epsilon(1e-14));
}
