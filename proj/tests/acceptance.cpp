// Acceptance gate: one PASS/FAIL line per criterion, exit 0 only if all pass.
// Usage: couplex_acceptance [--only N[,N...]] [--configs DIR]

#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "couplex/bsde.hpp"
#include "couplex/catalogue.hpp"
#include "couplex/coupling.hpp"
#include "couplex/experiment.hpp"
#include "couplex/gexp.hpp"
#include "couplex/harness.hpp"

using namespace couplex;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
    char buf[1024];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Vec v1(double a) { return Vec::Constant(1, a); }

// ∫_a^b ds/ξ_s by midpoint rule after s = T − e^u; independent of the closed form.
double quad_reciprocal(const CouplingSchedule& s, double a, double b, int n = 400000) {
    const double T = s.horizon();
    const double ua = std::log(T - a), ub = std::log(T - b);
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        const double u = ub + (ua - ub) * (i + 0.5) / n;
        acc += std::exp(u) / s.value(T - std::exp(u));
    }
    return acc * (ua - ub) / n;
}

Verdict contraction() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto& s = builtin_spec("brownian-1d");
    ConstantConfig cfg;
    cfg.alpha = 5.0;
    const auto grid = TimeGrid::refined(s.T, 64, 0.5, 1e-4);
    const auto setup = CouplingSetup::make(s, Mode::classical, cfg, grid, 1, 2000, 1);
    const double r = 0.5;
    const auto set = simulate_coupled_set(setup, v1(r), v1(0.0), Measure::original);
    const double oracle = r * r * std::exp(-2.0 * quad_reciprocal(setup.schedule, 0.0, grid.end()));
    double worst = 0.0;
    for (const auto& b : set) worst = std::max(worst, std::abs(b.H.back() / oracle - 1.0));
    const double secs = seconds_since(t0);
    return {worst <= 1e-3 && secs < 60.0,
            fmt("max rel err %.2e over %zu paths (limit 1e-3), H_Teff=%.6e, %.1f s (limit 60)", worst, set.size(),
                oracle, secs)};
}

CouplingSetup sine_setup() {
    const auto& s = builtin_spec("sine-1d");
    return CouplingSetup::make(s, Mode::classical, ConstantConfig{}, TimeGrid::refined(s.T, 64, 0.5, 1e-4), 2024,
                               100000, 1);
}

Verdict girsanov_identity_check() {
    const auto setup = sine_setup();
    std::vector<std::pair<std::string, TerminalSpec>> phis;
    phis.emplace_back("terminal", setup.spec.terminal);
    TerminalSpec t;
    t.kind = TerminalKind::sine;
    phis.emplace_back("sine", t);
    t.kind = TerminalKind::tanh;
    t.frequency = 2.0;
    phis.emplace_back("tanh2", t);
    const auto rows = girsanov_identity(setup, v1(0.0), v1(0.2), phis);
    Verdict v{rows.size() == 3, ""};
    for (const auto& row : rows) {
        v.pass = v.pass && row.pass;
        v.detail += fmt("%s |diff|=%.2e vs 3se=%.2e; ", row.phi.c_str(), std::abs(row.weighted - row.direct),
                        3 * row.combined_se);
    }
    return v;
}

Verdict moment_bound() {
    const auto setup = sine_setup();
    Verdict v{true, ""};
    for (double sep : {0.05, 0.1, 0.2}) {
        const auto set = simulate_coupled_set(setup, v1(0.0), v1(sep), Measure::original);
        const auto row = girsanov_moment_check(set, setup.constants, setup.schedule, sep);
        v.pass = v.pass && row.pass;
        v.detail += fmt("r=%.2f mean=%.5f bound=%.5f; ", sep, row.empirical, row.bound);
    }
    return v;
}

Verdict bsde_oracles() {
    const auto t0 = std::chrono::steady_clock::now();
    BsdeParams p;
    p.n_paths = 100000;
    p.n_steps = 50;
    p.basis_degree = 3;
    p.seed = 7;
    const double x0 = std::numbers::pi / 2;

    ProblemSpec lin = builtin_spec("brownian-1d");
    lin.terminal = TerminalSpec{};
    lin.terminal.kind = TerminalKind::sine;
    const double r = 0.5, g0 = 0.1, T = lin.T;
    lin.driver = DriverSpec::linear(g0, r, Vec::Zero(1));
    const double lin_exact = std::exp((r - 0.5) * T) * std::sin(x0) + g0 * std::expm1(r * T) / r;
    const double lin_y = solve_bsde(lin, v1(x0), p).y0;

    ProblemSpec gauss = lin;
    gauss.driver = DriverSpec::zero();
    const double x1 = 1.0;
    const double gauss_exact = std::exp(-T / 2) * std::sin(x1);
    const double gauss_y = solve_bsde(gauss, v1(x1), p).y0;

    const double e1 = std::abs(lin_y / lin_exact - 1.0), e2 = std::abs(gauss_y / gauss_exact - 1.0);
    const double secs = seconds_since(t0);
    return {e1 <= 0.01 && e2 <= 0.01 && secs < 120.0,
            fmt("linear %.5f vs %.5f (rel %.1e), gaussian %.5f vs %.5f (rel %.1e), %.1f s (limit 120)", lin_y,
                lin_exact, e1, gauss_y, gauss_exact, e2, secs)};
}

std::string ray_summary(const GradientReport& g) {
    return fmt("%s slope=%.4g (+3se %.4g) bound=%.4g margin=%.4g", g.spec_id.c_str(), g.slope,
               g.slope + 3 * g.slope_std_error, g.bound_slope, g.margin);
}

Verdict main1() {
    PairOptions o;
    o.centers = {v1(0.0)};
    BsdeParams p;
    p.n_paths = 100000;
    p.n_steps = 50;
    p.seed = 3;
    ConstantConfig cfg;  // c_{5/2} = 4, d_p = 2^p
    const auto g = verify_main1(builtin_spec("semilinear-1d"), o, p, cfg);
    const bool recorded = g.constants.config.bdg.at(2.5) == 4.0 && g.constants.config.d_base == 2.0;
    return {g.pass && recorded && g.estimator == "bsde",
            ray_summary(g) + fmt(", c_5/2=%g d_p=%g^p", g.constants.config.bdg.at(2.5), g.constants.config.d_base)};
}

Verdict corollary() {
    PairOptions o;
    o.centers = {v1(0.0), v1(std::numbers::pi / 2)};
    const auto g = verify_corollary_quadrature(builtin_spec("brownian-1d"), o);
    return {g.pass && g.estimator == "quadrature",
            ray_summary(g) + fmt(", sup|u'|=%.6f", g.lipschitz_sup)};
}

Verdict g_heat() {
    ProblemSpec s = builtin_spec("g-brownian-1d");
    s.terminal = TerminalSpec{};
    s.terminal.kind = TerminalKind::quadratic;
    GMcParams mc;
    mc.search_paths = 20000;
    mc.n_paths = 1000000;
    mc.seed = 17;
    mc.policy_steps = 64;  // the policy value is not part of this criterion
    Verdict v{true, ""};
    for (double a : {1.0, -1.0}) {
        s.terminal.amplitude = a;
        const double exact = a > 0 ? 4.0 : -1.0;  // σ̄²T and −σ̲²T
        const auto fam = ControlFamily::extreme_points(*s.gamma, 8);
        const auto rep = cross_validate(s, 0.0, fam, mc, FdParams{});
        const bool fd_ok = std::abs(rep.fd - exact) <= 1e-2;
        const bool mc_ok = std::abs(rep.mc - rep.fd) <= 2e-2 && rep.mc - rep.fd <= 3 * rep.mc_std_error;
        v.pass = v.pass && fd_ok && mc_ok;
        v.detail += fmt("%sx^2: fd=%.6f exact=%g mc=%.4f+-%.4f; ", a > 0 ? "" : "-", rep.fd, exact, rep.mc,
                        rep.mc_std_error);
    }
    return v;
}

Verdict main2() {
    Verdict v{true, ""};
    for (const char* id : {"g-drift-1d", "g-sine-1d"}) {
        PairOptions o;
        o.centers = {v1(0.0), v1(0.5)};
        const auto g = verify_main2(builtin_spec(id), o, FdParams{}, nullptr, GMcParams{});
        v.pass = v.pass && g.pass && g.rows.size() == 10 && g.estimator == "fd";
        double worst = 0.0;
        for (const auto& row : g.rows) worst = std::max(worst, row.quotient);
        v.detail += fmt("%s: %zu pairs, max quotient %.4f <= %.4f; ", id, g.rows.size(), worst, g.bound_slope);
    }
    return v;
}

Verdict schedule() {
    std::vector<double> ts(1000);
    Verdict v{true, ""};
    double worst = -INFINITY;
    int checks = 0;
    for (const auto& s : builtin_specs()) {
        for (std::size_t i = 0; i < ts.size(); ++i) ts[i] = s.T * static_cast<double>(i) / ts.size();
        std::vector<std::pair<Mode, std::vector<double>>> runs{{Mode::classical, {1.0, 1.5, 2.0, 2.5}}};
        if (s.g_mode()) runs.push_back({Mode::g_mode, {1.0}});
        for (const auto& [mode, ps] : runs) {
            const auto c = derive_constants(s, mode);
            const auto rep = check_schedule_inequality(CouplingSchedule::from_constants(c, s.T), c, ps, ts, 1e-12);
            v.pass = v.pass && rep.pass;
            worst = std::max(worst, rep.max_excess);
            ++checks;
        }
    }
    v.detail = fmt("%d spec/mode checks, max(LHS+theta)=%.3e (limit 1e-12)", checks, worst);
    return v;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

Verdict determinism(const fs::path& configs) {
    Verdict v{true, ""};
    const fs::path root = fs::temp_directory_path() / "couplex-acceptance";
    int kinds = 0;
    for (auto kind : experiment_kinds()) {
        const fs::path cfg = configs / (std::string(to_string(kind)) + ".json");
        const std::string text = slurp(cfg);
        if (text.empty()) {
            v.pass = false;
            v.detail += fmt("missing %s; ", cfg.string().c_str());
            continue;
        }
        std::vector<std::string> blobs;
        for (unsigned w : {1u, 2u, 8u}) {
            RunOptions o;
            o.workers = w;
            o.base_dir = configs.string();
            o.out_dir = (root / (std::string(to_string(kind)) + "-w" + std::to_string(w))).string();
            fs::remove_all(o.out_dir);
            const auto out = run_experiment(to_string(kind), text, o);
            std::string blob = out.results;
            for (const auto& f : out.outputs)
                if (f != "manifest.json") blob += "\n--" + f + "\n" + slurp(fs::path(o.out_dir) / f);
            if (out.results.empty()) {
                v.pass = false;
                v.detail += fmt("%s errored: %s; ", to_string(kind), out.error.c_str());
            }
            blobs.push_back(std::move(blob));
        }
        const bool same = blobs[0] == blobs[1] && blobs[0] == blobs[2];
        if (!same) v.detail += fmt("%s differs; ", to_string(kind));
        v.pass = v.pass && same;
        ++kinds;
    }
    v.detail += fmt("%d kinds x workers {1,2,8}: results.json and CSVs compared byte for byte", kinds);
    return v;
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> only;
    fs::path configs = COUPLEX_CONFIG_DIR;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--only" && i + 1 < argc) {
            std::stringstream ss(argv[++i]);
            for (std::string tok; std::getline(ss, tok, ',');) only.insert(std::stoi(tok));
        } else if (a == "--configs" && i + 1 < argc) {
            configs = argv[++i];
        } else {
            std::fprintf(stderr, "usage: %s [--only N[,N...]] [--configs DIR]\n", argv[0]);
            return 1;
        }
    }

    const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
        {"coupling contraction vs ODE", contraction},
        {"Girsanov identity", girsanov_identity_check},
        {"Girsanov moment bound", moment_bound},
        {"BSDE solver oracles", bsde_oracles},
        {"semilinear gradient bound", main1},
        {"Gaussian gradient bound by quadrature", corollary},
        {"G-heat FD and control-sup MC", g_heat},
        {"G-mode gradient bound", main2},
        {"schedule inequality", schedule},
        {"determinism across workers", [&] { return determinism(configs); }},
    };

    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i + 1);
        if (!only.empty() && !only.count(id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = criteria[i].second();
        } catch (const std::exception& e) {
            v = {false, std::string("threw: ") + e.what()};
        }
        failed += !v.pass;
        std::printf("%s %2d %s: %s [%.1f s]\n", v.pass ? "PASS" : "FAIL", id, criteria[i].first, v.detail.c_str(),
                    seconds_since(t0));
        std::fflush(stdout);
    }
    return failed ? 1 : 0;
}
