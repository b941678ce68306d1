#include "couplex/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "couplex/bsde.hpp"
#include "couplex/catalogue.hpp"
#include "couplex/coupling.hpp"
#include "couplex/gexp.hpp"
#include "couplex/harness.hpp"
#include "couplex/io.hpp"
#include "json_util.hpp"

namespace couplex {

using detail::json;
using detail::Node;
using detail::num;
using detail::to_json;

namespace {

constexpr ExperimentKind kKinds[] = {
    ExperimentKind::simulate,        ExperimentKind::bsde,         ExperimentKind::g_semigroup,
    ExperimentKind::g_heat,          ExperimentKind::verify_main1, ExperimentKind::verify_corollary,
    ExperimentKind::verify_main2,    ExperimentKind::verify_girsanov, ExperimentKind::schedule_check,
};

struct Csv {
    std::string name;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    void add(std::vector<std::string> row) { rows.push_back(std::move(row)); }

    std::string text() const {
        std::string out;
        auto line = [&](const std::vector<std::string>& cells) {
            for (std::size_t i = 0; i < cells.size(); ++i) {
                if (i) out += ',';
                out += csv_field(cells[i]);
            }
            out += "\r\n";
        };
        line(header);
        for (const auto& r : rows) line(r);
        return out;
    }
};

std::string f(double x) { return format_double(x); }
std::string f(std::size_t x) { return std::to_string(x); }
std::string f(bool x) { return x ? "true" : "false"; }

struct Context {
    ExperimentKind kind;
    const Node& cfg;

    Context(ExperimentKind k, const Node& n) : kind(k), cfg(n) {}
    std::uint64_t seed = 0;
    ProblemSpec spec;
    Mode mode = Mode::classical;
    ConstantConfig constants;
    unsigned workers = 1;
};

struct KindResult {
    json result;
    bool pass = true;
    std::vector<Csv> csvs;
    std::optional<Error> soft_error;
};

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) fail(ErrorCode::io, "cannot read " + p.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

ProblemSpec load_spec(const Node& n, const std::string& base_dir) {
    if (n.raw().is_string()) {
        const std::string ref = n.text();
        if (ref.size() > 5 && ref.ends_with(".json")) {
            std::filesystem::path p(ref);
            if (p.is_relative() && !base_dir.empty()) p = std::filesystem::path(base_dir) / p;
            const std::string text = read_file(p);
            json j;
            try {
                j = json::parse(text);
            } catch (const json::parse_error& e) {
                fail(ErrorCode::config, n.path() + ": malformed JSON in " + p.string() + ": " + e.what());
            }
            return detail::parse_spec(Node(j, n.path()));
        }
        try {
            return builtin_spec(ref);
        } catch (const Error& e) {
            fail(ErrorCode::config, n.path() + ": " + e.what());
        }
    }
    return detail::parse_spec(n);
}

Vec point(const Node& n, int d) {
    Vec v = n.raw().is_number() ? Vec::Constant(1, n.number()) : n.vec();
    if (v.size() != d) fail(ErrorCode::config, n.path() + ": expected dimension " + std::to_string(d));
    return v;
}

TimeGrid parse_grid(const Context& c) {
    std::size_t n0 = 64;
    double q = 0.5, h_min = 1e-4;
    if (auto g = c.cfg.optional("grid")) {
        g->only({"n0", "q", "h_min"});
        n0 = g->count("n0", n0);
        q = g->number("q", q);
        h_min = g->number("h_min", h_min);
    }
    try {
        return TimeGrid::refined(c.spec.T, n0, q, h_min);
    } catch (const Error& e) {
        fail(ErrorCode::config, std::string("grid: ") + e.what());
    }
}

BsdeParams parse_solver(const Context& c) {
    BsdeParams p;
    p.seed = c.seed;
    p.workers = c.workers;
    if (auto s = c.cfg.optional("solver")) {
        s->only({"n_paths", "n_steps", "basis_degree", "picard_iters"});
        p.n_paths = s->count("n_paths", p.n_paths);
        p.n_steps = s->count("n_steps", p.n_steps);
        p.basis_degree = static_cast<int>(s->count("basis_degree", static_cast<std::size_t>(p.basis_degree)));
        p.picard_iters = static_cast<int>(s->count("picard_iters", static_cast<std::size_t>(p.picard_iters)));
    }
    return p;
}

GMcParams parse_mc(const Context& c) {
    GMcParams p;
    p.seed = c.seed;
    p.workers = c.workers;
    if (auto s = c.cfg.optional("mc")) {
        s->only({"n_paths", "search_paths", "steps_per_cell", "policy_steps"});
        p.n_paths = s->count("n_paths", p.n_paths);
        p.search_paths = s->count("search_paths", p.search_paths);
        p.steps_per_cell = s->count("steps_per_cell", p.steps_per_cell);
        p.policy_steps = s->count("policy_steps", p.policy_steps);
    }
    return p;
}

ControlFamily parse_control(const Context& c) {
    if (!c.spec.gamma) fail(ErrorCode::config, "spec.gamma: this experiment needs an uncertainty set");
    ControlFamily fam = ControlFamily::extreme_points(*c.spec.gamma, 8);
    if (auto s = c.cfg.optional("control")) {
        s->only({"K", "policy", "budget", "space_bins", "bin_half_width"});
        fam.cells = s->count("K", fam.cells);
        fam.budget = s->count("budget", fam.budget);
        fam.space_bins = s->count("space_bins", fam.space_bins);
        fam.bin_half_width = s->number("bin_half_width", fam.bin_half_width);
        if (s->has("policy")) {
            const std::string p = s->child("policy").text();
            if (p == "auto") fam.policy = SearchPolicy::automatic;
            else if (p == "exhaustive") fam.policy = SearchPolicy::exhaustive;
            else if (p == "coordinate-ascent") fam.policy = SearchPolicy::coordinate_ascent;
            else fail(ErrorCode::config, "control.policy: expected auto, exhaustive or coordinate-ascent");
        }
    }
    return fam;
}

FdParams parse_fd(const Context& c) {
    FdParams p;
    if (auto s = c.cfg.optional("fd")) {
        s->only({"x_lo", "x_hi", "dx", "cfl_safety"});
        p.x_lo = s->number("x_lo", p.x_lo);
        p.x_hi = s->number("x_hi", p.x_hi);
        p.dx = s->number("dx", p.dx);
        p.cfl_safety = s->number("cfl_safety", p.cfl_safety);
    }
    return p;
}

PairOptions parse_pairs(const Context& c) {
    PairOptions p;
    p.seed = c.seed;
    if (auto s = c.cfg.optional("pairs")) {
        s->only({"r0", "levels", "centers", "random_directions"});
        p.r0 = s->number("r0", p.r0);
        p.levels = s->count("levels", p.levels);
        p.random_directions = s->count("random_directions", p.random_directions);
        if (s->has("centers")) {
            const Node cs = s->child("centers");
            for (std::size_t i = 0; i < cs.size(); ++i) p.centers.push_back(point(cs.item(i), c.spec.d));
        }
    }
    return p;
}

json sample_json(const SampleStats& s) { return {{"mean", num(s.mean)}, {"stderr", num(s.std_error)}, {"n", s.n}}; }

// ---------------------------------------------------------------------------

KindResult run_simulate(const Context& c) {
    const Vec x = point(c.cfg.child("x0"), c.spec.d), y = point(c.cfg.child("y0"), c.spec.d);
    const auto grid = parse_grid(c);
    std::size_t n = 10000;
    if (auto s = c.cfg.optional("mc")) {
        s->only({"n_paths"});
        n = s->count("n_paths", n);
    }
    auto setup = CouplingSetup::make(c.spec, c.mode, c.constants, grid, c.seed, n, c.workers);
    Measure measure = Measure::original;
    if (auto s = c.cfg.optional("coupling")) {
        s->only({"measure", "drift_cap"});
        setup.drift_cap = s->number("drift_cap", setup.drift_cap);
        if (s->has("measure")) {
            const std::string m = s->child("measure").text();
            if (m == "tilted") measure = Measure::tilted;
            else if (m != "original") fail(ErrorCode::config, "coupling.measure: expected original or tilted");
        }
    }
    const std::size_t trace = c.cfg.count("trace_paths", 4);

    const auto bundles = simulate_coupled_set(setup, x, y, measure);
    std::vector<double> h_end(n), lw(n), u(n), energy(n);
    std::size_t capped = 0;
    for (std::size_t i = 0; i < n; ++i) {
        h_end[i] = bundles[i].H.back();
        lw[i] = bundles[i].log_weight;
        u[i] = std::exp(lw[i]);
        energy[i] = bundles[i].drift_energy;
        capped += bundles[i].drift_capped;
    }
    const auto sm = supermartingale_check(setup, x, y);

    KindResult r;
    r.pass = sm.pass;
    r.result = {{"x0", to_json(x)},
                {"y0", to_json(y)},
                {"measure", to_string(measure)},
                {"n_paths", n},
                {"grid", {{"steps", grid.steps()}, {"T_eff", grid.end()}, {"h_min", grid.h_min()}}},
                {"schedule", {{"level", setup.schedule.level()}, {"rate", setup.schedule.rate()}}},
                {"H_end", sample_json(summarize(h_end))},
                {"H_end_median", num(median(h_end))},
                {"H_0", num((x - y).squaredNorm())},
                {"log_weight", sample_json(summarize(lw))},
                {"U", sample_json(summarize(u))},
                {"drift_energy", sample_json(summarize(energy))},
                {"capped_fraction", num(static_cast<double>(capped) / static_cast<double>(n))},
                {"supermartingale", {{"worst_increase", num(sm.worst_increase)}, {"pass", sm.pass}}}};

    Csv tr{"trace.csv", {"path", "t"}, {}};
    for (int j = 0; j < c.spec.d; ++j) tr.header.push_back("X_" + std::to_string(j + 1));
    for (int j = 0; j < c.spec.d; ++j) tr.header.push_back("Y_" + std::to_string(j + 1));
    tr.header.push_back("H");
    tr.header.push_back("log_weight");
    const ScheduleTable table(setup.schedule, grid);
    CouplingOptions opt;
    opt.drift_cap = setup.drift_cap;
    opt.measure = measure;
    for (std::size_t i = 0; i < std::min(trace, n); ++i) {
        const RngStream rng(c.seed, streams::coupled, static_cast<std::uint32_t>(i));
        const auto b = simulate_coupled(c.spec, table, setup.grid, rng, x, y, opt,
                                        setup.control ? &*setup.control : nullptr);
        for (std::size_t k = 0; k < b.nodes(); ++k) {
            std::vector<std::string> row{f(i), f(grid.node(k))};
            for (int j = 0; j < c.spec.d; ++j) row.push_back(f(b.x_at(k)[j]));
            for (int j = 0; j < c.spec.d; ++j) row.push_back(f(b.y_at(k)[j]));
            row.push_back(f(b.H[k]));
            row.push_back(f(b.log_weight_path[k]));
            tr.add(std::move(row));
        }
    }
    Csv smc{"supermartingale.csv", {"t", "mean", "stderr"}, {}};
    for (std::size_t k = 0; k < sm.t.size(); ++k) smc.add({f(sm.t[k]), f(sm.mean[k]), f(sm.std_error[k])});
    r.csvs = {tr, smc};
    return r;
}

KindResult run_bsde(const Context& c) {
    const Vec x = point(c.cfg.child("x0"), c.spec.d);
    const auto params = parse_solver(c);
    const auto sol = solve_bsde(c.spec, x, params);
    const auto consts = derive_constants(c.spec, Mode::classical, c.constants);
    const auto ap = bsde_apriori_check(std::span<const BsdeSolution>(&sol, 1), c.spec, consts);
    KindResult r;
    r.pass = ap.pass;
    r.result = {{"x0", to_json(x)},
                {"y0", num(sol.y0)},
                {"stderr", num(sol.std_error)},
                {"z0", to_json(sol.z0)},
                {"solver", {{"n_paths", params.n_paths}, {"n_steps", params.n_steps}, {"basis_degree", params.basis_degree},
                            {"picard_iters", params.picard_iters}}},
                {"diagnostics", {{"max_condition", num(sol.diagnostics.max_condition)},
                                 {"max_abs_y", num(sol.diagnostics.max_abs_y)},
                                 {"comparison_bound", num(sol.diagnostics.comparison_bound)}}},
                {"apriori", {{"mu", num(ap.mu)}, {"d1", num(ap.d1)}, {"bound", num(ap.bound)}, {"sup_y", num(ap.sup_y)},
                             {"sup_y_stderr", num(ap.sup_y_se)}, {"z_norm", num(ap.z_norm)},
                             {"z_norm_stderr", num(ap.z_norm_se)}, {"pass", ap.pass}}}};
    Csv steps{"steps.csv", {"k", "t", "condition", "residual_rms"}, {}};
    for (std::size_t k = 1; k < sol.steps.size(); ++k)
        steps.add({f(k), f(sol.grid.node(k)), f(sol.steps[k].condition), f(sol.steps[k].residual_rms)});
    r.csvs = {steps};
    return r;
}

json search_json(const GSemigroupResult& g) {
    json choice = json::array();
    for (auto i : g.best_choice) choice.push_back(i);
    return {{"value", num(g.value)},       {"stderr", num(g.std_error)},     {"search_value", num(g.search_value)},
            {"lower_bound", g.lower_bound}, {"policy", to_string(g.policy)}, {"evaluations", g.evaluations},
            {"sweeps", g.sweeps},          {"converged", g.converged},       {"budget_exhausted", g.budget_exhausted},
            {"best_choice", choice}};
}

Csv controls_csv(const ControlFamily& fam, const GSemigroupResult& g) {
    Csv out{"controls.csv", {"slot", "cell", "bin", "candidate", "gamma_trace"}, {}};
    for (std::size_t s = 0; s < g.best_choice.size(); ++s)
        out.add({f(s), f(s / fam.space_bins), f(s % fam.space_bins), f(g.best_choice[s]),
                 f(fam.candidates[g.best_choice[s]].trace())});
    return out;
}

KindResult run_g_semigroup(const Context& c) {
    const Vec x = point(c.cfg.child("x0"), c.spec.d);
    const auto fam = parse_control(c);
    const auto mc = parse_mc(c);
    const auto g = evaluate_g_semigroup(c.spec, x, fam, mc);
    KindResult r;
    r.result = search_json(g);
    r.result["x0"] = to_json(x);
    r.result["control"] = {{"K", fam.cells}, {"space_bins", fam.space_bins}, {"budget", fam.budget}};
    r.csvs = {controls_csv(fam, g)};
    if (g.budget_exhausted)
        r.soft_error = Error(ErrorCode::budget, "control.budget: exhausted after " + std::to_string(g.evaluations) +
                                                    " evaluations; best-so-far control reported");
    return r;
}

KindResult run_g_heat(const Context& c) {
    const double x0 = point(c.cfg.child("x0"), 1)[0];
    if (c.spec.d != 1) fail(ErrorCode::config, "spec.d: g-heat is one-dimensional");
    const auto fd = parse_fd(c);
    const auto sol = solve_g_heat_fd(c.spec, x0, fd, true);
    KindResult r;
    r.pass = sol.comparison_ok;
    r.result = {{"x0", x0},
                {"value", num(sol.value)},
                {"error_estimate", num(sol.error_estimate)},
                {"dt", num(sol.dt)},
                {"n_steps", sol.n_steps},
                {"max_abs", num(sol.max_abs)},
                {"comparison_ok", sol.comparison_ok},
                {"fd", {{"x_lo", fd.x_lo}, {"x_hi", fd.x_hi}, {"dx", fd.dx}, {"cfl_safety", fd.cfl_safety}}}};
    Csv u{"u.csv", {"x", "u"}, {}};
    for (Eigen::Index i = 0; i < sol.x.size(); ++i) u.add({f(sol.x[i]), f(sol.u[i])});
    r.csvs = {u};
    if (c.cfg.boolean("cross_validate", false)) {
        const auto fam = parse_control(c);
        const auto rep = cross_validate(c.spec, x0, fam, parse_mc(c), fd);
        r.result["cross_validation"] = {{"mc", num(rep.mc)},
                                        {"mc_stderr", num(rep.mc_std_error)},
                                        {"fd", num(rep.fd)},
                                        {"fd_error", num(rep.fd_error)},
                                        {"policy", num(rep.policy)},
                                        {"policy_stderr", num(rep.policy_std_error)},
                                        {"search_gap", num(rep.search_gap)},
                                        {"budget", num(rep.budget)},
                                        {"difference", num(rep.difference)},
                                        {"mc_above_fd", rep.mc_above_fd},
                                        {"pass", rep.pass},
                                        {"search", search_json(rep.search)}};
        r.pass = r.pass && rep.pass;
        if (rep.search.budget_exhausted)
            r.soft_error = Error(ErrorCode::budget, "control.budget: exhausted; best-so-far control reported");
    }
    return r;
}

KindResult gradient_result(const GradientReport& g) {
    KindResult r;
    r.pass = g.pass;
    json rows = json::array();
    for (const auto& row : g.rows) {
        const auto& p = g.grid.pairs[row.pair_id];
        rows.push_back({{"pair_id", row.pair_id}, {"ray", row.ray}, {"x", to_json(p.x)}, {"y", to_json(p.y)},
                        {"r", num(row.r)}, {"u_x", num(row.u_x)}, {"u_y", num(row.u_y)},
                        {"quotient", num(row.quotient)}, {"stderr", num(row.std_error)}, {"pass", row.pass}});
    }
    json rays = json::array();
    for (const auto& ray : g.rays)
        rays.push_back({{"ray", ray.ray},
                        {"center", to_json(g.grid.rays[ray.ray].center)},
                        {"direction", to_json(g.grid.rays[ray.ray].direction)},
                        {"slope", num(ray.fit.slope)},
                        {"stderr", num(ray.fit.std_error)},
                        {"gradient", num(ray.fit.gradient)},
                        {"chi2_per_dof", num(ray.fit.chi2_per_dof)},
                        {"widened", ray.fit.widened},
                        {"pass", ray.pass}});
    r.result = {{"report", {{"spec_id", g.spec_id},
                            {"mode", to_string(g.mode)},
                            {"bound", to_string(g.bound)},
                            {"estimator", g.estimator},
                            {"note", "bound constants depend on the configured BDG constants c_p and BSDE constants d_p"},
                            {"slope", num(g.slope)},
                            {"slope_stderr", num(g.slope_std_error)},
                            {"bound_slope", num(g.bound_slope)},
                            {"margin", num(g.margin)},
                            {"pass", g.pass}}},
                {"pairs", rows},
                {"rays", rays}};
    if (g.lipschitz_sup >= 0.0) r.result["report"]["lipschitz_sup"] = num(g.lipschitz_sup);
    Csv csv{"gradient.csv", {"pair_id", "r", "quotient", "stderr", "bound_slope", "pass"}, {}};
    for (const auto& row : g.rows)
        csv.add({f(row.pair_id), f(row.r), f(row.quotient), f(row.std_error), f(g.bound_slope), f(row.pass)});
    r.csvs = {csv};
    return r;
}

KindResult run_verify_main1(const Context& c) {
    return gradient_result(verify_main1(c.spec, parse_pairs(c), parse_solver(c), c.constants));
}

KindResult run_verify_corollary(const Context& c) {
    const std::string method = c.cfg.has("method") ? c.cfg.child("method").text() : "mc";
    if (method == "quadrature") return gradient_result(verify_corollary_quadrature(c.spec, parse_pairs(c), c.constants));
    if (method != "mc") fail(ErrorCode::config, "method: expected mc or quadrature");
    return gradient_result(verify_corollary(c.spec, parse_pairs(c), parse_solver(c), c.constants));
}

KindResult run_verify_main2(const Context& c) {
    const auto fam = parse_control(c);
    return gradient_result(verify_main2(c.spec, parse_pairs(c), parse_fd(c), &fam, parse_mc(c), c.constants));
}

json moment_json(const MomentRow& m) {
    return {{"separation", num(m.separation)}, {"empirical", num(m.empirical)}, {"stderr", num(m.std_error)},
            {"bound", num(m.bound)},           {"pass", m.pass}};
}

KindResult run_verify_girsanov(const Context& c) {
    const Vec x = c.cfg.has("x0") ? point(c.cfg.child("x0"), c.spec.d) : Vec::Zero(c.spec.d);
    std::vector<double> seps{0.05, 0.1, 0.2};
    if (c.cfg.has("separations")) {
        const Vec v = c.cfg.child("separations").vec();
        seps.assign(v.data(), v.data() + v.size());
    }
    if (seps.empty()) fail(ErrorCode::config, "separations: need at least one separation");
    const auto grid = parse_grid(c);
    std::size_t n = 100000;
    if (auto s = c.cfg.optional("mc")) {
        s->only({"n_paths"});
        n = s->count("n_paths", n);
    }
    auto setup = CouplingSetup::make(c.spec, c.mode, c.constants, grid, c.seed, n, c.workers);
    if (auto s = c.cfg.optional("coupling")) {
        s->only({"drift_cap"});
        setup.drift_cap = s->number("drift_cap", setup.drift_cap);
    }
    std::vector<std::pair<std::string, TerminalSpec>> phis;
    if (c.cfg.has("phis")) {
        const Node ps = c.cfg.child("phis");
        for (std::size_t i = 0; i < ps.size(); ++i) phis.emplace_back("phi" + std::to_string(i), detail::parse_terminal(ps.item(i)));
    } else {
        phis.emplace_back("terminal", c.spec.terminal);
        TerminalSpec s;
        s.kind = TerminalKind::sine;
        phis.emplace_back("sine", s);
        s.kind = TerminalKind::tanh;
        s.frequency = 2.0;
        phis.emplace_back("tanh2", s);
    }
    const double order = setup.constants.alpha / 2.0;

    KindResult r;
    Csv moments{"moments.csv", {"check", "separation", "empirical", "stderr", "bound", "pass"}, {}};
    json mrows = json::array(), erows = json::array();
    std::vector<std::vector<CoupledPathBundle>> sets;
    for (double sep : seps) {
        const Vec y = x + sep * Vec::Unit(c.spec.d, 0);
        auto orig = simulate_coupled_set(setup, x, y, Measure::original);
        const auto tilted = simulate_coupled_set(setup, x, y, Measure::tilted);
        const auto m = girsanov_moment_check(orig, setup.constants, setup.schedule, sep);
        const auto e = exp_functional_check(tilted, setup.constants, setup.schedule, sep);
        r.pass = r.pass && m.pass && e.pass;
        mrows.push_back(moment_json(m));
        erows.push_back(moment_json(e));
        moments.add({"weight-moment", f(sep), f(m.empirical), f(m.std_error), f(m.bound), f(m.pass)});
        moments.add({"exp-functional", f(sep), f(e.empirical), f(e.std_error), f(e.bound), f(e.pass)});
        sets.push_back(std::move(orig));
    }
    json urep;
    if (seps.size() >= 3) {
        const auto um = u_moment_check(sets, seps, setup.constants, setup.schedule, order);
        r.pass = r.pass && um.pass;
        urep = {{"order", num(um.order)}, {"slope", num(um.slope)}, {"slope_stderr", num(um.slope_std_error)},
                {"bound", num(um.bound)}, {"pass", um.pass}};
        for (std::size_t j = 0; j < um.separations.size(); ++j)
            moments.add({"log-weight-moment", f(um.separations[j]), f(um.quotients[j]), f(um.std_errors[j]),
                         f(um.bound), f(um.pass)});
    }
    sets.clear();

    const Vec y = x + seps.back() * Vec::Unit(c.spec.d, 0);
    const auto id = girsanov_identity(setup, x, y, phis);
    Csv ident{"identity.csv", {"phi", "weighted", "weighted_stderr", "direct", "direct_stderr", "combined_stderr", "pass"}, {}};
    json irows = json::array();
    for (const auto& row : id) {
        r.pass = r.pass && row.pass;
        irows.push_back({{"phi", row.phi}, {"weighted", num(row.weighted)}, {"weighted_stderr", num(row.weighted_se)},
                         {"direct", num(row.direct)}, {"direct_stderr", num(row.direct_se)},
                         {"combined_stderr", num(row.combined_se)}, {"pass", row.pass}});
        ident.add({row.phi, f(row.weighted), f(row.weighted_se), f(row.direct), f(row.direct_se), f(row.combined_se),
                   f(row.pass)});
    }
    r.result = {{"x0", to_json(x)},        {"n_paths", n},       {"weight_moment", mrows}, {"exp_functional", erows},
                {"log_weight_moment", urep}, {"identity", irows}, {"identity_separation", seps.back()}};
    r.csvs = {moments, ident};
    return r;
}

KindResult run_schedule_check(const Context& c) {
    std::vector<double> ps = c.mode == Mode::classical ? std::vector<double>{1.0, 1.5, 2.0, 2.5} : std::vector<double>{1.0};
    std::size_t points = 1000;
    double tol = 1e-12;
    if (auto s = c.cfg.optional("schedule")) {
        s->only({"p", "points", "tolerance"});
        if (s->has("p")) {
            const Vec v = s->child("p").vec();
            ps.assign(v.data(), v.data() + v.size());
        }
        points = s->count("points", points);
        tol = s->number("tolerance", tol);
    }
    if (points < 1 || ps.empty()) fail(ErrorCode::config, "schedule: need at least one p and one point");
    const auto consts = derive_constants(c.spec, c.mode, c.constants);
    const auto sched = CouplingSchedule::from_constants(consts, c.spec.T);
    std::vector<double> ts(points);
    for (std::size_t i = 0; i < points; ++i) ts[i] = c.spec.T * static_cast<double>(i) / static_cast<double>(points);
    const auto rep = check_schedule_inequality(sched, consts, ps, ts, tol);
    KindResult r;
    r.pass = rep.pass;
    r.result = {{"p", ps},
                {"points", points},
                {"theta", num(rep.theta)},
                {"max_excess", num(rep.max_excess)},
                {"tolerance", tol},
                {"schedule", {{"level", sched.level()}, {"rate", sched.rate()}, {"xi_0", sched.value(0.0)}}},
                {"pass", rep.pass}};
    Csv csv{"inequality.csv", {"p", "t", "lhs", "excess"}, {}};
    for (const auto& row : rep.rows) csv.add({f(row.p), f(row.t), f(row.lhs), f(row.excess)});
    r.csvs = {csv};
    return r;
}

std::string hash_hex(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;  // FNV-1a
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out || !(out << text)) fail(ErrorCode::io, "cannot write " + p.string());
}

}  // namespace

const char* to_string(ExperimentKind kind) noexcept {
    switch (kind) {
        case ExperimentKind::simulate: return "simulate";
        case ExperimentKind::bsde: return "bsde";
        case ExperimentKind::g_semigroup: return "g-semigroup";
        case ExperimentKind::g_heat: return "g-heat";
        case ExperimentKind::verify_main1: return "verify-main1";
        case ExperimentKind::verify_corollary: return "verify-corollary";
        case ExperimentKind::verify_main2: return "verify-main2";
        case ExperimentKind::verify_girsanov: return "verify-girsanov";
        case ExperimentKind::schedule_check: return "schedule-check";
    }
    return "unknown";
}

std::optional<ExperimentKind> parse_experiment_kind(std::string_view name) {
    for (auto k : kKinds)
        if (name == to_string(k)) return k;
    return std::nullopt;
}

const std::vector<ExperimentKind>& experiment_kinds() {
    static const std::vector<ExperimentKind> all(std::begin(kKinds), std::end(kKinds));
    return all;
}

RunOutcome run_experiment(std::string_view kind_name, std::string_view config_text, const RunOptions& options) {
    const auto t0 = std::chrono::steady_clock::now();
    RunOutcome out;
    json manifest{{"tool", "couplex"}, {"version", COUPLEX_VERSION}, {"kind", std::string(kind_name)},
                  {"workers", options.workers}};
    json results;
    std::vector<Csv> csvs;
    std::filesystem::path dir = options.out_dir;

    auto record_error = [&](ErrorCode code, const std::string& what) {
        out.exit_code = 1;
        out.status = "error";
        out.error_code = code;
        out.error = what;
        manifest["error"] = {{"code", to_string(code)}, {"message", what}};
    };

    try {
        const auto kind = parse_experiment_kind(kind_name);
        if (!kind) fail(ErrorCode::config, "kind: unknown experiment kind '" + std::string(kind_name) + "'");
        json cfg;
        try {
            cfg = json::parse(config_text);
        } catch (const json::parse_error& e) {
            fail(ErrorCode::config, std::string("config: malformed JSON: ") + e.what());
        }
        const Node root(cfg, "");
        root.only({"kind", "seed", "spec", "mode", "constants", "x0", "y0", "grid", "solver", "mc", "control", "fd",
                   "pairs", "coupling", "separations", "phis", "schedule", "trace_paths", "method", "cross_validate",
                   "output_dir"});
        if (root.has("kind") && root.child("kind").text() != to_string(*kind))
            fail(ErrorCode::config, "kind: config is for '" + root.child("kind").text() + "', not '" +
                                        to_string(*kind) + "'");
        if (dir.empty()) dir = root.has("output_dir") ? root.child("output_dir").text() : "out";
        manifest["config_hash"] = hash_hex(cfg.dump());

        Context c{*kind, root};
        c.seed = root.child("seed").count();
        c.spec = load_spec(root.child("spec"), options.base_dir);
        c.mode = c.spec.g_mode() ? Mode::g_mode : Mode::classical;
        if (root.has("mode")) {
            const std::string m = root.child("mode").text();
            if (m == "classical") c.mode = Mode::classical;
            else if (m == "g-mode") c.mode = Mode::g_mode;
            else fail(ErrorCode::config, "mode: expected classical or g-mode");
        }
        if (*kind == ExperimentKind::verify_main2 || *kind == ExperimentKind::g_semigroup || *kind == ExperimentKind::g_heat)
            c.mode = Mode::g_mode;
        if (c.mode == Mode::g_mode && !c.spec.gamma)
            fail(ErrorCode::config, "spec.gamma: this experiment needs an uncertainty set");
        if (*kind == ExperimentKind::verify_main1 || *kind == ExperimentKind::verify_corollary || *kind == ExperimentKind::bsde)
            c.mode = Mode::classical;
        if (root.has("constants")) c.constants = detail::parse_constant_config(root.child("constants"));
        c.workers = std::max(1u, options.workers);
        const auto consts = derive_constants(c.spec, c.mode, c.constants);

        KindResult kr;
        switch (*kind) {
            case ExperimentKind::simulate: kr = run_simulate(c); break;
            case ExperimentKind::bsde: kr = run_bsde(c); break;
            case ExperimentKind::g_semigroup: kr = run_g_semigroup(c); break;
            case ExperimentKind::g_heat: kr = run_g_heat(c); break;
            case ExperimentKind::verify_main1: kr = run_verify_main1(c); break;
            case ExperimentKind::verify_corollary: kr = run_verify_corollary(c); break;
            case ExperimentKind::verify_main2: kr = run_verify_main2(c); break;
            case ExperimentKind::verify_girsanov: kr = run_verify_girsanov(c); break;
            case ExperimentKind::schedule_check: kr = run_schedule_check(c); break;
        }
        out.exit_code = kr.pass ? 0 : 2;
        out.status = kr.pass ? "pass" : "fail";
        results = {{"kind", to_string(*kind)},
                   {"seed", c.seed},
                   {"mode", to_string(c.mode)},
                   {"spec", detail::spec_json(c.spec)},
                   {"constants", detail::constants_json(consts)},
                   {"result", kr.result},
                   {"pass", kr.pass}};
        if (kr.soft_error) {
            record_error(kr.soft_error->code(), kr.soft_error->what());
            results["error"] = manifest["error"];
        }
        results["status"] = out.status;
        manifest["constants"] = results["constants"];
        csvs = std::move(kr.csvs);
        out.results = results.dump(2) + "\n";
    } catch (const Error& e) {
        record_error(e.code(), e.what());
    } catch (const std::exception& e) {
        record_error(ErrorCode::internal, e.what());
    }

    manifest["status"] = out.status;
    manifest["exit_code"] = out.exit_code;
    json files = json::array();
    if (!out.results.empty()) files.push_back("results.json");
    for (const auto& csv : csvs) files.push_back(csv.name);
    manifest["outputs"] = files;
    manifest["timing_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.manifest = manifest.dump(2) + "\n";
    out.out_dir = dir.string();

    if (options.write_files && !dir.empty()) {
        try {
            std::filesystem::create_directories(dir);
            write_file(dir / "manifest.json", out.manifest);
            out.outputs.push_back("manifest.json");
            if (!out.results.empty()) {
                write_file(dir / "results.json", out.results);
                out.outputs.push_back("results.json");
            }
            for (const auto& csv : csvs) {
                write_file(dir / csv.name, csv.text());
                out.outputs.push_back(csv.name);
            }
        } catch (const std::exception& e) {
            out.exit_code = 1;
            out.status = "error";
            out.error_code = ErrorCode::io;
            out.error = e.what();
        }
    }
    return out;
}

}  // namespace couplex
