#include "couplex/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "couplex/parallel.hpp"
#include "couplex/stats.hpp"

namespace couplex {

Mat symmetric_power(const Mat& a, double power) {
    Eigen::SelfAdjointEigenSolver<Mat> es(a);
    if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0.0)
        fail(ErrorCode::invalid_spec, "control: γ must be symmetric positive definite");
    return es.eigenvectors() * es.eigenvalues().array().pow(power).matrix().asDiagonal() *
           es.eigenvectors().transpose();
}

namespace {

// Gauss–Legendre, 4 nodes, mapped to [0, 1].
constexpr std::array<double, 4> kGlNodes = {0.5 * (1.0 - 0.8611363115940526), 0.5 * (1.0 - 0.3399810435848563),
                                            0.5 * (1.0 + 0.3399810435848563), 0.5 * (1.0 + 0.8611363115940526)};
constexpr std::array<double, 4> kGlWeights = {0.5 * 0.3478548451374538, 0.5 * 0.6521451548625461,
                                              0.5 * 0.6521451548625461, 0.5 * 0.3478548451374538};

void check_control(const ProblemSpec& spec, const TimeGrid& grid, const ControlPath* control) {
    if (!control) return;
    if (control->steps() != grid.steps())
        fail(ErrorCode::invalid_spec, "control: step count does not match the grid");
    if (control->gamma(0).rows() != spec.d)
        fail(ErrorCode::invalid_spec, "control: γ dimension does not match spec.d");
}

[[noreturn]] void blowup(std::uint32_t path, std::size_t k, double t) {
    std::ostringstream os;
    os << "path " << path << ": non-finite state after step " << k << " (t = " << t << ")";
    fail(ErrorCode::numerical_blowup, os.str());
}

template <class Observer>
void run_forward(const ProblemSpec& spec, const TimeGrid& grid, const RngStream& rng, const Vec& x0,
                 const ControlPath* control, Observer&& observe) {
    check_control(spec, grid, control);
    if (x0.size() != spec.d) fail(ErrorCode::invalid_spec, "x0: dimension does not match spec.d");
    const int d = spec.d;
    Vec x = x0, dw(d), db(d), s(d), b(d);
    observe(std::size_t{0}, x);
    if (d == 1) {
        double xs = x0[0], w = 0.0;
        for (std::size_t k = 0; k < grid.steps(); ++k) {
            const double dt = grid.step(k);
            rng.normals(static_cast<std::uint32_t>(k), {&w, 1});
            w *= std::sqrt(dt);
            const double inc = control ? control->root(k)(0, 0) * w : w;
            xs += spec.sigma.scalar(xs) * inc + spec.b.scalar(xs) * dt;
            if (!std::isfinite(xs)) blowup(rng.path(), k, grid.node(k + 1));
            x[0] = xs;
            observe(k + 1, x);
        }
        return;
    }
    for (std::size_t k = 0; k < grid.steps(); ++k) {
        const double dt = grid.step(k);
        rng.normals(static_cast<std::uint32_t>(k), {dw.data(), static_cast<std::size_t>(d)});
        dw *= std::sqrt(dt);
        if (control)
            db.noalias() = control->root(k) * dw;
        else
            db = dw;
        spec.sigma.evaluate(x, s);
        spec.b.evaluate(x, b);
        x += s.cwiseProduct(db) + b * dt;
        if (!x.allFinite()) blowup(rng.path(), k, grid.node(k + 1));
        observe(k + 1, x);
    }
}

}  // namespace

// ---------------------------------------------------------------------------

void ControlPath::add(const Mat& gamma) {
    gamma_.push_back(gamma);
    root_.push_back(symmetric_power(gamma, 0.5));
    inverse_root_.push_back(symmetric_power(gamma, -0.5));
}

ControlPath ControlPath::constant(const TimeGrid& grid, const Mat& gamma) {
    ControlPath c;
    c.add(gamma);
    c.index_.assign(grid.steps(), 0);
    return c;
}

std::size_t control_cell(double t, double T, std::size_t cells) {
    const auto c = static_cast<std::size_t>(std::floor(t / T * static_cast<double>(cells)));
    return std::min(c, cells - 1);
}

ControlPath ControlPath::piecewise(const TimeGrid& grid, const std::vector<Mat>& candidates,
                                   std::span<const std::size_t> choice) {
    if (candidates.empty() || choice.empty()) fail(ErrorCode::invalid_spec, "control: empty candidate set");
    ControlPath c;
    for (const auto& g : candidates) c.add(g);
    c.index_.resize(grid.steps());
    for (std::size_t k = 0; k < grid.steps(); ++k) {
        const std::size_t pick = choice[control_cell(grid.node(k), grid.horizon(), choice.size())];
        if (pick >= candidates.size()) fail(ErrorCode::invalid_spec, "control: choice index out of range");
        c.index_[k] = pick;
    }
    return c;
}

void ControlPath::check_within(const UncertaintySet& set) const {
    const double lo = set.lambda() * set.lambda(), hi = set.Lambda() * set.Lambda();
    for (const auto& g : gamma_) {
        Eigen::SelfAdjointEigenSolver<Mat> es(g);
        const auto& ev = es.eigenvalues();
        if (ev.minCoeff() < lo * (1 - 1e-12) || ev.maxCoeff() > hi * (1 + 1e-12))
            fail(ErrorCode::invalid_spec, "control: γ outside the spectral bounds of gamma");
    }
}

// ---------------------------------------------------------------------------

std::vector<Vec> simulate_forward(const ProblemSpec& spec, const TimeGrid& grid, const RngStream& rng,
                                  const Vec& x0, const ControlPath* control) {
    std::vector<Vec> path(grid.steps() + 1);
    run_forward(spec, grid, rng, x0, control, [&](std::size_t k, const Vec& x) { path[k] = x; });
    return path;
}

Vec forward_terminal(const ProblemSpec& spec, const TimeGrid& grid, const RngStream& rng, const Vec& x0,
                     const ControlPath* control) {
    Vec out;
    const std::size_t last = grid.steps();
    run_forward(spec, grid, rng, x0, control, [&](std::size_t k, const Vec& x) {
        if (k == last) out = x;
    });
    return out;
}

// ---------------------------------------------------------------------------

const char* to_string(Measure m) noexcept { return m == Measure::original ? "original" : "tilted"; }

ScheduleTable::ScheduleTable(const CouplingSchedule& schedule, const TimeGrid& grid) {
    if (grid.end() >= schedule.horizon())
        fail(ErrorCode::domain, "coupling: the grid must stop before T (use a refined grid with h_min > 0)");
    steps_.resize(grid.steps());
    cumulative_.assign(grid.steps() + 1, 0.0);
    for (std::size_t k = 0; k < grid.steps(); ++k) {
        const double a = grid.node(k), b = grid.node(k + 1), h = b - a;
        Step& s = steps_[k];
        s.reciprocal = schedule.reciprocal_integral(a, b);
        for (int j = 0; j < kNodes; ++j) {
            const double tau = a + h * kGlNodes[j];
            const double xi = schedule.value(tau);
            s.node_reciprocal[j] = schedule.reciprocal_integral(a, tau);
            s.node_weight[j] = kGlWeights[j] * h / (xi * xi);
        }
        cumulative_[k + 1] = cumulative_[k] + s.reciprocal;
    }
}

CoupledPathBundle simulate_coupled(const ProblemSpec& spec, const CouplingSchedule& schedule,
                                   const TimeGrid& grid, const RngStream& rng, const Vec& x, const Vec& y,
                                   const CouplingOptions& options, const ControlPath* control) {
    return simulate_coupled(spec, ScheduleTable(schedule, grid), std::make_shared<const TimeGrid>(grid), rng, x,
                            y, options, control);
}

CoupledPathBundle simulate_coupled(const ProblemSpec& spec, const ScheduleTable& table,
                                   const std::shared_ptr<const TimeGrid>& grid_ptr, const RngStream& rng,
                                   const Vec& x0, const Vec& y0, const CouplingOptions& options,
                                   const ControlPath* control) {
    const TimeGrid& grid = *grid_ptr;
    check_control(spec, grid, control);
    if (x0.size() != spec.d || y0.size() != spec.d)
        fail(ErrorCode::invalid_spec, "coupling: x and y must have dimension spec.d");
    if (!(options.drift_cap > 0.0)) fail(ErrorCode::config, "coupling.drift_cap: must be positive");

    const int d = spec.d;
    const std::size_t n = grid.steps();
    CoupledPathBundle out;
    out.grid = grid_ptr;
    out.d = d;
    out.measure = options.measure;
    out.controlled = control != nullptr;
    const std::size_t rows = options.record_paths ? n + 1 : 2;
    out.x.resize(rows * d);
    out.y.resize(rows * d);
    out.H.resize(rows);
    out.log_weight_path.resize(rows);

    Vec X = x0, Y = y0, gap(d), c(d), h(d), v(d), dw(d), db(d), sx(d), sy(d), bx(d), by(d);
    auto store = [&](std::size_t row) {
        std::copy(X.data(), X.data() + d, out.x.begin() + static_cast<std::ptrdiff_t>(row * d));
        std::copy(Y.data(), Y.data() + d, out.y.begin() + static_cast<std::ptrdiff_t>(row * d));
        out.H[row] = (X - Y).squaredNorm();
        out.log_weight_path[row] = out.log_weight;
    };
    store(0);

    for (std::size_t k = 0; k < n; ++k) {
        const double dt = grid.step(k);
        const auto& st = table.step(k);
        spec.sigma.evaluate(X, sx);
        spec.sigma.evaluate(Y, sy);
        spec.b.evaluate(X, bx);
        spec.b.evaluate(Y, by);
        gap = X - Y;

        // Exact decay of X − Y under the coupling drift with σ(X) frozen.
        for (int i = 0; i < d; ++i) c[i] = -std::expm1(-sx[i] * st.reciprocal) * gap[i];
        h = -c.cwiseQuotient(sy) / dt;
        double scale = 1.0;
        const double hn = h.norm();
        if (hn > options.drift_cap) {
            scale = options.drift_cap / hn;
            h *= scale;
            c *= scale;
            out.drift_capped = true;
            ++out.capped_steps;
        }

        double gap_int = 0.0;
        for (int j = 0; j < ScheduleTable::kNodes; ++j) {
            double sq = 0.0;
            for (int i = 0; i < d; ++i) {
                const double g = gap[i] * (1.0 + scale * std::expm1(-sx[i] * st.node_reciprocal[j]));
                sq += g * g;
            }
            gap_int += st.node_weight[j] * sq;
        }
        out.gap_energy += gap_int;

        rng.normals(static_cast<std::uint32_t>(k), {dw.data(), static_cast<std::size_t>(d)});
        dw *= std::sqrt(dt);
        if (control)
            v.noalias() = control->inverse_root(k) * h;
        else
            v = h;
        // Under the tilted measure the draws are increments of W̃ = W − ∫√γ⁻¹h ds.
        if (options.measure == Measure::tilted) dw += v * dt;
        const double vv = v.squaredNorm();
        out.log_weight += v.dot(dw) - 0.5 * vv * dt;
        out.drift_energy += vv * dt;

        if (control)
            db.noalias() = control->root(k) * dw;
        else
            db = dw;
        X += sx.cwiseProduct(db) + bx * dt;
        Y += sy.cwiseProduct(db) + by * dt + c;
        if (!X.allFinite() || !Y.allFinite() || !std::isfinite(out.log_weight))
            blowup(rng.path(), k, grid.node(k + 1));
        if (options.record_paths) store(k + 1);
    }
    if (!options.record_paths) store(1);
    return out;
}

double girsanov_weight(const CoupledPathBundle& bundle) { return std::exp(bundle.log_weight); }

// ---------------------------------------------------------------------------

CouplingSetup CouplingSetup::make(const ProblemSpec& spec, Mode mode, const ConstantConfig& config,
                                  const TimeGrid& grid, std::uint64_t seed, std::size_t n_paths,
                                  unsigned workers) {
    CouplingSetup s;
    s.spec = spec;
    s.constants = derive_constants(spec, mode, config);
    s.schedule = CouplingSchedule::from_constants(s.constants, spec.T);
    s.grid = std::make_shared<const TimeGrid>(grid);
    s.seed = seed;
    s.n_paths = n_paths;
    s.workers = workers;
    if (mode == Mode::g_mode) {
        // Default control: the generator of largest trace, held constant.
        const auto& gens = spec.gamma->generators;
        const auto it = std::max_element(gens.begin(), gens.end(),
                                         [](const Mat& a, const Mat& b) { return a.trace() < b.trace(); });
        s.control = ControlPath::constant(grid, *it);
    }
    return s;
}

namespace {

std::vector<CoupledPathBundle> run_set(const CouplingSetup& setup, const ScheduleTable& table,
                                       const std::shared_ptr<const TimeGrid>& grid, const ControlPath* control,
                                       const Vec& x, const Vec& y, Measure measure, bool record) {
    std::vector<CoupledPathBundle> out(setup.n_paths);
    CouplingOptions opt;
    opt.drift_cap = setup.drift_cap;
    opt.measure = measure;
    opt.record_paths = record;
    parallel_for(setup.n_paths, setup.workers, [&](std::size_t i) {
        const RngStream rng(setup.seed, streams::coupled, static_cast<std::uint32_t>(i));
        out[i] = simulate_coupled(setup.spec, table, grid, rng, x, y, opt, control);
    });
    return out;
}

double kappa(const DerivedConstants& c) {
    return c.mode == Mode::g_mode ? c.hyp.Lambda_gamma * c.hyp.Lambda_gamma : 1.0;
}

MomentRow finish_row(std::span<const double> values, double separation, double bound) {
    const SampleStats s = summarize(values);
    MomentRow row;
    row.separation = separation;
    row.empirical = s.mean;
    row.std_error = s.std_error;
    row.bound = bound;
    const double rel = s.mean > 0.0 ? s.std_error / s.mean : 0.0;
    row.pass = s.mean <= bound * (1.0 + 3.0 * rel) * (1.0 + 1e-12);
    return row;
}

}  // namespace

std::vector<CoupledPathBundle> simulate_coupled_set(const CouplingSetup& setup, const Vec& x, const Vec& y,
                                                    Measure measure, bool keep_h) {
    const ScheduleTable table(setup.schedule, *setup.grid);
    return run_set(setup, table, setup.grid, setup.control ? &*setup.control : nullptr, x, y, measure, keep_h);
}

MomentRow girsanov_moment_check(std::span<const CoupledPathBundle> bundles, const DerivedConstants& consts,
                                const CouplingSchedule& schedule, double separation) {
    const double delta = consts.delta;
    std::vector<double> v(bundles.size());
    for (std::size_t i = 0; i < bundles.size(); ++i) {
        if (bundles[i].measure != Measure::original)
            fail(ErrorCode::config, "girsanov moment: bundles must be simulated under the original measure");
        v[i] = std::exp((1.0 + delta) * bundles[i].log_weight);
    }
    const double root = std::sqrt(1.0 + 1.0 / delta);
    const double Lam = consts.hyp.Lambda_sigma;
    const double expo = consts.theta * root /
                        (8.0 * Lam * Lam * kappa(consts) * schedule.value(0.0) * (1.0 + root)) * separation *
                        separation;
    return finish_row(v, separation, std::exp(expo));
}

MomentRow exp_functional_check(std::span<const CoupledPathBundle> bundles, const DerivedConstants& consts,
                               const CouplingSchedule& schedule, double separation) {
    const double Lam = consts.hyp.Lambda_sigma;
    const double a = consts.theta * consts.theta / (8.0 * Lam * Lam * kappa(consts));
    std::vector<double> v(bundles.size());
    for (std::size_t i = 0; i < bundles.size(); ++i) {
        const auto& b = bundles[i];
        v[i] = std::exp(a * b.gap_energy);
        if (b.measure == Measure::original) v[i] *= std::exp(b.log_weight);
    }
    const double bound =
        std::exp(consts.theta * separation * separation / (8.0 * Lam * Lam * kappa(consts) * schedule.value(0.0)));
    return finish_row(v, separation, bound);
}

UMomentReport u_moment_check(const std::vector<std::vector<CoupledPathBundle>>& sets,
                             std::span<const double> separations, const DerivedConstants& consts,
                             const CouplingSchedule& schedule, double order) {
    if (sets.size() != separations.size()) fail(ErrorCode::internal, "u_moment_check: size mismatch");
    UMomentReport rep;
    rep.order = order;
    for (std::size_t j = 0; j < sets.size(); ++j) {
        const double r = separations[j];
        std::vector<double> v(sets[j].size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::pow(std::abs(sets[j][i].log_weight), order);
        const SampleStats s = summarize(v);
        const double norm = std::pow(s.mean, 1.0 / order);
        const double se = s.mean > 0.0 ? norm / (order * s.mean) * s.std_error : 0.0;
        rep.separations.push_back(r);
        rep.norms.push_back(norm);
        rep.quotients.push_back(r > 0.0 ? norm / r : 0.0);
        rep.std_errors.push_back(r > 0.0 ? se / r : 0.0);
    }
    const auto fit = extrapolate_slope(rep.separations, rep.quotients, rep.std_errors);
    rep.slope = fit.slope;
    rep.slope_std_error = fit.std_error;
    const double lam = consts.hyp.lambda_sigma, Lam = consts.hyp.Lambda_sigma;
    rep.bound = consts.C_alpha * 2.0 * Lam * Lam / (lam * lam * lam) / std::sqrt(schedule.unit(0.0));
    rep.pass = rep.slope <= rep.bound;
    return rep;
}

std::vector<IdentityRow> girsanov_identity(const CouplingSetup& setup, const Vec& x, const Vec& y,
                                           const std::vector<std::pair<std::string, TerminalSpec>>& phis) {
    const auto bundles = simulate_coupled_set(setup, x, y, Measure::original);
    std::vector<Vec> direct(setup.n_paths);
    const ControlPath* control = setup.control ? &*setup.control : nullptr;
    parallel_for(setup.n_paths, setup.workers, [&](std::size_t i) {
        const RngStream rng(setup.seed, streams::reference, static_cast<std::uint32_t>(i));
        direct[i] = forward_terminal(setup.spec, *setup.grid, rng, y, control);
    });

    std::vector<IdentityRow> rows;
    std::vector<double> w(setup.n_paths), dv(setup.n_paths);
    for (const auto& [name, phi] : phis) {
        for (std::size_t i = 0; i < setup.n_paths; ++i) {
            w[i] = girsanov_weight(bundles[i]) * phi(Vec(bundles[i].x_end()));
            dv[i] = phi(direct[i]);
        }
        const SampleStats sw = summarize(w), sd = summarize(dv);
        IdentityRow row;
        row.phi = name;
        row.weighted = sw.mean;
        row.weighted_se = sw.std_error;
        row.direct = sd.mean;
        row.direct_se = sd.std_error;
        row.combined_se = std::hypot(sw.std_error, sd.std_error);
        row.pass = std::abs(sw.mean - sd.mean) <= 3.0 * row.combined_se + 1e-12;
        rows.push_back(row);
    }
    return rows;
}

ContractionReport terminal_contraction(const CouplingSetup& setup, const Vec& x, const Vec& y, std::size_t n0,
                                       double q, double h_min, std::size_t levels) {
    if (levels < 2) fail(ErrorCode::config, "contraction: need at least two refinement levels");
    ContractionReport rep;
    rep.required_ratio = std::pow(q, 1.5);
    rep.pass = true;
    for (std::size_t j = 0; j < levels; ++j) {
        const double hj = h_min * std::pow(q, static_cast<double>(j));
        auto grid = std::make_shared<const TimeGrid>(TimeGrid::refined(setup.spec.T, n0, q, hj));
        std::optional<ControlPath> control;
        if (setup.control) control = ControlPath::constant(*grid, setup.control->gamma(0));
        const ScheduleTable table(setup.schedule, *grid);
        const auto bundles = run_set(setup, table, grid, control ? &*control : nullptr, x, y, Measure::original, false);
        std::vector<double> H(bundles.size());
        for (std::size_t i = 0; i < H.size(); ++i) H[i] = bundles[i].H.back();
        rep.h_min.push_back(hj);
        rep.median_H.push_back(median(std::move(H)));
        if (j > 0) {
            const double prev = rep.median_H[j - 1], cur = rep.median_H[j];
            const double ratio = prev > 0.0 ? cur / prev : 0.0;
            rep.ratios.push_back(ratio);
            if (ratio > rep.required_ratio) rep.pass = false;
        }
    }
    return rep;
}

SupermartingaleReport supermartingale_check(const CouplingSetup& setup, const Vec& x, const Vec& y) {
    const ScheduleTable table(setup.schedule, *setup.grid);
    const auto bundles =
        run_set(setup, table, setup.grid, setup.control ? &*setup.control : nullptr, x, y, Measure::original, true);
    const auto& hyp = setup.constants.hyp;
    const double rate = 2.0 * hyp.L_b + kappa(setup.constants) * hyp.L_sigma * hyp.L_sigma;
    const TimeGrid& grid = *setup.grid;
    const std::size_t nodes = grid.steps() + 1;

    SupermartingaleReport rep;
    rep.pass = true;
    std::vector<double> prev(bundles.size()), cur(bundles.size());
    for (std::size_t k = 0; k < nodes; ++k) {
        const double t = grid.node(k);
        const double factor = std::exp(-rate * t + 2.0 * hyp.lambda_sigma * table.cumulative(k));
        for (std::size_t i = 0; i < bundles.size(); ++i) cur[i] = bundles[i].H[k] * factor;
        const SampleStats s = summarize(cur);
        rep.t.push_back(t);
        rep.mean.push_back(s.mean);
        rep.std_error.push_back(s.std_error);
        if (k > 0) {
            const SampleStats dlt = summarize_difference(cur, prev);
            const double slack = 3.0 * dlt.std_error + 1e-10 * std::abs(rep.mean[k - 1]);
            const double score = dlt.std_error > 0.0 ? dlt.mean / dlt.std_error
                                 : dlt.mean > 0.0    ? std::numeric_limits<double>::infinity()
                                                     : 0.0;
            if (k == 1 || score > rep.worst_increase) rep.worst_increase = score;
            if (dlt.mean > slack) rep.pass = false;
        }
        std::swap(prev, cur);
    }
    return rep;
}

}  // namespace couplex
