#include "couplex/gexp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "couplex/parallel.hpp"
#include "couplex/stats.hpp"

namespace couplex {

const char* to_string(SearchPolicy p) noexcept {
    switch (p) {
        case SearchPolicy::automatic: return "auto";
        case SearchPolicy::exhaustive: return "exhaustive";
        case SearchPolicy::coordinate_ascent: return "coordinate-ascent";
    }
    return "unknown";
}

ControlFamily ControlFamily::extreme_points(const UncertaintySet& gamma, std::size_t cells, SearchPolicy policy,
                                            std::size_t budget) {
    ControlFamily f;
    f.cells = cells;
    f.candidates = gamma.generators;
    f.policy = policy;
    f.budget = budget;
    return f;
}

void ControlFamily::check_within(const UncertaintySet& gamma) const {
    const double lo = gamma.lambda() * gamma.lambda(), hi = gamma.Lambda() * gamma.Lambda();
    for (const auto& c : candidates) {
        Eigen::SelfAdjointEigenSolver<Mat> es(c, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() < lo * (1 - 1e-12) || es.eigenvalues().maxCoeff() > hi * (1 + 1e-12))
            fail(ErrorCode::invalid_spec, "control.candidates: candidate outside the spectral bounds of gamma");
    }
}

std::size_t ControlFamily::count() const {
    std::size_t n = 1;
    for (std::size_t i = 0; i < slots(); ++i) {
        if (n > std::numeric_limits<std::size_t>::max() / std::max<std::size_t>(1, candidates.size()))
            return std::numeric_limits<std::size_t>::max();
        n *= candidates.size();
    }
    return n;
}

namespace {

constexpr std::size_t kBlock = 512;

// Paths are advanced cell by cell; the state at every cell boundary is kept
// so that a search only re-simulates the cells after the first slot it
// changed. Normals of the search stream are cached when they fit.
class ControlEvaluator {
public:
    ControlEvaluator(const ProblemSpec& spec, const Vec& x0, const ControlFamily& family, const GMcParams& params,
                     std::size_t n_paths, std::uint32_t stream)
        : spec_(spec),
          family_(family),
          params_(params),
          n_(n_paths),
          d_(static_cast<std::size_t>(spec.d)),
          stream_(stream),
          grid_(TimeGrid::uniform(spec.T, family.cells * params.steps_per_cell)),
          values_(n_paths) {
        for (const auto& c : family.candidates) roots_.push_back(symmetric_power(c, 0.5));
        if (family.space_bins > 1) {
            const auto hyp = hypothesis_constants(spec);
            double half = family.bin_half_width;
            if (half <= 0.0) half = 3.0 * hyp.Lambda_sigma * hyp.Lambda_gamma * std::sqrt(spec.T);
            bin_lo_ = x0[0] - half;
            bin_width_ = 2.0 * half / static_cast<double>(family.space_bins);
        }
        const std::size_t K = family.cells;
        best_.assign(K + 1, std::vector<double>(n_ * d_));
        trial_.assign(K + 1, std::vector<double>(n_ * d_));
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = 0; j < d_; ++j) best_[0][i * d_ + j] = trial_[0][i * d_ + j] = x0[static_cast<Eigen::Index>(j)];
        const std::size_t steps = grid_.steps();
        if (n_ * steps * d_ <= (std::size_t{1} << 24)) {
            normals_.resize(n_ * steps * d_);
            parallel_for(n_, params.workers, [&](std::size_t i) {
                const RngStream rng(params_.seed, stream_, static_cast<std::uint32_t>(i));
                for (std::size_t k = 0; k < steps; ++k) {
                    double* w = &normals_[(i * steps + k) * d_];
                    rng.normals(static_cast<std::uint32_t>(k), {w, d_});
                    const double sq = std::sqrt(grid_.step(k));
                    for (std::size_t j = 0; j < d_; ++j) w[j] *= sq;
                }
            });
        }
    }

    std::size_t bin(double x) const {
        if (family_.space_bins <= 1) return 0;
        const double pos = std::floor((x - bin_lo_) / bin_width_);
        if (!(pos > 0.0)) return 0;
        return std::min(static_cast<std::size_t>(pos), family_.space_bins - 1);
    }

    /// Evaluates `choice` into the trial buffers, simulating cells
    /// [from, K) starting from the best control's state at cell `from`.
    SampleStats evaluate(const std::vector<std::size_t>& choice, std::size_t from, bool from_best = true) {
        const std::size_t K = family_.cells;
        auto& start = from_best ? best_ : trial_;
        if (from_best) trial_[from] = start[from];
        for (std::size_t c = from; c < K; ++c) advance(choice, c, trial_[c], trial_[c + 1]);
        finish(trial_[K]);
        ++evaluations;
        return summarize(values_);
    }

    /// Advances one cell from `in` to `out`.
    void advance(const std::vector<std::size_t>& choice, std::size_t cell, const std::vector<double>& in,
                 std::vector<double>& out) {
        const std::size_t spc = params_.steps_per_cell, steps = grid_.steps();
        const std::size_t B = family_.space_bins;
        const std::size_t nblocks = (n_ + kBlock - 1) / kBlock;
        parallel_for(nblocks, params_.workers, [&](std::size_t blk) {
            const std::size_t lo = blk * kBlock, hi = std::min(n_, lo + kBlock);
            std::vector<double> wbuf(d_);
            if (d_ == 1) {
                double root[64];
                const std::size_t C = roots_.size();
                for (std::size_t c = 0; c < std::min<std::size_t>(C, 64); ++c) root[c] = roots_[c](0, 0);
                for (std::size_t i = lo; i < hi; ++i) {
                    const RngStream rng(params_.seed, stream_, static_cast<std::uint32_t>(i));
                    double x = in[i];
                    for (std::size_t s = 0; s < spc; ++s) {
                        const std::size_t k = cell * spc + s;
                        double w;
                        if (!normals_.empty()) {
                            w = normals_[i * steps + k];
                        } else {
                            rng.normals(static_cast<std::uint32_t>(k), {&w, 1});
                            w *= std::sqrt(grid_.step(k));
                        }
                        const std::size_t ci = choice[cell * B + bin(x)];
                        const double r = ci < 64 ? root[ci] : roots_[ci](0, 0);
                        x += spec_.sigma.scalar(x) * r * w + spec_.b.scalar(x) * grid_.step(k);
                        if (!std::isfinite(x)) blowup(i, k);
                    }
                    out[i] = x;
                }
                return;
            }
            const auto d = static_cast<Eigen::Index>(d_);
            Vec x(d), dw(d), db(d), sv(d), bv(d);
            for (std::size_t i = lo; i < hi; ++i) {
                const RngStream rng(params_.seed, stream_, static_cast<std::uint32_t>(i));
                for (Eigen::Index j = 0; j < d; ++j) x[j] = in[i * d_ + static_cast<std::size_t>(j)];
                const Mat& root = roots_[choice[cell]];
                for (std::size_t s = 0; s < spc; ++s) {
                    const std::size_t k = cell * spc + s;
                    if (!normals_.empty()) {
                        for (Eigen::Index j = 0; j < d; ++j) dw[j] = normals_[(i * steps + k) * d_ + static_cast<std::size_t>(j)];
                    } else {
                        rng.normals(static_cast<std::uint32_t>(k), {dw.data(), d_});
                        dw *= std::sqrt(grid_.step(k));
                    }
                    db.noalias() = root * dw;
                    spec_.sigma.evaluate(x, sv);
                    spec_.b.evaluate(x, bv);
                    x += sv.cwiseProduct(db) + bv * grid_.step(k);
                    if (!x.allFinite()) blowup(i, k);
                }
                for (Eigen::Index j = 0; j < d; ++j) out[i * d_ + static_cast<std::size_t>(j)] = x[j];
            }
        });
    }

    void finish(const std::vector<double>& terminal_state) {
        const std::size_t nblocks = (n_ + kBlock - 1) / kBlock;
        parallel_for(nblocks, params_.workers, [&](std::size_t blk) {
            Vec x(static_cast<Eigen::Index>(d_));
            for (std::size_t i = blk * kBlock; i < std::min(n_, (blk + 1) * kBlock); ++i) {
                for (std::size_t j = 0; j < d_; ++j) x[static_cast<Eigen::Index>(j)] = terminal_state[i * d_ + j];
                values_[i] = spec_.terminal(x);
            }
        });
    }

    /// Makes the last trial the incumbent for cells after `from`.
    void accept(std::size_t from) {
        for (std::size_t c = from + 1; c <= family_.cells; ++c) best_[c].swap(trial_[c]);
    }

    std::vector<std::vector<double>>& trial_levels() { return trial_; }
    const std::vector<double>& values() const { return values_; }

    std::size_t evaluations = 0;

private:
    [[noreturn]] void blowup(std::size_t path, std::size_t step) const {
        std::ostringstream os;
        os << "g-semigroup: non-finite state on path " << path << " at step " << step;
        fail(ErrorCode::numerical_blowup, os.str());
    }

    const ProblemSpec& spec_;
    const ControlFamily& family_;
    const GMcParams& params_;
    std::size_t n_, d_;
    std::uint32_t stream_;
    TimeGrid grid_;
    std::vector<Mat> roots_;
    double bin_lo_ = 0.0, bin_width_ = 1.0;
    std::vector<double> normals_;
    std::vector<std::vector<double>> best_, trial_;
    std::vector<double> values_;
};

}  // namespace

GSemigroupResult evaluate_g_semigroup(const ProblemSpec& spec, const Vec& x0, const ControlFamily& family,
                                      const GMcParams& params) {
    spec.validate();
    if (!spec.gamma) fail(ErrorCode::invalid_spec, "gamma: the sublinear semigroup needs an uncertainty set");
    if (!spec.terminal.bounded() && spec.terminal.kind != TerminalKind::quadratic &&
        spec.terminal.kind != TerminalKind::linear)
        fail(ErrorCode::invalid_spec, "terminal: unbounded terminal function");
    if (x0.size() != spec.d) fail(ErrorCode::invalid_spec, "x0: dimension does not match spec.d");
    if (family.cells < 1) fail(ErrorCode::config, "control.K: need at least one cell");
    if (family.space_bins < 1) fail(ErrorCode::config, "control.space_bins: need at least one bin");
    if (family.space_bins > 1 && spec.d != 1) fail(ErrorCode::config, "control.space_bins: feedback bins need d = 1");
    if (family.candidates.empty()) fail(ErrorCode::config, "control: empty candidate set");
    if (family.budget < 1) fail(ErrorCode::config, "control.budget: must be positive");
    if (params.n_paths < 2 || params.steps_per_cell < 1) fail(ErrorCode::config, "mc: need n_paths >= 2, steps_per_cell >= 1");
    if (params.search_paths == 1) fail(ErrorCode::config, "mc.search_paths: need at least 2 paths");
    family.check_within(*spec.gamma);

    const std::size_t K = family.cells, B = family.space_bins, S = family.slots(), C = family.candidates.size();
    ControlEvaluator eval(spec, x0, family, params, params.search_paths ? params.search_paths : params.n_paths,
                          streams::control);
    GSemigroupResult res;
    SearchPolicy policy = family.policy;
    if (policy == SearchPolicy::automatic)
        policy = (S <= 16 && family.count() <= family.budget) ? SearchPolicy::exhaustive : SearchPolicy::coordinate_ascent;
    res.policy = policy;
    res.search_value = -std::numeric_limits<double>::infinity();

    if (policy == SearchPolicy::exhaustive) {
        if (S > 16) fail(ErrorCode::config, "control.policy: exhaustive search needs at most 16 slots");
        // Depth-first over slots; the states at cell boundaries are shared
        // by all controls with a common prefix.
        std::vector<std::size_t> choice(S, 0);
        auto& levels = eval.trial_levels();
        auto visit = [&](auto&& self, std::size_t slot) -> void {
            if (res.budget_exhausted) return;
            if (slot == S) {
                if (eval.evaluations >= family.budget) {
                    res.budget_exhausted = true;
                    return;
                }
                const auto s = eval.evaluate(choice, K, false);
                if (s.mean > res.search_value) {
                    res.search_value = s.mean;
                    res.best_choice = choice;
                }
                return;
            }
            for (std::size_t c = 0; c < C && !res.budget_exhausted; ++c) {
                choice[slot] = c;
                if ((slot + 1) % B == 0) {
                    const std::size_t cell = slot / B;
                    eval.advance(choice, cell, levels[cell], levels[cell + 1]);
                }
                self(self, slot + 1);
            }
            choice[slot] = 0;
        };
        visit(visit, 0);
        res.sweeps = 1;
        res.converged = !res.budget_exhausted;
    } else {
        // Best constant control, then slot-wise sweeps. Under common random
        // numbers a sweep without improvement is a fixed point.
        auto consider = [&](const std::vector<std::size_t>& trial, std::size_t from) {
            if (eval.evaluations >= family.budget) {
                res.budget_exhausted = true;
                return false;
            }
            const auto s = eval.evaluate(trial, from);
            if (s.mean > res.search_value) {
                res.search_value = s.mean;
                res.best_choice = trial;
                eval.accept(from);
                return true;
            }
            return false;
        };
        for (std::size_t c = 0; c < C && !res.budget_exhausted; ++c) consider(std::vector<std::size_t>(S, c), 0);
        while (!res.budget_exhausted) {
            bool improved = false;
            for (std::size_t slot = 0; slot < S && !res.budget_exhausted; ++slot) {
                for (std::size_t c = 0; c < C; ++c) {
                    if (c == res.best_choice[slot]) continue;
                    auto trial = res.best_choice;
                    trial[slot] = c;
                    if (consider(trial, slot / B)) improved = true;
                    if (res.budget_exhausted) break;
                }
            }
            ++res.sweeps;
            if (!improved) {
                res.converged = !res.budget_exhausted;
                break;
            }
        }
    }
    res.evaluations = eval.evaluations;

    ControlEvaluator fresh(spec, x0, family, params, params.n_paths, streams::control_eval);
    const auto s = fresh.evaluate(res.best_choice, 0, false);
    res.value = s.mean;
    res.std_error = s.std_error;
    res.samples = fresh.values();
    return res;
}

// ---------------------------------------------------------------------------

namespace {

struct FdCore {
    Vec x, u;
    double dt = 0.0;
    std::size_t steps = 0;
    double max_abs = 0.0;
    std::vector<std::uint8_t> convex;
};

FdCore fd_solve(const ProblemSpec& spec, const FdParams& p, double dx, bool record) {
    const auto n = static_cast<std::size_t>(std::llround((p.x_hi - p.x_lo) / dx));
    if (n < 4) fail(ErrorCode::config, "fd.dx: too coarse for the domain");
    FdCore out;
    out.x.resize(static_cast<Eigen::Index>(n + 1));
    for (std::size_t i = 0; i <= n; ++i) out.x[i] = p.x_lo + (p.x_hi - p.x_lo) * static_cast<double>(i) / n;
    const double h = (p.x_hi - p.x_lo) / static_cast<double>(n);

    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (const auto& g : spec.gamma->generators) {
        lo = std::min(lo, g(0, 0));
        hi = std::max(hi, g(0, 0));
    }
    Vec s2(n + 1), bv(n + 1), xi(1), tmp(1);
    double bmax = 0.0, smax = 0.0;
    for (std::size_t i = 0; i <= n; ++i) {
        xi[0] = out.x[i];
        spec.sigma.evaluate(xi, tmp);
        s2[i] = tmp[0] * tmp[0];
        smax = std::max(smax, s2[i]);
        spec.b.evaluate(xi, tmp);
        bv[i] = tmp[0];
        bmax = std::max(bmax, std::abs(tmp[0]));
    }
    const double dt_max = p.cfl_safety * h * h / (smax * hi + bmax * h);
    out.steps = static_cast<std::size_t>(std::ceil(spec.T / dt_max));
    out.dt = spec.T / static_cast<double>(out.steps);
    // Monotonicity: the weight on u_i must stay non-negative.
    for (std::size_t i = 0; i <= n; ++i)
        if (out.dt * (s2[i] * hi / (h * h) + std::abs(bv[i]) / h) > 1.0 + 1e-12)
            fail(ErrorCode::step_size, "fd: CFL condition violated");

    Vec u(n + 1), next(n + 1);
    for (std::size_t i = 0; i <= n; ++i) {
        xi[0] = out.x[i];
        u[i] = spec.terminal(xi);
    }
    out.max_abs = u.cwiseAbs().maxCoeff();
    const double dt = out.dt, inv_h2 = 1.0 / (h * h), inv_h = 1.0 / h;
    if (record) out.convex.assign(out.steps * (n + 1), 1);
    for (std::size_t step = 0; step < out.steps; ++step) {
        next[0] = u[0];
        next[n] = u[n];
        for (std::size_t i = 1; i < n; ++i) {
            const double d2 = (u[i + 1] - 2.0 * u[i] + u[i - 1]) * inv_h2;
            if (record) out.convex[step * (n + 1) + i] = d2 >= 0.0;
            const double g = 0.5 * s2[i] * (d2 > 0.0 ? hi * d2 : lo * d2);
            const double adv = bv[i] > 0.0 ? bv[i] * (u[i + 1] - u[i]) * inv_h : bv[i] * (u[i] - u[i - 1]) * inv_h;
            next[i] = u[i] + dt * (g + adv);
        }
        std::swap(u, next);
        out.max_abs = std::max(out.max_abs, u.cwiseAbs().maxCoeff());
    }
    out.u = std::move(u);
    return out;
}

double interpolate(const Vec& x, const Vec& u, double x0) {
    const double h = x[1] - x[0];
    const double pos = (x0 - x[0]) / h;
    const auto i = static_cast<Eigen::Index>(std::clamp(std::floor(pos), 0.0, static_cast<double>(x.size() - 2)));
    const double w = pos - static_cast<double>(i);
    return (1.0 - w) * u[i] + w * u[i + 1];
}

}  // namespace

double FdSolution::at(double x0) const { return interpolate(x, u, x0); }

FdSolution solve_g_heat_fd(const ProblemSpec& spec, double x0, const FdParams& params, bool estimate_error) {
    spec.validate();
    if (spec.d != 1) fail(ErrorCode::config, "fd: the finite-difference solver is one-dimensional");
    if (!spec.gamma) fail(ErrorCode::invalid_spec, "gamma: the G-heat equation needs an uncertainty set");
    if (!(params.x_hi > params.x_lo)) fail(ErrorCode::config, "fd.x_hi: must exceed fd.x_lo");
    if (!(params.dx > 0.0)) fail(ErrorCode::config, "fd.dx: must be positive");
    if (!(params.cfl_safety > 0.0 && params.cfl_safety <= 1.0)) fail(ErrorCode::config, "fd.cfl_safety: must lie in (0, 1]");
    if (!(x0 > params.x_lo && x0 < params.x_hi)) fail(ErrorCode::config, "x0: outside the fd domain");
    const auto hyp = hypothesis_constants(spec);
    const double need = 8.0 * hyp.Lambda_sigma * hyp.Lambda_gamma * std::sqrt(spec.T);
    if (params.x_hi - params.x_lo < need) {
        std::ostringstream os;
        os << "fd.x_lo/x_hi: domain width must be at least 8*Lambda_sigma*Lambda_gamma*sqrt(T) = " << need;
        fail(ErrorCode::config, os.str());
    }

    const FdCore fine = fd_solve(spec, params, params.dx, params.record_convexity);
    FdSolution sol;
    sol.x = fine.x;
    sol.u = fine.u;
    sol.dt = fine.dt;
    sol.n_steps = fine.steps;
    sol.value = interpolate(fine.x, fine.u, x0);
    sol.max_abs = fine.max_abs;
    sol.x_lo = params.x_lo;
    sol.dx = (params.x_hi - params.x_lo) / static_cast<double>(fine.x.size() - 1);
    sol.convex = fine.convex;
    if (spec.terminal.bounded()) sol.comparison_ok = sol.max_abs <= spec.terminal.sup_norm() * (1 + 1e-12);
    if (estimate_error) {
        const FdCore coarse = fd_solve(spec, params, 2.0 * params.dx, false);
        sol.error_estimate = std::abs(sol.value - interpolate(coarse.x, coarse.u, x0));
    }
    return sol;
}

SampleStats evaluate_fd_policy(const ProblemSpec& spec, double x0, const FdSolution& fd, const GMcParams& params,
                               std::size_t steps) {
    if (fd.convex.empty()) fail(ErrorCode::config, "fd: convexity was not recorded");
    if (steps < 1 || params.n_paths < 2) fail(ErrorCode::config, "mc: need n_paths >= 2 and steps >= 1");
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (const auto& g : spec.gamma->generators) {
        lo = std::min(lo, g(0, 0));
        hi = std::max(hi, g(0, 0));
    }
    const double root_lo = std::sqrt(lo), root_hi = std::sqrt(hi);
    const auto nodes = static_cast<std::size_t>(fd.x.size());
    const auto grid = TimeGrid::uniform(spec.T, steps);
    std::vector<double> values(params.n_paths);
    parallel_for(params.n_paths, params.workers, [&](std::size_t i) {
        const RngStream rng(params.seed, streams::control_eval, static_cast<std::uint32_t>(i));
        double x = x0, w = 0.0;
        Vec xv(1);
        for (std::size_t k = 0; k < steps; ++k) {
            const double dt = grid.step(k);
            const double tau = spec.T - grid.node(k);
            const auto m = std::min(fd.n_steps - 1, static_cast<std::size_t>(std::max(0.0, tau / fd.dt)));
            const double pos = std::round((x - fd.x_lo) / fd.dx);
            const auto j = static_cast<std::size_t>(std::clamp(pos, 0.0, static_cast<double>(nodes - 1)));
            const double r = fd.convex[m * nodes + j] ? root_hi : root_lo;
            rng.normals(static_cast<std::uint32_t>(k), {&w, 1});
            x += spec.sigma.scalar(x) * r * std::sqrt(dt) * w + spec.b.scalar(x) * dt;
            if (!std::isfinite(x)) fail(ErrorCode::numerical_blowup, "fd policy: non-finite state");
        }
        xv[0] = x;
        values[i] = spec.terminal(xv);
    });
    return summarize(values);
}

CrossReport cross_validate(const ProblemSpec& spec, double x0, const ControlFamily& family, const GMcParams& mc,
                           const FdParams& fd) {
    CrossReport rep;
    rep.search = evaluate_g_semigroup(spec, Vec::Constant(1, x0), family, mc);
    FdParams fp = fd;
    fp.record_convexity = true;
    const auto sol = solve_g_heat_fd(spec, x0, fp, true);
    const auto pol = evaluate_fd_policy(spec, x0, sol, mc, std::max(mc.policy_steps, family.cells * mc.steps_per_cell));
    rep.mc = rep.search.value;
    rep.mc_std_error = rep.search.std_error;
    rep.fd = sol.value;
    rep.fd_error = sol.error_estimate;
    rep.policy = pol.mean;
    rep.policy_std_error = pol.std_error;
    rep.difference = rep.mc - rep.fd;
    rep.search_gap = std::max(0.0, rep.policy - rep.mc);
    rep.budget = 3.0 * rep.mc_std_error + rep.fd_error + rep.search_gap;
    rep.mc_above_fd = rep.difference > 3.0 * rep.mc_std_error;
    rep.pass = std::abs(rep.difference) <= rep.budget && !rep.mc_above_fd;
    return rep;
}

}  // namespace couplex
