#include "couplex/bsde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "couplex/coupling.hpp"
#include "couplex/parallel.hpp"
#include "couplex/stats.hpp"

namespace couplex {

namespace {

void enumerate(int d, int degree, int coord, int left, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
    if (coord == d) {
        out.push_back(cur);
        return;
    }
    for (int e = 0; e <= left; ++e) {
        cur[coord] = e;
        enumerate(d, degree, coord + 1, left - e, cur, out);
    }
    cur[coord] = 0;
}

constexpr std::size_t kBlock = 4096;

struct Normal {
    Mat G, R;
};

void check_params(const ProblemSpec& spec, const BsdeParams& p) {
    if (p.n_paths < 2) fail(ErrorCode::config, "solver.n_paths: need at least 2 paths");
    if (p.n_steps < 1) fail(ErrorCode::config, "solver.n_steps: need at least one step");
    if (p.basis_degree < 0 || p.basis_degree > 8) fail(ErrorCode::config, "solver.basis_degree: must lie in [0, 8]");
    if (p.picard_iters < 1) fail(ErrorCode::config, "solver.picard_iters: must be at least 1");
    const double dt = spec.T / static_cast<double>(p.n_steps);
    const double kg = spec.driver.y_lipschitz();
    if (kg * dt >= 1.0) {
        std::ostringstream os;
        os << "solver.n_steps: K_g * dt = " << kg * dt << " must be below 1 for the implicit step";
        fail(ErrorCode::step_size, os.str());
    }
}

}  // namespace

PolynomialBasis::PolynomialBasis(int d, int degree) : d_(d), degree_(degree) {
    std::vector<int> cur(d, 0);
    enumerate(d, degree, 0, degree, cur, exponents_);
    std::stable_sort(exponents_.begin(), exponents_.end(), [](const auto& a, const auto& b) {
        int sa = 0, sb = 0;
        for (int e : a) sa += e;
        for (int e : b) sb += e;
        return sa < sb;
    });
}

void PolynomialBasis::evaluate(const double* z, double* out) const {
    double pw[16][9];
    for (int j = 0; j < d_; ++j) {
        pw[j][0] = 1.0;
        for (int e = 1; e <= degree_; ++e) pw[j][e] = pw[j][e - 1] * z[j];
    }
    for (std::size_t m = 0; m < exponents_.size(); ++m) {
        double v = 1.0;
        for (int j = 0; j < d_; ++j) v *= pw[j][exponents_[m][j]];
        out[m] = v;
    }
}

BsdeSolution solve_bsde(const ProblemSpec& spec, const Vec& x0, const BsdeParams& params) {
    spec.validate();
    check_params(spec, params);
    if (spec.d > 16) fail(ErrorCode::config, "solver: regression basis supports d <= 16");
    if (x0.size() != spec.d) fail(ErrorCode::invalid_spec, "x0: dimension does not match spec.d");

    const int d = spec.d;
    const std::size_t n = params.n_paths, N = params.n_steps;
    const auto grid = TimeGrid::uniform(spec.T, N);
    const auto hyp = hypothesis_constants(spec);
    const double mu = hyp.K_g + 4.0 * hyp.L_g * hyp.L_g;

    // Forward paths and increments, same arithmetic as forward_terminal.
    std::vector<double> X(n * (N + 1) * d), dB(n * N * d);
    parallel_for(n, params.workers, [&](std::size_t i) {
        const RngStream rng(params.seed, params.experiment, static_cast<std::uint32_t>(i));
        Vec x = x0, dw(d), s(d), b(d);
        std::copy(x.data(), x.data() + d, X.begin() + static_cast<std::ptrdiff_t>(i * (N + 1) * d));
        if (d == 1) {
            double xs = x0[0], w = 0.0;
            for (std::size_t k = 0; k < N; ++k) {
                const double dt = grid.step(k);
                rng.normals(static_cast<std::uint32_t>(k), {&w, 1});
                w *= std::sqrt(dt);
                xs += spec.sigma.scalar(xs) * w + spec.b.scalar(xs) * dt;
                if (!std::isfinite(xs)) fail(ErrorCode::numerical_blowup, "bsde: non-finite forward state");
                dB[i * N + k] = w;
                X[i * (N + 1) + k + 1] = xs;
            }
            return;
        }
        for (std::size_t k = 0; k < N; ++k) {
            const double dt = grid.step(k);
            rng.normals(static_cast<std::uint32_t>(k), {dw.data(), static_cast<std::size_t>(d)});
            dw *= std::sqrt(dt);
            spec.sigma.evaluate(x, s);
            spec.b.evaluate(x, b);
            x += s.cwiseProduct(dw) + b * dt;
            if (!x.allFinite()) fail(ErrorCode::numerical_blowup, "bsde: non-finite forward state");
            std::copy(dw.data(), dw.data() + d, dB.begin() + static_cast<std::ptrdiff_t>((i * N + k) * d));
            std::copy(x.data(), x.data() + d, X.begin() + static_cast<std::ptrdiff_t>((i * (N + 1) + k + 1) * d));
        }
    });
    auto x_at = [&](std::size_t i, std::size_t k) { return &X[(i * (N + 1) + k) * d]; };
    auto db_at = [&](std::size_t i, std::size_t k) { return &dB[(i * N + k) * d]; };

    BsdeSolution sol;
    sol.grid = grid;
    sol.basis_degree = params.basis_degree;
    sol.steps.resize(N);
    const PolynomialBasis basis(d, params.basis_degree);
    const std::size_t M = basis.size();

    std::vector<double> y_next(n), y_cur(n), g_sum(n, 0.0), zen(n, 0.0), sup_w(n);
    const double eT = std::exp(mu * spec.T);
    parallel_for(n, params.workers, [&](std::size_t i) {
        y_next[i] = spec.terminal(Eigen::Map<const Vec>(x_at(i, N), d));
        sup_w[i] = eT * std::abs(y_next[i]);
    });

    std::vector<double> P(n * M), col(n);
    for (std::size_t k = N - 1; k >= 1; --k) {
        const double dt = grid.step(k), t = grid.node(k);
        BsdeStep& st = sol.steps[k];
        st.center.resize(d);
        st.scale.resize(d);
        for (int j = 0; j < d; ++j) {
            for (std::size_t i = 0; i < n; ++i) col[i] = x_at(i, k)[j];
            const auto s = summarize(col);
            st.center[j] = s.mean;
            st.scale[j] = s.variance > 0.0 ? std::sqrt(s.variance) : 1.0;
        }
        parallel_for(n, params.workers, [&](std::size_t i) {
            double z[16];
            for (int j = 0; j < d; ++j) z[j] = (x_at(i, k)[j] - st.center[j]) / st.scale[j];
            basis.evaluate(z, &P[i * M]);
        });

        const Normal ne = tree_reduce<Normal>(
            n, kBlock, params.workers,
            [&](std::size_t lo, std::size_t hi) {
                Normal acc{Mat::Zero(M, M), Mat::Zero(M, 1 + d)};
                for (std::size_t i = lo; i < hi; ++i) {
                    const double* p = &P[i * M];
                    const double* db = db_at(i, k);
                    for (std::size_t a = 0; a < M; ++a) {
                        for (std::size_t b = 0; b <= a; ++b) acc.G(a, b) += p[a] * p[b];
                        acc.R(a, 0) += p[a] * y_next[i];
                        for (int j = 0; j < d; ++j) acc.R(a, 1 + j) += p[a] * y_next[i] * db[j] / dt;
                    }
                }
                return acc;
            },
            [](Normal& a, Normal& b) {
                a.G += b.G;
                a.R += b.R;
            });
        Mat G = ne.G.selfadjointView<Eigen::Lower>();
        Eigen::SelfAdjointEigenSolver<Mat> es(G, Eigen::EigenvaluesOnly);
        const double emin = es.eigenvalues().minCoeff(), emax = es.eigenvalues().maxCoeff();
        st.condition = emin > 0.0 ? emax / emin : std::numeric_limits<double>::infinity();
        if (!(st.condition <= 1e12)) {
            std::ostringstream os;
            os << "solver.basis_degree: regression at step " << k << " has condition number " << st.condition
               << " > 1e12";
            fail(ErrorCode::degraded_basis, os.str());
        }
        const Mat coef = G.ldlt().solve(ne.R);
        st.y_coef = coef.col(0);
        st.z_coef = coef.rightCols(d);
        sol.diagnostics.max_condition = std::max(sol.diagnostics.max_condition, st.condition);

        std::vector<double> res(n);
        const double ew = std::exp(mu * t), ew2 = ew * ew;
        parallel_for(n, params.workers, [&](std::size_t i) {
            const Eigen::Map<const Vec> p(&P[i * M], static_cast<Eigen::Index>(M));
            const double c = p.dot(st.y_coef);
            const Vec z = st.z_coef.transpose() * p;
            double y = c, g = 0.0;
            for (int it = 0; it < params.picard_iters; ++it) {
                g = spec.driver(y, z);
                y = c + g * dt;
            }
            res[i] = (y_next[i] - c) * (y_next[i] - c);
            y_cur[i] = y;
            g_sum[i] += g * dt;
            sup_w[i] = std::max(sup_w[i], ew * std::abs(y));
            zen[i] += ew2 * z.squaredNorm() * dt;
        });
        st.residual_rms = std::sqrt(pairwise_sum(res) / static_cast<double>(n));
        std::swap(y_next, y_cur);
        if (k == 1) break;
    }

    // Node 0: every path starts at x0, so conditional expectations are means.
    const double dt0 = grid.step(0);
    const double c0 = pairwise_sum(y_next) / static_cast<double>(n);
    sol.z0 = Vec::Zero(d);
    for (int j = 0; j < d; ++j) {
        for (std::size_t i = 0; i < n; ++i) col[i] = y_next[i] * db_at(i, 0)[j] / dt0;
        sol.z0[j] = pairwise_sum(col) / static_cast<double>(n);
    }
    double y0 = c0, g0 = 0.0;
    for (int it = 0; it < params.picard_iters; ++it) {
        g0 = spec.driver(y0, sol.z0);
        y0 = c0 + g0 * dt0;
    }
    sol.y0 = y0;

    // Pathwise telescoped representation ψ = φ(X_N) + Σ g Δt; its sample mean
    // equals y0 because least squares with an intercept preserves means.
    std::vector<double> psi(n);
    for (std::size_t i = 0; i < n; ++i) {
        psi[i] = spec.terminal(Eigen::Map<const Vec>(x_at(i, N), d)) + g_sum[i] + g0 * dt0;
        sup_w[i] = std::max(sup_w[i], std::abs(y0));
        zen[i] = std::sqrt(zen[i] + sol.z0.squaredNorm() * dt0);
    }
    sol.std_error = summarize(psi).std_error;
    sol.psi = std::move(psi);

    double max_abs = std::abs(y0);
    for (std::size_t i = 0; i < n; ++i) max_abs = std::max(max_abs, sup_w[i]);
    sol.diagnostics.max_abs_y = max_abs;
    const double ekt = std::exp(hyp.K_g * spec.T);
    sol.diagnostics.comparison_bound = ekt * (hyp.phi_sup + std::abs(hyp.g0) * spec.T * ekt);
    sol.sup_weighted_y = std::move(sup_w);
    sol.z_energy = std::move(zen);
    if (!std::isfinite(sol.y0)) fail(ErrorCode::numerical_blowup, "bsde: non-finite y0");
    return sol;
}

UEstimate estimate_u(const ProblemSpec& spec, const Vec& x0, const BsdeParams& params) {
    if (spec.driver.kind != DriverKind::zero) {
        auto sol = solve_bsde(spec, x0, params);
        return {sol.y0, sol.std_error, true, std::move(sol.psi)};
    }
    spec.validate();
    check_params(spec, params);
    const auto grid = TimeGrid::uniform(spec.T, params.n_steps);
    std::vector<double> v(params.n_paths);
    parallel_for(params.n_paths, params.workers, [&](std::size_t i) {
        const RngStream rng(params.seed, params.experiment, static_cast<std::uint32_t>(i));
        v[i] = spec.terminal(forward_terminal(spec, grid, rng, x0));
    });
    const auto s = summarize(v);
    return {s.mean, s.std_error, false, std::move(v)};
}

AprioriReport bsde_apriori_check(std::span<const BsdeSolution> solutions, const ProblemSpec& spec,
                                 const DerivedConstants& consts) {
    AprioriReport rep;
    rep.mu = consts.mu;
    rep.d1 = consts.config.bsde_constant(1.0);
    const auto& h = consts.hyp;
    double forcing = 0.0;
    if (h.g0 != 0.0) forcing = rep.mu > 0.0 ? std::abs(h.g0) / rep.mu : std::numeric_limits<double>::infinity();
    rep.bound = rep.d1 * std::exp(rep.mu * spec.T) * (h.phi_sup + forcing);
    std::vector<double> ys, zs;
    for (const auto& s : solutions) {
        ys.insert(ys.end(), s.sup_weighted_y.begin(), s.sup_weighted_y.end());
        zs.insert(zs.end(), s.z_energy.begin(), s.z_energy.end());
    }
    const auto sy = summarize(ys), sz = summarize(zs);
    rep.sup_y = sy.mean;
    rep.sup_y_se = sy.std_error;
    rep.z_norm = sz.mean;
    rep.z_norm_se = sz.std_error;
    rep.pass = rep.sup_y <= rep.bound && rep.z_norm <= rep.bound;
    return rep;
}

}  // namespace couplex
