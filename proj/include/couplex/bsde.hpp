#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "couplex/grid.hpp"
#include "couplex/model.hpp"
#include "couplex/rng.hpp"

namespace couplex {

struct BsdeParams {
    std::size_t n_paths = 100000;
    std::size_t n_steps = 50;
    int basis_degree = 3;
    int picard_iters = 3;
    std::uint64_t seed = 1;
    unsigned workers = 1;
    std::uint32_t experiment = streams::bsde;
};

/// Total-degree polynomial basis in standardized coordinates
/// z = (x − center)/scale.
class PolynomialBasis {
public:
    PolynomialBasis(int d, int degree);

    int dim() const noexcept { return d_; }
    int degree() const noexcept { return degree_; }
    std::size_t size() const noexcept { return exponents_.size(); }
    /// Writes the basis values at z into out[0..size()).
    void evaluate(const double* z, double* out) const;

private:
    int d_, degree_;
    std::vector<std::vector<int>> exponents_;
};

struct BsdeStep {
    Vec center, scale;  // standardization of X_k
    Vec y_coef;         // E[Y_{k+1} | X_k]
    Mat z_coef;         // E[Y_{k+1}ΔB_k | X_k]/Δt_k, one column per coordinate
    double condition = 0.0;
    double residual_rms = 0.0;
};

struct BsdeDiagnostics {
    double max_condition = 0.0;
    double max_abs_y = 0.0;
    double comparison_bound = 0.0;  // e^{K_gT}(‖φ‖_∞ + |g₀|T e^{K_gT})
};

struct BsdeSolution {
    TimeGrid grid;
    int basis_degree = 0;
    std::vector<BsdeStep> steps;  // steps[k] for k = 1..N−1 (entry 0 unused)
    double y0 = 0.0;
    Vec z0;
    double std_error = 0.0;
    BsdeDiagnostics diagnostics;
    // Per-path a-priori functionals with μ = K_g + 4L_g²; pooled by bsde_apriori_check.
    std::vector<double> sup_weighted_y;  // sup_k e^{μt_k}|Y_k|
    std::vector<double> z_energy;        // (Σ_k e^{2μt_k}|Z_k|²Δt_k)^{1/2}
    std::vector<double> psi;             // φ(X_N) + Σ_k g Δt_k per path
};

/// Regression Monte Carlo on a uniform grid of n_steps. Throws
/// Error(step_size) if K_g·Δt ≥ 1 and Error(degraded_basis) if a Gram
/// matrix has condition number above 1e12.
BsdeSolution solve_bsde(const ProblemSpec& spec, const Vec& x0, const BsdeParams& params);

struct UEstimate {
    double value = 0.0;
    double std_error = 0.0;
    bool regression = false;  // true when solve_bsde was used
    std::vector<double> samples;  // per-path values whose mean is (close to) value
};

/// u(T, x0): solve_bsde for a non-zero driver, plain Monte Carlo of φ(X_T)
/// otherwise. Both use the stream (seed, experiment, path), so two calls at
/// different x0 share their random numbers.
UEstimate estimate_u(const ProblemSpec& spec, const Vec& x0, const BsdeParams& params);

struct AprioriReport {
    double mu = 0.0;
    double d1 = 0.0;
    double bound = 0.0;         // d₁e^{μT}(‖φ‖_∞ + |g₀|/μ)
    double sup_y = 0.0;         // E[sup e^{μt}|Y_t|]
    double sup_y_se = 0.0;
    double z_norm = 0.0;        // E[(∫e^{2μs}|Z_s|²ds)^{1/2}]
    double z_norm_se = 0.0;
    bool pass = false;
};

AprioriReport bsde_apriori_check(std::span<const BsdeSolution> solutions, const ProblemSpec& spec,
                                 const DerivedConstants& consts);

}  // namespace couplex
