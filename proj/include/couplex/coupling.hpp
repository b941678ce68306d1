#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "couplex/grid.hpp"
#include "couplex/model.hpp"
#include "couplex/rng.hpp"

namespace couplex {

/// a^power for a symmetric positive definite a.
Mat symmetric_power(const Mat& a, double power);

// ---------------------------------------------------------------------------
// Volatility controls (G-mode)
// ---------------------------------------------------------------------------

/// Piecewise-constant γ_k ∈ Γ on the steps of a grid, with √γ and √γ⁻¹
/// precomputed. Distinct matrices are stored once and referenced per step.
class ControlPath {
public:
    ControlPath() = default;

    static ControlPath constant(const TimeGrid& grid, const Mat& gamma);

    /// Step k of the grid uses candidates[choice[cell(t_k)]], cells being K
    /// equal slices of [0, T].
    static ControlPath piecewise(const TimeGrid& grid, const std::vector<Mat>& candidates,
                                 std::span<const std::size_t> choice);

    std::size_t steps() const noexcept { return index_.size(); }
    const Mat& gamma(std::size_t k) const { return gamma_[index_[k]]; }
    const Mat& root(std::size_t k) const { return root_[index_[k]]; }
    const Mat& inverse_root(std::size_t k) const { return inverse_root_[index_[k]]; }

    /// Throws Error(invalid_spec) if a γ_k lies outside the spectral bounds.
    void check_within(const UncertaintySet& gamma) const;

private:
    void add(const Mat& gamma);

    std::vector<Mat> gamma_, root_, inverse_root_;
    std::vector<std::size_t> index_;
};

/// Cell of [0, T] sliced into `cells` equal parts containing t.
std::size_t control_cell(double t, double T, std::size_t cells);

// ---------------------------------------------------------------------------
// Forward simulation
// ---------------------------------------------------------------------------

/// Euler–Maruyama path of dX = σ(X)dB + b(X)dt. In G-mode the increment of
/// B over step k is √γ_k ΔW_k with W standard. Returns the states at every
/// node. Throws Error(numerical_blowup) on a non-finite state.
std::vector<Vec> simulate_forward(const ProblemSpec& spec, const TimeGrid& grid, const RngStream& rng,
                                  const Vec& x0, const ControlPath* control = nullptr);

/// Same path as simulate_forward, keeping only the terminal state.
Vec forward_terminal(const ProblemSpec& spec, const TimeGrid& grid, const RngStream& rng,
                     const Vec& x0, const ControlPath* control = nullptr);

// ---------------------------------------------------------------------------
// Coupled pair
// ---------------------------------------------------------------------------

/// original: B is the driving Brownian motion; X^x is the plain diffusion
///           and Y carries the coupling drift.
/// tilted:   B̃ = B − ∫h ds drives; Y is the plain diffusion from y and X
///           carries the compensating drift.
/// In both cases log_weight is log U_T = ∫h·dB − ½∫|h|²ds, the density of
/// the tilted measure with respect to the original one.
enum class Measure { original, tilted };

const char* to_string(Measure m) noexcept;

struct CouplingOptions {
    double drift_cap = 1e8;
    Measure measure = Measure::original;
    bool record_paths = true;
};

/// Step-wise schedule data for one grid: ∫ds/ξ over each step plus
/// Gauss–Legendre nodes for ∫|X − Y|²/ξ² ds.
class ScheduleTable {
public:
    ScheduleTable(const CouplingSchedule& schedule, const TimeGrid& grid);

    static constexpr int kNodes = 4;
    struct Step {
        double reciprocal = 0.0;  // ∫_{t_k}^{t_{k+1}} ds/ξ_s
        std::array<double, kNodes> node_reciprocal{};  // ∫_{t_k}^{τ_j} ds/ξ_s
        std::array<double, kNodes> node_weight{};      // w_j Δt / ξ(τ_j)²
    };
    const Step& step(std::size_t k) const { return steps_[k]; }
    /// ∫_0^{t_k} ds/ξ_s.
    double cumulative(std::size_t k) const { return cumulative_[k]; }

private:
    std::vector<Step> steps_;
    std::vector<double> cumulative_;
};

struct CoupledPathBundle {
    std::shared_ptr<const TimeGrid> grid;
    int d = 1;
    Measure measure = Measure::original;
    std::vector<double> x, y;  // (steps+1)·d, row k = node k (only ends if not recorded)
    std::vector<double> H;     // |X_k − Y_k|² at every node
    double log_weight = 0.0;
    std::vector<double> log_weight_path;  // log U_t on the same rows as H
    double drift_energy = 0.0;  // ∫ tr[h h* d⟨B'⟩]  (= ∫|h|²ds classically)
    double gap_energy = 0.0;    // ∫ |X − Y|²/ξ² ds
    bool drift_capped = false;
    std::size_t capped_steps = 0;
    bool controlled = false;

    std::size_t nodes() const noexcept { return H.size(); }
    Eigen::Map<const Vec> x_at(std::size_t row) const { return {x.data() + row * d, d}; }
    Eigen::Map<const Vec> y_at(std::size_t row) const { return {y.data() + row * d, d}; }
    Eigen::Map<const Vec> x_end() const { return {x.data() + x.size() - d, d}; }
    Eigen::Map<const Vec> y_end() const { return {y.data() + y.size() - d, d}; }
};

/// Simulates the coupled pair started at (x, y). The coupling drift
/// (1/ξ_t)σ(X_t)(X_t − Y_t) is integrated exactly over each step with σ(X)
/// frozen at the left node; the remaining terms use Euler–Maruyama. The
/// implied Girsanov drift h = −σ(Y)⁻¹·(coupling drift) is clamped in norm at
/// drift_cap.
CoupledPathBundle simulate_coupled(const ProblemSpec& spec, const CouplingSchedule& schedule,
                                   const TimeGrid& grid, const RngStream& rng, const Vec& x,
                                   const Vec& y, const CouplingOptions& options = {},
                                   const ControlPath* control = nullptr);

/// Same as above reusing a precomputed schedule table.
CoupledPathBundle simulate_coupled(const ProblemSpec& spec, const ScheduleTable& table,
                                   const std::shared_ptr<const TimeGrid>& grid, const RngStream& rng,
                                   const Vec& x, const Vec& y, const CouplingOptions& options,
                                   const ControlPath* control = nullptr);

/// U_T = exp(log_weight).
double girsanov_weight(const CoupledPathBundle& bundle);

// ---------------------------------------------------------------------------
// Empirical checks
// ---------------------------------------------------------------------------

/// Common setup for the Monte-Carlo checks below.
struct CouplingSetup {
    ProblemSpec spec;
    DerivedConstants constants;
    CouplingSchedule schedule;
    std::shared_ptr<const TimeGrid> grid;
    std::uint64_t seed = 1;
    std::size_t n_paths = 10000;
    unsigned workers = 1;
    double drift_cap = 1e8;
    std::optional<ControlPath> control;

    static CouplingSetup make(const ProblemSpec& spec, Mode mode, const ConstantConfig& config,
                              const TimeGrid& grid, std::uint64_t seed, std::size_t n_paths,
                              unsigned workers);
};

/// Runs n_paths bundles (path index = stream path id) in parallel. Paths
/// are not recorded.
std::vector<CoupledPathBundle> simulate_coupled_set(const CouplingSetup& setup, const Vec& x, const Vec& y,
                                                    Measure measure, bool keep_h = false);

struct MomentRow {
    double separation = 0.0;
    double empirical = 0.0;
    double std_error = 0.0;
    double bound = 0.0;
    bool pass = false;
};

struct MomentReport {
    std::string name;
    std::vector<MomentRow> rows;
    bool pass = true;
    double capped_fraction = 0.0;
};

/// E[U_T^{1+δ}] ≤ exp{θ√(1+δ⁻¹)/(8Λ_σ²[Λ_Γ²]ξ₀(1+√(1+δ⁻¹)))|x−y|²}, checked as
/// mean ≤ bound·(1 + 3·relative stderr). Bundles under the original measure.
MomentRow girsanov_moment_check(std::span<const CoupledPathBundle> bundles, const DerivedConstants& consts,
                                const CouplingSchedule& schedule, double separation);

/// Tilted-measure mean of exp{θ²/(8Λ_σ²[Λ_Γ²]) ∫|X−Y|²/ξ²} against
/// exp{θ|x−y|²/(8Λ_σ²[Λ_Γ²]ξ₀)}. Accepts tilted bundles (plain mean) or
/// original ones (U_T-weighted mean).
MomentRow exp_functional_check(std::span<const CoupledPathBundle> bundles, const DerivedConstants& consts,
                               const CouplingSchedule& schedule, double separation);

struct UMomentReport {
    double order = 0.0;
    std::vector<double> separations;
    std::vector<double> norms;       // (E|u_T|^p)^{1/p}
    std::vector<double> quotients;   // norms / separation
    std::vector<double> std_errors;  // of the quotients
    double slope = 0.0;
    double slope_std_error = 0.0;
    double bound = 0.0;
    bool pass = false;
};

/// Fits (E|u_T|^p)^{1/p}/|x−y| against |x−y| and compares the r → 0
/// intercept with C_α·2Λ_σ²/λ_σ³·(ξ⁰₀)^{−1/2}.
UMomentReport u_moment_check(const std::vector<std::vector<CoupledPathBundle>>& sets,
                             std::span<const double> separations, const DerivedConstants& consts,
                             const CouplingSchedule& schedule, double order);

struct IdentityRow {
    std::string phi;
    double weighted = 0.0;   // mean U_T φ(X^x_T)
    double weighted_se = 0.0;
    double direct = 0.0;     // mean φ(X^y_T)
    double direct_se = 0.0;
    double combined_se = 0.0;
    bool pass = false;
};

/// mean U_T·φ(X^x_T) against an independent direct run of X^y for each φ.
std::vector<IdentityRow> girsanov_identity(const CouplingSetup& setup, const Vec& x, const Vec& y,
                                           const std::vector<std::pair<std::string, TerminalSpec>>& phis);

struct ContractionReport {
    std::vector<double> h_min;
    std::vector<double> median_H;
    std::vector<double> ratios;
    double required_ratio = 0.0;  // q^{1.5}
    bool pass = false;
};

/// Median H_{T_eff} over levels h_min·q^j; each level must shrink it by at
/// least q^{1.5}.
ContractionReport terminal_contraction(const CouplingSetup& setup, const Vec& x, const Vec& y,
                                       std::size_t n0, double q, double h_min, std::size_t levels);

struct SupermartingaleReport {
    std::vector<double> t;
    std::vector<double> mean;
    std::vector<double> std_error;
    double worst_increase = 0.0;  // max over k of (m_{k+1} − m_k) / combined stderr
    bool pass = false;
};

/// Mean of H_t·exp(−∫_0^t (2L_b + κL_σ² − 2λ_σ/ξ_s) ds), κ = 1 (Λ_Γ² in
/// G-mode), must be non-increasing in t within 3 stderr.
SupermartingaleReport supermartingale_check(const CouplingSetup& setup, const Vec& x, const Vec& y);

}  // namespace couplex
