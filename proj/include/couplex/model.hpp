#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "couplex/error.hpp"

namespace couplex {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// ---------------------------------------------------------------------------
// Coefficients
// ---------------------------------------------------------------------------

enum class FieldKind { constant, affine, sine_perturbed };

const char* to_string(FieldKind kind) noexcept;

/// A coefficient whose value at x is
///
///     offset + matrix * x + amplitude * sin(frequency ∘ x)
///
/// with the terms present according to `kind`. Used for the drift b (value
/// is a vector) and for the diffusion σ, in which case the value is the
/// diagonal of σ(x). All Lipschitz and ellipticity constants are exact
/// functions of the parameters.
struct CoefficientField {
    FieldKind kind = FieldKind::constant;
    Vec offset;
    Mat matrix;          // affine only
    double amplitude = 0.0;  // sine-perturbed only
    Vec frequency;       // sine-perturbed only

    static CoefficientField constant(Vec value);
    static CoefficientField affine(Mat a, Vec c);
    static CoefficientField sine_perturbed(Vec base, double amplitude, Vec frequency);

    int dim() const noexcept { return static_cast<int>(offset.size()); }

    /// Writes the value at x into out (resized by caller to dim()).
    void evaluate(const Vec& x, Vec& out) const;
    Vec operator()(const Vec& x) const;

    /// Value for d = 1 without touching the heap.
    double scalar(double x) const {
        switch (kind) {
            case FieldKind::constant: return offset[0];
            case FieldKind::affine: return matrix(0, 0) * x + offset[0];
            case FieldKind::sine_perturbed: return offset[0] + amplitude * std::sin(frequency[0] * x);
        }
        return 0.0;
    }

    /// Exact Lipschitz constant: ‖A‖₂ (affine), amplitude·max|k| (sine).
    double lipschitz() const;

    /// Lower/upper bounds of the components, used as the ellipticity
    /// bounds when the field is a diagonal σ.
    double lower_bound() const;
    double upper_bound() const;
};

// ---------------------------------------------------------------------------
// Driver g(y, z)
// ---------------------------------------------------------------------------

enum class DriverKind { zero, linear, sine_lipschitz };

const char* to_string(DriverKind kind) noexcept;

/// zero:            g ≡ 0
/// linear:          g = g0 + y_coef·y + z_coef·z
/// sine-lipschitz:  g = g0 + K_g sin(y) + L_g sin(u·z),  u = (1,…,1)/√d
struct DriverSpec {
    DriverKind kind = DriverKind::zero;
    double g0 = 0.0;
    double y_coef = 0.0;
    Vec z_coef;
    double k_g = 0.0;
    double l_g = 0.0;

    static DriverSpec zero();
    static DriverSpec linear(double g0, double y_coef, Vec z_coef);
    static DriverSpec sine_lipschitz(double g0, double k_g, double l_g);

    double operator()(double y, const Vec& z) const;
    double value_at_origin() const { return g0; }
    double y_lipschitz() const;
    double z_lipschitz() const;
};

// ---------------------------------------------------------------------------
// Terminal function φ
// ---------------------------------------------------------------------------

enum class TerminalKind { constant, linear, quadratic, sine, cosine, tanh, bump };

const char* to_string(TerminalKind kind) noexcept;

/// Test functions with a closed-form sup norm. With s = weights·x:
///   constant  c
///   linear    a·s + c
///   quadratic a·|x|² + c
///   sine      a·sin(ω s + phase) + c
///   cosine    a·cos(ω s + phase) + c
///   tanh      a·tanh(ω s) + c
///   bump      a·exp(−|x − center|²/(2 width²)) + c
/// An optional cap clamps the value to [−cap, cap].
struct TerminalSpec {
    TerminalKind kind = TerminalKind::constant;
    double amplitude = 1.0;
    double frequency = 1.0;
    double phase = 0.0;
    double offset = 0.0;
    Vec weights;  // defaults to e₁
    Vec center;   // bump only; defaults to 0
    double width = 1.0;
    std::optional<double> cap;

    double operator()(const Vec& x) const;
    /// +∞ for unbounded kinds without a cap.
    double sup_norm() const;
    bool bounded() const;
};

// ---------------------------------------------------------------------------
// Uncertainty set Γ (G-mode)
// ---------------------------------------------------------------------------

/// Γ is the convex hull of a finite list of positive definite generators.
/// In d = 1 it is the variance interval [σ̲², σ̄²].
struct UncertaintySet {
    std::vector<Mat> generators;

    static UncertaintySet interval(double lower_variance, double upper_variance);

    int dim() const;
    /// λ_Γ, Λ_Γ: square roots of the extreme eigenvalues over the generators.
    double lambda() const;
    double Lambda() const;
    /// G(A) = ½ max over generators of tr(Aγ).
    double G(const Mat& a) const;
};

// ---------------------------------------------------------------------------
// Problem
// ---------------------------------------------------------------------------

struct ProblemSpec {
    std::string id;
    int d = 1;
    CoefficientField sigma;  // diagonal of σ(x)
    CoefficientField b;
    DriverSpec driver;
    TerminalSpec terminal;
    double T = 1.0;
    std::optional<UncertaintySet> gamma;

    bool g_mode() const noexcept { return gamma.has_value(); }

    /// Throws Error(invalid_spec) naming the offending field.
    void validate() const;
};

/// Hypothesis constants read off a validated spec.
struct HypothesisConstants {
    double lambda_sigma = 0, Lambda_sigma = 0;
    double L_sigma = 0, L_b = 0;
    double K_g = 0, L_g = 0, g0 = 0;
    double phi_sup = 0;
    double lambda_gamma = 0, Lambda_gamma = 0;  // G-mode only
};

HypothesisConstants hypothesis_constants(const ProblemSpec& spec);

// ---------------------------------------------------------------------------
// Derived constants
// ---------------------------------------------------------------------------

enum class Mode { classical, g_mode };

const char* to_string(Mode mode) noexcept;

/// Constants the gradient bounds leave free. BDG constants c_p are looked up
/// in `bdg` (exact key match within 1e-12); BSDE constants d_p come from
/// `d_overrides` or default to d_base^p.
struct ConstantConfig {
    double alpha = 5.0;
    std::map<double, double> bdg{{2.5, 4.0}};
    double d_base = 2.0;
    std::map<double, double> d_overrides;
    std::optional<double> theta;  // G-mode level; defaults to λ_σ²Λ_σ⁻¹/2

    double bdg_constant(double p) const;
    double bsde_constant(double p) const;
};

struct DerivedConstants {
    Mode mode = Mode::classical;
    HypothesisConstants hyp;
    double alpha = 5.0;
    double beta_sigma = 1.0;
    double beta_gamma = 1.0;
    double theta = 0.0;
    double L = 0.0;            // schedule rate
    double L_corollary = 0.0;  // 2L_b + 4L_σ²
    double mu = 0.0;           // K_g + 4L_g²
    double delta = 0.0;
    double C_alpha = 0.0;      // C₅ when α = 5
    double p_beta = 0.0;       // 32(β_σ³ + 1/4)²
    double d_p_beta = 0.0;
    double C_beta = 0.0;
    std::optional<double> C_g;  // undefined without a z-dependence
    double C_main1 = 0.0;
    double C_corollary = 0.0;
    double C_main2 = 0.0;
    double bdg_used = 0.0;      // c_{α/2}
    ConstantConfig config;
};

DerivedConstants derive_constants(const ProblemSpec& spec, Mode mode,
                                  const ConstantConfig& config = {});

// ---------------------------------------------------------------------------
// Coupling schedule ξ_t
// ---------------------------------------------------------------------------

/// ξ_t = level · (1 − e^{L(t−T)})/L, with the L → 0 limit level·(T − t).
/// classical: level = αθ/(α−1);  g-mode: level = 2(λ_σ²Λ_σ⁻¹ − θ).
class CouplingSchedule {
public:
    static CouplingSchedule classical(double alpha, double theta, double rate, double T);
    static CouplingSchedule g_mode(double lambda_sigma, double Lambda_sigma, double theta,
                                   double rate, double T);
    /// Schedule matching the mode of the given constants.
    static CouplingSchedule from_constants(const DerivedConstants& c, double T);

    Mode mode() const noexcept { return mode_; }
    double level() const noexcept { return level_; }
    double rate() const noexcept { return rate_; }
    double horizon() const noexcept { return horizon_; }
    double alpha() const noexcept { return alpha_; }
    double theta() const noexcept { return theta_; }

    struct Point {
        double value;
        double derivative;
    };
    /// Throws Error(domain) outside [0, T].
    Point eval(double t) const;
    double value(double t) const { return eval(t).value; }

    /// ξ⁰_t = (1 − e^{L(t−T)})/L.
    double unit(double t) const;

    /// ∫_a^b ds/ξ_s in closed form, for 0 ≤ a ≤ b < T.
    double reciprocal_integral(double a, double b) const;

private:
    Mode mode_ = Mode::classical;
    double level_ = 0, rate_ = 0, horizon_ = 0, alpha_ = 0, theta_ = 0;
};

/// (1 − e^{−L s})/L with the L → 0 limit s.
double decay_window(double rate, double s);

struct InequalityRow {
    double p;
    double t;
    double lhs;
    double excess;  // lhs + θ, must be ≤ 0
};

struct InequalityReport {
    std::vector<InequalityRow> rows;
    double max_excess = 0.0;
    double theta = 0.0;
    bool pass = false;
    double tolerance = 1e-12;
};

/// Evaluates ((2p−1)/p) L^g_p ξ_r − λ_σ²/Λ_σ − ((2p−1)/(2p)) ξ'_r ≤ −θ on the
/// grid, with L^g_p = L_g L_σ + L_b + (p − ½) L_σ².
InequalityReport check_schedule_inequality(const CouplingSchedule& s,
                                           const DerivedConstants& consts,
                                           const std::vector<double>& p_grid,
                                           const std::vector<double>& t_grid,
                                           double tolerance = 1e-12);

enum class BoundKind { main1, corollary, main2 };

const char* to_string(BoundKind kind) noexcept;

/// r ↦ slope · r.
struct BoundFunction {
    BoundKind kind = BoundKind::main1;
    double slope = 0.0;
    double C = 0.0;
    double rate = 0.0;
    double operator()(double r) const { return slope * r; }
};

BoundFunction theorem_bound(const DerivedConstants& consts, const ProblemSpec& spec,
                            BoundKind which);

}  // namespace couplex
