#include "couplex/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace couplex {

const char* to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::invalid_spec: return "invalid-spec";
        case ErrorCode::domain: return "domain";
        case ErrorCode::numerical_blowup: return "numerical-blowup";
        case ErrorCode::step_size: return "step-size";
        case ErrorCode::degraded_basis: return "degraded-basis";
        case ErrorCode::budget: return "budget";
        case ErrorCode::config: return "config";
        case ErrorCode::io: return "io";
        case ErrorCode::internal: return "internal";
    }
    return "unknown";
}

const char* to_string(FieldKind kind) noexcept {
    switch (kind) {
        case FieldKind::constant: return "constant";
        case FieldKind::affine: return "affine";
        case FieldKind::sine_perturbed: return "sine-perturbed";
    }
    return "unknown";
}

const char* to_string(DriverKind kind) noexcept {
    switch (kind) {
        case DriverKind::zero: return "zero";
        case DriverKind::linear: return "linear";
        case DriverKind::sine_lipschitz: return "sine-lipschitz";
    }
    return "unknown";
}

const char* to_string(TerminalKind kind) noexcept {
    switch (kind) {
        case TerminalKind::constant: return "constant";
        case TerminalKind::linear: return "linear";
        case TerminalKind::quadratic: return "quadratic";
        case TerminalKind::sine: return "sine";
        case TerminalKind::cosine: return "cosine";
        case TerminalKind::tanh: return "tanh";
        case TerminalKind::bump: return "bump";
    }
    return "unknown";
}

const char* to_string(Mode mode) noexcept {
    return mode == Mode::classical ? "classical" : "g-mode";
}

const char* to_string(BoundKind kind) noexcept {
    switch (kind) {
        case BoundKind::main1: return "main1";
        case BoundKind::corollary: return "corollary";
        case BoundKind::main2: return "main2";
    }
    return "unknown";
}

// ---------------------------------------------------------------------------

CoefficientField CoefficientField::constant(Vec value) {
    CoefficientField f;
    f.kind = FieldKind::constant;
    f.offset = std::move(value);
    return f;
}

CoefficientField CoefficientField::affine(Mat a, Vec c) {
    CoefficientField f;
    f.kind = FieldKind::affine;
    f.matrix = std::move(a);
    f.offset = std::move(c);
    return f;
}

CoefficientField CoefficientField::sine_perturbed(Vec base, double amplitude, Vec frequency) {
    CoefficientField f;
    f.kind = FieldKind::sine_perturbed;
    f.offset = std::move(base);
    f.amplitude = amplitude;
    f.frequency = std::move(frequency);
    return f;
}

void CoefficientField::evaluate(const Vec& x, Vec& out) const {
    switch (kind) {
        case FieldKind::constant:
            out = offset;
            break;
        case FieldKind::affine:
            out.noalias() = matrix * x;
            out += offset;
            break;
        case FieldKind::sine_perturbed:
            for (Eigen::Index i = 0; i < offset.size(); ++i)
                out[i] = offset[i] + amplitude * std::sin(frequency[i] * x[i]);
            break;
    }
}

Vec CoefficientField::operator()(const Vec& x) const {
    Vec out(offset.size());
    evaluate(x, out);
    return out;
}

double CoefficientField::lipschitz() const {
    switch (kind) {
        case FieldKind::constant: return 0.0;
        case FieldKind::affine: {
            if (matrix.size() == 0) return 0.0;
            Eigen::JacobiSVD<Mat> svd(matrix);
            return svd.singularValues()(0);
        }
        case FieldKind::sine_perturbed:
            return std::abs(amplitude) * frequency.cwiseAbs().maxCoeff();
    }
    return 0.0;
}

double CoefficientField::lower_bound() const {
    double m = offset.minCoeff();
    if (kind == FieldKind::sine_perturbed) m -= std::abs(amplitude);
    if (kind == FieldKind::affine) return -std::numeric_limits<double>::infinity();
    return m;
}

double CoefficientField::upper_bound() const {
    double m = offset.maxCoeff();
    if (kind == FieldKind::sine_perturbed) m += std::abs(amplitude);
    if (kind == FieldKind::affine) return std::numeric_limits<double>::infinity();
    return m;
}

// ---------------------------------------------------------------------------

DriverSpec DriverSpec::zero() { return {}; }

DriverSpec DriverSpec::linear(double g0, double y_coef, Vec z_coef) {
    DriverSpec g;
    g.kind = DriverKind::linear;
    g.g0 = g0;
    g.y_coef = y_coef;
    g.z_coef = std::move(z_coef);
    return g;
}

DriverSpec DriverSpec::sine_lipschitz(double g0, double k_g, double l_g) {
    DriverSpec g;
    g.kind = DriverKind::sine_lipschitz;
    g.g0 = g0;
    g.k_g = k_g;
    g.l_g = l_g;
    return g;
}

double DriverSpec::operator()(double y, const Vec& z) const {
    switch (kind) {
        case DriverKind::zero: return 0.0;
        case DriverKind::linear: {
            double v = g0 + y_coef * y;
            if (z_coef.size() > 0) v += z_coef.dot(z);
            return v;
        }
        case DriverKind::sine_lipschitz: {
            const double proj = z.sum() / std::sqrt(static_cast<double>(z.size()));
            return g0 + k_g * std::sin(y) + l_g * std::sin(proj);
        }
    }
    return 0.0;
}

double DriverSpec::y_lipschitz() const {
    switch (kind) {
        case DriverKind::zero: return 0.0;
        case DriverKind::linear: return std::abs(y_coef);
        case DriverKind::sine_lipschitz: return k_g;
    }
    return 0.0;
}

double DriverSpec::z_lipschitz() const {
    switch (kind) {
        case DriverKind::zero: return 0.0;
        case DriverKind::linear: return z_coef.size() > 0 ? z_coef.norm() : 0.0;
        case DriverKind::sine_lipschitz: return l_g;
    }
    return 0.0;
}

// ---------------------------------------------------------------------------

double TerminalSpec::operator()(const Vec& x) const {
    auto projection = [&] {
        if (weights.size() == 0) return x[0];
        return weights.dot(x);
    };
    double v = 0.0;
    switch (kind) {
        case TerminalKind::constant: v = offset; break;
        case TerminalKind::linear: v = amplitude * projection() + offset; break;
        case TerminalKind::quadratic: v = amplitude * x.squaredNorm() + offset; break;
        case TerminalKind::sine:
            v = amplitude * std::sin(frequency * projection() + phase) + offset;
            break;
        case TerminalKind::cosine:
            v = amplitude * std::cos(frequency * projection() + phase) + offset;
            break;
        case TerminalKind::tanh: v = amplitude * std::tanh(frequency * projection()) + offset; break;
        case TerminalKind::bump: {
            const double r2 = center.size() == 0 ? x.squaredNorm() : (x - center).squaredNorm();
            v = amplitude * std::exp(-r2 / (2.0 * width * width)) + offset;
            break;
        }
    }
    if (cap) v = std::clamp(v, -*cap, *cap);
    return v;
}

double TerminalSpec::sup_norm() const {
    double s = std::numeric_limits<double>::infinity();
    switch (kind) {
        case TerminalKind::constant: s = std::abs(offset); break;
        case TerminalKind::linear:
        case TerminalKind::quadratic:
            if (amplitude == 0.0) s = std::abs(offset);
            break;
        case TerminalKind::sine:
        case TerminalKind::cosine:
        case TerminalKind::tanh: s = std::abs(amplitude) + std::abs(offset); break;
        case TerminalKind::bump: s = std::max(std::abs(offset), std::abs(amplitude + offset)); break;
    }
    if (cap) s = std::min(s, *cap);
    return s;
}

bool TerminalSpec::bounded() const { return std::isfinite(sup_norm()); }

// ---------------------------------------------------------------------------

UncertaintySet UncertaintySet::interval(double lower_variance, double upper_variance) {
    UncertaintySet g;
    g.generators.push_back(Mat::Constant(1, 1, lower_variance));
    if (upper_variance != lower_variance) g.generators.push_back(Mat::Constant(1, 1, upper_variance));
    return g;
}

int UncertaintySet::dim() const {
    return generators.empty() ? 0 : static_cast<int>(generators.front().rows());
}

namespace {

std::pair<double, double> eigen_range(const Mat& m) {
    Eigen::SelfAdjointEigenSolver<Mat> es(m, Eigen::EigenvaluesOnly);
    return {es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff()};
}

}  // namespace

double UncertaintySet::lambda() const {
    double lo = std::numeric_limits<double>::infinity();
    for (const auto& g : generators) lo = std::min(lo, eigen_range(g).first);
    return std::sqrt(lo);
}

double UncertaintySet::Lambda() const {
    double hi = 0.0;
    for (const auto& g : generators) hi = std::max(hi, eigen_range(g).second);
    return std::sqrt(hi);
}

double UncertaintySet::G(const Mat& a) const {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& g : generators) best = std::max(best, 0.5 * (a * g).trace());
    return best;
}

// ---------------------------------------------------------------------------

namespace {

[[noreturn]] void invalid(const std::string& field, const std::string& why) {
    fail(ErrorCode::invalid_spec, field + ": " + why);
}

void check_finite(const Vec& v, const std::string& field) {
    if (!v.allFinite()) invalid(field, "non-finite entry");
}

void validate_field(const CoefficientField& f, int d, const std::string& name, bool diffusion) {
    if (f.offset.size() != d) invalid(name, "expected dimension " + std::to_string(d));
    check_finite(f.offset, name);
    switch (f.kind) {
        case FieldKind::constant: break;
        case FieldKind::affine:
            if (diffusion) invalid(name + ".kind", "affine diffusion cannot be uniformly elliptic");
            if (f.matrix.rows() != d || f.matrix.cols() != d)
                invalid(name + ".matrix", "expected a " + std::to_string(d) + "x" + std::to_string(d) + " matrix");
            if (!f.matrix.allFinite()) invalid(name + ".matrix", "non-finite entry");
            break;
        case FieldKind::sine_perturbed:
            if (f.frequency.size() != d) invalid(name + ".frequency", "expected dimension " + std::to_string(d));
            check_finite(f.frequency, name + ".frequency");
            if (!std::isfinite(f.amplitude) || f.amplitude < 0.0)
                invalid(name + ".amplitude", "must be finite and non-negative");
            break;
    }
}

}  // namespace

void ProblemSpec::validate() const {
    if (d < 1) invalid("d", "dimension must be at least 1");
    if (!(T > 0.0) || !std::isfinite(T)) invalid("T", "horizon must be positive and finite");
    validate_field(sigma, d, "sigma", true);
    validate_field(b, d, "b", false);
    if (!(sigma.lower_bound() > 0.0)) invalid("sigma", "ellipticity requires base - amplitude > 0");

    if (driver.kind == DriverKind::linear && driver.z_coef.size() != 0 && driver.z_coef.size() != d)
        invalid("driver.z_coef", "expected dimension " + std::to_string(d));
    if (driver.kind == DriverKind::sine_lipschitz && (driver.k_g < 0.0 || driver.l_g < 0.0))
        invalid("driver", "K_g and L_g must be non-negative");
    if (!std::isfinite(driver.g0)) invalid("driver.g0", "non-finite");

    if (terminal.weights.size() != 0 && terminal.weights.size() != d)
        invalid("terminal.weights", "expected dimension " + std::to_string(d));
    if (terminal.center.size() != 0 && terminal.center.size() != d)
        invalid("terminal.center", "expected dimension " + std::to_string(d));
    if (terminal.kind == TerminalKind::bump && !(terminal.width > 0.0))
        invalid("terminal.width", "must be positive");
    if (terminal.cap && !(*terminal.cap > 0.0)) invalid("terminal.cap", "must be positive");

    if (gamma) {
        if (gamma->generators.empty()) invalid("gamma", "needs at least one generator");
        for (std::size_t i = 0; i < gamma->generators.size(); ++i) {
            const Mat& g = gamma->generators[i];
            const std::string name = "gamma.matrices[" + std::to_string(i) + "]";
            if (g.rows() != d || g.cols() != d) invalid(name, "expected a " + std::to_string(d) + "x" + std::to_string(d) + " matrix");
            if (!g.allFinite()) invalid(name, "non-finite entry");
            if ((g - g.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + g.cwiseAbs().maxCoeff()))
                invalid(name, "must be symmetric");
            if (!(eigen_range(g).first > 0.0)) invalid(name, "must be positive definite");
        }
    }
}

HypothesisConstants hypothesis_constants(const ProblemSpec& spec) {
    spec.validate();
    HypothesisConstants h;
    h.lambda_sigma = spec.sigma.lower_bound();
    h.Lambda_sigma = spec.sigma.upper_bound();
    h.L_sigma = spec.sigma.lipschitz();
    h.L_b = spec.b.lipschitz();
    h.K_g = spec.driver.y_lipschitz();
    h.L_g = spec.driver.z_lipschitz();
    h.g0 = spec.driver.value_at_origin();
    h.phi_sup = spec.terminal.sup_norm();
    if (spec.gamma) {
        h.lambda_gamma = spec.gamma->lambda();
        h.Lambda_gamma = spec.gamma->Lambda();
    }
    return h;
}

// ---------------------------------------------------------------------------

namespace {

const double* find_key(const std::map<double, double>& m, double p) {
    for (const auto& [k, v] : m)
        if (std::abs(k - p) <= 1e-12 * std::max(1.0, std::abs(p))) return &v;
    return nullptr;
}

}  // namespace

double ConstantConfig::bdg_constant(double p) const {
    if (const double* v = find_key(bdg, p)) return *v;
    std::ostringstream os;
    os << "constants.bdg: no BDG constant configured for p = " << p;
    fail(ErrorCode::config, os.str());
}

double ConstantConfig::bsde_constant(double p) const {
    if (const double* v = find_key(d_overrides, p)) return *v;
    return std::pow(d_base, p);
}

DerivedConstants derive_constants(const ProblemSpec& spec, Mode mode, const ConstantConfig& config) {
    DerivedConstants c;
    c.mode = mode;
    c.config = config;
    c.hyp = hypothesis_constants(spec);
    const auto& h = c.hyp;

    if (mode == Mode::g_mode && !spec.gamma)
        fail(ErrorCode::invalid_spec, "gamma: g-mode constants need an uncertainty set");
    if (!(h.lambda_sigma > 0.0) || h.Lambda_sigma < h.lambda_sigma)
        fail(ErrorCode::invalid_spec, "sigma: ellipticity bounds must satisfy 0 < lambda <= Lambda");
    if (!(config.alpha >= 2.0)) fail(ErrorCode::config, "constants.alpha: must be >= 2");

    const double lam = h.lambda_sigma, Lam = h.Lambda_sigma;
    c.alpha = config.alpha;
    c.beta_sigma = Lam / lam;
    const double binding = lam * lam / Lam;  // λ_σ²Λ_σ⁻¹

    // C_α with α* the conjugate exponent.
    const double a = c.alpha;
    const double a_star = a / (a - 1.0);
    c.bdg_used = config.bdg_constant(a / 2.0);
    c.C_alpha = std::pow(c.bdg_used, 2.0 / a) * std::pow(1.0 / a, 1.0 / a) *
                std::pow(1.0 / a_star, 1.0 / a_star);

    const double b3 = std::pow(c.beta_sigma, 3);
    c.p_beta = 32.0 * (b3 + 0.25) * (b3 + 0.25);
    c.d_p_beta = config.bsde_constant(c.p_beta);
    c.C_beta = c.d_p_beta / std::sqrt(2.0) + 1.0;
    c.mu = h.K_g + 4.0 * h.L_g * h.L_g;
    c.L_corollary = 2.0 * h.L_b + 4.0 * h.L_sigma * h.L_sigma;

    const double ratio = Lam * Lam / (lam * lam * lam);
    c.C_corollary = 4.0 * c.C_alpha * c.C_beta * ratio;

    if (mode == Mode::classical) {
        c.theta = binding / 2.0;
        c.L = 2.0 * (h.L_g * h.L_sigma + h.L_b + 0.5 * (a - 1.0) * h.L_sigma * h.L_sigma);
        c.delta = c.theta * c.theta /
                  (4.0 * Lam * Lam * c.beta_sigma * c.beta_sigma + 4.0 * c.theta * Lam * c.beta_sigma);
        if (h.L_g > 0.0) {
            c.C_g = 1.0 + h.K_g / (h.L_g * h.L_g);
        } else if (h.K_g > 0.0) {
            fail(ErrorCode::invalid_spec,
                 "driver: L_g = 0 with K_g > 0 leaves C_g = 1 + K_g/L_g^2 undefined");
        } else {
            c.C_g = 1.0;  // g independent of (y, z): the corollary limit
        }
        c.C_main1 = c.C_corollary * *c.C_g;
    } else {
        c.beta_gamma = h.Lambda_gamma / h.lambda_gamma;
        c.theta = config.theta.value_or(binding / 2.0);
        if (c.theta < binding / 2.0 - 1e-15 || c.theta >= binding)
            fail(ErrorCode::config, "constants.theta: g-mode level must lie in [lambda^2/(2 Lambda), lambda^2/Lambda)");
        c.L = 2.0 * h.L_b + h.Lambda_gamma * h.Lambda_gamma * h.L_sigma * h.L_sigma;
        const double bb = c.beta_sigma * c.beta_gamma;
        c.delta = c.theta * c.theta / (4.0 * Lam * Lam * bb * bb + 4.0 * c.theta * Lam * bb);
        c.C_main2 = 2.0 * Lam * Lam / (lam * lam * lam * h.lambda_gamma);
    }
    return c;
}

// ---------------------------------------------------------------------------

double decay_window(double rate, double s) {
    if (rate == 0.0) return s;
    return -std::expm1(-rate * s) / rate;
}

CouplingSchedule CouplingSchedule::classical(double alpha, double theta, double rate, double T) {
    if (!(alpha >= 2.0)) fail(ErrorCode::domain, "schedule: alpha must be >= 2");
    if (!(theta > 0.0) || rate < 0.0 || !(T > 0.0)) fail(ErrorCode::domain, "schedule: need theta > 0, L >= 0, T > 0");
    CouplingSchedule s;
    s.mode_ = Mode::classical;
    s.alpha_ = alpha;
    s.theta_ = theta;
    s.level_ = alpha / (alpha - 1.0) * theta;
    s.rate_ = rate;
    s.horizon_ = T;
    return s;
}

CouplingSchedule CouplingSchedule::g_mode(double lambda_sigma, double Lambda_sigma, double theta,
                                          double rate, double T) {
    const double binding = lambda_sigma * lambda_sigma / Lambda_sigma;
    if (!(theta > 0.0) || theta >= binding) fail(ErrorCode::domain, "schedule: theta must lie below lambda^2/Lambda");
    if (rate < 0.0 || !(T > 0.0)) fail(ErrorCode::domain, "schedule: need L >= 0, T > 0");
    CouplingSchedule s;
    s.mode_ = Mode::g_mode;
    s.theta_ = theta;
    s.level_ = 2.0 * (binding - theta);
    s.rate_ = rate;
    s.horizon_ = T;
    return s;
}

CouplingSchedule CouplingSchedule::from_constants(const DerivedConstants& c, double T) {
    if (c.mode == Mode::classical) return classical(c.alpha, c.theta, c.L, T);
    return g_mode(c.hyp.lambda_sigma, c.hyp.Lambda_sigma, c.theta, c.L, T);
}

CouplingSchedule::Point CouplingSchedule::eval(double t) const {
    if (!(t >= 0.0 && t <= horizon_)) {
        std::ostringstream os;
        os << "schedule: t = " << t << " outside [0, " << horizon_ << "]";
        fail(ErrorCode::domain, os.str());
    }
    const double rest = horizon_ - t;
    return {level_ * decay_window(rate_, rest), -level_ * std::exp(-rate_ * rest)};
}

double CouplingSchedule::unit(double t) const { return eval(t).value / level_; }

namespace {

// log(e^x − 1) for x > 0 without overflow.
double log_expm1(double x) {
    if (x > 30.0) return x + std::log1p(-std::exp(-x));
    return std::log(std::expm1(x));
}

}  // namespace

double CouplingSchedule::reciprocal_integral(double a, double b) const {
    if (!(a >= 0.0 && a <= b && b < horizon_))
        fail(ErrorCode::domain, "schedule: reciprocal integral needs 0 <= a <= b < T");
    if (a == b) return 0.0;
    const double ua = horizon_ - a, ub = horizon_ - b;
    if (rate_ == 0.0) return std::log(ua / ub) / level_;
    return (log_expm1(rate_ * ua) - log_expm1(rate_ * ub)) / level_;
}

InequalityReport check_schedule_inequality(const CouplingSchedule& s, const DerivedConstants& consts,
                                           const std::vector<double>& p_grid,
                                           const std::vector<double>& t_grid, double tolerance) {
    const auto& h = consts.hyp;
    const double binding = h.lambda_sigma * h.lambda_sigma / h.Lambda_sigma;
    InequalityReport rep;
    rep.theta = s.theta();
    rep.tolerance = tolerance;
    rep.max_excess = -std::numeric_limits<double>::infinity();
    for (double p : p_grid) {
        double lgp = 0.0;
        if (s.mode() == Mode::classical) {
            if (p < 1.0 || p > s.alpha() / 2.0 + 1e-12)
                fail(ErrorCode::domain, "schedule check: p must lie in [1, alpha/2]");
            lgp = h.L_g * h.L_sigma + h.L_b + (p - 0.5) * h.L_sigma * h.L_sigma;
        } else {
            if (p != 1.0) fail(ErrorCode::domain, "schedule check: g-mode inequality is stated for p = 1");
            lgp = s.rate() / 2.0;
        }
        const double a = (2.0 * p - 1.0) / p;
        const double w = (2.0 * p - 1.0) / (2.0 * p);
        for (double t : t_grid) {
            const auto pt = s.eval(t);
            const double lhs = a * lgp * pt.value - binding - w * pt.derivative;
            const double excess = lhs + s.theta();
            rep.rows.push_back({p, t, lhs, excess});
            rep.max_excess = std::max(rep.max_excess, excess);
        }
    }
    rep.pass = rep.max_excess <= tolerance;
    return rep;
}

BoundFunction theorem_bound(const DerivedConstants& consts, const ProblemSpec& spec, BoundKind which) {
    const auto& h = consts.hyp;
    const double T = spec.T;
    BoundFunction f;
    f.kind = which;
    switch (which) {
        case BoundKind::main1: {
            if (consts.mode != Mode::classical) fail(ErrorCode::domain, "main1 bound needs classical constants");
            f.C = consts.C_main1;
            f.rate = consts.L;
            double forcing = 0.0;
            if (h.g0 != 0.0)
                forcing = consts.mu > 0.0 ? std::abs(h.g0) / consts.mu : std::numeric_limits<double>::infinity();
            f.slope = f.C * (h.phi_sup + forcing) * std::exp(consts.mu * T) /
                      std::sqrt(decay_window(f.rate, T));
            break;
        }
        case BoundKind::corollary:
            f.C = consts.C_corollary;
            f.rate = consts.L_corollary;
            f.slope = f.C * h.phi_sup / std::sqrt(decay_window(f.rate, T));
            break;
        case BoundKind::main2:
            if (consts.mode != Mode::g_mode) fail(ErrorCode::domain, "main2 bound needs g-mode constants");
            f.C = consts.C_main2;
            f.rate = consts.L;
            f.slope = f.C * h.phi_sup / std::sqrt(decay_window(f.rate, T));
            break;
    }
    return f;
}

}  // namespace couplex
