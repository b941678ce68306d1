#include "couplex/catalogue.hpp"

#include <string>

namespace couplex {

namespace {

Vec v1(double a) { return Vec::Constant(1, a); }
Mat m1(double a) { return Mat::Constant(1, 1, a); }

TerminalSpec terminal(TerminalKind kind, double amplitude = 1.0, double frequency = 1.0) {
    TerminalSpec t;
    t.kind = kind;
    t.amplitude = amplitude;
    t.frequency = frequency;
    return t;
}

ProblemSpec sine_1d(std::string id) {
    ProblemSpec s;
    s.id = std::move(id);
    s.d = 1;
    s.sigma = CoefficientField::sine_perturbed(v1(1.0), 0.2, v1(0.5));
    s.b = CoefficientField::affine(m1(-0.2), v1(0.0));
    s.terminal = terminal(TerminalKind::cosine);
    return s;
}

std::vector<ProblemSpec> make_catalogue() {
    std::vector<ProblemSpec> out;

    ProblemSpec bm;
    bm.id = "brownian-1d";
    bm.sigma = CoefficientField::constant(v1(1.0));
    bm.b = CoefficientField::constant(v1(0.0));
    bm.terminal = terminal(TerminalKind::tanh);
    out.push_back(bm);

    out.push_back(sine_1d("sine-1d"));

    ProblemSpec semi = sine_1d("semilinear-1d");
    semi.driver = DriverSpec::sine_lipschitz(0.1, 1.0, 0.5);
    out.push_back(semi);

    ProblemSpec s2;
    s2.id = "sine-2d";
    s2.d = 2;
    s2.sigma = CoefficientField::sine_perturbed(Vec::Constant(2, 1.0), 0.2, Vec::Constant(2, 0.5));
    Mat a(2, 2);
    a << -0.2, 0.1, 0.0, -0.2;
    s2.b = CoefficientField::affine(a, Vec::Zero(2));
    s2.terminal = terminal(TerminalKind::bump);
    out.push_back(s2);

    ProblemSpec gb;
    gb.id = "g-brownian-1d";
    gb.sigma = CoefficientField::constant(v1(1.0));
    gb.b = CoefficientField::constant(v1(0.0));
    gb.terminal = terminal(TerminalKind::quadratic);
    gb.terminal.cap = 4.0;
    gb.gamma = UncertaintySet::interval(1.0, 4.0);
    out.push_back(gb);

    ProblemSpec gs = sine_1d("g-sine-1d");
    gs.gamma = UncertaintySet::interval(1.0, 4.0);
    out.push_back(gs);

    ProblemSpec gd;
    gd.id = "g-drift-1d";
    gd.sigma = CoefficientField::constant(v1(1.0));
    gd.b = CoefficientField::affine(m1(-0.5), v1(0.0));
    gd.terminal = terminal(TerminalKind::tanh);
    gd.gamma = UncertaintySet::interval(1.0, 2.25);
    out.push_back(gd);

    ProblemSpec g2;
    g2.id = "g-diag-2d";
    g2.d = 2;
    g2.sigma = CoefficientField::constant(Vec::Constant(2, 1.0));
    g2.b = CoefficientField::affine(Mat::Identity(2, 2) * -0.2, Vec::Zero(2));
    g2.terminal = terminal(TerminalKind::bump);
    UncertaintySet g;
    for (double a11 : {1.0, 4.0})
        for (double a22 : {1.0, 4.0}) g.generators.push_back(Vec((Vec(2) << a11, a22).finished()).asDiagonal());
    g2.gamma = g;
    out.push_back(g2);

    for (const auto& s : out) s.validate();
    return out;
}

}  // namespace

const std::vector<ProblemSpec>& builtin_specs() {
    static const std::vector<ProblemSpec> catalogue = make_catalogue();
    return catalogue;
}

const ProblemSpec& builtin_spec(std::string_view id) {
    for (const auto& s : builtin_specs())
        if (s.id == id) return s;
    fail(ErrorCode::invalid_spec, "builtin: unknown spec id '" + std::string(id) + "'");
}

}  // namespace couplex
