#include "couplex/io.hpp"

#include <charconv>
#include <cmath>

#include "couplex/catalogue.hpp"
#include "json_util.hpp"

namespace couplex {

namespace detail {

namespace {

CoefficientField parse_field(const Node& n) {
    const std::string kind = n.child("kind").text();
    CoefficientField f;
    if (kind == "constant") {
        n.only({"kind", "value"});
        f = CoefficientField::constant(n.child("value").vec());
    } else if (kind == "affine") {
        n.only({"kind", "matrix", "offset"});
        const Mat a = n.child("matrix").mat();
        Vec c = n.has("offset") ? n.child("offset").vec() : Vec::Zero(a.rows());
        f = CoefficientField::affine(a, c);
    } else if (kind == "sine-perturbed") {
        n.only({"kind", "base", "amplitude", "frequency"});
        f = CoefficientField::sine_perturbed(n.child("base").vec(), n.child("amplitude").number(),
                                             n.child("frequency").vec());
    } else {
        fail(ErrorCode::config, n.path() + ".kind: expected constant, affine or sine-perturbed");
    }
    return f;
}

json field_json(const CoefficientField& f) {
    json j;
    j["kind"] = to_string(f.kind);
    switch (f.kind) {
        case FieldKind::constant: j["value"] = to_json(f.offset); break;
        case FieldKind::affine:
            j["matrix"] = to_json(f.matrix);
            j["offset"] = to_json(f.offset);
            break;
        case FieldKind::sine_perturbed:
            j["base"] = to_json(f.offset);
            j["amplitude"] = f.amplitude;
            j["frequency"] = to_json(f.frequency);
            break;
    }
    return j;
}

TerminalKind terminal_kind(const Node& n) {
    const std::string k = n.text();
    for (auto kind : {TerminalKind::constant, TerminalKind::linear, TerminalKind::quadratic, TerminalKind::sine,
                      TerminalKind::cosine, TerminalKind::tanh, TerminalKind::bump})
        if (k == to_string(kind)) return kind;
    fail(ErrorCode::config, n.path() + ": unknown terminal kind '" + k + "'");
}

}  // namespace

json to_json(const Vec& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(num(v[i]));
    return a;
}

json to_json(const Mat& m) {
    json a = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(to_json(Vec(m.row(i).transpose())));
    return a;
}

TerminalSpec parse_terminal(const Node& n) {
    n.only({"kind", "amplitude", "frequency", "phase", "offset", "weights", "center", "width", "cap"});
    TerminalSpec t;
    t.kind = terminal_kind(n.child("kind"));
    t.amplitude = n.number("amplitude", t.amplitude);
    t.frequency = n.number("frequency", t.frequency);
    t.phase = n.number("phase", t.phase);
    t.offset = n.number("offset", t.offset);
    t.width = n.number("width", t.width);
    if (n.has("weights")) t.weights = n.child("weights").vec();
    if (n.has("center")) t.center = n.child("center").vec();
    if (n.has("cap")) t.cap = n.child("cap").number();
    return t;
}

json terminal_json(const TerminalSpec& t) {
    json j{{"kind", to_string(t.kind)}, {"amplitude", t.amplitude}, {"frequency", t.frequency},
           {"phase", t.phase},          {"offset", t.offset},       {"width", t.width}};
    if (t.weights.size()) j["weights"] = to_json(t.weights);
    if (t.center.size()) j["center"] = to_json(t.center);
    if (t.cap) j["cap"] = *t.cap;
    return j;
}

ProblemSpec parse_spec(const Node& n) {
    n.only({"id", "d", "T", "sigma", "b", "driver", "terminal", "gamma"});
    ProblemSpec s;
    s.id = n.has("id") ? n.child("id").text() : "custom";
    s.d = static_cast<int>(n.child("d").count());
    if (s.d < 1) fail(ErrorCode::config, n.child("d").path() + ": must be at least 1");
    s.T = n.child("T").number();
    s.sigma = parse_field(n.child("sigma"));
    s.b = parse_field(n.child("b"));
    if (n.has("driver")) {
        const Node dn = n.child("driver");
        dn.only({"kind", "g0", "y_coef", "z_coef", "k_g", "l_g"});
        const std::string kind = dn.child("kind").text();
        if (kind == "zero") {
            s.driver = DriverSpec::zero();
        } else if (kind == "linear") {
            s.driver = DriverSpec::linear(dn.number("g0", 0.0), dn.number("y_coef", 0.0),
                                          dn.has("z_coef") ? dn.child("z_coef").vec() : Vec::Zero(s.d));
        } else if (kind == "sine-lipschitz") {
            s.driver = DriverSpec::sine_lipschitz(dn.number("g0", 0.0), dn.child("k_g").number(), dn.child("l_g").number());
        } else {
            fail(ErrorCode::config, dn.path() + ".kind: expected zero, linear or sine-lipschitz");
        }
    }
    s.terminal = parse_terminal(n.child("terminal"));
    if (n.has("gamma")) {
        const Node g = n.child("gamma");
        g.only({"interval", "matrices"});
        if (g.has("interval")) {
            const Vec iv = g.child("interval").vec();
            if (iv.size() != 2) fail(ErrorCode::config, g.path() + ".interval: expected [lower, upper]");
            if (s.d != 1) fail(ErrorCode::config, g.path() + ".interval: only for d = 1");
            s.gamma = UncertaintySet::interval(iv[0], iv[1]);
        } else {
            const Node ms = g.child("matrices");
            UncertaintySet u;
            for (std::size_t i = 0; i < ms.size(); ++i) u.generators.push_back(ms.item(i).mat());
            s.gamma = std::move(u);
        }
    }
    try {
        s.validate();
    } catch (const Error& e) {
        const std::string prefix = n.path().empty() ? "" : n.path() + ".";
        throw Error(e.code(), prefix + e.what());
    }
    return s;
}

json spec_json(const ProblemSpec& s) {
    json j{{"id", s.id}, {"d", s.d}, {"T", s.T}, {"sigma", field_json(s.sigma)}, {"b", field_json(s.b)}};
    json dj{{"kind", to_string(s.driver.kind)}};
    switch (s.driver.kind) {
        case DriverKind::zero: break;
        case DriverKind::linear:
            dj["g0"] = s.driver.g0;
            dj["y_coef"] = s.driver.y_coef;
            dj["z_coef"] = to_json(s.driver.z_coef);
            break;
        case DriverKind::sine_lipschitz:
            dj["g0"] = s.driver.g0;
            dj["k_g"] = s.driver.k_g;
            dj["l_g"] = s.driver.l_g;
            break;
    }
    j["driver"] = dj;
    j["terminal"] = terminal_json(s.terminal);
    if (s.gamma) {
        json ms = json::array();
        for (const auto& g : s.gamma->generators) ms.push_back(to_json(g));
        j["gamma"] = {{"matrices", ms}};
    }
    return j;
}

json hypothesis_json(const HypothesisConstants& h) {
    return {{"lambda_sigma", num(h.lambda_sigma)}, {"Lambda_sigma", num(h.Lambda_sigma)}, {"L_sigma", num(h.L_sigma)},
            {"L_b", num(h.L_b)},                   {"K_g", num(h.K_g)},                   {"L_g", num(h.L_g)},
            {"g0", num(h.g0)},                     {"phi_sup", num(h.phi_sup)},           {"lambda_gamma", num(h.lambda_gamma)},
            {"Lambda_gamma", num(h.Lambda_gamma)}};
}

namespace {

json key_map(const std::map<double, double>& m) {
    json j = json::object();
    for (const auto& [k, v] : m) j[format_double(k)] = num(v);
    return j;
}

std::map<double, double> parse_key_map(const Node& n) {
    if (!n.raw().is_object()) fail(ErrorCode::config, n.path() + ": expected an object {\"p\": value}");
    std::map<double, double> m;
    for (const auto& [k, v] : n.raw().items()) {
        double p = 0.0;
        const auto r = std::from_chars(k.data(), k.data() + k.size(), p);
        if (r.ec != std::errc() || r.ptr != k.data() + k.size())
            fail(ErrorCode::config, n.path() + "." + k + ": key must be a number");
        m[p] = Node(v, n.path() + "." + k).number();
    }
    return m;
}

}  // namespace

json constants_json(const DerivedConstants& c) {
    json cfg{{"alpha", c.config.alpha}, {"bdg", key_map(c.config.bdg)}, {"d_base", c.config.d_base},
             {"d_overrides", key_map(c.config.d_overrides)}};
    if (c.config.theta) cfg["theta"] = *c.config.theta;
    json j{{"mode", to_string(c.mode)},
           {"hypothesis", hypothesis_json(c.hyp)},
           {"alpha", num(c.alpha)},
           {"beta_sigma", num(c.beta_sigma)},
           {"beta_gamma", num(c.beta_gamma)},
           {"theta", num(c.theta)},
           {"L", num(c.L)},
           {"L_corollary", num(c.L_corollary)},
           {"mu", num(c.mu)},
           {"delta", num(c.delta)},
           {"C_alpha", num(c.C_alpha)},
           {"p_beta", num(c.p_beta)},
           {"d_p_beta", num(c.d_p_beta)},
           {"C_beta", num(c.C_beta)},
           {"C_g", c.C_g ? num(*c.C_g) : json(nullptr)},
           {"C_main1", num(c.C_main1)},
           {"C_corollary", num(c.C_corollary)},
           {"C_main2", num(c.C_main2)},
           {"bdg_used", num(c.bdg_used)},
           {"config", cfg}};
    return j;
}

ConstantConfig parse_constant_config(const Node& n) {
    n.only({"alpha", "bdg", "d_base", "d_overrides", "theta"});
    ConstantConfig c;
    c.alpha = n.number("alpha", c.alpha);
    if (n.has("bdg")) c.bdg = parse_key_map(n.child("bdg"));
    c.d_base = n.number("d_base", c.d_base);
    if (n.has("d_overrides")) c.d_overrides = parse_key_map(n.child("d_overrides"));
    if (n.has("theta")) c.theta = n.child("theta").number();
    return c;
}

}  // namespace detail

ProblemSpec spec_from_json(std::string_view text) {
    detail::json j;
    try {
        j = detail::json::parse(text);
    } catch (const detail::json::parse_error& e) {
        fail(ErrorCode::config, std::string("spec: malformed JSON: ") + e.what());
    }
    return detail::parse_spec(detail::Node(j, ""));
}

std::string spec_to_json(const ProblemSpec& spec) { return detail::spec_json(spec).dump(2); }

std::string constants_to_json(const DerivedConstants& constants) {
    return detail::constants_json(constants).dump(2);
}

std::string catalogue_json() {
    detail::json list = detail::json::array();
    for (const auto& s : builtin_specs()) {
        const Mode mode = s.g_mode() ? Mode::g_mode : Mode::classical;
        list.push_back({{"id", s.id},
                        {"d", s.d},
                        {"mode", to_string(mode)},
                        {"spec", detail::spec_json(s)},
                        {"constants", detail::constants_json(derive_constants(s, mode))}});
    }
    return list.dump(2);
}

std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
}

std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

}  // namespace couplex
