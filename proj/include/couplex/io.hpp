#pragma once

#include <string>
#include <string_view>

#include "couplex/model.hpp"

namespace couplex {

/// Problem JSON:
///   {"id", "d", "T",
///    "sigma"/"b": {"kind": "constant", "value": [...]}
///               | {"kind": "affine", "matrix": [[...]], "offset": [...]}
///               | {"kind": "sine-perturbed", "base": [...], "amplitude", "frequency": [...]},
///    "driver": {"kind": "zero" | "linear" | "sine-lipschitz", "g0", "y_coef", "z_coef", "k_g", "l_g"},
///    "terminal": {"kind", "amplitude", "frequency", "phase", "offset", "weights", "center", "width", "cap"},
///    "gamma": {"interval": [lo, hi]} | {"matrices": [[[...]], ...]}}
/// Errors name the offending field path.
ProblemSpec spec_from_json(std::string_view text);
std::string spec_to_json(const ProblemSpec& spec);

std::string constants_to_json(const DerivedConstants& constants);

/// Every built-in spec with its hypothesis and derived constants (G-mode
/// constants for specs carrying Γ).
std::string catalogue_json();

/// Shortest round-trip decimal form, '.' separator, "inf"/"-inf"/"nan"
/// for non-finite values.
std::string format_double(double x);

/// One RFC-4180 field: quoted when it contains a comma, quote or newline.
std::string csv_field(std::string_view s);

}  // namespace couplex
