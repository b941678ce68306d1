#pragma once

#include <string_view>
#include <vector>

#include "couplex/model.hpp"

namespace couplex {

/// Built-in problems. Every hypothesis constant of these is exact.
const std::vector<ProblemSpec>& builtin_specs();

/// Throws Error(invalid_spec) for an unknown id.
const ProblemSpec& builtin_spec(std::string_view id);

}  // namespace couplex
