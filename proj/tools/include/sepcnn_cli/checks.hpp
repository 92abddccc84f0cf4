#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "sepcnn/gradcheck.hpp"

namespace sepcnn::cli {

/// "full" is the 12x12x1 toy model (ladder 4, r=2, 3 classes); the others
/// check one layer in isolation.
const std::vector<std::string>& gradcheck_scopes();

struct ScopedCheck {
  std::string scope;
  double tolerance = 0.0;
  GradCheckReport report;
};

/// Builds the scope's subject from seed, draws every bias from U(0.05, 0.3)
/// so ReLU paths are open, and runs the 64-bit finite-difference check.
/// Throws BadConfig for an unknown scope.
ScopedCheck run_gradcheck(std::string_view scope, std::uint64_t seed, bool flip_sign = false);

}  // namespace sepcnn::cli
