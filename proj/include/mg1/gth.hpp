#pragma once

#include "mg1/types.hpp"

#include <vector>

namespace mg1 {

/// Stationary row vector of a finite stochastic matrix by
/// Grassmann-Taksar-Heyman elimination. Subtraction-free, so entries
/// keep high relative accuracy even when they span many orders of
/// magnitude. Requires a single closed communicating class; throws a
/// ValidationError listing the classes otherwise.
RowVec gth_stationary(const Matrix& p);

/// Closed communicating classes of the nonzero pattern of p
/// (each returned as a sorted list of state indices).
std::vector<std::vector<int>> closed_classes(const Matrix& p);

/// True when the nonzero pattern of p is irreducible (one class).
bool pattern_irreducible(const Matrix& p);

}  // namespace mg1
