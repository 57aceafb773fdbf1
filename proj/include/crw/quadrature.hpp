#pragma once

#include <cstddef>
#include <memory>
#include <vector>

namespace crw {

/// Gauss-Legendre rule on the unit interval. Each node is kept both as
/// its distance from 0 (`lower`) and from 1 (`upper`) so that integrands
/// evaluated through inverse CDFs keep full precision in either tail.
struct UnitRule {
    std::vector<double> lower;
    std::vector<double> upper;
    std::vector<double> weight;

    std::size_t size() const { return weight.size(); }
};

/// n-point Gauss-Legendre rule on [0, 1]; weights sum to 1. Rules are
/// computed once per n and cached (thread-safe).
std::shared_ptr<const UnitRule> gauss_legendre_unit(std::size_t n);

} // namespace crw
