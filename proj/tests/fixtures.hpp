#pragma once

// Shared densities for solver-level tests.

#include <cmath>
#include <vector>

#include "uomt/grid.hpp"

namespace fixtures {

/// Gaussian bump of unit peak sampled at cell centres, times `mass_scale`.
inline uomt::CellField gaussian(const uomt::GridSpec& g, double cx, double cy, double sigma, double mass_scale = 1.0,
                                std::size_t channels = 1, std::size_t channel = 0) {
    uomt::CellField f(1, g.cells(), channels);
    for (std::size_t j = 0; j < g.ny; ++j)
        for (std::size_t i = 0; i < g.nx; ++i) {
            const double dx = g.cell_x(i) - cx, dy = g.ny > 1 ? g.cell_y(j) - cy : 0.0;
            f(channel, g.cell(i, j), 0) = mass_scale * std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
        }
    return f;
}

/// Rescales f so that its total equals `mass`.
inline uomt::CellField normalized(uomt::CellField f, double mass = 1.0) {
    const double t = uomt::total_mass(f, 0);
    for (auto& v : f.values) v *= mass / t;
    return f;
}

inline uomt::CellField add(uomt::CellField a, const uomt::CellField& b) {
    for (std::size_t n = 0; n < a.values.size(); ++n) a.values[n] += b.values[n];
    return a;
}

/// Channel c of f as a single-channel slice.
inline std::vector<double> plane(const uomt::CellField& f, std::size_t c) {
    return {f.values.begin() + static_cast<long>(c * f.cells), f.values.begin() + static_cast<long>((c + 1) * f.cells)};
}

} // namespace fixtures
