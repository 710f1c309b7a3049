#pragma once

#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include "stefanlab/geometry.hpp"

namespace stefanlab {

/// Grid-sampled temperature u and enthalpy w over stored time steps,
/// step-major. Immutable after the solver fills it.
struct SpaceTimeField {
    std::shared_ptr<const DomainGrid> grid;
    std::vector<double> times; // increasing, times[0] is the initial slice
    std::vector<double> u;     // [step * n_active + cell]
    std::vector<double> w;

    int n_steps() const { return static_cast<int>(times.size()); }
    int n_cells() const { return grid->n_active(); }

    double at_u(int step, int cell) const {
        return u[static_cast<std::size_t>(step) * n_cells() + cell];
    }
    double at_w(int step, int cell) const {
        return w[static_cast<std::size_t>(step) * n_cells() + cell];
    }
    std::span<const double> step_u(int step) const {
        return {u.data() + static_cast<std::size_t>(step) * n_cells(),
                static_cast<std::size_t>(n_cells())};
    }
    std::span<const double> step_w(int step) const {
        return {w.data() + static_cast<std::size_t>(step) * n_cells(),
                static_cast<std::size_t>(n_cells())};
    }

    /// Plain max/min over all stored samples.
    double max_u() const {
        double m = -1e300;
        for (double v : u) m = std::max(m, v);
        return m;
    }
    double min_u() const {
        double m = 1e300;
        for (double v : u) m = std::min(m, v);
        return m;
    }
    double global_osc() const { return u.empty() ? 0.0 : max_u() - min_u(); }
};

/// Sum of enthalpy times cell volume at one stored step.
inline double total_enthalpy(const SpaceTimeField& f, int step) {
    if (step < 0 || step >= f.n_steps()) throw std::out_of_range("total_enthalpy: step");
    double s = 0.0;
    for (int c = 0; c < f.n_cells(); ++c) s += f.at_w(step, c);
    return s * f.grid->cell_volume();
}

} // namespace stefanlab
