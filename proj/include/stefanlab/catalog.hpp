#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

#include "stefanlab/solver.hpp"

namespace stefanlab {

/// Named analytic data functions with declared moduli of continuity, so that
/// admissibility checks can be run against what a config promises. Arbitrary
/// user expressions are deliberately not supported.
///
/// Entries:
///   constant:  value
///   linear:    a + bx*x + by*y
///   tanh_ramp: scale * tanh((x + y - offset) / width)
///   linear_sine_bump: a + bx*x + by*y + amp * sin(pi x) sin(pi y)
///   log_cusp:  base + amp * (ln(4 / max(|x-x0|+|y-y0|, floor)))^(-lambda)
struct CatalogEntry {
    std::string name = "constant";
    double value = 0.0;
    double a = 0.0, bx = 0.0, by = 0.0;
    double scale = 1.0, offset = 0.0, width = 1.0;
    double base = 0.0, amp = 1.0, lambda = 1.0, x0 = 0.0, y0 = 0.0;
};

inline double catalog_eval(const CatalogEntry& e, double x, double y) {
    if (e.name == "constant") return e.value;
    if (e.name == "linear") return e.a + e.bx * x + e.by * y;
    if (e.name == "tanh_ramp") return e.scale * std::tanh((x + y - e.offset) / e.width);
    if (e.name == "linear_sine_bump")
        return e.a + e.bx * x + e.by * y + e.amp * std::sin(M_PI * x) * std::sin(M_PI * y);
    if (e.name == "log_cusp") {
        const double r = std::max(std::abs(x - e.x0) + std::abs(y - e.y0), 1e-12);
        return e.base + e.amp * std::pow(std::log(4.0 / std::min(r, 3.999)), -e.lambda);
    }
    throw std::invalid_argument("catalog_eval: unknown entry '" + e.name + "'");
}

/// Declared modulus for each catalog family.
inline ModulusDecl catalog_modulus(const CatalogEntry& e) {
    if (e.name == "constant") return {ModulusDecl::Kind::zero, 0.0, 1.0};
    if (e.name == "linear")
        return {ModulusDecl::Kind::lipschitz, std::abs(e.bx) + std::abs(e.by), 1.0};
    if (e.name == "tanh_ramp")
        return {ModulusDecl::Kind::lipschitz, 2.0 * std::abs(e.scale) / e.width, 1.0};
    if (e.name == "linear_sine_bump")
        return {ModulusDecl::Kind::lipschitz,
                std::abs(e.bx) + std::abs(e.by) + M_PI * std::abs(e.amp), 1.0};
    if (e.name == "log_cusp") {
        // the cusp inherits the log-type modulus of its own profile; the
        // constant absorbs the slope of t -> t^(-lambda) on the relevant range
        return {ModulusDecl::Kind::log_type, 4.0 * std::abs(e.amp) * std::max(1.0, e.lambda),
                e.lambda};
    }
    throw std::invalid_argument("catalog_modulus: unknown entry '" + e.name + "'");
}

struct ModulusCheckReport {
    bool ok = true;
    double worst_ratio = 0.0; // observed increment / declared bound
};

/// Samples random pairs and verifies the declared modulus against observed
/// increments; the parabolic distance |x1-x2| + |t1-t2|^(1/p) is used when a
/// time axis is supplied.
inline ModulusCheckReport check_declared_modulus(const CatalogEntry& e, const ModulusDecl& decl,
                                                 int n_pairs, std::uint64_t seed,
                                                 double box = 1.0) {
    ModulusCheckReport rep;
    if (decl.kind == ModulusDecl::Kind::none) return rep;
    Rng rng(seed);
    for (int i = 0; i < n_pairs; ++i) {
        const double x1 = rng.uniform(0.0, box), y1 = rng.uniform(0.0, box);
        const double x2 = rng.uniform(0.0, box), y2 = rng.uniform(0.0, box);
        const double dist = std::abs(x1 - x2) + std::abs(y1 - y2);
        if (dist <= 0.0) continue;
        const double inc = std::abs(catalog_eval(e, x1, y1) - catalog_eval(e, x2, y2));
        const double bound = decl.bound(dist);
        if (bound > 0.0) rep.worst_ratio = std::max(rep.worst_ratio, inc / bound);
        if (inc > bound * (1.0 + 1e-9) + 1e-15) rep.ok = false;
    }
    return rep;
}

} // namespace stefanlab
