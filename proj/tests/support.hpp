#pragma once

// Shared fixtures for the test suite: small canonical problems built on the
// library's public surface only.

#include <cmath>
#include <memory>

#include "stefanlab/enthalpy.hpp"
#include "stefanlab/geometry.hpp"
#include "stefanlab/solver.hpp"
#include "stefanlab/stefan_reference.hpp"

namespace testsupport {

using namespace stefanlab;

inline std::shared_ptr<const DomainGrid> shared_grid(ShapeKind kind, double h) {
    return std::make_shared<DomainGrid>(build_domain({kind}, h));
}

/// One-phase melting benchmark on [0,1] (interval grid): hot wall on the
/// left, solid branch value on the right and as initial state. For runs on
/// the unit interval the front must stay well inside, so keep t_final small
/// or the Stefan number moderate.
struct OnePhaseBench {
    ProblemSetup setup;
    StefanSimilarity reference;
    double u_wall;
    double u_solid; // preimage of -nu under the regularized enthalpy
};

inline OnePhaseBench one_phase_bench(double h, double dt, double t_final, double eps,
                                     double nu = 1.0, double u_wall = 1.0, int stride = 1) {
    OnePhaseBench b{ProblemSetup{shared_grid(ShapeKind::interval, h),
                                 FluxModel(2.0),
                                 BoundaryData{},
                                 RegularizedEnthalpy(EnthalpyGraph(nu), eps)},
                    StefanSimilarity::make(u_wall / nu),
                    u_wall,
                    0.0};
    b.u_solid = beta_eps_invert(b.setup.enth, -nu, 1e-14);
    const double us = b.u_solid;
    b.setup.bc.kind = BcKind::dirichlet;
    b.setup.bc.g = [u_wall, us](double x, double, double) { return x < 0.5 ? u_wall : us; };
    b.setup.bc.u0 = [us](double, double) { return us; };
    b.setup.cfg.dt = dt;
    b.setup.cfg.newton_tol = 1e-9;
    b.setup.cfg.store_stride = stride;
    b.setup.t_final = t_final;
    return b;
}

/// Two-phase Dirichlet run on the unit square or L-shape: a linear profile
/// crossing zero plus an interior bump, so the field genuinely evolves and
/// the transition zone is active.
inline ProblemSetup two_phase_2d(ShapeKind kind, double h, double dt, double t_final, double eps,
                                 double offset = 0.65, int stride = 1) {
    ProblemSetup ps{shared_grid(kind, h), FluxModel(2.0), BoundaryData{},
                    RegularizedEnthalpy(EnthalpyGraph(1.0), eps)};
    ps.bc.kind = BcKind::dirichlet;
    ps.bc.g = [offset](double x, double y, double) { return x + y - offset; };
    ps.bc.u0 = [offset](double x, double y) {
        return x + y - offset + 0.3 * std::sin(M_PI * x) * std::sin(M_PI * y);
    };
    ps.bc.g_modulus = {ModulusDecl::Kind::lipschitz, 2.0, 1.0};
    ps.bc.u0_modulus = {ModulusDecl::Kind::lipschitz, 2.0 + M_PI * 0.3, 1.0};
    ps.cfg.dt = dt;
    ps.cfg.newton_tol = 1e-10;
    ps.cfg.store_stride = stride;
    ps.t_final = t_final;
    return ps;
}

} // namespace testsupport
