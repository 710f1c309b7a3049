#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "stefanlab/enthalpy.hpp"
#include "stefanlab/field.hpp"
#include "stefanlab/geometry.hpp"

namespace stefanlab {

/// Isotropic model flux A(xi) = (|xi|^2 + delta^2)^((p-2)/2) xi. With zero
/// gradient floor it satisfies A(xi).xi = |xi|^p and |A(xi)| = |xi|^(p-1).
/// A coefficient override may replace the scalar factor, as long as the
/// growth bounds still hold (checked by sampling, see check_structure_bounds).
struct FluxModel {
    double p = 2.0;
    double grad_floor = 0.0; // delta_g
    std::function<double(double)> coeff_override; // |xi|^2 -> scalar coefficient

    explicit FluxModel(double p_exponent = 2.0, double floor_value = 0.0)
        : p(p_exponent), grad_floor(floor_value) {
        if (!(p >= 2.0)) throw std::invalid_argument("FluxModel: p must be >= 2");
        if (floor_value < 0.0) throw std::invalid_argument("FluxModel: gradient floor must be >= 0");
    }

    double coefficient(double grad_sq) const {
        if (coeff_override) return coeff_override(grad_sq);
        if (p == 2.0) return 1.0;
        return std::pow(grad_sq + grad_floor * grad_floor, 0.5 * (p - 2.0));
    }

    /// Antiderivative of s -> coefficient(s^2) * s; the face energy density.
    double energy_density(double slope) const {
        if (coeff_override) {
            // midpoint quadrature fallback for user-supplied coefficients
            const int n = 64;
            double acc = 0.0;
            for (int i = 0; i < n; ++i) {
                const double s = slope * (i + 0.5) / n;
                acc += coefficient(s * s) * s;
            }
            return acc * slope / n;
        }
        const double d2 = grad_floor * grad_floor;
        return (std::pow(slope * slope + d2, 0.5 * p) - std::pow(d2, 0.5 * p)) / p;
    }
};

/// Samples the structure bounds C_o |xi|^p <= A(xi).xi and
/// |A(xi)| <= C_1 |xi|^(p-1). Returns the worst observed constants.
struct StructureBounds {
    double c_o = 0.0;
    double c_1 = 0.0;
    bool ok(double c_o_min, double c_1_max) const { return c_o >= c_o_min && c_1 <= c_1_max; }
};

inline StructureBounds check_structure_bounds(const FluxModel& flux, int n_samples = 1000,
                                              std::uint64_t seed = 2) {
    Rng rng(seed);
    StructureBounds b{1e300, 0.0};
    for (int i = 0; i < n_samples; ++i) {
        const double g = std::pow(10.0, rng.uniform(-3.0, 2.0));
        const double a = flux.coefficient(g * g);
        const double dot = a * g * g;           // A(xi).xi
        const double mag = a * g;               // |A(xi)|
        b.c_o = std::min(b.c_o, dot / std::pow(g, flux.p));
        b.c_1 = std::max(b.c_1, mag / std::pow(g, flux.p - 1.0));
    }
    return b;
}

enum class BcKind { dirichlet, neumann };

/// Declared modulus of continuity for a datum; checked by sampling.
struct ModulusDecl {
    enum class Kind { none, zero, lipschitz, log_type };
    Kind kind = Kind::none;
    double constant = 0.0; // L for lipschitz, C for log_type
    double lambda = 1.0;   // log_type exponent

    double bound(double dist) const {
        switch (kind) {
        case Kind::none: return 1e300;
        case Kind::zero: return 0.0;
        case Kind::lipschitz: return constant * dist;
        case Kind::log_type: {
            if (dist <= 0.0) return 0.0;
            const double l = std::log(4.0 / std::min(dist, 3.999));
            return constant * std::pow(l, -lambda);
        }
        }
        return 1e300;
    }
};

using SpatialFn = std::function<double(double x, double y)>;
using SpaceTimeFn = std::function<double(double x, double y, double t)>;
using FluxDatumFn = std::function<double(double x, double y, double t, double u)>;

/// Lateral and initial data. Dirichlet carries g; Neumann carries the flux
/// datum psi with its declared bound C_2.
struct BoundaryData {
    BcKind kind = BcKind::dirichlet;
    SpaceTimeFn g;       // Dirichlet lateral datum
    FluxDatumFn psi;     // Neumann flux datum
    double c2_bound = 0.0;
    SpatialFn u0;
    ModulusDecl g_modulus;
    ModulusDecl u0_modulus;
};

/// Fixed-step implicit stepping controls; the only scheme is backward Euler.
struct SolverConfig {
    double dt = 1e-3;
    double newton_tol = 1e-10; // max-norm of the per-volume rate residual
    int max_iters = 60;
    int store_stride = 1;

    void validate() const {
        if (!(dt > 0.0)) throw std::invalid_argument("SolverConfig: dt must be positive");
        if (!(newton_tol > 0.0)) throw std::invalid_argument("SolverConfig: tolerance must be positive");
        if (max_iters < 1) throw std::invalid_argument("SolverConfig: max_iters must be >= 1");
        if (store_stride < 1) throw std::invalid_argument("SolverConfig: stride must be >= 1");
    }
};

struct SolverError : std::runtime_error {
    double residual;
    double time;
    SolverError(const std::string& what, double res, double t)
        : std::runtime_error(what), residual(res), time(t) {}
};

/// One full problem: grid, flux, data, regularization and stepping controls.
struct ProblemSetup {
    std::shared_ptr<const DomainGrid> grid;
    FluxModel flux;
    BoundaryData bc;
    RegularizedEnthalpy enth;
    SolverConfig cfg;
    double t_final = 0.0;
};



struct StepStats {
    int iterations = 0;
    double residual = 0.0;
    bool functional_monotone = true;
};

/// Reusable factorization state: the sparsity pattern is fixed by the grid,
/// so one symbolic analysis serves every step of a run.
struct StepWorkspace {
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver;
    bool pattern_ready = false;
};

/// Convex functional whose critical point is the implicit step; used to
/// verify that accepted iterates never increase the step energy.
inline double step_functional(const ProblemSetup& ps, const std::vector<double>& u,
                              const std::vector<double>& w_prev, double t_next) {
    const DomainGrid& g = *ps.grid;
    const auto& fs = g.faces();
    const double h = g.h;
    const double vol = g.cell_volume();
    const double dt = ps.cfg.dt;
    double J = 0.0;
    for (int c = 0; c < g.n_active(); ++c) {
        const double B = 0.5 * u[c] * u[c] + h_eps_antiderivative(ps.enth, u[c]);
        J += vol * (B - w_prev[c] * u[c]) / dt;
    }
    for (const auto& f : fs.interior) {
        const double slope = (u[f.cell_b] - u[f.cell_a]) / h;
        J += vol * ps.flux.energy_density(slope);
    }
    for (const auto& f : fs.boundary) {
        if (ps.bc.kind == BcKind::dirichlet) {
            const double gb = ps.bc.g(f.bx, f.by, t_next);
            const double slope = (gb - u[f.cell_a]) / (0.5 * h);
            J += 0.5 * vol * ps.flux.energy_density(slope);
        } else {
            const double psi = ps.bc.psi ? ps.bc.psi(f.bx, f.by, t_next, u[f.cell_a]) : 0.0;
            J -= vol / h * psi * u[f.cell_a];
        }
    }
    return J;
}

/// Backward-Euler step for the enthalpy balance: finds u with
/// (beta_eps(u) - w_prev)/dt = div_h A(grad_h u) and the declared boundary
/// condition, to newton_tol in the max norm of the per-volume rate residual.
/// The flux coefficient is frozen per sweep (Picard) while beta_eps is
/// handled by Newton; updates are damped on residual increase.
inline std::vector<double> step_implicit(const ProblemSetup& ps, const std::vector<double>& u_prev,
                                         const std::vector<double>& w_prev, double t_next,
                                         StepStats* stats = nullptr,
                                         StepWorkspace* workspace = nullptr) {
    const DomainGrid& g = *ps.grid;
    const auto& fs = g.faces();
    const int n = g.n_active();
    const double h = g.h;
    const double dt = ps.cfg.dt;

    std::vector<double> u = u_prev;

    // residual in per-volume rate form
    auto eval_residual = [&](const std::vector<double>& v, std::vector<double>& r) {
        r.assign(n, 0.0);
        for (int c = 0; c < n; ++c) r[c] = (beta_eps_eval(ps.enth, v[c]) - w_prev[c]) / dt;
        for (const auto& f : fs.interior) {
            const double slope = (v[f.cell_b] - v[f.cell_a]) / h;
            const double q = ps.flux.coefficient(slope * slope) * slope / h;
            r[f.cell_a] -= q;
            r[f.cell_b] += q;
        }
        for (const auto& f : fs.boundary) {
            if (ps.bc.kind == BcKind::dirichlet) {
                const double gb = ps.bc.g(f.bx, f.by, t_next);
                const double slope = (gb - v[f.cell_a]) / (0.5 * h);
                r[f.cell_a] -= ps.flux.coefficient(slope * slope) * slope / h;
            } else {
                const double psi = ps.bc.psi ? ps.bc.psi(f.bx, f.by, t_next, v[f.cell_a]) : 0.0;
                r[f.cell_a] -= psi / h;
            }
        }
    };

    auto max_norm = [&](const std::vector<double>& r) {
        double m = 0.0;
        for (double x : r) m = std::max(m, std::abs(x));
        return m;
    };

    std::vector<double> res;
    eval_residual(u, res);
    double rnorm = max_norm(res);
    double j_prev = step_functional(ps, u, w_prev, t_next);
    bool monotone = true;

    Eigen::SparseMatrix<double> A(n, n);
    std::vector<Eigen::Triplet<double>> trips;
    Eigen::VectorXd rhs(n), du(n);
    StepWorkspace local;
    StepWorkspace& ws = workspace ? *workspace : local;

    int it = 0;
    for (; it < ps.cfg.max_iters && rnorm > ps.cfg.newton_tol; ++it) {
        trips.clear();
        std::vector<double> diag(n, 0.0);
        for (int c = 0; c < n; ++c) diag[c] = beta_eps_deriv(ps.enth, u[c]) / dt;
        for (const auto& f : fs.interior) {
            const double slope = (u[f.cell_b] - u[f.cell_a]) / h;
            const double a = ps.flux.coefficient(slope * slope) / (h * h);
            diag[f.cell_a] += a;
            diag[f.cell_b] += a;
            trips.emplace_back(f.cell_a, f.cell_b, -a);
            trips.emplace_back(f.cell_b, f.cell_a, -a);
        }
        for (const auto& f : fs.boundary) {
            if (ps.bc.kind == BcKind::dirichlet) {
                const double gb = ps.bc.g(f.bx, f.by, t_next);
                const double slope = (gb - u[f.cell_a]) / (0.5 * h);
                diag[f.cell_a] += 2.0 * ps.flux.coefficient(slope * slope) / (h * h);
            }
            // Neumann flux is data; no Jacobian entry
        }
        for (int c = 0; c < n; ++c) trips.emplace_back(c, c, diag[c]);
        A.setFromTriplets(trips.begin(), trips.end());
        for (int c = 0; c < n; ++c) rhs[c] = -res[c];

        if (!ws.pattern_ready) {
            ws.solver.analyzePattern(A);
            ws.pattern_ready = true;
        }
        ws.solver.factorize(A);
        if (ws.solver.info() != Eigen::Success)
            throw SolverError("step_implicit: singular linearization (degenerate gradient floor?)",
                              rnorm, t_next);
        du = ws.solver.solve(rhs);

        double damping = 1.0;
        std::vector<double> trial(n), tres;
        for (int bt = 0; bt < 40; ++bt) {
            for (int c = 0; c < n; ++c) trial[c] = u[c] + damping * du[c];
            eval_residual(trial, tres);
            const double tnorm = max_norm(tres);
            if (tnorm < rnorm || tnorm <= ps.cfg.newton_tol) break;
            damping *= 0.5;
        }
        for (int c = 0; c < n; ++c) u[c] += damping * du[c];
        eval_residual(u, res);
        rnorm = max_norm(res);
        const double j_now = step_functional(ps, u, w_prev, t_next);
        if (j_now > j_prev + 1e-12 * (1.0 + std::abs(j_prev))) monotone = false;
        j_prev = j_now;
    }

    if (stats) {
        stats->iterations = it;
        stats->residual = rnorm;
        stats->functional_monotone = monotone;
    }
    if (rnorm > ps.cfg.newton_tol)
        throw SolverError("step_implicit: no convergence after max_iters (last residual " +
                              format_double(rnorm) + ")",
                          rnorm, t_next);
    return u;
}

/// Runs the implicit stepper to t_final, storing every store_stride-th step
/// (the initial slice and the final step are always stored).
inline SpaceTimeField solve(const ProblemSetup& ps) {
    ps.cfg.validate();
    const DomainGrid& g = *ps.grid;
    const int n = g.n_active();

    SpaceTimeField f;
    f.grid = ps.grid;

    std::vector<double> u(n), w(n);
    for (int c = 0; c < n; ++c) {
        const auto [i, j] = g.cells[static_cast<std::size_t>(c)];
        u[c] = ps.bc.u0 ? ps.bc.u0(g.cx(i), g.cy(j)) : 0.0;
        w[c] = beta_eps_eval(ps.enth, u[c]);
    }

    auto store = [&](double t) {
        f.times.push_back(t);
        f.u.insert(f.u.end(), u.begin(), u.end());
        f.w.insert(f.w.end(), w.begin(), w.end());
    };
    store(0.0);

    const long n_steps = ps.t_final <= 0.0
                             ? 0
                             : static_cast<long>(std::ceil(ps.t_final / ps.cfg.dt - 1e-9));
    StepWorkspace workspace;
    for (long k = 1; k <= n_steps; ++k) {
        const double t = k * ps.cfg.dt;
        u = step_implicit(ps, u, w, t, nullptr, &workspace);
        for (int c = 0; c < n; ++c) w[c] = beta_eps_eval(ps.enth, u[c]);
        if (k % ps.cfg.store_stride == 0 || k == n_steps) store(t);
    }
    return f;
}

struct MaxPrincipleReport {
    double bound = 0.0;   // max(|u0|_inf, |g|_inf over the lateral boundary)
    double max_abs = 0.0; // max |u| over all stored samples
    double margin = 0.0;  // max_abs - bound
    bool pass(double tol = 1e-10) const { return margin <= tol; }
};

/// Equiboundedness check for Dirichlet runs: solution samples must stay
/// inside the data bound.
inline MaxPrincipleReport max_principle_check(const SpaceTimeField& f, const ProblemSetup& ps) {
    if (ps.bc.kind != BcKind::dirichlet)
        throw std::invalid_argument("max_principle_check: Dirichlet runs only");
    const DomainGrid& g = *ps.grid;
    MaxPrincipleReport rep;
    for (int c = 0; c < g.n_active(); ++c) {
        const auto [i, j] = g.cells[static_cast<std::size_t>(c)];
        rep.bound = std::max(rep.bound, std::abs(ps.bc.u0 ? ps.bc.u0(g.cx(i), g.cy(j)) : 0.0));
    }
    const auto& fs = g.faces();
    for (double t : f.times)
        for (const auto& face : fs.boundary)
            rep.bound = std::max(rep.bound, std::abs(ps.bc.g(face.bx, face.by, t)));
    for (double v : f.u) rep.max_abs = std::max(rep.max_abs, std::abs(v));
    rep.margin = rep.max_abs - rep.bound;
    return rep;
}

struct WeakResidual {
    double value = 0.0;
    double scale = 0.0;
};

/// Discrete weak-form residual of a stored run against a test function:
/// enthalpy-time pairing plus flux-gradient pairing, telescoping to the
/// per-step solver residuals for interior test functions. zeta must vanish
/// on a neighborhood of the lateral boundary.
inline WeakResidual residual_check(const SpaceTimeField& f, const ProblemSetup& ps,
                                   const SpaceTimeFn& zeta) {
    const DomainGrid& g = *ps.grid;
    const auto& fs = g.faces();
    const int n = g.n_active();
    const double h = g.h;
    const double vol = g.cell_volume();
    const int K = f.n_steps() - 1;

    auto zeta_at = [&](int step, int cell) {
        const auto [i, j] = g.cells[static_cast<std::size_t>(cell)];
        return zeta(g.cx(i), g.cy(j), f.times[static_cast<std::size_t>(step)]);
    };

    WeakResidual out;
    double acc = 0.0, scale = 0.0;
    for (int c = 0; c < n; ++c) {
        const double top = f.at_w(K, c) * zeta_at(K, c);
        const double bot = f.at_w(0, c) * zeta_at(0, c);
        acc += vol * (top - bot);
        scale += vol * (std::abs(top) + std::abs(bot));
    }
    for (int k = 1; k <= K; ++k) {
        const double dtk = f.times[static_cast<std::size_t>(k)] - f.times[static_cast<std::size_t>(k - 1)];
        for (int c = 0; c < n; ++c) {
            const double term = vol * f.at_w(k - 1, c) * (zeta_at(k, c) - zeta_at(k - 1, c));
            acc -= term;
            scale += std::abs(term);
        }
        for (const auto& face : fs.interior) {
            const double slope = (f.at_u(k, face.cell_b) - f.at_u(k, face.cell_a)) / h;
            const double q = ps.flux.coefficient(slope * slope) * slope;
            const double dz = (zeta_at(k, face.cell_b) - zeta_at(k, face.cell_a)) / h;
            const double term = dtk * vol * q * dz;
            acc += term;
            scale += std::abs(term);
        }
    }
    double zmax = 0.0;
    for (int c = 0; c < n; ++c) zmax = std::max(zmax, std::abs(zeta_at(K, c)));
    out.value = acc;
    out.scale = std::max(scale, f.times.back() * g.domain_volume() * zmax);
    return out;
}

} // namespace stefanlab
