#pragma once

#include <cmath>
#include <stdexcept>

#include "stefanlab/util.hpp"

namespace stefanlab {

/// Set-valued result of evaluating the enthalpy graph: a closed interval,
/// single-valued when lo == hi.
struct GraphValue {
    double lo = 0.0;
    double hi = 0.0;
    bool single_valued() const { return lo == hi; }
};

/// Maximal monotone enthalpy graph with a jump of height nu at zero
/// temperature.
struct EnthalpyGraph {
    double nu; // latent heat, > 0

    explicit EnthalpyGraph(double latent_heat) : nu(latent_heat) {
        if (!(nu > 0.0)) throw std::invalid_argument("EnthalpyGraph: latent heat must be positive");
    }
};

inline GraphValue graph_eval(const EnthalpyGraph& g, double s) {
    if (s > 0.0) return {s, s};
    if (s < 0.0) return {s - g.nu, s - g.nu};
    return {-g.nu, 0.0};
}

/// Normalized even bump on [-1, 1] with polynomial closed-form cumulative
/// K(t) and first-moment cumulative K1(t) = int_{-1}^t tau phi(tau) dtau.
/// Two shapes are provided so results can be checked for kernel independence.
struct MollifierKernel {
    enum class Shape { quartic_bump, sextic_bump };

    Shape shape = Shape::quartic_bump;

    double density(double t) const {
        if (t <= -1.0 || t >= 1.0) return 0.0;
        const double m = 1.0 - t * t;
        if (shape == Shape::quartic_bump) return (15.0 / 16.0) * m * m;
        return (35.0 / 32.0) * m * m * m;
    }

    double cumulative(double t) const {
        if (t <= -1.0) return 0.0;
        if (t >= 1.0) return 1.0;
        if (shape == Shape::quartic_bump) {
            // int (1-t^2)^2 = t - 2t^3/3 + t^5/5, equals -8/15 at t = -1
            return (15.0 / 16.0) * (t - 2.0 * t * t * t / 3.0 + std::pow(t, 5) / 5.0 + 8.0 / 15.0);
        }
        // int (1-t^2)^3 = t - t^3 + 3t^5/5 - t^7/7, equals -16/35 at t = -1
        return (35.0 / 32.0) *
               (t - std::pow(t, 3) + 3.0 * std::pow(t, 5) / 5.0 - std::pow(t, 7) / 7.0 + 16.0 / 35.0);
    }

    double first_moment(double t) const {
        if (t <= -1.0 || t >= 1.0) return 0.0; // even kernel has zero mean
        if (shape == Shape::quartic_bump) {
            // int t(1-t^2)^2 = t^2/2 - t^4/2 + t^6/6, equals 1/6 at t = -1
            return (15.0 / 16.0) * (t * t / 2.0 - std::pow(t, 4) / 2.0 + std::pow(t, 6) / 6.0 - 1.0 / 6.0);
        }
        // int t(1-t^2)^3 = t^2/2 - 3t^4/4 + t^6/2 - t^8/8, equals 1/8 at t = -1
        return (35.0 / 32.0) *
               (t * t / 2.0 - 3.0 * std::pow(t, 4) / 4.0 + std::pow(t, 6) / 2.0 - std::pow(t, 8) / 8.0);
    }

    /// Antiderivative of the cumulative: int_{-1}^{t} K = t K(t) - K1(t) + 1 - 0... evaluated
    /// through F(t) = t K(t) - K1(t), which continues correctly outside [-1, 1].
    double cumulative_antiderivative(double t) const {
        if (t <= -1.0) return 0.0;
        const double tc = std::min(t, 1.0);
        const double f = tc * cumulative(tc) - first_moment(tc);
        const double f_at = -1.0 * 0.0 - 0.0; // F(-1) = 0
        double v = f - f_at;
        if (t > 1.0) v += t - 1.0; // K == 1 beyond the support
        return v;
    }
};

/// Smooth strictly monotone replacement of the enthalpy graph: the jump is
/// spread over (-eps, eps) by the kernel, so beta_eps(s) = s + H_eps(s) has
/// slope >= 1 everywhere and a well-defined inverse.
struct RegularizedEnthalpy {
    EnthalpyGraph graph;
    double eps;
    MollifierKernel kernel;

    RegularizedEnthalpy(EnthalpyGraph g, double mollification_width, MollifierKernel k = {})
        : graph(g), eps(mollification_width), kernel(k) {
        if (!(eps > 0.0 && eps < 1.0))
            throw std::invalid_argument("RegularizedEnthalpy: width must lie in (0, 1)");
    }

    double nu() const { return graph.nu; }
};

inline double h_eps_eval(const RegularizedEnthalpy& r, double s) {
    return -r.nu() * (1.0 - r.kernel.cumulative(s / r.eps));
}

inline double h_eps_deriv(const RegularizedEnthalpy& r, double s) {
    return r.nu() / r.eps * r.kernel.density(s / r.eps);
}

inline double beta_eps_eval(const RegularizedEnthalpy& r, double s) {
    return s + h_eps_eval(r, s);
}

inline double beta_eps_deriv(const RegularizedEnthalpy& r, double s) {
    return 1.0 + h_eps_deriv(r, s);
}

/// int_a^b H_eps'(s) ds, exact.
inline double h_eps_mass(const RegularizedEnthalpy& r, double a, double b) {
    return r.nu() * (r.kernel.cumulative(b / r.eps) - r.kernel.cumulative(a / r.eps));
}

/// int_a^b s H_eps'(s) ds, exact.
inline double h_eps_first_moment(const RegularizedEnthalpy& r, double a, double b) {
    return r.nu() * r.eps * (r.kernel.first_moment(b / r.eps) - r.kernel.first_moment(a / r.eps));
}

/// int_0^u H_eps(s) ds, exact; used by the implicit-step energy functional.
inline double h_eps_antiderivative(const RegularizedEnthalpy& r, double u) {
    const double t = u / r.eps;
    const double ik = r.kernel.cumulative_antiderivative(t) - r.kernel.cumulative_antiderivative(0.0);
    return -r.nu() * (u - r.eps * ik);
}

/// Latent fraction still bound in the transition, in [0, nu]; the regularized
/// stand-in for nu * chi_{[u<=0]}.
inline double residual_latent(const RegularizedEnthalpy& r, double u) {
    return -h_eps_eval(r, u);
}

/// Signed-truncation latent mass: int over the truncation range of
/// H_eps'(s) (s-k)_pm ds, i.e. the exact singular weight carried by the level
/// k on a sample with value u. Non-negative; zero when the truncation is
/// empty or the transition zone is not crossed.
inline double latent_defect(const RegularizedEnthalpy& r, double u, double k, Sign sign) {
    if (sign == Sign::plus) {
        if (u <= k) return 0.0;
        return h_eps_first_moment(r, k, u) - k * h_eps_mass(r, k, u);
    }
    if (u >= k) return 0.0;
    return k * h_eps_mass(r, u, k) - h_eps_first_moment(r, u, k);
}

/// Monotone inverse of beta_eps: closed form on the identity branches,
/// safeguarded bisection across the transition zone.
inline double beta_eps_invert(const RegularizedEnthalpy& r, double w, double tol) {
    if (!(tol > 0.0)) throw std::invalid_argument("beta_eps_invert: tolerance must be positive");
    const double eps = r.eps;
    const double nu = r.nu();
    if (w >= eps) return w;
    if (w <= -eps - nu) return w + nu;
    double lo = -eps, hi = eps;
    double flo = beta_eps_eval(r, lo) - w; // <= 0
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = beta_eps_eval(r, mid) - w;
        if (std::abs(fm) <= 0.5 * tol) return mid;
        if ((fm < 0.0) == (flo < 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
        if (hi - lo < 0.25 * tol) break; // slope >= 1, so the value error is below tol
    }
    return 0.5 * (lo + hi);
}

} // namespace stefanlab
