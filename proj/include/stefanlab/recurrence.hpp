#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "stefanlab/util.hpp"

namespace stefanlab {

enum class SchemeKind { slow_type, power_type, lateral, interior, flux_bounded };

inline const char* to_string(SchemeKind s) {
    switch (s) {
    case SchemeKind::slow_type: return "slow-type";
    case SchemeKind::power_type: return "power-type";
    case SchemeKind::lateral: return "lateral";
    case SchemeKind::interior: return "interior";
    case SchemeKind::flux_bounded: return "flux-bounded";
    }
    return "?";
}

/// Logarithmic oscillation bound for the lateral datum feed:
/// 2 * C_g * (ln(1/r))^(-lambda).
struct GFeed {
    double c_g = 0.0;
    double lambda = 1.0;

    double operator()(double log_r) const { // takes ln(r), r < 1
        if (c_g == 0.0) return 0.0;
        return 2.0 * c_g * std::pow(-log_r, -lambda);
    }
};

/// Free parameters of the oscillation-reduction schemes. The analysis treats
/// all of them as data-dependent but nonconstructive; here they are explicit
/// inputs with derivable defaults (negative means "derive").
struct RecurrenceSpec {
    SchemeKind scheme = SchemeKind::power_type;
    double eta = 0.5;  // contraction strength in omega*(1 - eta*omega^q)
    double q = 1.0;    // contraction exponent
    double p = 2.0;    // diffusion exponent
    int dim = 1;       // N

    // boundary scheme
    double xi = 0.1;
    double xi_bar = 0.1;
    double xi_tilde = -1.0; // radius shrink factor; derived when negative
    double cap_a = -1.0;    // radius feed amplitude A
    double alpha_o = -1.0;  // radius feed exponent
    double q_bar = -1.0;    // shrink exponent 1 + (p-1) q
    GFeed g_feed;

    // interior scheme
    double kappa = 1.0;     // sets q = (N+p)/p * kappa and a = (N+p)/p * (p-2) * kappa
    double a_exp = -1.0;
    double l_o = 1.0;
    double shrink = 0.5;    // rho_{n+1} = shrink * rho_n

    // flux-bounded scheme
    double c_o_neumann = 0.5;  // theta_n = c_o (omega_n / 4)^c
    double c_exp = -1.0;       // c = (N+2)/2, derived when negative
    double gamma_c2 = 1.0;
    double c2 = 0.0;

    void derive_defaults() {
        if (q_bar < 0.0) q_bar = 1.0 + (p - 1.0) * q;
        if (alpha_o < 0.0) alpha_o = 1.0 / ((p - 1.0) * (1.0 + q));
        if (cap_a < 0.0) cap_a = std::pow(std::pow(8.0, p / (p - 1.0)) * xi * xi_bar, -1.0 / (1.0 + q));
        if (xi_tilde < 0.0)
            xi_tilde = std::pow(32.0, -p) * std::pow(xi, 2.0 - p) *
                       std::pow(std::pow(2.0, -(1.0 + q)) * xi * xi_bar, p - 1.0);
        if (c_exp < 0.0) c_exp = 0.5 * (dim + 2.0);
        if (a_exp < 0.0) a_exp = (dim + p) / p * (p - 2.0) * kappa;
    }

    void validate_iteration() const {
        if (!(eta > 0.0 && eta < 1.0))
            throw std::invalid_argument("RecurrenceSpec: eta must lie in (0,1)");
        if (!(q > 0.0)) throw std::invalid_argument("RecurrenceSpec: q must be positive");
        if (!(p >= 2.0)) throw std::invalid_argument("RecurrenceSpec: p must be >= 2");
    }
};

/// Generated sequences of one scheme run. Radii shrink super-exponentially in
/// the boundary scheme, so their logarithms are the primary record; rho(n)
/// underflows to zero once exp gives up.
struct IterationTrace {
    RecurrenceSpec spec;
    std::vector<double> omega;
    std::vector<double> log_rho;
    std::vector<double> theta;
    std::vector<double> theta_tilde;
    std::string termination;

    long size() const { return static_cast<long>(omega.size()); }
    double rho(long n) const { return std::exp(log_rho[static_cast<std::size_t>(n)]); }
};

struct NestingViolation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// The two model recurrences: omega * (1 - eta * omega^q) for the power type,
/// omega * (1 - 2^(-1/omega^q)) for the slow type (eta plays no role there).
inline IterationTrace iterate_type(const RecurrenceSpec& spec_in, double omega0, long n_max) {
    RecurrenceSpec spec = spec_in;
    spec.derive_defaults();
    if (spec.scheme != SchemeKind::slow_type && spec.scheme != SchemeKind::power_type)
        throw std::invalid_argument("iterate_type: scheme must be slow-type or power-type");
    if (spec.scheme == SchemeKind::power_type) spec.validate_iteration();
    if (!(spec.q > 0.0)) throw std::invalid_argument("iterate_type: q must be positive");
    if (!(omega0 > 0.0 && omega0 < 1.0))
        throw std::invalid_argument("iterate_type: omega0 must lie in (0,1)");
    if (n_max < 1) throw std::invalid_argument("iterate_type: n_max must be >= 1");

    IterationTrace tr;
    tr.spec = spec;
    tr.omega.reserve(static_cast<std::size_t>(n_max) + 1);
    double w = omega0;
    tr.omega.push_back(w);
    for (long n = 0; n < n_max; ++n) {
        if (spec.scheme == SchemeKind::power_type)
            w = w * (1.0 - spec.eta * std::pow(w, spec.q));
        else
            w = w * (1.0 - std::exp2(-1.0 / std::pow(w, spec.q)));
        tr.omega.push_back(w);
    }
    tr.termination = "n_max";
    return tr;
}

namespace detail_recurrence {

inline double log_theta(const RecurrenceSpec& s, double w) {
    return (2.0 - s.p) * std::log(s.xi * w);
}
inline double log_theta_tilde(const RecurrenceSpec& s, double w) {
    return (1.0 - s.p) * std::log(s.xi * s.xi_bar * std::pow(w, 1.0 + s.q));
}

} // namespace detail_recurrence

/// Oscillation/radius scheme at a lateral vertex: the contraction competes
/// with a radius feed A rho^alpha_o and the datum feed; radii shrink by
/// rho_{n+1}^p = xi_tilde * omega_n^q_bar * rho_n^p. Each step asserts that
/// the next start cylinder nests into the current measurement cylinder, in
/// log form:
///   log theta_tilde_{n+1} + p(log 8 + log rho_{n+1})
///     <= log theta_n + p(log rho_n - log 4).
inline IterationTrace iterate_boundary_scheme(const RecurrenceSpec& spec_in, double omega0,
                                              double rho0, double r_stop, long n_max = 1000000) {
    RecurrenceSpec spec = spec_in;
    spec.scheme = SchemeKind::lateral;
    spec.derive_defaults();
    spec.validate_iteration();
    if (!(omega0 > 0.0 && omega0 < 1.0))
        throw std::invalid_argument("iterate_boundary_scheme: omega0 must lie in (0,1)");
    if (!(rho0 > 0.0 && rho0 < 1.0))
        throw std::invalid_argument("iterate_boundary_scheme: rho0 must lie in (0,1)");
    if (r_stop < 0.0) throw std::invalid_argument("iterate_boundary_scheme: r_stop must be >= 0");

    IterationTrace tr;
    tr.spec = spec;
    double w = omega0;
    double lr = std::log(rho0);
    const double log_r_stop = r_stop > 0.0 ? std::log(r_stop) : -1e300;
    tr.omega.push_back(w);
    tr.log_rho.push_back(lr);
    tr.theta.push_back(std::exp(detail_recurrence::log_theta(spec, w)));
    tr.theta_tilde.push_back(std::exp(detail_recurrence::log_theta_tilde(spec, w)));
    tr.termination = "n_max";
    for (long n = 0; n < n_max; ++n) {
        const double contraction = w * (1.0 - spec.eta * std::pow(w, spec.q));
        const double radius_feed = spec.cap_a * std::exp(spec.alpha_o * lr);
        const double datum_feed = spec.g_feed(lr);
        const double w_next = std::max({contraction, radius_feed, datum_feed});
        const double lr_next = lr + (std::log(spec.xi_tilde) + spec.q_bar * std::log(w)) / spec.p;

        const double lt_n = detail_recurrence::log_theta(spec, w);
        const double ltt_next = detail_recurrence::log_theta_tilde(spec, w_next);
        const double lhs_time = ltt_next + spec.p * (std::log(8.0) + lr_next);
        const double rhs_time = lt_n + spec.p * (lr - std::log(4.0));
        const double lhs_space = std::log(8.0) + lr_next;
        const double rhs_space = lr - std::log(4.0);
        const double slack = 1e-9;
        if (lhs_time > rhs_time + slack || lhs_space > rhs_space + slack)
            throw NestingViolation("iterate_boundary_scheme: cylinder nesting fails at step " +
                                   std::to_string(n));
        if (!(w_next <= w + 1e-15))
            throw NestingViolation(
                "iterate_boundary_scheme: a feed exceeds the oscillation bound at step " +
                std::to_string(n) + " (start values inconsistent with the scheme constants)");

        w = w_next;
        lr = lr_next;
        tr.omega.push_back(w);
        tr.log_rho.push_back(lr);
        tr.theta.push_back(std::exp(detail_recurrence::log_theta(spec, w)));
        tr.theta_tilde.push_back(std::exp(detail_recurrence::log_theta_tilde(spec, w)));
        if (lr < log_r_stop) {
            tr.termination = "r_stop";
            break;
        }
    }
    return tr;
}

/// Interior oscillation scheme: fixed geometric radius shrink, radius feed
/// with exponent 1/(a + p - 2), time scalings L_o omega^-a (omega/4)^(2-p).
/// At p = 2 the exponent a vanishes and the trace no longer depends on L_o.
inline IterationTrace iterate_interior_scheme(const RecurrenceSpec& spec_in, double omega0,
                                              double rho0, double r_stop, long n_max = 1000000) {
    RecurrenceSpec spec = spec_in;
    spec.scheme = SchemeKind::interior;
    spec.derive_defaults();
    spec.validate_iteration();
    if (!(omega0 > 0.0 && omega0 < 1.0) || !(rho0 > 0.0 && rho0 <= 1.0))
        throw std::invalid_argument("iterate_interior_scheme: bad start values");
    if (!(spec.shrink > 0.0 && spec.shrink < 1.0))
        throw std::invalid_argument("iterate_interior_scheme: shrink factor in (0,1)");
    const double afeed = spec.cap_a > 0.0 ? spec.cap_a : 1.0;
    const double feed_exp = 1.0 / (spec.a_exp + spec.p - 2.0);

    IterationTrace tr;
    tr.spec = spec;
    double w = omega0, lr = std::log(rho0);
    const double log_r_stop = r_stop > 0.0 ? std::log(r_stop) : -1e300;
    auto push = [&]() {
        tr.omega.push_back(w);
        tr.log_rho.push_back(lr);
        tr.theta.push_back(spec.l_o * std::pow(w, -spec.a_exp) * std::pow(0.25 * w, 2.0 - spec.p));
        tr.theta_tilde.push_back(0.0);
    };
    push();
    tr.termination = "n_max";
    for (long n = 0; n < n_max; ++n) {
        const double contraction = w * (1.0 - spec.eta * std::pow(w, spec.q));
        const double radius_feed = afeed * std::exp(feed_exp * lr);
        w = std::max(contraction, radius_feed);
        lr += std::log(spec.shrink);
        push();
        if (lr < log_r_stop) {
            tr.termination = "r_stop";
            break;
        }
    }
    return tr;
}

/// Flux-bounded scheme at p = 2: the datum feed is gamma * C_2 * rho_n and
/// radii shrink through the intrinsic factor theta_n = c_o (omega_n/4)^c.
inline IterationTrace iterate_neumann_scheme(const RecurrenceSpec& spec_in, double omega0,
                                             double rho0, double r_stop, long n_max = 1000000) {
    RecurrenceSpec spec = spec_in;
    spec.scheme = SchemeKind::flux_bounded;
    spec.derive_defaults();
    spec.validate_iteration();
    if (!(omega0 > 0.0 && omega0 < 1.0) || !(rho0 > 0.0 && rho0 <= 1.0))
        throw std::invalid_argument("iterate_neumann_scheme: bad start values");

    IterationTrace tr;
    tr.spec = spec;
    double w = omega0, lr = std::log(rho0);
    const double log_r_stop = r_stop > 0.0 ? std::log(r_stop) : -1e300;
    auto push = [&](double th) {
        tr.omega.push_back(w);
        tr.log_rho.push_back(lr);
        tr.theta.push_back(th);
        tr.theta_tilde.push_back(0.0);
    };
    push(spec.c_o_neumann * std::pow(0.25 * w, spec.c_exp));
    tr.termination = "n_max";
    for (long n = 0; n < n_max; ++n) {
        const double theta_n = spec.c_o_neumann * std::pow(0.25 * w, spec.c_exp);
        const double contraction = w * (1.0 - spec.eta * std::pow(w, spec.q));
        const double flux_feed = spec.gamma_c2 * spec.c2 * std::exp(lr);
        w = std::max(contraction, flux_feed);
        lr += std::log(0.5) + 0.5 * std::log(theta_n); // rho^2 scales by theta/4
        push(spec.c_o_neumann * std::pow(0.25 * w, spec.c_exp));
        if (lr < log_r_stop) {
            tr.termination = "r_stop";
            break;
        }
    }
    return tr;
}

struct DominatingCheck {
    bool found = false;
    long n_o = -1;
};

/// Tests whether a_n = (1+n)^(-sigma) max{1, omega_0} eventually dominates
/// the scheme's three feeds, with the data-independent comparison radii
/// r_{n+1}^p = xi_tilde r_n^p, r_0 = 1. Returns the smallest index past
/// which domination holds, or failure.
inline DominatingCheck dominating_sequence_check(const IterationTrace& tr, double sigma) {
    if (tr.size() < 2) throw std::invalid_argument("dominating_sequence_check: trace too short");
    if (!(sigma > 0.0)) throw std::invalid_argument("dominating_sequence_check: sigma must be > 0");
    const RecurrenceSpec& s = tr.spec;
    const double scale = std::max(1.0, tr.omega.front());
    const long n = tr.size();
    auto a = [&](long i) { return std::pow(1.0 + static_cast<double>(i), -sigma) * scale; };

    std::vector<std::uint8_t> ok(static_cast<std::size_t>(n - 1), 0);
    double lr = 0.0; // comparison radii start at one
    for (long i = 0; i + 1 < n; ++i) {
        const double ai = a(i);
        const double contraction = ai * (1.0 - s.eta * std::pow(ai, s.q));
        const double radius_feed = s.cap_a > 0.0 ? s.cap_a * std::exp(s.alpha_o * lr) : 0.0;
        // the datum bound is void until the comparison radius drops below one
        const double datum_feed = lr < 0.0 ? s.g_feed(lr) : (s.g_feed.c_g > 0.0 ? 1e300 : 0.0);
        ok[static_cast<std::size_t>(i)] =
            a(i + 1) >= std::max({contraction, radius_feed, datum_feed}) ? 1 : 0;
        lr += (std::log(s.xi_tilde) + 0.0) / s.p; // omega-free comparison radii
    }
    // suffix scan: all feeds dominated from n_o on, and a_{n_o} >= omega_{n_o}
    long suffix_from = n - 1;
    for (long i = n - 2; i >= 0; --i) {
        if (ok[static_cast<std::size_t>(i)])
            suffix_from = i;
        else
            break;
    }
    if (suffix_from >= n - 1) return {false, -1}; // no feed check passed at all
    for (long i = suffix_from; i < n; ++i) {
        if (a(i) >= tr.omega[static_cast<std::size_t>(i)]) return {true, i};
    }
    return {false, -1};
}

struct RadiusInversion {
    long n = -1;
    double omega_bound = 0.0;
};

/// Finds the unique n with rho_{n+1} < 4r <= rho_n and returns the
/// oscillation bound omega_{n+1} valid on the radius-r cylinder.
inline RadiusInversion invert_radius_to_index(const IterationTrace& tr, double r) {
    if (tr.log_rho.size() < 2) throw std::invalid_argument("invert_radius_to_index: trace too short");
    if (!(r > 0.0)) throw std::invalid_argument("invert_radius_to_index: r must be positive");
    const double target = std::log(4.0 * r);
    if (target > tr.log_rho.front())
        throw std::invalid_argument("invert_radius_to_index: r must satisfy 4r <= rho_0");
    for (long i = 0; i + 1 < static_cast<long>(tr.log_rho.size()); ++i) {
        if (tr.log_rho[static_cast<std::size_t>(i + 1)] < target &&
            target <= tr.log_rho[static_cast<std::size_t>(i)])
            return {i, tr.omega[static_cast<std::size_t>(i + 1)]};
    }
    throw std::runtime_error("invert_radius_to_index: trace exhausted before reaching r");
}

struct DeGiorgiParams {
    double c = 1.0;     // C > 0
    double b = 1.0;     // b >= 1
    double alpha = 1.0; // alpha > 0
    double y0 = 1.0;    // Y_0 in (0, 1]

    void validate() const {
        if (!(c > 0.0) || !(b >= 1.0) || !(alpha > 0.0) || !(y0 > 0.0) || y0 > 1.0)
            throw std::invalid_argument("DeGiorgiParams: need C > 0, b >= 1, alpha > 0, Y0 in (0,1]");
    }
    double threshold() const { return std::pow(c, -1.0 / alpha) * std::pow(b, -1.0 / (alpha * alpha)); }
};

enum class DeGiorgiVerdict { converges, diverges };

struct DeGiorgiResult {
    DeGiorgiVerdict verdict = DeGiorgiVerdict::diverges; // closed-form threshold test
    double threshold = 0.0;
    std::vector<double> trace;     // worst-case iteration Y_{n+1} = C b^n Y_n^(1+alpha)
    bool clamped = false;          // hit the overflow clamp at 1e300
    bool bound_satisfied = true;   // Y_n <= b^(-n/alpha) Y_0 whenever convergent
};

/// Fast-geometric-convergence dichotomy: the worst-case recursion
/// Y_{n+1} = C b^n Y_n^(1+alpha) collapses to zero iff Y_0 <= C^(-1/alpha)
/// b^(-1/alpha^2), in which case Y_n <= b^(-n/alpha) Y_0.
inline DeGiorgiResult degiorgi_converges(const DeGiorgiParams& par, long n_max) {
    par.validate();
    if (n_max < 1) throw std::invalid_argument("degiorgi_converges: n_max must be >= 1");
    DeGiorgiResult res;
    res.threshold = par.threshold();
    res.verdict =
        par.y0 <= res.threshold * (1.0 + 1e-15) ? DeGiorgiVerdict::converges : DeGiorgiVerdict::diverges;
    res.trace.reserve(static_cast<std::size_t>(n_max) + 1);
    double y = par.y0;
    res.trace.push_back(y);
    const double clamp = 1e300;
    double bn = 1.0;
    for (long n = 0; n < n_max; ++n) {
        y = par.c * bn * std::pow(y, 1.0 + par.alpha);
        if (!(y < clamp)) {
            y = clamp;
            res.clamped = true;
        }
        res.trace.push_back(y);
        bn *= par.b;
        if (res.clamped) break;
    }
    if (res.verdict == DeGiorgiVerdict::converges) {
        for (std::size_t n = 0; n < res.trace.size(); ++n) {
            const double bound = std::pow(par.b, -static_cast<double>(n) / par.alpha) * par.y0;
            if (res.trace[n] > bound * (1.0 + 1e-10)) {
                res.bound_satisfied = false;
                break;
            }
        }
    }
    return res;
}

/// Smallest integer j with gamma * 4^(N+2) * j^(-(p-1)/p) <= 1/2.
inline long jstar_select(double gamma, int dim, double p) {
    if (!(gamma > 0.0) || !(p >= 2.0))
        throw std::invalid_argument("jstar_select: need gamma > 0 and p >= 2");
    const double base = 2.0 * gamma * std::pow(4.0, dim + 2);
    long j = static_cast<long>(std::ceil(std::pow(base, p / (p - 1.0)) - 1e-12));
    j = std::max<long>(j, 1);
    auto satisfied = [&](long jj) {
        return gamma * std::pow(4.0, dim + 2) / std::pow(static_cast<double>(jj), (p - 1.0) / p) <= 0.5;
    };
    while (!satisfied(j)) ++j;
    while (j > 1 && satisfied(j - 1)) --j;
    return j;
}

/// Smallest integer m with 2^-m <= c_1 (xi*omega)^b, b = 1 + (N+p)/p.
inline int choose_m(double c1, double xi_omega, int dim, double p) {
    if (!(c1 > 0.0) || !(xi_omega > 0.0) || !(p >= 2.0))
        throw std::invalid_argument("choose_m: positive inputs and p >= 2 required");
    const double b = 1.0 + (dim + p) / p;
    const double target = c1 * std::pow(xi_omega, b);
    if (!(target > 0.0)) throw std::invalid_argument("choose_m: degenerate target");
    int m = std::max(0, static_cast<int>(std::ceil(-std::log2(target) - 1e-12)));
    while (std::exp2(-m) > target) ++m;
    while (m > 0 && std::exp2(-(m - 1)) <= target) --m;
    return m;
}

/// Level-splitting depth rule: delta = 1/2 [c_1 (xi*omega)^b]^j_star.
inline double delta_rule(double c1, double xi_omega, int dim, double p, long j_star) {
    const double b = 1.0 + (dim + p) / p;
    return 0.5 * std::pow(c1 * std::pow(xi_omega, b), static_cast<double>(j_star));
}

/// Expansion-of-positivity constant bookkeeping: eta_* = eta * alpha^kappa.
inline double expansion_positivity_eta(double eta, double alpha, double kappa) {
    if (!(eta > 0.0) || !(alpha > 0.0) || !(kappa > 0.0))
        throw std::invalid_argument("expansion_positivity_eta: positive inputs required");
    return eta * std::pow(alpha, kappa);
}

enum class ExponentModel { power_in_n, log_in_n };

struct ExponentFit {
    double c = 0.0;
    double s = 0.0;
    double rms = 0.0;
};

/// Fits omega_n ~ c * n^-s or c * (ln n)^-s by least squares on the
/// linearized scale; default window is the tail half of the trace.
inline ExponentFit asymptotic_exponent(const IterationTrace& tr, ExponentModel model,
                                       long n_lo = -1, long n_hi = -1) {
    const long n = tr.size();
    if (n < 100) throw std::invalid_argument("asymptotic_exponent: trace too short");
    if (n_lo < 0) n_lo = n / 2;
    if (n_hi < 0) n_hi = n - 1;
    n_lo = std::max<long>(n_lo, 2);
    n_hi = std::min<long>(n_hi, n - 1);
    std::vector<double> xs, ys;
    xs.reserve(static_cast<std::size_t>(n_hi - n_lo + 1));
    ys.reserve(xs.capacity());
    for (long i = n_lo; i <= n_hi; ++i) {
        const double w = tr.omega[static_cast<std::size_t>(i)];
        if (!(w > 0.0)) throw std::invalid_argument("asymptotic_exponent: nonpositive entries");
        const double x = model == ExponentModel::power_in_n
                             ? std::log(static_cast<double>(i))
                             : std::log(std::log(static_cast<double>(i)));
        xs.push_back(x);
        ys.push_back(std::log(w));
    }
    auto lf = fit_line(xs, ys);
    return {std::exp(lf.intercept), -lf.slope, lf.rms};
}

} // namespace stefanlab
