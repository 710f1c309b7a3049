#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "stefanlab/enthalpy.hpp"
#include "stefanlab/field.hpp"
#include "stefanlab/geometry.hpp"
#include "stefanlab/solver.hpp"

namespace stefanlab {

/// Piecewise-linear tent cutoff on a cylinder pair: one on the inner
/// sub-cylinder (factor sigma), vanishing on the outer mantle; the space-time
/// kind also ramps from zero at the bottom of the time span.
struct Cutoff {
    enum class Kind { space_only, space_time };
    Kind kind = Kind::space_time;
    double sigma = 0.5; // inner/outer ratio in (0,1)
};

struct CutoffSample {
    double zeta = 0.0;       // value in [0,1]
    double grad_mag = 0.0;   // |D zeta|
    double dt_zeta_p = 0.0;  // |d/dt zeta^p|
};

inline CutoffSample eval_cutoff(const Cutoff& c, const IntrinsicCylinder& cyl, double x, double y,
                                double t) {
    if (!(c.sigma > 0.0 && c.sigma < 1.0)) throw std::invalid_argument("Cutoff: sigma in (0,1)");
    CutoffSample s;
    const double dist = std::max(std::abs(x - cyl.x0), std::abs(y - cyl.y0));
    const double ramp = (1.0 - c.sigma) * cyl.rho;
    const double zx = std::clamp((cyl.rho - dist) / ramp, 0.0, 1.0);
    const bool on_space_ramp = zx > 0.0 && zx < 1.0;

    double zt = 1.0, dzt = 0.0;
    if (c.kind == Cutoff::Kind::space_time) {
        const double span = cyl.time_depth();
        const double tramp = (1.0 - c.sigma) * span;
        zt = std::clamp((t - cyl.t_bottom()) / tramp, 0.0, 1.0);
        if (zt > 0.0 && zt < 1.0) dzt = 1.0 / tramp;
    }
    s.zeta = zx * zt;
    s.grad_mag = on_space_ramp ? zt / ramp : 0.0;
    const double p = cyl.p;
    s.dt_zeta_p = p * std::pow(zx, p) * std::pow(zt, p - 1.0) * dzt;
    return s;
}

/// Truncation level with its per-cylinder statistics and the admissibility
/// record against the lateral datum.
struct TruncationLevel {
    double k = 0.0;
    Sign sign = Sign::plus;
    double mu_plus = 0.0;
    double mu_minus = 0.0;
    double omega = 0.0;
    bool boundary_restricted = false; // cylinder touches the lateral boundary
    double g_sup = 0.0;
    double g_inf = 0.0;
};

/// Level at a signed fractional offset from the cylinder's extreme value:
/// k = mu_plus - fraction*omega (plus) or mu_minus + fraction*omega (minus).
inline TruncationLevel make_level(const SpaceTimeField& f, const IntrinsicCylinder& cyl, Sign sign,
                                  double fraction) {
    auto clip = cylinder_clip(*f.grid, cyl, f.times);
    if (clip.empty()) throw std::invalid_argument("make_level: empty cylinder");
    TruncationLevel lv;
    lv.sign = sign;
    lv.mu_plus = -1e300;
    lv.mu_minus = 1e300;
    for (int k = clip.step_lo; k <= clip.step_hi; ++k)
        for (int c : clip.cells) {
            lv.mu_plus = std::max(lv.mu_plus, f.at_u(k, c));
            lv.mu_minus = std::min(lv.mu_minus, f.at_u(k, c));
        }
    lv.omega = lv.mu_plus - lv.mu_minus;
    lv.k = sign == Sign::plus ? lv.mu_plus - fraction * lv.omega : lv.mu_minus + fraction * lv.omega;
    return lv;
}

/// Truncated samples over the cylinder's cube window, extended by zero on
/// exterior cells (the boundary convention for truncations across the
/// lateral boundary). Carries one ring of cells beyond the cube so that
/// face gradients at the cube edge are well defined.
struct TruncationField {
    int i0 = 0, i1 = 0, j0 = 0, j1 = 0; // window cell ranges, ring included
    int step_lo = 0, step_hi = -1;
    std::vector<double> v;       // [(step-step_lo) * win + widx], zero outside E
    std::vector<int> global_id;  // active cell id or -1, per window index
    std::vector<std::uint8_t> in_cube;

    int wx() const { return i1 - i0; }
    int wy() const { return j1 - j0; }
    int widx(int i, int j) const { return (j - j0) * wx() + (i - i0); }
    int n_window() const { return wx() * wy(); }
    double at(int step, int wi) const {
        return v[static_cast<std::size_t>(step - step_lo) * n_window() + wi];
    }
};

inline TruncationField truncate(const SpaceTimeField& f, const TruncationLevel& lv,
                                const IntrinsicCylinder& cyl) {
    const DomainGrid& g = *f.grid;
    auto clip = cylinder_clip(g, cyl, f.times);
    TruncationField tf;
    const int m_lo_x = static_cast<int>(std::floor((cyl.x0 - cyl.rho) / g.h + 0.5));
    const int m_hi_x = static_cast<int>(std::ceil((cyl.x0 + cyl.rho) / g.h - 0.5));
    tf.i0 = m_lo_x - 1;
    tf.i1 = m_hi_x + 1;
    if (g.dim == 1) {
        tf.j0 = 0;
        tf.j1 = 1;
    } else {
        const int m_lo_y = static_cast<int>(std::floor((cyl.y0 - cyl.rho) / g.h + 0.5));
        const int m_hi_y = static_cast<int>(std::ceil((cyl.y0 + cyl.rho) / g.h - 0.5));
        tf.j0 = m_lo_y - 1;
        tf.j1 = m_hi_y + 1;
    }
    tf.step_lo = clip.step_lo;
    tf.step_hi = clip.step_hi;
    tf.global_id.assign(static_cast<std::size_t>(tf.n_window()), -1);
    tf.in_cube.assign(static_cast<std::size_t>(tf.n_window()), 0);
    for (int j = tf.j0; j < tf.j1; ++j)
        for (int i = tf.i0; i < tf.i1; ++i) {
            const int wi = tf.widx(i, j);
            tf.global_id[static_cast<std::size_t>(wi)] = g.id(i, j);
            const double dx = std::abs(g.cx(i) - cyl.x0);
            const double dy = g.dim == 1 ? 0.0 : std::abs(g.cy(j) - cyl.y0);
            tf.in_cube[static_cast<std::size_t>(wi)] = std::max(dx, dy) < cyl.rho ? 1 : 0;
        }
    if (tf.step_hi < tf.step_lo) return tf;
    tf.v.assign(static_cast<std::size_t>(tf.n_window()) * (tf.step_hi - tf.step_lo + 1), 0.0);
    for (int k = tf.step_lo; k <= tf.step_hi; ++k)
        for (int wi = 0; wi < tf.n_window(); ++wi) {
            const int c = tf.global_id[static_cast<std::size_t>(wi)];
            if (c >= 0)
                tf.v[static_cast<std::size_t>(k - tf.step_lo) * tf.n_window() + wi] =
                    truncated(f.at_u(k, c), lv.k, lv.sign);
        }
    return tf;
}

/// Space-time measure of [u < k] inside the clipped cylinder, h^N * dt per
/// sample (the initial slice carries no backward time weight).
inline double sublevel_measure(const SpaceTimeField& f, const IntrinsicCylinder& cyl, double k) {
    auto clip = cylinder_clip(*f.grid, cyl, f.times);
    double acc = 0.0;
    for (int s = std::max(clip.step_lo, 1); s <= clip.step_hi; ++s) {
        const double dts = f.times[static_cast<std::size_t>(s)] - f.times[static_cast<std::size_t>(s - 1)];
        long count = 0;
        for (int c : clip.cells)
            if (f.at_u(s, c) < k) ++count;
        acc += static_cast<double>(count) * dts;
    }
    return acc * f.grid->cell_volume();
}

/// Space-time measure of the whole clipped cylinder in the same convention.
inline double clipped_cylinder_measure(const SpaceTimeField& f, const IntrinsicCylinder& cyl) {
    auto clip = cylinder_clip(*f.grid, cyl, f.times);
    double acc = 0.0;
    for (int s = std::max(clip.step_lo, 1); s <= clip.step_hi; ++s)
        acc += f.times[static_cast<std::size_t>(s)] - f.times[static_cast<std::size_t>(s - 1)];
    return acc * static_cast<double>(clip.cells.size()) * f.grid->cell_volume();
}

/// Regularized singular mass paired with the cutoff's time derivative:
/// the latent defect of each sample integrated against |d/dt zeta^p|.
inline double phi_term(const SpaceTimeField& f, const RegularizedEnthalpy& enth,
                       const TruncationLevel& lv, const Cutoff& cutoff,
                       const IntrinsicCylinder& cyl) {
    const DomainGrid& g = *f.grid;
    auto clip = cylinder_clip(g, cyl, f.times);
    double acc = 0.0;
    for (int s = std::max(clip.step_lo, 1); s <= clip.step_hi; ++s) {
        const double dts = f.times[static_cast<std::size_t>(s)] - f.times[static_cast<std::size_t>(s - 1)];
        for (int c : clip.cells) {
            const auto [i, j] = g.cells[static_cast<std::size_t>(c)];
            const auto cs = eval_cutoff(cutoff, cyl, g.cx(i), g.cy(j), f.times[static_cast<std::size_t>(s)]);
            if (cs.dt_zeta_p == 0.0) continue;
            acc += dts * latent_defect(enth, f.at_u(s, c), lv.k, lv.sign) * cs.dt_zeta_p;
        }
    }
    return acc * g.cell_volume();
}

enum class EnergyVariant { full_with_latent, sign_restricted, latent_weighted, unsigned_power };

inline const char* to_string(EnergyVariant v) {
    switch (v) {
    case EnergyVariant::full_with_latent: return "full-with-latent";
    case EnergyVariant::sign_restricted: return "sign-restricted";
    case EnergyVariant::latent_weighted: return "latent-weighted";
    case EnergyVariant::unsigned_power: return "unsigned-power";
    }
    return "?";
}

/// Both sides of one energy inequality evaluated on a stored run. All terms
/// carry the sign conventions that make them non-negative; gamma_observed is
/// the ratio of the two sides and a diagnostic only.
struct EnergyReport {
    EnergyVariant variant = EnergyVariant::sign_restricted;
    Sign sign = Sign::plus;
    double k = 0.0;
    double sigma = 0.5;
    Cutoff::Kind cutoff_kind = Cutoff::Kind::space_time;
    double rho = 0.0;
    double theta = 0.0;
    double lhs_sup_term = 0.0;
    double lhs_grad_term = 0.0;
    double lhs_singular_term = 0.0;
    double rhs_grad_term = 0.0;
    double rhs_time_term = 0.0;
    double rhs_singular_term = 0.0;
    double rhs_initial_term = 0.0;
    double rhs_c2_term = 0.0;
    double gamma_observed = 0.0;
    bool degenerate = false;

    double lhs_total() const { return lhs_sup_term + lhs_grad_term + lhs_singular_term; }
    double rhs_total() const {
        return rhs_grad_term + rhs_time_term + rhs_singular_term + rhs_initial_term + rhs_c2_term;
    }
};

struct InadmissibleLevel : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

namespace detail_energy {

inline void check_admissibility(const SpaceTimeField& f, const ProblemSetup* ps,
                                TruncationLevel& lv, EnergyVariant variant,
                                const IntrinsicCylinder& cyl) {
    // sign conditions
    if (variant == EnergyVariant::sign_restricted) {
        if (lv.sign == Sign::plus && lv.k < 0.0)
            throw InadmissibleLevel("the sign-restricted variant needs k >= 0 for the plus truncation");
        if (lv.sign == Sign::minus && lv.k > 0.0)
            throw InadmissibleLevel("the sign-restricted variant needs k <= 0 for the minus truncation");
    }
    if (variant == EnergyVariant::latent_weighted) {
        if (lv.sign != Sign::minus)
            throw InadmissibleLevel("the latent-weighted variant applies to the minus truncation");
        if (lv.k < 0.0) throw InadmissibleLevel("the latent-weighted variant needs k >= 0");
    }
    // lateral trace restriction whenever the cube touches the boundary and a
    // Dirichlet datum is declared
    lv.boundary_restricted = false;
    if (!ps || ps->bc.kind != BcKind::dirichlet || !ps->bc.g) return;
    const DomainGrid& g = *f.grid;
    auto clip = cylinder_clip(g, cyl, f.times);
    if (clip.step_hi < clip.step_lo) return;
    double gs = -1e300, gi = 1e300;
    bool touched = false;
    for (const auto& face : g.faces().boundary) {
        const double dx = std::abs(face.bx - cyl.x0);
        const double dy = g.dim == 1 ? 0.0 : std::abs(face.by - cyl.y0);
        if (std::max(dx, dy) >= cyl.rho) continue;
        touched = true;
        for (int s = clip.step_lo; s <= clip.step_hi; ++s) {
            const double gv = ps->bc.g(face.bx, face.by, f.times[static_cast<std::size_t>(s)]);
            gs = std::max(gs, gv);
            gi = std::min(gi, gv);
        }
    }
    if (!touched) return;
    lv.boundary_restricted = true;
    lv.g_sup = gs;
    lv.g_inf = gi;
    if (lv.sign == Sign::plus && lv.k < gs - 1e-12)
        throw InadmissibleLevel("boundary truncation needs k >= sup g on the lateral trace");
    if (lv.sign == Sign::minus && lv.k > gi + 1e-12)
        throw InadmissibleLevel("boundary truncation needs k <= inf g on the lateral trace");
}

} // namespace detail_energy

/// Evaluates every term of the chosen energy inequality with midpoint
/// quadrature in space and right-endpoint quadrature in time; the essential
/// supremum over time is the max over stored steps.
inline EnergyReport caccioppoli_sides(const SpaceTimeField& f, const FluxModel& flux,
                                      const RegularizedEnthalpy& enth, TruncationLevel lv,
                                      const Cutoff& cutoff, EnergyVariant variant,
                                      const IntrinsicCylinder& cyl,
                                      const ProblemSetup* ps = nullptr, double c2 = 0.0) {
    (void)flux; // estimate constants absorb the structure bounds
    detail_energy::check_admissibility(f, ps, lv, variant, cyl);
    const DomainGrid& g = *f.grid;
    const double h = g.h;
    const double vol = g.cell_volume();
    auto tf = truncate(f, lv, cyl);

    EnergyReport rep;
    rep.variant = variant;
    rep.sign = lv.sign;
    rep.k = lv.k;
    rep.sigma = cutoff.sigma;
    rep.cutoff_kind = cutoff.kind;
    rep.rho = cyl.rho;
    rep.theta = cyl.theta;

    if (tf.step_hi < tf.step_lo || tf.v.empty()) {
        rep.degenerate = true;
        return rep;
    }

    const bool with_latent_lhs =
        variant == EnergyVariant::full_with_latent || variant == EnergyVariant::latent_weighted;
    const bool with_latent_rhs = with_latent_lhs;

    auto cutoff_at = [&](int i, int j, double t) {
        return eval_cutoff(cutoff, cyl, g.cx(i), g.cy(j), t);
    };

    double sup_combined = -1.0;
    for (int s = tf.step_lo; s <= tf.step_hi; ++s) {
        const double t = f.times[static_cast<std::size_t>(s)];
        double sq_term = 0.0, sing_term = 0.0;
        for (int j = tf.j0; j < tf.j1; ++j)
            for (int i = tf.i0; i < tf.i1; ++i) {
                const int wi = tf.widx(i, j);
                if (!tf.in_cube[static_cast<std::size_t>(wi)]) continue;
                const auto cs = cutoff_at(i, j, t);
                if (cs.zeta == 0.0) continue;
                const double zp = std::pow(cs.zeta, cyl.p);
                const double v = tf.at(s, wi);
                sq_term += zp * v * v;
                const int c = tf.global_id[static_cast<std::size_t>(wi)];
                if (c >= 0 && with_latent_lhs) {
                    const double u = f.at_u(s, c);
                    if (variant == EnergyVariant::latent_weighted)
                        sing_term += lv.k * residual_latent(enth, u) * zp;
                    else
                        sing_term += latent_defect(enth, u, lv.k, lv.sign) * zp;
                }
            }
        sq_term *= vol;
        sing_term *= vol;
        if (sq_term + sing_term > sup_combined) {
            sup_combined = sq_term + sing_term;
            rep.lhs_sup_term = sq_term;
            rep.lhs_singular_term = sing_term;
        }
    }

    // space-time integrals, right-endpoint in time
    for (int s = std::max(tf.step_lo, 1); s <= tf.step_hi; ++s) {
        const double t = f.times[static_cast<std::size_t>(s)];
        const double dts = t - f.times[static_cast<std::size_t>(s - 1)];
        // gradient of the truncation, once per face, averaged cutoff weight
        for (int j = tf.j0; j < tf.j1; ++j)
            for (int i = tf.i0; i < tf.i1; ++i) {
                const int wi = tf.widx(i, j);
                const auto ci = cutoff_at(i, j, t);
                // east and north faces inside the window
                const int neighbors[2][2] = {{i + 1, j}, {i, j + 1}};
                const int n_dirs = g.dim == 1 ? 1 : 2;
                for (int d = 0; d < n_dirs; ++d) {
                    const int ni = neighbors[d][0], nj = neighbors[d][1];
                    if (ni >= tf.i1 || nj >= tf.j1) continue;
                    const auto cn = cutoff_at(ni, nj, t);
                    const double zbar = 0.5 * (ci.zeta + cn.zeta);
                    if (zbar == 0.0) continue;
                    const double dv = (tf.at(s, tf.widx(ni, nj)) - tf.at(s, wi)) / h;
                    rep.lhs_grad_term +=
                        dts * vol * std::pow(zbar, cyl.p) * std::pow(std::abs(dv), cyl.p);
                }
                if (!tf.in_cube[static_cast<std::size_t>(wi)]) continue;
                const double v = tf.at(s, wi);
                rep.rhs_grad_term += dts * vol * std::pow(v, cyl.p) * std::pow(ci.grad_mag, cyl.p);
                rep.rhs_time_term += dts * vol * v * v * ci.dt_zeta_p;
                const int c = tf.global_id[static_cast<std::size_t>(wi)];
                if (c >= 0 && with_latent_rhs && ci.dt_zeta_p > 0.0) {
                    const double u = f.at_u(s, c);
                    if (variant == EnergyVariant::latent_weighted)
                        rep.rhs_singular_term +=
                            dts * vol * residual_latent(enth, u) * positive_part(lv.k - u) * ci.dt_zeta_p;
                    else
                        rep.rhs_singular_term +=
                            dts * vol * latent_defect(enth, u, lv.k, lv.sign) * ci.dt_zeta_p;
                }
                if (c >= 0 && c2 > 0.0 && v > 0.0)
                    rep.rhs_c2_term += dts * vol * c2 * c2 * ci.zeta * ci.zeta;
            }
    }

    // initial-time instance (nonzero only when the cutoff does not vanish at
    // the bottom of the span)
    {
        const int s = tf.step_lo;
        for (int j = tf.j0; j < tf.j1; ++j)
            for (int i = tf.i0; i < tf.i1; ++i) {
                const int wi = tf.widx(i, j);
                if (!tf.in_cube[static_cast<std::size_t>(wi)]) continue;
                const auto cs = cutoff_at(i, j, cyl.t_bottom());
                if (cs.zeta == 0.0) continue;
                const double zp = std::pow(cs.zeta, cyl.p);
                const double v = tf.at(s, wi);
                rep.rhs_initial_term += vol * zp * v * v;
                const int c = tf.global_id[static_cast<std::size_t>(wi)];
                if (c >= 0 && with_latent_rhs)
                    rep.rhs_initial_term += vol * zp * latent_defect(enth, f.at_u(s, c), lv.k, lv.sign);
            }
    }

    if (rep.rhs_total() <= 0.0) {
        rep.degenerate = true;
        rep.gamma_observed = 0.0;
    } else {
        rep.gamma_observed = rep.lhs_total() / rep.rhs_total();
    }
    return rep;
}

/// Energy sides for the variational-datum problem at p = 2, with the
/// flux-bound term C_2^2 * zeta^2 over the truncation support added to the
/// right-hand side.
inline EnergyReport neumann_energy_sides(const SpaceTimeField& f, const FluxModel& flux,
                                         const RegularizedEnthalpy& enth, const TruncationLevel& lv,
                                         const Cutoff& cutoff, const IntrinsicCylinder& cyl,
                                         double c2, const ProblemSetup* ps = nullptr) {
    if (flux.p != 2.0 || cyl.p != 2.0)
        throw std::invalid_argument("neumann_energy_sides: p = 2 only");
    auto rep = caccioppoli_sides(f, flux, enth, lv, cutoff, EnergyVariant::full_with_latent, cyl, ps, c2);
    return rep;
}

} // namespace stefanlab
