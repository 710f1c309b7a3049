#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "stefanlab/energy.hpp"
#include "stefanlab/field.hpp"
#include "stefanlab/geometry.hpp"
#include "stefanlab/solver.hpp"
#include "stefanlab/util.hpp"

namespace stefanlab {

enum class AnchorKind { interior, lateral, initial };

inline const char* to_string(AnchorKind k) {
    switch (k) {
    case AnchorKind::interior: return "interior";
    case AnchorKind::lateral: return "lateral";
    case AnchorKind::initial: return "initial";
    }
    return "?";
}

struct Anchor {
    double x = 0.0;
    double y = 0.0;
    double t = 0.0;
    AnchorKind kind = AnchorKind::interior;
    std::string id = "anchor";
};

struct OscillationEntry {
    double r = 0.0;
    double theta_used = 1.0;
    double osc = 0.0;
    long n_samples = 0;
};

/// Oscillation of a stored run over shrinking cylinders at one anchor. The
/// time scaling follows the measured oscillation of the previous cylinder,
/// so the family is nested by construction and the series non-increasing.
struct OscillationSeries {
    Anchor anchor;
    std::vector<OscillationEntry> entries;
    double omega0 = 0.0;  // oscillation over the first cylinder
    double rho0 = 0.0;    // first radius
    double rho_bar = 1.0; // certified geometry radius, used by log fits
};

struct EmptyCylinder : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Measures max-min of u over each clipped cylinder of the schedule. For
/// p > 2 the time scaling is (xi * current_osc)^(2-p) with the oscillation
/// measured on the previous (larger) cylinder; for p = 2 it is one.
inline OscillationSeries measure_oscillation(const SpaceTimeField& f, const Anchor& anchor,
                                             const std::vector<double>& schedule, double p,
                                             double xi = 0.1) {
    if (schedule.empty()) throw std::invalid_argument("measure_oscillation: empty schedule");
    for (std::size_t i = 0; i + 1 < schedule.size(); ++i)
        if (!(schedule[i + 1] < schedule[i]))
            throw std::invalid_argument("measure_oscillation: schedule must decrease");
    if (!(p >= 2.0)) throw std::invalid_argument("measure_oscillation: p must be >= 2");

    OscillationSeries series;
    series.anchor = anchor;
    series.rho_bar = f.grid->rho_bar > 0.0 ? f.grid->rho_bar : 1.0;
    series.rho0 = schedule.front();

    double current = f.global_osc();
    double prev_depth = 1e300;
    double prev_osc = 1e300;
    for (double r : schedule) {
        if (r < 2.0 * f.grid->h)
            throw std::invalid_argument("measure_oscillation: radius below two cells");
        const double theta = p == 2.0 ? 1.0 : intrinsic_theta(std::max(xi * current, 1e-300), p);
        IntrinsicCylinder cyl{anchor.x, anchor.y, anchor.t, r, theta, p};
        if (cyl.time_depth() > prev_depth * (1.0 + 1e-12))
            throw std::invalid_argument("measure_oscillation: schedule breaks cylinder nesting");
        prev_depth = cyl.time_depth();
        auto clip = cylinder_clip(*f.grid, cyl, f.times);
        if (clip.empty())
            throw EmptyCylinder("measure_oscillation: no samples at radius " + format_double(r));
        double hi = -1e300, lo = 1e300;
        for (int s = clip.step_lo; s <= clip.step_hi; ++s)
            for (int c : clip.cells) {
                hi = std::max(hi, f.at_u(s, c));
                lo = std::min(lo, f.at_u(s, c));
            }
        const double osc = hi - lo;
        if (osc > prev_osc + 1e-12)
            throw std::logic_error("measure_oscillation: oscillation increased on a nested cylinder");
        prev_osc = osc;
        series.entries.push_back({r, theta, osc, clip.n_samples()});
        if (series.entries.size() == 1) series.omega0 = osc;
        current = std::max(osc, 1e-300);
    }
    return series;
}

enum class ModulusModel { double_log, single_log, power_law };

inline const char* to_string(ModulusModel m) {
    switch (m) {
    case ModulusModel::double_log: return "doubly-log";
    case ModulusModel::single_log: return "log";
    case ModulusModel::power_law: return "power";
    }
    return "?";
}

struct ModulusFit {
    ModulusModel model = ModulusModel::single_log;
    double amplitude = 0.0; // C
    double exponent = 0.0;  // s (log models) or a (power model)
    double residual = 0.0;  // rms on the transformed (log-oscillation) scale
};

/// Least squares on the linearized model form. All three models regress
/// ln(osc), so residuals are comparable across models:
///   doubly-log: ln osc = ln C - s ln ln ln(rho_bar / r)   [needs r < rho_bar/e]
///   log:        ln osc = ln C - s ln ln(rho_bar / r)      [needs r < rho_bar]
///   power:      ln osc = ln C + a ln r.
inline ModulusFit fit_modulus(const OscillationSeries& series, ModulusModel model,
                              double rho_bar_override = -1.0) {
    const double rho_bar = rho_bar_override > 0.0 ? rho_bar_override : series.rho_bar;
    std::vector<double> xs, ys;
    long positive = 0;
    for (const auto& e : series.entries)
        if (e.osc > 0.0) ++positive;
    if (positive < 4) throw std::invalid_argument("fit_modulus: need >= 4 entries with osc > 0");
    for (const auto& e : series.entries) {
        if (!(e.osc > 0.0)) throw std::invalid_argument("fit_modulus: nonpositive oscillation entry");
        double x = 0.0;
        switch (model) {
        case ModulusModel::power_law:
            x = std::log(e.r);
            break;
        case ModulusModel::single_log: {
            if (!(e.r < rho_bar))
                throw std::invalid_argument("fit_modulus: log models need r < rho_bar");
            x = std::log(std::log(rho_bar / e.r));
            break;
        }
        case ModulusModel::double_log: {
            const double inner = std::log(rho_bar / e.r);
            if (!(inner > 1.0))
                throw std::invalid_argument("fit_modulus: the doubly-log model needs r < rho_bar/e");
            x = std::log(std::log(inner));
            break;
        }
        }
        xs.push_back(x);
        ys.push_back(std::log(e.osc));
    }
    auto lf = fit_line(xs, ys);
    ModulusFit fit;
    fit.model = model;
    fit.residual = lf.rms;
    if (model == ModulusModel::power_law) {
        fit.amplitude = std::exp(lf.intercept);
        fit.exponent = lf.slope;
    } else {
        fit.amplitude = std::exp(lf.intercept);
        fit.exponent = -lf.slope;
    }
    return fit;
}

struct ModelRanking {
    std::vector<ModulusFit> fits; // sorted by residual, best first
    ModulusModel winner = ModulusModel::single_log;
    double runner_up_ratio = 0.0; // winner residual / runner-up residual
    bool single_log_drift = false;   // log-model exponent grows on nested tails
};

/// Fits every applicable model and ranks by residual. A power-law series
/// masquerading as a log fit shows an exponent that drifts upward when the
/// fit window is truncated toward small radii; that drift is flagged.
inline ModelRanking compare_models(const OscillationSeries& series) {
    ModelRanking rank;
    for (auto m : {ModulusModel::double_log, ModulusModel::single_log, ModulusModel::power_law}) {
        try {
            rank.fits.push_back(fit_modulus(series, m));
        } catch (const std::invalid_argument&) {
            // model not applicable on this radius range; skip
        }
    }
    if (rank.fits.empty()) throw std::invalid_argument("compare_models: no applicable model");
    std::stable_sort(rank.fits.begin(), rank.fits.end(),
                     [](const ModulusFit& a, const ModulusFit& b) { return a.residual < b.residual; });
    rank.winner = rank.fits.front().model;
    rank.runner_up_ratio =
        rank.fits.size() > 1 ? rank.fits.front().residual / std::max(rank.fits[1].residual, 1e-300)
                             : 0.0;

    // drift diagnostic on nested tail windows
    if (series.entries.size() >= 8) {
        std::vector<double> s_values;
        for (int denom : {1, 2, 4}) {
            OscillationSeries tail = series;
            const std::size_t keep = std::max<std::size_t>(4, series.entries.size() / denom);
            tail.entries.assign(series.entries.end() - keep, series.entries.end());
            try {
                s_values.push_back(fit_modulus(tail, ModulusModel::single_log).exponent);
            } catch (const std::invalid_argument&) {
                break;
            }
        }
        if (s_values.size() == 3 && s_values[1] > s_values[0] * 1.05 &&
            s_values[2] > s_values[1] * 1.05)
            rank.single_log_drift = true;
    }
    return rank;
}

struct EnvelopeFit {
    ModulusFit fit;      // least-squares shape
    double scale = 1.0;  // factor lifting the fit until it dominates
    double residual = 0.0;
    bool dominates = true;
};

/// Logarithmic dominating envelope: the least-squares fit scaled up until it
/// clears every entry. Any positive decreasing series admits one; the fitted
/// exponent reports the observed decay rate on the log scale.
inline EnvelopeFit log_envelope(const OscillationSeries& series,
                                    double rho_bar_override = -1.0) {
    EnvelopeFit env;
    env.fit = fit_modulus(series, ModulusModel::single_log, rho_bar_override);
    const double rho_bar = rho_bar_override > 0.0 ? rho_bar_override : series.rho_bar;
    for (const auto& e : series.entries) {
        const double shape = env.fit.amplitude * std::pow(std::log(rho_bar / e.r), -env.fit.exponent);
        if (shape > 0.0) env.scale = std::max(env.scale, e.osc / shape);
    }
    double ss = 0.0;
    for (const auto& e : series.entries) {
        const double val = env.scale * env.fit.amplitude *
                           std::pow(std::log(rho_bar / e.r), -env.fit.exponent);
        if (e.osc > val * (1.0 + 1e-9)) env.dominates = false;
        ss += (val - e.osc) * (val - e.osc);
    }
    env.residual = std::sqrt(ss / static_cast<double>(series.entries.size()));
    return env;
}

/// Dominating envelope for the decay at the initial level:
/// c1 (r/rho)^a + c2 w_o(sqrt(r rho)) + c3 w_g(sqrt(r rho)).
struct InitialDecayReport {
    OscillationSeries series;
    double c1 = 0.0, a = 0.5, c2 = 0.0, c3 = 0.0;
    double residual = 0.0; // rms of envelope minus oscillation
    bool dominated = true;
};

/// Measures forward-in-time oscillation on Q^+_r = K_r x (0, theta r^p] at
/// an initial-level anchor and fits the dominating three-term envelope; the
/// envelope is scaled up until it clears every measured value.
inline InitialDecayReport initial_layer_decay(const SpaceTimeField& f, const Anchor& anchor,
                                              const std::vector<double>& schedule, double p,
                                              const std::function<double(double)>& omega_o,
                                              const std::function<double(double)>& omega_g,
                                              double xi = 0.1) {
    if (anchor.t != 0.0)
        throw std::invalid_argument("initial_layer_decay: anchor must sit on the initial level");
    InitialDecayReport rep;
    rep.series.anchor = anchor;
    rep.series.rho_bar = f.grid->rho_bar > 0.0 ? f.grid->rho_bar : 1.0;
    rep.series.rho0 = schedule.empty() ? 0.0 : schedule.front();
    const double rho = rep.series.rho0;

    double current = f.global_osc();
    for (double r : schedule) {
        if (r < 2.0 * f.grid->h)
            throw std::invalid_argument("initial_layer_decay: radius below two cells");
        const double theta = p == 2.0 ? 1.0 : intrinsic_theta(std::max(xi * current, 1e-300), p);
        // forward cylinder: vertex at the top of the span
        IntrinsicCylinder cyl{anchor.x, anchor.y, theta * std::pow(r, p), r, theta, p};
        if (cyl.t0 > f.times.back() + 1e-12)
            throw std::invalid_argument("initial_layer_decay: forward cylinder exceeds the run");
        auto clip = cylinder_clip(*f.grid, cyl, f.times);
        if (clip.cells.empty()) throw EmptyCylinder("initial_layer_decay: no cells at the anchor");
        double hi = -1e300, lo = 1e300;
        for (int s = std::max(clip.step_lo, 0); s <= clip.step_hi; ++s)
            for (int c : clip.cells) {
                hi = std::max(hi, f.at_u(s, c));
                lo = std::min(lo, f.at_u(s, c));
            }
        // the initial slice belongs to the forward cylinder
        for (int c : clip.cells) {
            hi = std::max(hi, f.at_u(0, c));
            lo = std::min(lo, f.at_u(0, c));
        }
        rep.series.entries.push_back({r, theta, hi - lo, clip.n_samples()});
        if (rep.series.entries.size() == 1) rep.series.omega0 = hi - lo;
        current = std::max(hi - lo, 1e-300);
    }

    // envelope fit: grid-search the power exponent, non-negative least
    // squares on the three amplitudes by iterated clamping
    const auto& es = rep.series.entries;
    double best_obj = 1e300;
    // the power exponent is a parabolic constant, not a free shape: keep it
    // away from zero so the basis cannot imitate a logarithmic tail
    for (double a_try : {0.5, 0.75, 1.0}) {
        std::vector<std::array<double, 3>> basis;
        for (const auto& e : es)
            basis.push_back({std::pow(e.r / rho, a_try), omega_o(std::sqrt(e.r * rho)),
                             omega_g(std::sqrt(e.r * rho))});
        // 3x3 normal equations with clamping of negative coefficients
        double coef[3] = {0, 0, 0};
        bool active[3] = {true, true, true};
        for (int pass = 0; pass < 4; ++pass) {
            double m[3][3] = {{0}}, rhs[3] = {0, 0, 0};
            for (std::size_t i = 0; i < es.size(); ++i)
                for (int aidx = 0; aidx < 3; ++aidx) {
                    if (!active[aidx]) continue;
                    rhs[aidx] += basis[i][aidx] * es[i].osc;
                    for (int bidx = 0; bidx < 3; ++bidx)
                        if (active[bidx]) m[aidx][bidx] += basis[i][aidx] * basis[i][bidx];
                }
            // solve the (active) system by Gaussian elimination with pivoting
            int idx[3] = {0, 1, 2};
            double mm[3][4];
            int na = 0;
            for (int aidx = 0; aidx < 3; ++aidx)
                if (active[aidx]) idx[na++] = aidx;
            for (int r1 = 0; r1 < na; ++r1) {
                for (int c1 = 0; c1 < na; ++c1) mm[r1][c1] = m[idx[r1]][idx[c1]];
                mm[r1][na] = rhs[idx[r1]];
            }
            for (int col = 0; col < na; ++col) {
                int piv = col;
                for (int r1 = col + 1; r1 < na; ++r1)
                    if (std::abs(mm[r1][col]) > std::abs(mm[piv][col])) piv = r1;
                std::swap(mm[col], mm[piv]);
                if (std::abs(mm[col][col]) < 1e-14) {
                    mm[col][col] = 1.0;
                    mm[col][na] = 0.0;
                }
                for (int r1 = 0; r1 < na; ++r1) {
                    if (r1 == col) continue;
                    const double fct = mm[r1][col] / mm[col][col];
                    for (int c1 = col; c1 <= na; ++c1) mm[r1][c1] -= fct * mm[col][c1];
                }
            }
            coef[0] = coef[1] = coef[2] = 0.0;
            for (int r1 = 0; r1 < na; ++r1) coef[idx[r1]] = mm[r1][na] / mm[r1][r1];
            bool changed = false;
            for (int aidx = 0; aidx < 3; ++aidx)
                if (active[aidx] && coef[aidx] < 0.0) {
                    active[aidx] = false;
                    changed = true;
                }
            if (!changed) break;
        }
        for (int aidx = 0; aidx < 3; ++aidx) coef[aidx] = std::max(coef[aidx], 0.0);
        // scale up to dominate
        double scale = 1.0;
        for (std::size_t i = 0; i < es.size(); ++i) {
            const double env = coef[0] * basis[i][0] + coef[1] * basis[i][1] + coef[2] * basis[i][2];
            if (es[i].osc > 0.0 && env > 0.0) scale = std::max(scale, es[i].osc / env);
            if (es[i].osc > 0.0 && env == 0.0) scale = 1e300;
        }
        if (scale >= 1e300) continue;
        double obj = 0.0;
        for (std::size_t i = 0; i < es.size(); ++i) {
            const double env =
                scale * (coef[0] * basis[i][0] + coef[1] * basis[i][1] + coef[2] * basis[i][2]);
            obj += (env - es[i].osc) * (env - es[i].osc);
        }
        obj = std::sqrt(obj / static_cast<double>(es.size()));
        if (obj < best_obj) {
            best_obj = obj;
            rep.a = a_try;
            rep.c1 = scale * coef[0];
            rep.c2 = scale * coef[1];
            rep.c3 = scale * coef[2];
            rep.residual = obj;
        }
    }
    if (best_obj >= 1e300) {
        // all-zero series: the zero envelope dominates trivially
        rep.c1 = rep.c2 = rep.c3 = 0.0;
        rep.residual = 0.0;
    }
    for (const auto& e : es) {
        const double env = rep.c1 * std::pow(e.r / rho, rep.a) + rep.c2 * omega_o(std::sqrt(e.r * rho)) +
                           rep.c3 * omega_g(std::sqrt(e.r * rho));
        if (e.osc > env * (1.0 + 1e-9) + 1e-15) rep.dominated = false;
    }
    return rep;
}

/// Result of one width-family sweep: per-width fits at the shared anchors
/// plus the pairwise sup-distance table.
struct SweepReport {
    std::vector<double> eps_values;
    std::vector<std::vector<ModulusFit>> fits; // [eps][anchor]
    std::vector<std::vector<OscillationSeries>> series;
    std::vector<std::vector<double>> sup_distance; // symmetric matrix
    double spread_amplitude = 0.0;                 // max over anchors of (max-min)/mid
    double spread_exponent = 0.0;
    bool distances_monotone = true; // consecutive-pair distances non-increasing
};

/// Solves the same problem for every width in eps_list (each halving the
/// previous), measures the oscillation series at the shared anchors, fits
/// the logarithmic model per width, and tabulates sup distances.
inline SweepReport equicontinuity_sweep(const ProblemSetup& base, const std::vector<double>& eps_list,
                                        const std::vector<Anchor>& anchors,
                                        const std::vector<double>& schedule, double xi = 0.1) {
    if (eps_list.size() < 3)
        throw std::invalid_argument("equicontinuity_sweep: need at least three widths");
    for (std::size_t i = 0; i + 1 < eps_list.size(); ++i)
        if (std::abs(eps_list[i + 1] - 0.5 * eps_list[i]) > 1e-12 * eps_list[i])
            throw std::invalid_argument("equicontinuity_sweep: widths must halve");
    SweepReport rep;
    rep.eps_values = eps_list;
    std::vector<SpaceTimeField> fields;
    for (double eps : eps_list) {
        ProblemSetup ps = base;
        ps.enth = RegularizedEnthalpy(base.enth.graph, eps, base.enth.kernel);
        fields.push_back(solve(ps));
        std::vector<ModulusFit> fits;
        std::vector<OscillationSeries> series;
        for (const auto& anchor : anchors) {
            auto s = measure_oscillation(fields.back(), anchor, schedule, base.flux.p, xi);
            fits.push_back(fit_modulus(s, ModulusModel::single_log));
            series.push_back(std::move(s));
        }
        rep.fits.push_back(std::move(fits));
        rep.series.push_back(std::move(series));
    }
    const std::size_t ne = eps_list.size();
    rep.sup_distance.assign(ne, std::vector<double>(ne, 0.0));
    for (std::size_t i = 0; i < ne; ++i)
        for (std::size_t j = i + 1; j < ne; ++j) {
            if (fields[i].u.size() != fields[j].u.size())
                throw std::logic_error("equicontinuity_sweep: stored sample mismatch");
            double d = 0.0;
            for (std::size_t k = 0; k < fields[i].u.size(); ++k)
                d = std::max(d, std::abs(fields[i].u[k] - fields[j].u[k]));
            rep.sup_distance[i][j] = rep.sup_distance[j][i] = d;
        }
    for (std::size_t i = 0; i + 2 < ne; ++i)
        if (rep.sup_distance[i + 1][i + 2] > rep.sup_distance[i][i + 1] + 1e-15)
            rep.distances_monotone = false;
    for (std::size_t a = 0; a < anchors.size(); ++a) {
        double c_lo = 1e300, c_hi = -1e300, s_lo = 1e300, s_hi = -1e300;
        for (std::size_t i = 0; i < ne; ++i) {
            c_lo = std::min(c_lo, rep.fits[i][a].amplitude);
            c_hi = std::max(c_hi, rep.fits[i][a].amplitude);
            s_lo = std::min(s_lo, rep.fits[i][a].exponent);
            s_hi = std::max(s_hi, rep.fits[i][a].exponent);
        }
        const double c_mid = 0.5 * (c_hi + c_lo);
        const double s_mid = 0.5 * (s_hi + s_lo);
        rep.spread_amplitude =
            std::max(rep.spread_amplitude, c_mid != 0.0 ? (c_hi - c_lo) / std::abs(c_mid) : 0.0);
        rep.spread_exponent =
            std::max(rep.spread_exponent, s_mid != 0.0 ? (s_hi - s_lo) / std::abs(s_mid) : 0.0);
    }
    return rep;
}

} // namespace stefanlab
