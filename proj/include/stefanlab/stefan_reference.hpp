#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace stefanlab {

/// Closed-form similarity solution of the classical one-phase melting
/// problem on a half line: wall held at u_wall > 0, medium initially solid at
/// the transition temperature. The front sits at 2*lambda*sqrt(t) where
/// lambda solves lambda * exp(lambda^2) * erf(lambda) = St / sqrt(pi),
/// St = u_wall / latent_heat.
struct StefanSimilarity {
    double stefan_number = 1.0;
    double lambda = 0.0;

    static StefanSimilarity make(double stefan_number, double tol = 1e-12) {
        if (!(stefan_number > 0.0))
            throw std::invalid_argument("StefanSimilarity: Stefan number must be positive");
        if (!(tol > 0.0)) throw std::invalid_argument("StefanSimilarity: tolerance must be positive");
        auto fn = [&](double l) {
            return l * std::exp(l * l) * std::erf(l) - stefan_number / std::sqrt(M_PI);
        };
        double lo = 1e-12, hi = 1.0;
        while (fn(hi) < 0.0) hi *= 2.0; // bracket grows monotonically
        for (int it = 0; it < 400 && hi - lo > tol; ++it) {
            const double mid = 0.5 * (lo + hi);
            (fn(mid) < 0.0 ? lo : hi) = mid;
        }
        StefanSimilarity s;
        s.stefan_number = stefan_number;
        s.lambda = 0.5 * (lo + hi);
        return s;
    }

    double interface_position(double t) const { return 2.0 * lambda * std::sqrt(t); }

    /// Temperature profile: u_wall scaled similarity shape in the liquid,
    /// zero in the solid.
    double temperature(double x, double t, double u_wall) const {
        if (t <= 0.0) return x <= 0.0 ? u_wall : 0.0;
        const double xi = x / (2.0 * std::sqrt(t));
        if (xi >= lambda) return 0.0;
        return u_wall * (1.0 - std::erf(xi) / std::erf(lambda));
    }
};

/// Reference table rows for CSV export.
struct StefanTableRow {
    double t;
    double interface_position;
};

inline std::vector<StefanTableRow> stefan_reference_table(const StefanSimilarity& s, double t0,
                                                          double t1, int n_rows) {
    if (n_rows < 1 || !(t1 >= t0) || t0 < 0.0)
        throw std::invalid_argument("stefan_reference_table: bad sampling window");
    std::vector<StefanTableRow> rows;
    rows.reserve(static_cast<std::size_t>(n_rows));
    for (int i = 0; i < n_rows; ++i) {
        const double t = n_rows == 1 ? t0 : t0 + (t1 - t0) * i / (n_rows - 1);
        rows.push_back({t, s.interface_position(t)});
    }
    return rows;
}

/// Zero level set of a 1D stored slice by linear interpolation between cell
/// centers; the enthalpy-method front marker. Returns a negative value when
/// the slice does not change sign.
inline double zero_level_set_1d(const std::vector<double>& u, double h) {
    for (std::size_t i = 0; i + 1 < u.size(); ++i) {
        if ((u[i] > 0.0 && u[i + 1] <= 0.0) || (u[i] < 0.0 && u[i + 1] >= 0.0)) {
            const double x0 = (static_cast<double>(i) + 0.5) * h;
            const double frac = u[i] / (u[i] - u[i + 1]);
            return x0 + frac * h;
        }
    }
    return -1.0;
}

} // namespace stefanlab
