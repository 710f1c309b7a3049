#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <queue>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "stefanlab/util.hpp"

namespace stefanlab {

enum class ShapeKind { interval, rectangle, l_shape, notched_corner, custom };

/// Shape descriptor for the built-in test geometries, all anchored on the
/// unit square (unit interval in 1D). The notched corner removes the quarter
/// square [3/4,1]^2; the L removes [1/2,1]^2.
struct ShapeSpec {
    ShapeKind kind = ShapeKind::rectangle;
    std::vector<std::uint8_t> custom_mask; // row-major, custom shapes only
    int custom_nx = 0;
    int custom_ny = 0;
};

/// One grid face. Interior faces join two active cells; boundary faces carry
/// their center and outward normal.
struct Face {
    int cell_a = -1;
    int cell_b = -1; // -1 for boundary faces
    double bx = 0.0, by = 0.0;
    double nx_ = 0.0, ny_ = 0.0;
};

struct FaceSet {
    std::vector<Face> interior;
    std::vector<Face> boundary;
};

/// Cell-centered rectilinear domain over [0,1]^dim. Cells are h-cubes; the
/// lateral boundary nodes are lattice vertices that touch both the domain and
/// its complement.
struct DomainGrid {
    int dim = 2;
    double h = 0.0;
    int nx = 0;
    int ny = 1;
    std::vector<std::uint8_t> mask;          // nx*ny cell inclusion flags
    std::vector<int> cell_id;                // nx*ny -> active index or -1
    std::vector<std::pair<int, int>> cells;  // active cell (i, j)
    std::vector<std::pair<int, int>> lateral_nodes; // vertex lattice coords
    double alpha_star = 0.0; // measure-density defect certified over rho_bar
    double rho_bar = 0.0;

    mutable std::shared_ptr<const FaceSet> face_cache; // built on first use

    bool in_mask(int i, int j) const {
        if (i < 0 || i >= nx || j < 0 || j >= ny) return false;
        return mask[static_cast<std::size_t>(j) * nx + i] != 0;
    }
    int id(int i, int j) const {
        if (i < 0 || i >= nx || j < 0 || j >= ny) return -1;
        return cell_id[static_cast<std::size_t>(j) * nx + i];
    }
    double cx(int i) const { return (i + 0.5) * h; }
    double cy(int j) const { return dim == 1 ? 0.0 : (j + 0.5) * h; }
    int n_active() const { return static_cast<int>(cells.size()); }
    double cell_volume() const { return dim == 1 ? h : h * h; }
    double domain_volume() const { return n_active() * cell_volume(); }

    const FaceSet& faces() const {
        if (!face_cache) {
            auto fs = std::make_shared<FaceSet>();
            const int dx[] = {1, -1, 0, 0};
            const int dy[] = {0, 0, 1, -1};
            const int dirs = dim == 1 ? 2 : 4;
            for (int c = 0; c < n_active(); ++c) {
                const auto [i, j] = cells[static_cast<std::size_t>(c)];
                for (int d = 0; d < dirs; ++d) {
                    const int nb = id(i + dx[d], j + dy[d]);
                    if (nb >= 0) {
                        if (nb > c) fs->interior.push_back({c, nb, 0, 0, 0, 0});
                    } else {
                        Face f;
                        f.cell_a = c;
                        f.nx_ = dx[d];
                        f.ny_ = dy[d];
                        f.bx = cx(i) + 0.5 * h * dx[d];
                        f.by = dim == 1 ? 0.0 : cy(j) + 0.5 * h * dy[d];
                        fs->boundary.push_back(f);
                    }
                }
            }
            face_cache = std::move(fs);
        }
        return *face_cache;
    }
};

namespace detail {

inline void check_connected(const DomainGrid& g) {
    if (g.cells.empty()) throw std::invalid_argument("domain mask is empty");
    std::vector<std::uint8_t> seen(g.cells.size(), 0);
    std::queue<int> q;
    q.push(0);
    seen[0] = 1;
    int reached = 1;
    const int dx[] = {1, -1, 0, 0};
    const int dy[] = {0, 0, 1, -1};
    while (!q.empty()) {
        const auto [i, j] = g.cells[static_cast<std::size_t>(q.front())];
        q.pop();
        for (int d = 0; d < 4; ++d) {
            const int n = g.id(i + dx[d], j + dy[d]);
            if (n >= 0 && !seen[n]) {
                seen[n] = 1;
                ++reached;
                q.push(n);
            }
        }
    }
    if (reached != g.n_active())
        throw std::invalid_argument("domain mask is disconnected");
}

inline void collect_lateral_nodes(DomainGrid& g) {
    g.lateral_nodes.clear();
    const int jv_hi = g.dim == 1 ? 1 : g.ny + 1;
    for (int jv = 0; jv < jv_hi; ++jv) {
        for (int iv = 0; iv <= g.nx; ++iv) {
            bool touches_in = false, touches_out = false;
            for (int dj = -1; dj <= 0; ++dj) {
                for (int di = -1; di <= 0; ++di) {
                    const int j = g.dim == 1 ? 0 : jv + dj;
                    if (g.dim == 1 && dj == -1) continue;
                    (g.in_mask(iv + di, j) ? touches_in : touches_out) = true;
                }
            }
            if (touches_in && touches_out) g.lateral_nodes.emplace_back(iv, jv);
        }
    }
}

} // namespace detail

/// Builds the discrete domain at mesh width h. Fails when a shape feature is
/// finer than two cells or when the mask is disconnected.
inline DomainGrid build_domain(const ShapeSpec& spec, double h) {
    if (!(h > 0.0)) throw std::invalid_argument("build_domain: mesh width must be positive");
    DomainGrid g;
    g.h = h;
    const int n = static_cast<int>(std::lround(1.0 / h));
    if (spec.kind != ShapeKind::custom && std::abs(n * h - 1.0) > 1e-9)
        throw std::invalid_argument("build_domain: h must divide the unit box");
    auto feature_check = [&](double feature) {
        if (feature < 2.0 * h)
            throw std::invalid_argument("build_domain: resolution too coarse for shape feature");
    };
    switch (spec.kind) {
    case ShapeKind::interval:
        g.dim = 1;
        g.nx = n;
        g.ny = 1;
        feature_check(1.0);
        g.mask.assign(static_cast<std::size_t>(g.nx), 1);
        break;
    case ShapeKind::rectangle:
        g.dim = 2;
        g.nx = g.ny = n;
        feature_check(1.0);
        g.mask.assign(static_cast<std::size_t>(n) * n, 1);
        break;
    case ShapeKind::l_shape:
    case ShapeKind::notched_corner: {
        g.dim = 2;
        g.nx = g.ny = n;
        const double cut = spec.kind == ShapeKind::l_shape ? 0.5 : 0.75;
        feature_check(1.0 - cut);
        g.mask.assign(static_cast<std::size_t>(n) * n, 1);
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i)
                if (g.cx(i) > cut && g.cy(j) > cut) g.mask[static_cast<std::size_t>(j) * n + i] = 0;
        break;
    }
    case ShapeKind::custom: {
        g.dim = 2;
        g.nx = spec.custom_nx;
        g.ny = spec.custom_ny;
        if (g.nx <= 0 || g.ny <= 0 ||
            spec.custom_mask.size() != static_cast<std::size_t>(g.nx) * g.ny)
            throw std::invalid_argument("build_domain: malformed custom mask");
        g.mask = spec.custom_mask;
        break;
    }
    }
    if (g.dim == 1) g.ny = 1;
    g.cell_id.assign(g.mask.size(), -1);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            if (g.mask[static_cast<std::size_t>(j) * g.nx + i]) {
                g.cell_id[static_cast<std::size_t>(j) * g.nx + i] = static_cast<int>(g.cells.size());
                g.cells.emplace_back(i, j);
            }
    detail::check_connected(g);
    detail::collect_lateral_nodes(g);
    return g;
}

/// |E ∩ K_rho(x_o)| / |K_rho| by exact cell counting. x_o is a lateral node
/// (lattice vertex); rho is snapped to an integer multiple of h.
inline double measure_density(const DomainGrid& g, std::pair<int, int> node, double rho) {
    const int m = static_cast<int>(std::lround(rho / g.h));
    if (m < 2) throw std::invalid_argument("measure_density: radius below two cells");
    const auto [iv, jv] = node;
    long count = 0;
    if (g.dim == 1) {
        for (int i = iv - m; i < iv + m; ++i)
            if (g.in_mask(i, 0)) ++count;
        return static_cast<double>(count) / (2.0 * m);
    }
    for (int j = jv - m; j < jv + m; ++j)
        for (int i = iv - m; i < iv + m; ++i)
            if (g.in_mask(i, j)) ++count;
    return static_cast<double>(count) / (4.0 * static_cast<double>(m) * m);
}

struct Certification {
    double alpha_star = 0.0;
    double rho_bar = 0.0;
};

/// Certifies the measure-density constant: alpha_star = 1 minus the largest
/// interior fraction seen over all lateral nodes and tested radii. Stores the
/// result on the grid.
inline Certification certify_alpha_star(DomainGrid& g, const std::vector<double>& rho_list) {
    if (rho_list.empty()) throw std::invalid_argument("certify_alpha_star: empty radius list");
    double worst = 0.0;
    double rho_max = 0.0;
    for (double rho : rho_list) {
        rho_max = std::max(rho_max, rho);
        for (const auto& node : g.lateral_nodes)
            worst = std::max(worst, measure_density(g, node, rho));
    }
    if (worst >= 1.0)
        throw std::runtime_error("certify_alpha_star: measure-density condition violated (mask corruption)");
    Certification c{1.0 - worst, rho_max};
    if (!(c.alpha_star > 0.0))
        throw std::runtime_error("certify_alpha_star: nonpositive density constant");
    g.alpha_star = c.alpha_star;
    g.rho_bar = c.rho_bar;
    return c;
}

/// Degenerate-scaling time factor (xi*omega)^(2-p).
inline double intrinsic_theta(double xi_omega, double p) {
    if (!(xi_omega > 0.0) || !(p >= 2.0))
        throw std::invalid_argument("intrinsic_theta: need xi_omega > 0 and p >= 2");
    return std::pow(xi_omega, 2.0 - p);
}

/// Singular-scaling time factor (delta*xi*omega)^(1-p); longer than the
/// intrinsic one whenever the arguments sit below one.
inline double singular_theta(double delta_xi_omega, double p) {
    if (!(delta_xi_omega > 0.0) || !(p >= 2.0))
        throw std::invalid_argument("singular_theta: need positive argument and p >= 2");
    return std::pow(delta_xi_omega, 1.0 - p);
}

/// Backward space-time cylinder K_rho(x_o) x (t_o - theta rho^p, t_o].
struct IntrinsicCylinder {
    double x0 = 0.0;
    double y0 = 0.0;
    double t0 = 0.0;
    double rho = 0.0;
    double theta = 1.0;
    double p = 2.0;

    double time_depth() const { return theta * std::pow(rho, p); }
    double t_bottom() const { return t0 - time_depth(); }
};

/// Start-cylinder compatibility: theta_tilde (8 rho)^p <= rho^(p-1).
inline bool nesting_precondition(double theta_tilde, double rho, double p) {
    return theta_tilde * std::pow(8.0 * rho, p) <= std::pow(rho, p - 1.0);
}

struct CylinderClip {
    std::vector<int> cells;  // active-cell ids with centers inside the cube
    int step_lo = 0;         // first stored step inside the time span
    int step_hi = -1;        // last stored step (the vertex time)
    bool clipped_at_initial = false;

    bool empty() const { return cells.empty() || step_hi < step_lo; }
    long n_samples() const {
        return empty() ? 0 : static_cast<long>(cells.size()) * (step_hi - step_lo + 1);
    }
};

/// Intersects the cylinder with the grid and a stored time axis. Cells are
/// selected by center; steps t with t_bottom < t <= t0. A span reaching below
/// the first stored time is clipped there and flagged.
inline CylinderClip cylinder_clip(const DomainGrid& g, const IntrinsicCylinder& c,
                                  const std::vector<double>& times) {
    CylinderClip clip;
    const double slack = 1e-12 * std::max(1.0, std::abs(c.t0));
    for (int id = 0; id < g.n_active(); ++id) {
        const auto [i, j] = g.cells[static_cast<std::size_t>(id)];
        const double dx = std::abs(g.cx(i) - c.x0);
        const double dy = g.dim == 1 ? 0.0 : std::abs(g.cy(j) - c.y0);
        if (std::max(dx, dy) < c.rho) clip.cells.push_back(id);
    }
    const double t_bot = c.t_bottom();
    if (!times.empty() && t_bot < times.front() - slack) clip.clipped_at_initial = true;
    clip.step_lo = -1;
    clip.step_hi = -1;
    for (int k = 0; k < static_cast<int>(times.size()); ++k) {
        if (times[k] > t_bot + slack && times[k] <= c.t0 + slack) {
            if (clip.step_lo < 0) clip.step_lo = k;
            clip.step_hi = k;
        }
    }
    if (clip.step_lo < 0) {
        clip.step_lo = 0;
        clip.step_hi = -1;
    }
    return clip;
}

} // namespace stefanlab
