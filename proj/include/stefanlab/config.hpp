#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stefanlab/catalog.hpp"
#include "stefanlab/geometry.hpp"
#include "stefanlab/modulus.hpp"
#include "stefanlab/recurrence.hpp"
#include "stefanlab/solver.hpp"

namespace stefanlab {

struct ConfigError : std::runtime_error {
    std::vector<std::string> violations;
    explicit ConfigError(std::vector<std::string> v)
        : std::runtime_error(join(v)), violations(std::move(v)) {}
    static std::string join(const std::vector<std::string>& v) {
        std::ostringstream os;
        os << "invalid config:";
        for (const auto& s : v) os << "\n  - " << s;
        return os.str();
    }
};

/// Energy-check request: variant + level offsets + cutoffs on one cylinder.
struct EnergyRequest {
    EnergyVariant variant = EnergyVariant::sign_restricted;
    Sign sign = Sign::plus;
    std::vector<double> level_fractions = {0.25};
    std::vector<Cutoff> cutoffs = {{Cutoff::Kind::space_time, 0.5}};
    IntrinsicCylinder cylinder;
};

struct RecurrenceRequest {
    std::string name = "trace";
    RecurrenceSpec spec;
    double omega0 = 0.5;
    double rho0 = 0.125;
    double r_stop = 0.0;
    long n_max = 10000;
};

/// Full experiment description parsed from JSON. Unknown keys anywhere are
/// rejected; all violations are reported together.
struct ExperimentConfig {
    std::string raw_bytes; // exact file contents, hashed into manifests
    std::string config_hash;

    ShapeKind shape = ShapeKind::interval;
    std::vector<std::uint8_t> custom_mask;
    int custom_nx = 0;
    int custom_ny = 0;
    double h = 1.0 / 64;
    double p = 2.0;
    double nu = 1.0;
    std::vector<double> eps_list = {0.01};
    BcKind bc_kind = BcKind::dirichlet;
    CatalogEntry g_entry;
    CatalogEntry psi_entry;
    double c2_bound = 0.0;
    CatalogEntry u0_entry;
    double t_final = 0.1;

    double dt = 1e-3;
    double newton_tol = 1e-10;
    int max_iters = 60;
    double grad_floor = -1.0; // negative: default by p

    std::vector<Anchor> anchors;
    std::vector<double> radius_schedule;
    double xi = 0.1;
    std::vector<double> certify_radii;
    std::vector<EnergyRequest> energy_requests;
    std::vector<RecurrenceRequest> recurrence_requests;

    int stride = 1;

    double eps() const { return eps_list.front(); }
};

namespace detail_config {

inline void expect_keys(const nlohmann::json& j, const std::vector<std::string>& allowed,
                        const std::string& where, std::vector<std::string>& errs) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const auto& k : allowed)
            if (it.key() == k) known = true;
        if (!known) errs.push_back(where + ": unknown key '" + it.key() + "'");
    }
}

inline CatalogEntry parse_catalog(const nlohmann::json& j, const std::string& where,
                                  std::vector<std::string>& errs) {
    CatalogEntry e;
    expect_keys(j,
                {"name", "value", "a", "bx", "by", "scale", "offset", "width", "base", "amp",
                 "lambda", "x0", "y0"},
                where, errs);
    e.name = j.value("name", "constant");
    e.value = j.value("value", 0.0);
    e.a = j.value("a", 0.0);
    e.bx = j.value("bx", 0.0);
    e.by = j.value("by", 0.0);
    e.scale = j.value("scale", 1.0);
    e.offset = j.value("offset", 0.0);
    e.width = j.value("width", 1.0);
    e.base = j.value("base", 0.0);
    e.amp = j.value("amp", 1.0);
    e.lambda = j.value("lambda", 1.0);
    e.x0 = j.value("x0", 0.0);
    e.y0 = j.value("y0", 0.0);
    try {
        catalog_eval(e, 0.1, 0.1);
    } catch (const std::invalid_argument& ex) {
        errs.push_back(where + ": " + ex.what());
    }
    return e;
}

inline ShapeKind parse_shape(const std::string& s, std::vector<std::string>& errs) {
    if (s == "interval") return ShapeKind::interval;
    if (s == "rectangle") return ShapeKind::rectangle;
    if (s == "l_shape") return ShapeKind::l_shape;
    if (s == "notched_corner") return ShapeKind::notched_corner;
    if (s == "custom") return ShapeKind::custom;
    errs.push_back("problem.domain.shape: unknown shape '" + s + "'");
    return ShapeKind::interval;
}

} // namespace detail_config

inline ExperimentConfig parse_config(const std::string& raw) {
    using nlohmann::json;
    std::vector<std::string> errs;
    json j;
    try {
        j = json::parse(raw);
    } catch (const json::parse_error& e) {
        throw ConfigError({std::string("json parse error: ") + e.what()});
    }
    ExperimentConfig cfg;
    cfg.raw_bytes = raw;
    cfg.config_hash = hex64(fnv1a64(raw));

    detail_config::expect_keys(j, {"problem", "solver", "analysis", "output"}, "top level", errs);

    if (!j.contains("problem")) {
        errs.push_back("missing block 'problem'");
    } else {
        const auto& pj = j["problem"];
        detail_config::expect_keys(
            pj, {"domain", "p", "nu", "eps", "eps_list", "bc", "g", "psi", "c2", "u0", "t_final"},
            "problem", errs);
        if (pj.contains("domain")) {
            const auto& dj = pj["domain"];
            detail_config::expect_keys(dj, {"shape", "h", "nx", "ny", "mask"}, "problem.domain",
                                       errs);
            cfg.shape = detail_config::parse_shape(dj.value("shape", "interval"), errs);
            cfg.h = dj.value("h", 1.0 / 64);
            if (!(cfg.h > 0.0)) errs.push_back("problem.domain.h: must be positive");
            if (cfg.shape == ShapeKind::custom) {
                cfg.custom_nx = dj.value("nx", 0);
                cfg.custom_ny = dj.value("ny", 0);
                if (dj.contains("mask"))
                    for (const auto& m : dj["mask"])
                        cfg.custom_mask.push_back(m.get<int>() ? 1 : 0);
                if (cfg.custom_nx <= 0 || cfg.custom_ny <= 0 ||
                    cfg.custom_mask.size() !=
                        static_cast<std::size_t>(cfg.custom_nx) * cfg.custom_ny)
                    errs.push_back("problem.domain: custom shape needs nx, ny and an nx*ny mask");
            } else if (dj.contains("mask") || dj.contains("nx") || dj.contains("ny")) {
                errs.push_back("problem.domain: mask/nx/ny apply to the custom shape only");
            }
        } else {
            errs.push_back("problem: missing 'domain'");
        }
        cfg.p = pj.value("p", 2.0);
        if (!(cfg.p >= 2.0)) errs.push_back("problem.p: must satisfy p >= 2");
        cfg.nu = pj.value("nu", 1.0);
        if (!(cfg.nu > 0.0)) errs.push_back("problem.nu: latent heat must be positive");
        if (pj.contains("eps") && pj.contains("eps_list"))
            errs.push_back("problem: give either 'eps' or 'eps_list', not both");
        if (pj.contains("eps_list"))
            cfg.eps_list = pj["eps_list"].get<std::vector<double>>();
        else if (pj.contains("eps"))
            cfg.eps_list = {pj["eps"].get<double>()};
        for (double e : cfg.eps_list)
            if (!(e > 0.0 && e < 1.0)) errs.push_back("problem.eps: widths must lie in (0,1)");
        const std::string bc = pj.value("bc", "dirichlet");
        if (bc == "dirichlet")
            cfg.bc_kind = BcKind::dirichlet;
        else if (bc == "neumann")
            cfg.bc_kind = BcKind::neumann;
        else
            errs.push_back("problem.bc: must be 'dirichlet' or 'neumann'");
        if (cfg.bc_kind == BcKind::neumann && cfg.p != 2.0)
            errs.push_back("problem.bc: the variational-datum problem is supported at p = 2 only");
        if (pj.contains("g")) cfg.g_entry = detail_config::parse_catalog(pj["g"], "problem.g", errs);
        if (pj.contains("psi"))
            cfg.psi_entry = detail_config::parse_catalog(pj["psi"], "problem.psi", errs);
        cfg.c2_bound = pj.value("c2", 0.0);
        if (pj.contains("u0"))
            cfg.u0_entry = detail_config::parse_catalog(pj["u0"], "problem.u0", errs);
        cfg.t_final = pj.value("t_final", 0.1);
        if (!(cfg.t_final >= 0.0)) errs.push_back("problem.t_final: must be >= 0");
    }

    if (j.contains("solver")) {
        const auto& sj = j["solver"];
        detail_config::expect_keys(sj, {"dt", "newton_tol", "max_iters", "grad_floor"}, "solver",
                                   errs);
        cfg.dt = sj.value("dt", 1e-3);
        if (!(cfg.dt > 0.0)) errs.push_back("solver.dt: must be positive");
        cfg.newton_tol = sj.value("newton_tol", 1e-10);
        if (!(cfg.newton_tol > 0.0)) errs.push_back("solver.newton_tol: must be positive");
        cfg.max_iters = sj.value("max_iters", 60);
        if (cfg.max_iters < 1) errs.push_back("solver.max_iters: must be >= 1");
        cfg.grad_floor = sj.value("grad_floor", -1.0);
    }

    if (j.contains("analysis")) {
        const auto& aj = j["analysis"];
        detail_config::expect_keys(
            aj, {"anchors", "radius_schedule", "xi", "certify_radii", "energy", "recurrence"},
            "analysis", errs);
        if (aj.contains("anchors")) {
            for (const auto& an : aj["anchors"]) {
                detail_config::expect_keys(an, {"x", "y", "t", "kind", "id"}, "analysis.anchors",
                                           errs);
                Anchor a;
                a.x = an.value("x", 0.5);
                a.y = an.value("y", 0.0);
                a.t = an.value("t", 0.0);
                const std::string k = an.value("kind", "interior");
                if (k == "interior")
                    a.kind = AnchorKind::interior;
                else if (k == "lateral")
                    a.kind = AnchorKind::lateral;
                else if (k == "initial")
                    a.kind = AnchorKind::initial;
                else
                    errs.push_back("analysis.anchors.kind: unknown kind '" + k + "'");
                a.id = an.value("id", "anchor" + std::to_string(cfg.anchors.size()));
                cfg.anchors.push_back(a);
            }
        }
        if (aj.contains("radius_schedule"))
            cfg.radius_schedule = aj["radius_schedule"].get<std::vector<double>>();
        cfg.xi = aj.value("xi", 0.1);
        if (aj.contains("certify_radii"))
            cfg.certify_radii = aj["certify_radii"].get<std::vector<double>>();
        if (aj.contains("energy")) {
            for (const auto& ej : aj["energy"]) {
                detail_config::expect_keys(
                    ej, {"variant", "sign", "level_fractions", "cutoffs", "cylinder"},
                    "analysis.energy", errs);
                EnergyRequest req;
                const std::string v = ej.value("variant", "sign-restricted");
                if (v == "full-with-latent")
                    req.variant = EnergyVariant::full_with_latent;
                else if (v == "sign-restricted")
                    req.variant = EnergyVariant::sign_restricted;
                else if (v == "latent-weighted")
                    req.variant = EnergyVariant::latent_weighted;
                else if (v == "unsigned-power")
                    req.variant = EnergyVariant::unsigned_power;
                else
                    errs.push_back("analysis.energy.variant: unknown variant '" + v + "'");
                req.sign = ej.value("sign", "plus") == std::string("minus") ? Sign::minus : Sign::plus;
                if (ej.contains("level_fractions"))
                    req.level_fractions = ej["level_fractions"].get<std::vector<double>>();
                if (ej.contains("cutoffs")) {
                    req.cutoffs.clear();
                    for (const auto& cj : ej["cutoffs"]) {
                        detail_config::expect_keys(cj, {"kind", "sigma"}, "analysis.energy.cutoffs",
                                                   errs);
                        Cutoff c;
                        c.kind = cj.value("kind", "space-time") == std::string("space-only")
                                     ? Cutoff::Kind::space_only
                                     : Cutoff::Kind::space_time;
                        c.sigma = cj.value("sigma", 0.5);
                        if (!(c.sigma > 0.0 && c.sigma < 1.0))
                            errs.push_back("analysis.energy.cutoffs.sigma: must lie in (0,1)");
                        req.cutoffs.push_back(c);
                    }
                }
                if (ej.contains("cylinder")) {
                    const auto& cy = ej["cylinder"];
                    detail_config::expect_keys(cy, {"x", "y", "t", "rho", "theta"},
                                               "analysis.energy.cylinder", errs);
                    req.cylinder.x0 = cy.value("x", 0.5);
                    req.cylinder.y0 = cy.value("y", 0.0);
                    req.cylinder.t0 = cy.value("t", cfg.t_final);
                    req.cylinder.rho = cy.value("rho", 0.125);
                    req.cylinder.theta = cy.value("theta", 1.0);
                    req.cylinder.p = cfg.p;
                } else {
                    errs.push_back("analysis.energy: missing 'cylinder'");
                }
                cfg.energy_requests.push_back(req);
            }
        }
        if (aj.contains("recurrence")) {
            for (const auto& rj : aj["recurrence"]) {
                detail_config::expect_keys(rj,
                                           {"name", "scheme", "eta", "q", "p", "dim", "xi",
                                            "xi_bar", "cg", "lambda", "c2", "gamma_c2", "kappa",
                                            "l_o", "omega0", "rho0", "r_stop", "n_max"},
                                           "analysis.recurrence", errs);
                RecurrenceRequest req;
                req.name = rj.value("name", "trace" + std::to_string(cfg.recurrence_requests.size()));
                const std::string sc = rj.value("scheme", "power-type");
                if (sc == "slow-type")
                    req.spec.scheme = SchemeKind::slow_type;
                else if (sc == "power-type")
                    req.spec.scheme = SchemeKind::power_type;
                else if (sc == "lateral")
                    req.spec.scheme = SchemeKind::lateral;
                else if (sc == "interior")
                    req.spec.scheme = SchemeKind::interior;
                else if (sc == "flux-bounded")
                    req.spec.scheme = SchemeKind::flux_bounded;
                else
                    errs.push_back("analysis.recurrence.scheme: unknown scheme '" + sc + "'");
                req.spec.eta = rj.value("eta", 0.5);
                req.spec.q = rj.value("q", 1.0);
                req.spec.p = rj.value("p", cfg.p);
                req.spec.dim = rj.value("dim", cfg.shape == ShapeKind::interval ? 1 : 2);
                req.spec.xi = rj.value("xi", 0.1);
                req.spec.xi_bar = rj.value("xi_bar", 0.1);
                req.spec.g_feed = {rj.value("cg", 0.0), rj.value("lambda", 1.0)};
                req.spec.c2 = rj.value("c2", 0.0);
                req.spec.gamma_c2 = rj.value("gamma_c2", 1.0);
                req.spec.kappa = rj.value("kappa", 1.0);
                req.spec.l_o = rj.value("l_o", 1.0);
                req.omega0 = rj.value("omega0", 0.5);
                req.rho0 = rj.value("rho0", 0.125);
                req.r_stop = rj.value("r_stop", 0.0);
                req.n_max = rj.value("n_max", 10000L);
                cfg.recurrence_requests.push_back(req);
            }
        }
    }

    if (j.contains("output")) {
        const auto& oj = j["output"];
        detail_config::expect_keys(oj, {"stride"}, "output", errs);
        cfg.stride = oj.value("stride", 1);
        if (cfg.stride < 1) errs.push_back("output.stride: must be >= 1");
    }

    if (!errs.empty()) throw ConfigError(errs);
    return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError({"cannot read config file " + path.string()});
    std::ostringstream os;
    os << in.rdbuf();
    return parse_config(os.str());
}

/// Materializes the runnable problem for one regularization width, including
/// the sampled admissibility checks on declared data moduli.
inline ProblemSetup build_setup(const ExperimentConfig& cfg, double eps,
                                std::shared_ptr<const DomainGrid> grid = nullptr,
                                std::uint64_t seed = 1) {
    std::shared_ptr<const DomainGrid> g = grid;
    if (!g) {
        ShapeSpec shape{cfg.shape, cfg.custom_mask, cfg.custom_nx, cfg.custom_ny};
        auto built = std::make_shared<DomainGrid>(build_domain(shape, cfg.h));
        if (!cfg.certify_radii.empty()) certify_alpha_star(*built, cfg.certify_radii);
        g = built;
    }
    double floor_value = cfg.grad_floor;
    if (floor_value < 0.0) {
        // default: zero at p = 2, otherwise 1e-8 relative to the data scale
        double scale = 1.0;
        for (int i = 0; i <= 32; ++i)
            for (int j = 0; j <= 32; ++j) {
                const double x = i / 32.0, y = j / 32.0;
                scale = std::max(scale, std::abs(catalog_eval(cfg.u0_entry, x, y)));
                scale = std::max(scale, std::abs(catalog_eval(cfg.g_entry, x, y)));
            }
        floor_value = cfg.p > 2.0 ? 1e-8 * scale : 0.0;
    }
    ProblemSetup ps{g, FluxModel(cfg.p, floor_value), BoundaryData{},
                    RegularizedEnthalpy(EnthalpyGraph(cfg.nu), eps)};
    ps.bc.kind = cfg.bc_kind;
    const CatalogEntry ge = cfg.g_entry, ue = cfg.u0_entry, pe = cfg.psi_entry;
    ps.bc.g = [ge](double x, double y, double) { return catalog_eval(ge, x, y); };
    ps.bc.u0 = [ue](double x, double y) { return catalog_eval(ue, x, y); };
    ps.bc.psi = [pe](double x, double y, double, double) { return catalog_eval(pe, x, y); };
    ps.bc.c2_bound = cfg.c2_bound;
    ps.bc.g_modulus = catalog_modulus(cfg.g_entry);
    ps.bc.u0_modulus = catalog_modulus(cfg.u0_entry);
    ps.cfg.dt = cfg.dt;
    ps.cfg.newton_tol = cfg.newton_tol;
    ps.cfg.max_iters = cfg.max_iters;
    ps.cfg.store_stride = cfg.stride;
    ps.t_final = cfg.t_final;

    // declared-modulus sampling checks
    if (cfg.bc_kind == BcKind::dirichlet) {
        auto rep = check_declared_modulus(cfg.g_entry, ps.bc.g_modulus, 200, seed);
        if (!rep.ok) throw ConfigError({"problem.g: declared modulus violated by sampling"});
    }
    auto rep0 = check_declared_modulus(cfg.u0_entry, ps.bc.u0_modulus, 200, seed + 1);
    if (!rep0.ok) throw ConfigError({"problem.u0: declared modulus violated by sampling"});
    if (cfg.bc_kind == BcKind::neumann && cfg.c2_bound > 0.0) {
        Rng rng(seed + 2);
        for (int i = 0; i < 200; ++i) {
            const double v = catalog_eval(cfg.psi_entry, rng.uniform(), rng.uniform());
            if (std::abs(v) > cfg.c2_bound * (1.0 + 1e-12))
                throw ConfigError({"problem.psi: samples exceed the declared bound c2"});
        }
    }
    return ps;
}

} // namespace stefanlab
