#pragma once

#include <chrono>
#include <filesystem>
#include <string>
#include <vector>

#include "stefanlab/config.hpp"
#include "stefanlab/io.hpp"
#include "stefanlab/stefan_reference.hpp"

namespace stefanlab {

namespace fs = std::filesystem;

inline const char* shape_name(ShapeKind k) {
    switch (k) {
    case ShapeKind::interval: return "interval";
    case ShapeKind::rectangle: return "rectangle";
    case ShapeKind::l_shape: return "l_shape";
    case ShapeKind::notched_corner: return "notched_corner";
    case ShapeKind::custom: return "custom";
    }
    return "?";
}

class StopWatch {
public:
    StopWatch() : start_(std::chrono::steady_clock::now()) {}
    double ms() const {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_)
            .count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

/// solve: run the stepper, write checkpoint + interface trajectory +
/// run summary + manifest.
inline int run_solve(const ExperimentConfig& cfg, const fs::path& out_dir, std::uint64_t seed = 1) {
    StopWatch watch;
    fs::create_directories(out_dir);
    auto ps = build_setup(cfg, cfg.eps(), nullptr, seed);
    auto field = solve(ps);

    std::vector<std::string> outputs;
    CheckpointHeader hdr{cfg.config_hash, shape_name(cfg.shape),  cfg.h, cfg.eps(),
                         cfg.p,           cfg.nu,                 ps.flux.grad_floor};
    write_checkpoint(out_dir / "checkpoint.bin", hdr, field);
    outputs.push_back("checkpoint.bin");

    if (ps.grid->dim == 1) {
        CsvWriter traj({"t[time]", "interface_x[length]"});
        for (int k = 0; k < field.n_steps(); ++k) {
            auto slice = field.step_u(k);
            const double x = zero_level_set_1d({slice.begin(), slice.end()}, ps.grid->h);
            if (x >= 0.0) traj.add_row({csv_num(field.times[static_cast<std::size_t>(k)]), csv_num(x)});
        }
        traj.write(out_dir / "interface_trajectory.csv");
        outputs.push_back("interface_trajectory.csv");
    }

    CsvWriter summary({"quantity", "value"});
    summary.add_row({"total_enthalpy_initial[energy]", csv_num(total_enthalpy(field, 0))});
    summary.add_row(
        {"total_enthalpy_final[energy]", csv_num(total_enthalpy(field, field.n_steps() - 1))});
    if (cfg.bc_kind == BcKind::dirichlet) {
        auto mp = max_principle_check(field, ps);
        summary.add_row({"max_principle_bound[temperature]", csv_num(mp.bound)});
        summary.add_row({"max_principle_margin[temperature]", csv_num(mp.margin)});
    }
    summary.write(out_dir / "run_summary.csv");
    outputs.push_back("run_summary.csv");

    write_manifest(out_dir / "manifest.json", cfg.config_hash, "solve", outputs, watch.ms());
    return 0;
}

/// measure: solve, then write oscillation series and model fits per anchor.
inline int run_measure(const ExperimentConfig& cfg, const fs::path& out_dir,
                       std::uint64_t seed = 1) {
    StopWatch watch;
    fs::create_directories(out_dir);
    auto ps = build_setup(cfg, cfg.eps(), nullptr, seed);
    auto field = solve(ps);

    auto series_writer = series_csv();
    auto fits_writer = fits_csv();
    for (const auto& anchor : cfg.anchors) {
        auto s = measure_oscillation(field, anchor, cfg.radius_schedule, cfg.p, cfg.xi);
        append_series(series_writer, s);
        auto rank = compare_models(s);
        for (const auto& fit : rank.fits) append_fit(fits_writer, anchor.id, fit);
    }
    series_writer.write(out_dir / "oscillation_series.csv");
    fits_writer.write(out_dir / "modulus_fits.csv");
    write_manifest(out_dir / "manifest.json", cfg.config_hash, "measure",
                   {"oscillation_series.csv", "modulus_fits.csv"}, watch.ms());
    return 0;
}

/// energy-check: solve, evaluate every requested inequality instance.
inline int run_energy_check(const ExperimentConfig& cfg, const fs::path& out_dir,
                            std::uint64_t seed = 1) {
    StopWatch watch;
    fs::create_directories(out_dir);
    auto ps = build_setup(cfg, cfg.eps(), nullptr, seed);
    auto field = solve(ps);

    auto w = energy_csv();
    for (const auto& req : cfg.energy_requests) {
        IntrinsicCylinder cyl = req.cylinder;
        cyl.p = cfg.p;
        for (double frac : req.level_fractions) {
            TruncationLevel lv = make_level(field, cyl, req.sign, frac);
            for (const auto& cutoff : req.cutoffs) {
                if (cfg.bc_kind == BcKind::neumann) {
                    append_energy(w, neumann_energy_sides(field, ps.flux, ps.enth, lv, cutoff, cyl,
                                                          cfg.c2_bound, &ps));
                } else {
                    append_energy(w, caccioppoli_sides(field, ps.flux, ps.enth, lv, cutoff,
                                                       req.variant, cyl, &ps));
                }
            }
        }
    }
    w.write(out_dir / "energy_reports.csv");
    write_manifest(out_dir / "manifest.json", cfg.config_hash, "energy-check",
                   {"energy_reports.csv"}, watch.ms());
    return 0;
}

/// recur: generate the requested scheme traces and tail fits.
inline int run_recur(const ExperimentConfig& cfg, const fs::path& out_dir) {
    StopWatch watch;
    fs::create_directories(out_dir);
    std::vector<std::string> outputs;
    auto fits = CsvWriter({"name", "model", "c[1]", "exponent[1]", "residual[log-scale]"});
    for (const auto& req : cfg.recurrence_requests) {
        IterationTrace tr;
        switch (req.spec.scheme) {
        case SchemeKind::slow_type:
        case SchemeKind::power_type:
            tr = iterate_type(req.spec, req.omega0, req.n_max);
            break;
        case SchemeKind::lateral:
            tr = iterate_boundary_scheme(req.spec, req.omega0, req.rho0, req.r_stop, req.n_max);
            break;
        case SchemeKind::interior:
            tr = iterate_interior_scheme(req.spec, req.omega0, req.rho0, req.r_stop, req.n_max);
            break;
        case SchemeKind::flux_bounded:
            tr = iterate_neumann_scheme(req.spec, req.omega0, req.rho0, req.r_stop, req.n_max);
            break;
        }
        auto w = trace_csv();
        const long stride = std::max<long>(1, tr.size() / 10000);
        append_trace(w, tr, stride);
        const std::string fname = "trace_" + req.name + ".csv";
        w.write(out_dir / fname);
        outputs.push_back(fname);
        if (tr.size() >= 100) {
            const auto model = req.spec.scheme == SchemeKind::slow_type ? ExponentModel::log_in_n
                                                                     : ExponentModel::power_in_n;
            auto fit = asymptotic_exponent(tr, model);
            fits.add_row({req.name,
                          model == ExponentModel::log_in_n ? "log-in-n" : "power-in-n",
                          csv_num(fit.c), csv_num(fit.s), csv_num(fit.rms)});
        }
    }
    fits.write(out_dir / "recurrence_fits.csv");
    outputs.push_back("recurrence_fits.csv");
    write_manifest(out_dir / "manifest.json", cfg.config_hash, "recur", outputs, watch.ms());
    return 0;
}

/// sweep: per-width runs, shared-anchor fits, pairwise distance table.
inline int run_sweep(const ExperimentConfig& cfg, const fs::path& out_dir, std::uint64_t seed = 1) {
    StopWatch watch;
    fs::create_directories(out_dir);
    auto ps = build_setup(cfg, cfg.eps(), nullptr, seed);
    auto rep = equicontinuity_sweep(ps, cfg.eps_list, cfg.anchors, cfg.radius_schedule, cfg.xi);

    auto fits = CsvWriter(
        {"eps[temperature]", "anchor_id", "model", "C[temperature]", "exponent[1]", "residual[log-scale]"});
    for (std::size_t i = 0; i < rep.eps_values.size(); ++i)
        for (std::size_t a = 0; a < cfg.anchors.size(); ++a) {
            const auto& f = rep.fits[i][a];
            fits.add_row({csv_num(rep.eps_values[i]), cfg.anchors[a].id, to_string(f.model),
                          csv_num(f.amplitude), csv_num(f.exponent), csv_num(f.residual)});
        }
    fits.write(out_dir / "sweep_fits.csv");

    auto dist = CsvWriter({"eps_a[temperature]", "eps_b[temperature]", "sup_distance[temperature]"});
    for (std::size_t i = 0; i < rep.eps_values.size(); ++i)
        for (std::size_t k = i + 1; k < rep.eps_values.size(); ++k)
            dist.add_row({csv_num(rep.eps_values[i]), csv_num(rep.eps_values[k]),
                          csv_num(rep.sup_distance[i][k])});
    dist.write(out_dir / "sweep_distances.csv");

    nlohmann::json extra;
    extra["spread_amplitude"] = rep.spread_amplitude;
    extra["spread_exponent"] = rep.spread_exponent;
    extra["distances_monotone"] = rep.distances_monotone;
    write_manifest(out_dir / "manifest.json", cfg.config_hash, "sweep",
                   {"sweep_fits.csv", "sweep_distances.csv"}, watch.ms(), extra);
    return 0;
}

/// oracle stefan1d: emit the similarity-solution reference table.
inline int run_oracle_stefan1d(double stefan_number, double t0, double t1, int n_rows,
                               const fs::path& out_dir) {
    StopWatch watch;
    fs::create_directories(out_dir);
    auto sim = StefanSimilarity::make(stefan_number);
    auto table = stefan_reference_table(sim, t0, t1, n_rows);
    CsvWriter w({"t[time]", "interface_x[length]"});
    for (const auto& row : table) w.add_row({csv_num(row.t), csv_num(row.interface_position)});
    w.write(out_dir / "oracle_stefan1d.csv");
    nlohmann::json extra;
    extra["lambda"] = sim.lambda;
    extra["stefan_number"] = stefan_number;
    write_manifest(out_dir / "manifest.json", hex64(fnv1a64("oracle")), "oracle stefan1d",
                   {"oracle_stefan1d.csv"}, watch.ms(), extra);
    return 0;
}

} // namespace stefanlab
