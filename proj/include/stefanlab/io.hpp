#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stefanlab/energy.hpp"
#include "stefanlab/field.hpp"
#include "stefanlab/modulus.hpp"
#include "stefanlab/recurrence.hpp"
#include "stefanlab/util.hpp"
#include "stefanlab/version.hpp"

namespace stefanlab {

/// Minimal CSV writer with deterministic number formatting. Every table
/// starts with a header row naming the units of each column.
class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header) : header_(std::move(header)) {}

    void add_row(const std::vector<std::string>& cells) {
        if (cells.size() != header_.size())
            throw std::invalid_argument("CsvWriter: row width mismatch");
        rows_.push_back(cells);
    }

    std::string str() const {
        std::ostringstream os;
        join(os, header_);
        for (const auto& r : rows_) join(os, r);
        return os.str();
    }

    void write(const std::filesystem::path& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("CsvWriter: cannot open " + path.string());
        out << str();
    }

private:
    static void join(std::ostringstream& os, const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) os << ',';
            os << cells[i];
        }
        os << '\n';
    }
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

inline std::string csv_num(double v) { return format_double(v); }

inline CsvWriter series_csv() {
    return CsvWriter({"anchor_id", "kind", "r[length]", "theta[time/length^p]", "osc[temperature]"});
}

inline void append_series(CsvWriter& w, const OscillationSeries& s) {
    for (const auto& e : s.entries)
        w.add_row({s.anchor.id, to_string(s.anchor.kind), csv_num(e.r), csv_num(e.theta_used),
                   csv_num(e.osc)});
}

inline CsvWriter fits_csv() {
    return CsvWriter({"anchor_id", "model", "C[temperature]", "exponent[1]", "residual[log-scale]"});
}

inline void append_fit(CsvWriter& w, const std::string& anchor_id, const ModulusFit& f) {
    w.add_row({anchor_id, to_string(f.model), csv_num(f.amplitude), csv_num(f.exponent),
               csv_num(f.residual)});
}

inline CsvWriter energy_csv() {
    return CsvWriter({"variant", "sign", "k[temperature]", "sigma[1]", "cutoff", "rho[length]",
                      "theta[time/length^p]", "lhs_sup", "lhs_grad", "lhs_singular", "rhs_grad",
                      "rhs_time", "rhs_singular", "rhs_initial", "rhs_c2", "gamma_observed[1]",
                      "degenerate"});
}

inline void append_energy(CsvWriter& w, const EnergyReport& r) {
    w.add_row({to_string(r.variant), to_string(r.sign), csv_num(r.k), csv_num(r.sigma),
               r.cutoff_kind == Cutoff::Kind::space_only ? "space-only" : "space-time",
               csv_num(r.rho), csv_num(r.theta), csv_num(r.lhs_sup_term), csv_num(r.lhs_grad_term),
               csv_num(r.lhs_singular_term), csv_num(r.rhs_grad_term), csv_num(r.rhs_time_term),
               csv_num(r.rhs_singular_term), csv_num(r.rhs_initial_term), csv_num(r.rhs_c2_term),
               csv_num(r.gamma_observed), r.degenerate ? "1" : "0"});
}

inline CsvWriter trace_csv() {
    return CsvWriter({"n[1]", "omega[temperature]", "rho[length]", "theta[time/length^p]",
                      "theta_tilde[time/length^p]"});
}

inline void append_trace(CsvWriter& w, const IterationTrace& tr, long stride = 1) {
    for (long n = 0; n < tr.size(); n += stride) {
        const double rho = tr.log_rho.empty() ? 0.0 : tr.rho(n);
        const double th = tr.theta.empty() ? 0.0 : tr.theta[static_cast<std::size_t>(n)];
        const double tht =
            tr.theta_tilde.empty() ? 0.0 : tr.theta_tilde[static_cast<std::size_t>(n)];
        w.add_row({std::to_string(n), csv_num(tr.omega[static_cast<std::size_t>(n)]), csv_num(rho),
                   csv_num(th), csv_num(tht)});
    }
}

/// Checkpoint: one file per run. A JSON header line carries the config hash
/// and the run's physical parameters; the body is little-endian 64-bit
/// floats, the full u block then the full w block, step-major.
struct CheckpointHeader {
    std::string config_hash;
    std::string shape;
    double h = 0.0;
    double eps = 0.0;
    double p = 2.0;
    double nu = 1.0;
    double grad_floor = 0.0;
    long n_steps = 0;
    long n_cells = 0;
};

inline void write_checkpoint(const std::filesystem::path& path, const CheckpointHeader& hdr,
                             const SpaceTimeField& f) {
    nlohmann::json j;
    j["config_hash"] = hdr.config_hash;
    j["shape"] = hdr.shape;
    j["h"] = hdr.h;
    j["eps"] = hdr.eps;
    j["p"] = hdr.p;
    j["nu"] = hdr.nu;
    j["grad_floor"] = hdr.grad_floor;
    j["n_steps"] = f.n_steps();
    j["n_cells"] = f.n_cells();
    j["layout"] = "u then w, step-major, little-endian f64";
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_checkpoint: cannot open " + path.string());
    out << j.dump() << '\n';
    auto dump_block = [&](const std::vector<double>& block) {
        for (double v : block) {
            std::uint64_t bits;
            std::memcpy(&bits, &v, sizeof(bits));
            unsigned char bytes[8];
            for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(bits >> (8 * i));
            out.write(reinterpret_cast<const char*>(bytes), 8);
        }
    };
    dump_block(f.times);
    dump_block(f.u);
    dump_block(f.w);
}

struct Checkpoint {
    CheckpointHeader header;
    std::vector<double> times;
    std::vector<double> u;
    std::vector<double> w;
};

inline Checkpoint read_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_checkpoint: cannot open " + path.string());
    std::string line;
    std::getline(in, line);
    auto j = nlohmann::json::parse(line);
    Checkpoint cp;
    cp.header.config_hash = j.at("config_hash").get<std::string>();
    cp.header.shape = j.at("shape").get<std::string>();
    cp.header.h = j.at("h").get<double>();
    cp.header.eps = j.at("eps").get<double>();
    cp.header.p = j.at("p").get<double>();
    cp.header.nu = j.at("nu").get<double>();
    cp.header.grad_floor = j.value("grad_floor", 0.0);
    cp.header.n_steps = j.at("n_steps").get<long>();
    cp.header.n_cells = j.at("n_cells").get<long>();
    const long n = cp.header.n_steps, m = cp.header.n_cells;
    if (n < 0 || m < 0 || (m > 0 && n > 1000000000L / m))
        throw std::runtime_error("read_checkpoint: implausible header dimensions");
    auto read_block = [&](std::vector<double>& block, long count) {
        block.resize(static_cast<std::size_t>(count));
        for (double& v : block) {
            unsigned char bytes[8];
            in.read(reinterpret_cast<char*>(bytes), 8);
            std::uint64_t bits = 0;
            for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
            std::memcpy(&v, &bits, sizeof(v));
        }
    };
    read_block(cp.times, n);
    read_block(cp.u, n * m);
    read_block(cp.w, n * m);
    if (!in) throw std::runtime_error("read_checkpoint: truncated file " + path.string());
    return cp;
}

/// Hash of the raw config bytes; recorded in every manifest so outputs can
/// be traced back to the exact configuration file.
inline std::string config_hash_of(const std::string& raw_bytes) {
    return hex64(fnv1a64(raw_bytes));
}

inline void write_manifest(const std::filesystem::path& path, const std::string& config_hash,
                           const std::string& subcommand,
                           const std::vector<std::string>& outputs, double elapsed_ms,
                           const nlohmann::json& extra = {}) {
    nlohmann::json j;
    j["config_hash"] = config_hash;
    j["version"] = STEFANLAB_VERSION;
    j["subcommand"] = subcommand;
    j["outputs"] = outputs;
    j["elapsed_ms"] = elapsed_ms;
    if (!extra.is_null() && !extra.empty()) j["extra"] = extra;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_manifest: cannot open " + path.string());
    out << j.dump(2) << '\n';
}

} // namespace stefanlab
