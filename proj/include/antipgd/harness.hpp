#ifndef ANTIPGD_HARNESS_HPP
#define ANTIPGD_HARNESS_HPP

#include "antipgd/manifest.hpp"
#include "antipgd/parallel.hpp"
#include "antipgd/svg_plot.hpp"
#include "antipgd/trajectory_io.hpp"

#include <filesystem>
#include <set>
#include <string>
#include <vector>

// Output layout under the output directory:
//   runs/<config>/seed_<i>.csv   one trajectory per (config, run index)
//   runs.csv                     index of every run with its seed and divergence flag
//   aggregate.csv                per (config, step) mean and std over runs
//   oracle.csv, plots/<name>.svg, dataset/...

namespace antipgd {

namespace fs = std::filesystem;

struct RunRecord {
    std::string config;
    Variant variant = Variant::GD;
    double eta = 0.0;
    double sigma = 0.0;
    std::int64_t run_index = 0;
    std::uint64_t seed = 0;
    std::string file;
    bool diverged = false;
    std::optional<Index> diverged_at;
};

struct ExecutionSummary {
    std::vector<RunRecord> records;
    std::size_t diverged = 0;
};

inline std::string run_file(const std::string& config, std::int64_t run_index) {
    return "runs/" + config + "/seed_" + std::to_string(run_index) + ".csv";
}

/// Collects every config's validation errors before anything runs.
inline void validate_configs(const std::vector<RunConfig>& configs, const Landscape& landscape) {
    require(!configs.empty(), "manifest defines no configs to run");
    std::vector<std::string> errors;
    std::set<std::string> names;
    for (const auto& c : configs) {
        if (!names.insert(c.name).second) {
            errors.push_back("duplicate config name '" + c.name + "'");
        }
        if (c.name.empty() || c.name.find_first_of("/\\,\n") != std::string::npos) {
            errors.push_back("config name '" + c.name + "' must be non-empty without '/', '\\' or ','");
        }
        for (auto& e : c.validation_errors(landscape)) {
            errors.push_back(std::move(e));
        }
    }
    if (!errors.empty()) {
        std::string message = "invalid configuration:";
        for (const auto& e : errors) {
            message += "\n  " + e;
        }
        throw ValidationError(message);
    }
}

inline std::string runs_index_csv(const std::vector<RunRecord>& records) {
    std::string out = schema_comment("runs");
    out += "config,variant,eta,sigma,run_index,seed,file,diverged,diverged_at\n";
    for (const auto& r : records) {
        out += join_row({r.config, std::string(to_string(r.variant)), format_double(r.eta), format_double(r.sigma),
                         std::to_string(r.run_index), std::to_string(r.seed), r.file, r.diverged ? "1" : "0",
                         r.diverged_at ? std::to_string(*r.diverged_at) : std::string()});
    }
    return out;
}

/**
 * Runs every (config, run index) pair on a worker pool. Each run writes its
 * own CSV atomically; the index and aggregate are reduced afterwards on the
 * calling thread in config order, so output does not depend on scheduling.
 */
inline ExecutionSummary execute_runs(const std::vector<RunConfig>& configs, const Landscape& landscape,
                                     std::uint64_t base_seed, std::int64_t runs, const fs::path& out_dir,
                                     unsigned workers) {
    validate_configs(configs, landscape);
    const std::size_t n_runs = static_cast<std::size_t>(runs);
    std::vector<Trajectory> results(configs.size() * n_runs);
    parallel_for(results.size(), workers, [&](std::size_t job) {
        const RunConfig& c = configs[job / n_runs];
        const auto index = static_cast<std::int64_t>(job % n_runs);
        Trajectory t = run(c, landscape, derive_seed(base_seed, c.name, static_cast<std::uint64_t>(index)));
        write_file_atomic(out_dir / run_file(c.name, index), trajectory_csv(t));
        t.final_params.resize(0);
        results[job] = std::move(t);
    });

    ExecutionSummary summary;
    std::vector<AggregateRow> aggregate;
    for (std::size_t ci = 0; ci < configs.size(); ++ci) {
        const RunConfig& c = configs[ci];
        const std::vector<Trajectory> group(results.begin() + static_cast<std::ptrdiff_t>(ci * n_runs),
                                            results.begin() + static_cast<std::ptrdiff_t>((ci + 1) * n_runs));
        for (std::size_t i = 0; i < n_runs; ++i) {
            const Trajectory& t = group[i];
            summary.records.push_back({.config = c.name,
                                       .variant = c.variant,
                                       .eta = c.eta,
                                       .sigma = c.sigma,
                                       .run_index = static_cast<std::int64_t>(i),
                                       .seed = t.seed,
                                       .file = run_file(c.name, static_cast<std::int64_t>(i)),
                                       .diverged = t.diverged,
                                       .diverged_at = t.diverged_at});
            summary.diverged += t.diverged ? 1 : 0;
        }
        for (auto& row : aggregate_config(c.name, group)) {
            aggregate.push_back(std::move(row));
        }
    }
    write_file_atomic(out_dir / "runs.csv", runs_index_csv(summary.records));
    write_file_atomic(out_dir / "aggregate.csv", aggregate_csv(aggregate));
    return summary;
}

/// Rebuilds aggregate.csv from runs.csv and the per-run trajectory files.
inline std::string recompute_aggregate(const fs::path& out_dir) {
    const CsvTable index = read_csv(out_dir / "runs.csv");
    const std::size_t c_config = index.column("config");
    const std::size_t c_file = index.column("file");
    std::vector<std::string> order;
    std::map<std::string, std::vector<Trajectory>> groups;
    for (const auto& row : index.rows) {
        const std::string& config = row[c_config];
        if (!groups.contains(config)) {
            order.push_back(config);
        }
        groups[config].push_back(parse_trajectory_csv(read_file(out_dir / row[c_file])));
    }
    std::vector<AggregateRow> rows;
    for (const auto& config : order) {
        for (auto& r : aggregate_config(config, groups[config])) {
            rows.push_back(std::move(r));
        }
    }
    return aggregate_csv(rows);
}

// ---------------------------------------------------------------------------
// Oracle table

inline std::string oracle_csv(const OracleSpec& spec, std::uint64_t base_seed, unsigned workers) {
    const Index K = spec.rho.horizon;
    const auto anti = predict(spec.rho, 0.0, spec.d, spec.sigma2, Correlation::Anticorrelated);
    const auto uncorr = predict(spec.rho, 0.0, spec.d, spec.sigma2, Correlation::Uncorrelated);
    auto simulate = [&](Correlation mode, std::uint64_t index) {
        const NoiseSpec noise{.distribution = spec.distribution,
                              .sigma = std::sqrt(spec.sigma2),
                              .correlation = mode,
                              .dim = spec.d,
                              .seed = derive_seed(base_seed, "oracle", index)};
        return simulate_recursion(spec.rho, noise, spec.samples, nullptr, workers);
    };
    const auto mc_anti = simulate(Correlation::Anticorrelated, 0);
    const auto mc_uncorr = simulate(Correlation::Uncorrelated, 1);

    std::string out = schema_comment("oracle");
    out += "k,closed_form_anti,closed_form_uncorr,mc_anti,mc_uncorr,stderr_anti,stderr_uncorr\n";
    // Row k reports E|w_k|^2; the closed form covers k >= 1.
    for (Index k = 1; k <= K; ++k) {
        if (k % spec.every != 0 && k != K && k != 1) {
            continue;
        }
        const auto i = static_cast<std::size_t>(k);
        out += join_row({std::to_string(k), format_double(anti.values[i - 1]), format_double(uncorr.values[i - 1]),
                         format_double(mc_anti.mean[i]), format_double(mc_uncorr.mean[i]),
                         format_double(mc_anti.std_error[i]), format_double(mc_uncorr.std_error[i])});
    }
    std::optional<double> lim_anti = anti.limit;
    std::optional<double> lim_uncorr = uncorr.limit;
    out += join_row({"limit", format_optional(lim_anti), format_optional(lim_uncorr), "", "", "", ""});
    return out;
}

// ---------------------------------------------------------------------------
// Datasets

/// Writes the manifest's dataset to dir; returns false for analytic landscapes.
inline bool generate_dataset(const LandscapeSpec& spec, const fs::path& dir) {
    if (spec.kind == "quad_regression") {
        LandscapeSpec fresh = spec;
        fresh.dataset.reset();
        save_quad_regression(dir, regression_data(fresh));
        return true;
    }
    if (spec.kind == "matrix_sensing") {
        LandscapeSpec fresh = spec;
        fresh.dataset.reset();
        save_matrix_sensing(dir, sensing_data(fresh));
        return true;
    }
    return false;
}

// ---------------------------------------------------------------------------
// Plots

inline std::vector<PlotSpec> default_plots(const CsvTable& table) {
    std::vector<PlotSpec> out;
    for (const auto column : kMetricColumns) {
        const std::string mean = std::string(column) + "_mean";
        if (!table.has_column(mean)) {
            continue;
        }
        const std::size_t c = table.column(mean);
        const bool any = std::any_of(table.rows.begin(), table.rows.end(),
                                     [c](const auto& row) { return !row[c].empty(); });
        if (any) {
            out.push_back({.name = std::string(column), .column = std::string(column), .log_y = false, .configs = {}});
        }
    }
    return out;
}

/// Turns a single trajectory CSV into aggregate form (one seed, no std).
inline CsvTable trajectory_as_aggregate(std::string_view text) {
    const Trajectory t = parse_trajectory_csv(text);
    const std::string name = t.config_name.empty() ? "run" : t.config_name;
    return parse_csv(aggregate_csv(aggregate_config(name, {t})));
}

/// Writes one SVG per panel into out_dir; returns the written paths.
inline std::vector<fs::path> write_plots(const fs::path& csv_path, const std::vector<PlotSpec>& requested,
                                         const fs::path& out_dir) {
    const std::string text = read_file(csv_path);
    CsvTable table = parse_csv(text);
    if (!table.has_column("config") && table.has_column("train_loss")) {
        table = trajectory_as_aggregate(text);
    }
    const std::vector<PlotSpec> panels = requested.empty() ? default_plots(table) : requested;
    for (const auto& p : panels) {
        require(table.has_column(p.column + "_mean"),
                csv_path.string() + ": missing column '" + p.column + "_mean' for plot '" + p.name + "'");
    }
    std::vector<fs::path> written;
    for (const auto& p : panels) {
        const auto series = series_from_aggregate(table, p.column, p.configs);
        const fs::path path = out_dir / (p.name + ".svg");
        PanelStyle style;
        style.title = p.name;
        style.y_label = p.column;
        style.log_y = p.log_y;
        write_file_atomic(path, render_panel(series, style));
        written.push_back(path);
    }
    return written;
}

}  // namespace antipgd

#endif  // ANTIPGD_HARNESS_HPP
