#include "antipgd/harness.hpp"
#include "antipgd/verification.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

namespace {

using namespace antipgd;

enum Exit { kOk = 0, kValidation = 1, kAcceptance = 2, kDivergence = 3 };

struct Options {
    std::string manifest;
    std::string out;
    std::optional<unsigned> workers;
    std::optional<std::uint64_t> seed;
    // plot
    std::string csv;
    // verify
    std::vector<int> only;
    std::string increment_order = "forward";
    bool corrupt_nu = false;
};

ExperimentManifest require_manifest(const Options& o) {
    require(!o.manifest.empty(), "--manifest is required for this command");
    return load_manifest(o.manifest);
}

fs::path out_dir(const Options& o, const ExperimentManifest* m) {
    if (!o.out.empty()) {
        return o.out;
    }
    return m != nullptr ? m->output_dir : fs::path("out");
}

std::uint64_t base_seed(const Options& o, const ExperimentManifest& m) { return o.seed.value_or(m.base_seed); }

int cmd_generate(const Options& o) {
    const ExperimentManifest m = require_manifest(o);
    const fs::path dir = out_dir(o, &m) / "dataset";
    if (!generate_dataset(m.landscape, dir)) {
        std::cout << "landscape '" << m.landscape.kind << "' is analytic; no dataset to generate\n";
        return kOk;
    }
    std::cout << "wrote " << m.landscape.kind << " dataset to " << dir.string() << "\n";
    return kOk;
}

int execute(const Options& o, bool sweep) {
    const ExperimentManifest m = require_manifest(o);
    std::vector<RunConfig> configs;
    if (sweep) {
        require(m.sweep.has_value(), "manifest has no 'sweep' section");
        configs = expand_sweep(*m.sweep);
    } else {
        configs = m.configs;
    }
    const auto landscape = make_landscape(m.landscape);
    const fs::path dir = out_dir(o, &m);
    const auto summary = execute_runs(configs, *landscape, base_seed(o, m), m.runs, dir, resolve_workers(o.workers));
    std::cout << "wrote " << summary.records.size() << " runs, runs.csv and aggregate.csv to " << dir.string()
              << "\n";
    for (const auto& r : summary.records) {
        if (r.diverged) {
            std::cerr << "diverged: " << r.config << " run " << r.run_index << " at step "
                      << (r.diverged_at ? std::to_string(*r.diverged_at) : std::string("?")) << "\n";
        }
    }
    if (!m.plots.empty()) {
        write_plots(dir / "aggregate.csv", m.plots, dir / "plots");
    }
    return summary.diverged > 0 && !sweep ? kDivergence : kOk;
}

int cmd_oracle(const Options& o) {
    ExperimentManifest m;
    if (!o.manifest.empty()) {
        m = load_manifest(o.manifest);
    }
    const OracleSpec spec = m.oracle.value_or(OracleSpec{});
    const fs::path path = out_dir(o, o.manifest.empty() ? nullptr : &m) / "oracle.csv";
    write_file_atomic(path, oracle_csv(spec, base_seed(o, m), resolve_workers(o.workers)));
    std::cout << "wrote " << path.string() << "\n";
    return kOk;
}

int cmd_verify(const Options& o) {
    VerifyOptions opt;
    opt.workers = resolve_workers(o.workers);
    opt.base_seed = o.seed.value_or(opt.base_seed);
    opt.only = o.only;
    opt.increment_order = manifest_detail::parse_increment_order(o.increment_order);
    if (o.corrupt_nu) {
        // nu_k = rho_k^2 nu_{k-1} + (1 + rho_k)^2, the sign-flipped recursion.
        opt.nu = [](std::span<const double> rhos) {
            std::vector<double> nu;
            double prev = 0.0;
            for (const double r : rhos) {
                prev = r * r * prev + (1.0 + r) * (1.0 + r);
                nu.push_back(prev);
            }
            return nu;
        };
    }
    bool all = true;
    const auto results = run_acceptance(opt, [&all](const CriterionResult& r) {
        std::cout << summary_line(r) << std::endl;
        all = all && r.passed();
    });
    if (!o.out.empty()) {
        const fs::path path = fs::path(o.out) / "verify_report.csv";
        write_file_atomic(path, report_csv(results));
        std::cout << "wrote " << path.string() << "\n";
    }
    std::cout << (all ? "verify: all criteria passed" : "verify: FAILED") << "\n";
    return all ? kOk : kAcceptance;
}

int cmd_plot(const Options& o) {
    ExperimentManifest m;
    if (!o.manifest.empty()) {
        m = load_manifest(o.manifest);
    }
    const fs::path dir = out_dir(o, o.manifest.empty() ? nullptr : &m);
    const fs::path csv = o.csv.empty() ? dir / "aggregate.csv" : fs::path(o.csv);
    const auto written = write_plots(csv, m.plots, dir / "plots");
    for (const auto& p : written) {
        std::cout << "wrote " << p.string() << "\n";
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Anti-PGD experiment harness"};
    app.require_subcommand(1);
    Options o;
    auto common = [&o](CLI::App* sub) {
        sub->add_option("--manifest", o.manifest, "JSON experiment manifest");
        sub->add_option("--out", o.out, "output directory (overrides the manifest)");
        sub->add_option("--workers", o.workers, "worker threads (default: ANTIPGD_WORKERS, else all cores)")
            ->check(CLI::PositiveNumber);
        sub->add_option("--seed", o.seed, "base seed (overrides the manifest)");
    };
    auto* generate = app.add_subcommand("generate", "write the manifest's dataset as CSV + meta.json");
    auto* run = app.add_subcommand("run", "run every config for the manifest's run count");
    auto* sweep = app.add_subcommand("sweep", "run the variant x eta x sigma x seed cross product");
    auto* oracle = app.add_subcommand("oracle", "closed-form vs Monte Carlo table for the linear recursion");
    auto* verify = app.add_subcommand("verify", "run the acceptance suite");
    auto* plot = app.add_subcommand("plot", "render SVG panels from an aggregate or trajectory CSV");
    for (auto* sub : {generate, run, sweep, oracle, verify, plot}) {
        common(sub);
    }
    plot->add_option("--csv", o.csv, "input CSV (default: <out>/aggregate.csv)");
    verify->add_option("--only", o.only, "criterion ids to run (default: all)")->delimiter(',');
    verify->add_option("--increment-order", o.increment_order, "forward | backward perturbation differences")
        ->check(CLI::IsMember({"forward", "backward"}));
    verify->add_flag("--corrupt-nu", o.corrupt_nu, "replace the nu recursion with a sign-flipped one");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kValidation;
    }

    try {
        if (*generate) {
            return cmd_generate(o);
        }
        if (*run) {
            return execute(o, false);
        }
        if (*sweep) {
            return execute(o, true);
        }
        if (*oracle) {
            return cmd_oracle(o);
        }
        if (*verify) {
            return cmd_verify(o);
        }
        if (*plot) {
            return cmd_plot(o);
        }
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kValidation;
    } catch (const UnsupportedError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kValidation;
    }
    return kValidation;
}
