#ifndef ANTIPGD_MANIFEST_HPP
#define ANTIPGD_MANIFEST_HPP

#include "antipgd/dataset_io.hpp"
#include "antipgd/experiments.hpp"
#include "antipgd/recursion.hpp"

#include <json.hpp>

#include <filesystem>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

// JSON experiment manifests. See README.md for the full schema; every field
// except "name" and "landscape" has a default.

namespace antipgd {

using Json = nlohmann::json;

struct LandscapeSpec {
    std::string kind = "widening_valley";
    Index d = 100;
    // sparse_valley
    Index spurious_dim = 95;
    Vector b;
    // quadratic
    Vector curvatures;
    // quad_regression / matrix_sensing: load from here when set, else generate.
    std::optional<std::filesystem::path> dataset;
    std::uint64_t data_seed = 0;
    Index M = 0;
    Index M_test = 0;
    Index n_nonzero = RegressionDefaults::n_nonzero;
    Index n = SensingDefaults::n;
    Index rank = SensingDefaults::rank;
    double label_noise_std = SensingDefaults::label_noise_std;

    bool has_dataset() const { return kind == "quad_regression" || kind == "matrix_sensing"; }
};

struct SweepSpec {
    RunConfig base;
    std::vector<Variant> variants;
    std::vector<double> etas;
    std::vector<double> sigmas;
};

struct PlotSpec {
    std::string name;
    std::string column;
    bool log_y = false;
    /// Empty means every config in the aggregate table.
    std::vector<std::string> configs;
};

struct OracleSpec {
    RhoSpec rho{.mode = recursion::Constant{0.9}, .horizon = 500};
    Index d = 50;
    double sigma2 = 0.01;
    std::int64_t samples = 2000;
    Distribution distribution = Distribution::Gaussian;
    /// Emit every `every`-th step (the final step is always emitted).
    Index every = 1;
};

struct ExperimentManifest {
    std::string name;
    std::uint64_t base_seed = 0;
    std::int64_t runs = 1;
    std::filesystem::path output_dir = "out";
    LandscapeSpec landscape;
    ValleySettings valley;
    std::vector<RunConfig> configs;
    std::optional<SweepSpec> sweep;
    std::vector<PlotSpec> plots;
    std::optional<OracleSpec> oracle;
};

namespace manifest_detail {

template <typename T>
T get(const Json& j, const char* key, const T& fallback) {
    if (!j.contains(key) || j.at(key).is_null()) {
        return fallback;
    }
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("manifest field '") + key + "': " + e.what());
    }
}

inline Vector vector_field(const Json& j, const char* key) {
    const auto values = get<std::vector<double>>(j, key, {});
    return Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size()));
}

inline void check_keys(const Json& j, const std::set<std::string>& allowed, const std::string& where) {
    require(j.is_object(), where + " must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        require(allowed.contains(key), where + ": unknown field '" + key + "'");
    }
}

inline InitialPoint::Kind parse_init_kind(const std::string& s) {
    if (s == "standard_normal") {
        return InitialPoint::Kind::StandardNormal;
    }
    if (s == "valley_floor") {
        return InitialPoint::Kind::ValleyFloor;
    }
    if (s == "given") {
        return InitialPoint::Kind::Given;
    }
    throw ValidationError("unknown init kind '" + s + "'");
}

inline IncrementOrder parse_increment_order(const std::string& s) {
    if (s == "forward") {
        return IncrementOrder::Forward;
    }
    if (s == "backward") {
        return IncrementOrder::Backward;
    }
    throw ValidationError("unknown increment_order '" + s + "' (forward | backward)");
}

inline AntiStart parse_anti_start(const std::string& s) {
    if (s == "increment_from_initial_draw") {
        return AntiStart::IncrementFromInitialDraw;
    }
    if (s == "first_draw_direct") {
        return AntiStart::FirstDrawDirect;
    }
    throw ValidationError("unknown anti_start '" + s + "'");
}

inline ValleyEtaRule parse_eta_rule(const std::string& s) {
    if (s == "alpha_over_2D") {
        return ValleyEtaRule::AlphaOver2D;
    }
    if (s == "alpha_over_D") {
        return ValleyEtaRule::AlphaOverD;
    }
    throw ValidationError("unknown valley eta_rule '" + s + "' (alpha_over_2D | alpha_over_D)");
}

inline RunConfig preset_config(const std::string& preset, Variant variant, const ExperimentManifest& m) {
    if (preset == "valley") {
        ValleySettings s = m.valley;
        s.d = m.landscape.d;
        return valley_config(s, variant, 100000);
    }
    if (preset == "regression") {
        return regression_config(variant);
    }
    if (preset == "sensing") {
        return sensing_config(variant);
    }
    throw ValidationError("unknown preset '" + preset + "' (valley | regression | sensing)");
}

/// Applies the fields present in `j` on top of `base`.
inline RunConfig parse_config(const Json& j, RunConfig base, const ExperimentManifest& m) {
    check_keys(j,
               {"name", "preset", "variant", "eta", "steps", "distribution", "sigma", "noise_start", "noise_stop",
                "batch_size", "record_every", "init", "anti_start", "increment_order", "record_reg_grad"},
               "config");
    if (j.contains("variant")) {
        base.variant = parse_variant(get<std::string>(j, "variant", ""));
    }
    if (j.contains("preset")) {
        base = preset_config(get<std::string>(j, "preset", ""), base.variant, m);
    }
    base.name = get(j, "name", base.name);
    base.eta = get(j, "eta", base.eta);
    if (j.contains("steps")) {
        base.steps = get<Index>(j, "steps", base.steps);
        if (j.contains("preset")) {
            base.record_every = std::max<Index>(1, base.steps / 100);
            if (base.noise_stop) {
                base.noise_stop = default_noise_stop(base.steps);
            }
        }
    }
    if (j.contains("distribution")) {
        base.distribution = parse_distribution(get<std::string>(j, "distribution", ""));
    }
    base.sigma = get(j, "sigma", base.sigma);
    base.noise_start = get(j, "noise_start", base.noise_start);
    if (j.contains("noise_stop")) {
        base.noise_stop = j.at("noise_stop").is_null() ? std::nullopt : std::optional<Index>(get<Index>(j, "noise_stop", 0));
    }
    base.batch_size = get(j, "batch_size", base.batch_size);
    base.record_every = get(j, "record_every", base.record_every);
    if (j.contains("init")) {
        const Json& init = j.at("init");
        check_keys(init, {"kind", "scale", "valley_sqnorm", "point"}, "config.init");
        if (init.contains("kind")) {
            base.init.kind = parse_init_kind(get<std::string>(init, "kind", ""));
        }
        base.init.scale = get(init, "scale", base.init.scale);
        base.init.valley_sqnorm = get(init, "valley_sqnorm", base.init.valley_sqnorm);
        if (init.contains("point")) {
            base.init.point = vector_field(init, "point");
        }
    }
    if (j.contains("anti_start")) {
        base.anti_start = parse_anti_start(get<std::string>(j, "anti_start", ""));
    }
    if (j.contains("increment_order")) {
        base.increment_order = parse_increment_order(get<std::string>(j, "increment_order", ""));
    }
    base.record_reg_grad = get(j, "record_reg_grad", base.record_reg_grad);
    return base;
}

inline LandscapeSpec parse_landscape(const Json& j, const std::filesystem::path& manifest_dir, std::uint64_t base_seed) {
    check_keys(j,
               {"kind", "d", "spurious_dim", "b", "curvatures", "dataset", "data_seed", "M", "M_test", "n_nonzero",
                "n", "rank", "label_noise_std"},
               "landscape");
    LandscapeSpec s;
    s.kind = get<std::string>(j, "kind", "");
    s.d = get<Index>(j, "d", s.kind == "zero" ? 50 : 100);
    s.spurious_dim = get(j, "spurious_dim", s.spurious_dim);
    s.b = j.contains("b") ? vector_field(j, "b") : Vector::Ones(5);
    s.curvatures = j.contains("curvatures") ? vector_field(j, "curvatures") : Vector::Constant(1, 2.0);
    if (j.contains("dataset")) {
        const std::filesystem::path p = get<std::string>(j, "dataset", "");
        s.dataset = p.is_absolute() ? p : manifest_dir / p;
    }
    if (s.kind == "quad_regression") {
        s.d = get<Index>(j, "d", RegressionDefaults::d);
        s.M = get<Index>(j, "M", RegressionDefaults::M);
        s.M_test = get<Index>(j, "M_test", RegressionDefaults::M_test);
        s.data_seed = get(j, "data_seed", derive_seed(base_seed, "regression_data", 0));
    } else if (s.kind == "matrix_sensing") {
        s.M = get<Index>(j, "M", SensingDefaults::M);
        s.M_test = get<Index>(j, "M_test", SensingDefaults::M_test);
        s.data_seed = get(j, "data_seed", derive_seed(base_seed, "sensing_data", 0));
    }
    s.n_nonzero = get(j, "n_nonzero", s.n_nonzero);
    s.n = get(j, "n", s.n);
    s.rank = get(j, "rank", s.rank);
    s.label_noise_std = get(j, "label_noise_std", s.label_noise_std);
    static const std::set<std::string> kinds = {"widening_valley", "sparse_valley", "quad_regression",
                                                "matrix_sensing", "zero", "quadratic"};
    require(kinds.contains(s.kind), "landscape: unknown kind '" + s.kind + "'");
    return s;
}

inline OracleSpec parse_oracle(const Json& j) {
    check_keys(j, {"rho", "rho_sequence", "rho_uniform", "K", "d", "sigma2", "samples", "distribution", "every"},
               "oracle");
    OracleSpec o;
    o.rho.horizon = get<Index>(j, "K", 500);
    const int modes = static_cast<int>(j.contains("rho")) + static_cast<int>(j.contains("rho_sequence")) +
                      static_cast<int>(j.contains("rho_uniform"));
    require(modes <= 1, "oracle: give at most one of rho, rho_sequence, rho_uniform");
    if (j.contains("rho_sequence")) {
        o.rho.mode = recursion::Sequence{get<std::vector<double>>(j, "rho_sequence", {})};
    } else if (j.contains("rho_uniform")) {
        const auto range = get<std::vector<double>>(j, "rho_uniform", {});
        require(range.size() == 2, "oracle: rho_uniform must be [lo, hi]");
        o.rho.mode = recursion::UniformStochastic{range[0], range[1]};
    } else {
        o.rho.mode = recursion::Constant{get(j, "rho", 0.9)};
    }
    o.d = get(j, "d", o.d);
    o.sigma2 = get(j, "sigma2", o.sigma2);
    o.samples = get(j, "samples", o.samples);
    if (j.contains("distribution")) {
        o.distribution = parse_distribution(get<std::string>(j, "distribution", ""));
    }
    o.every = get(j, "every", o.every);
    o.rho.validate();
    require(o.d >= 1, "oracle: d must be >= 1");
    require(o.sigma2 >= 0.0, "oracle: sigma2 must be >= 0");
    require(o.every >= 1, "oracle: every must be >= 1");
    return o;
}

}  // namespace manifest_detail

/// Names for the sweep cross product: <base>_<variant>_eta<eta>_sigma<sigma>.
inline std::string sweep_config_name(const std::string& base, Variant v, double eta, double sigma) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "_eta%g_sigma%g", eta, sigma);
    return base + "_" + std::string(to_string(v)) + buf;
}

/// The run list: either the explicit configs or the expanded sweep.
inline std::vector<RunConfig> expand_sweep(const SweepSpec& s) {
    std::vector<RunConfig> out;
    for (const Variant v : s.variants) {
        for (const double eta : s.etas) {
            for (const double sigma : s.sigmas) {
                RunConfig c = s.base;
                c.variant = v;
                c.eta = eta;
                c.sigma = sigma;
                c.batch_size = uses_minibatch(v) ? std::max<Index>(1, c.batch_size) : 0;
                c.name = sweep_config_name(s.base.name, v, eta, sigma);
                out.push_back(std::move(c));
            }
        }
    }
    return out;
}

inline ExperimentManifest parse_manifest(const Json& j, const std::filesystem::path& manifest_dir = ".") {
    using namespace manifest_detail;
    check_keys(j,
               {"name", "base_seed", "runs", "output_dir", "landscape", "valley", "configs", "sweep", "plots",
                "oracle"},
               "manifest");
    ExperimentManifest m;
    m.name = get<std::string>(j, "name", "");
    require(!m.name.empty(), "manifest: name is required");
    m.base_seed = get(j, "base_seed", m.base_seed);
    m.runs = get(j, "runs", m.runs);
    require(m.runs >= 1, "manifest: runs must be >= 1");
    m.output_dir = get<std::string>(j, "output_dir", m.output_dir.string());
    if (j.contains("valley")) {
        const Json& v = j.at("valley");
        check_keys(v, {"alpha", "D", "eta_rule"}, "valley");
        m.valley.alpha = get(v, "alpha", m.valley.alpha);
        m.valley.D = get(v, "D", m.valley.D);
        if (v.contains("eta_rule")) {
            m.valley.eta_rule = parse_eta_rule(get<std::string>(v, "eta_rule", ""));
        }
    }
    if (j.contains("landscape")) {
        m.landscape = parse_landscape(j.at("landscape"), manifest_dir, m.base_seed);
        m.valley.d = m.landscape.d;
        m.valley.validate();
    } else {
        require(j.contains("oracle"), "manifest: landscape is required");
    }
    if (j.contains("configs")) {
        require(j.at("configs").is_array(), "manifest: configs must be an array");
        for (const auto& c : j.at("configs")) {
            RunConfig rc = parse_config(c, RunConfig{}, m);
            if (!c.contains("name") && !c.contains("preset")) {
                rc.name = std::string(to_string(rc.variant));
            }
            m.configs.push_back(std::move(rc));
        }
    }
    if (j.contains("sweep")) {
        const Json& s = j.at("sweep");
        check_keys(s, {"base", "variants", "eta", "sigma"}, "sweep");
        SweepSpec spec;
        spec.base = parse_config(s.contains("base") ? s.at("base") : Json::object(), RunConfig{}, m);
        if (!s.contains("base") || !s.at("base").contains("name")) {
            spec.base.name = m.name;
        }
        for (const auto& v : get<std::vector<std::string>>(s, "variants", {"GD", "PGD", "AntiPGD"})) {
            spec.variants.push_back(parse_variant(v));
        }
        spec.etas = get<std::vector<double>>(s, "eta", {spec.base.eta});
        spec.sigmas = get<std::vector<double>>(s, "sigma", {spec.base.sigma});
        require(!spec.variants.empty() && !spec.etas.empty() && !spec.sigmas.empty(),
                "sweep: variants, eta and sigma must be non-empty");
        m.sweep = std::move(spec);
    }
    if (j.contains("plots")) {
        for (const auto& p : j.at("plots")) {
            check_keys(p, {"name", "column", "log_y", "configs"}, "plot");
            PlotSpec ps;
            ps.column = get<std::string>(p, "column", "");
            ps.name = get(p, "name", ps.column);
            ps.log_y = get(p, "log_y", false);
            ps.configs = get<std::vector<std::string>>(p, "configs", {});
            require(!ps.column.empty(), "plot: column is required");
            m.plots.push_back(std::move(ps));
        }
    }
    if (j.contains("oracle")) {
        m.oracle = parse_oracle(j.at("oracle"));
    }
    std::set<std::string> names;
    for (const auto& c : m.configs) {
        require(names.insert(c.name).second, "manifest: duplicate config name '" + c.name + "'");
    }
    return m;
}

inline ExperimentManifest load_manifest(const std::filesystem::path& path) {
    Json j;
    try {
        j = Json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
    return parse_manifest(j, path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

// ---------------------------------------------------------------------------
// Landscape construction

inline QuadRegressionData regression_data(const LandscapeSpec& s) {
    if (s.dataset) {
        return load_quad_regression(*s.dataset);
    }
    return gen_quad_regression(s.d, s.M, s.n_nonzero, s.M_test, s.data_seed);
}

inline MatrixSensingData sensing_data(const LandscapeSpec& s) {
    if (s.dataset) {
        return load_matrix_sensing(*s.dataset);
    }
    return gen_matrix_sensing(s.n, s.rank, s.M, s.label_noise_std, s.M_test, s.data_seed);
}

inline std::unique_ptr<Landscape> make_landscape(const LandscapeSpec& s) {
    if (s.kind == "widening_valley") {
        return std::make_unique<WideningValley>(s.d);
    }
    if (s.kind == "sparse_valley") {
        return std::make_unique<SparseValley>(s.spurious_dim, s.b);
    }
    if (s.kind == "zero") {
        return std::make_unique<ZeroLoss>(s.d);
    }
    if (s.kind == "quadratic") {
        return std::make_unique<DiagonalQuadratic>(s.curvatures);
    }
    if (s.kind == "quad_regression") {
        return std::make_unique<QuadRegression>(regression_data(s));
    }
    if (s.kind == "matrix_sensing") {
        return std::make_unique<MatrixSensing>(sensing_data(s));
    }
    throw ValidationError("landscape: unknown kind '" + s.kind + "'");
}

}  // namespace antipgd

#endif  // ANTIPGD_MANIFEST_HPP
