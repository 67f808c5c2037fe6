#ifndef ANTIPGD_TRAJECTORY_IO_HPP
#define ANTIPGD_TRAJECTORY_IO_HPP

#include "antipgd/csv.hpp"
#include "antipgd/optimizers.hpp"

#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace antipgd {

inline constexpr std::array<std::string_view, 7> kTrajectoryColumns = {
    "step", "seed", "train_loss", "test_loss", "hessian_trace", "u_sqnorm", "reg_grad_sqnorm"};

inline constexpr std::array<std::string_view, 5> kMetricColumns = {"train_loss", "test_loss", "hessian_trace",
                                                                    "u_sqnorm", "reg_grad_sqnorm"};

inline std::optional<double> metric(const TrajectoryRow& row, std::size_t which) {
    switch (which) {
        case 0: return row.train_loss;
        case 1: return row.test_loss;
        case 2: return row.hessian_trace;
        case 3: return row.u_sqnorm;
        case 4: return row.reg_grad_sqnorm;
        default: return std::nullopt;
    }
}

/**
 * Per-run CSV. Comment lines: schema stamp, "# config=<name>", and
 * "# diverged_at=<step>" when the run stopped early.
 */
inline std::string trajectory_csv(const Trajectory& t) {
    std::string out = schema_comment("trajectory");
    out += "# config=" + t.config_name + "\n";
    if (t.diverged) {
        out += "# diverged_at=" + (t.diverged_at ? std::to_string(*t.diverged_at) : std::string("?")) + "\n";
    }
    out += join_row({kTrajectoryColumns.begin(), kTrajectoryColumns.end()});
    const std::string seed = std::to_string(t.seed);
    for (const auto& row : t.rows) {
        out += join_row({std::to_string(row.step), seed, format_double(row.train_loss), format_optional(row.test_loss),
                         format_double(row.hessian_trace), format_optional(row.u_sqnorm),
                         format_optional(row.reg_grad_sqnorm)});
    }
    return out;
}

inline Trajectory parse_trajectory_csv(std::string_view text) {
    const CsvTable table = parse_csv(text);
    for (const auto name : kTrajectoryColumns) {
        table.column(name);
    }
    Trajectory t;
    for (const auto& c : table.comments) {
        if (c.starts_with("# config=")) {
            t.config_name = c.substr(9);
        } else if (c.starts_with("# diverged_at=")) {
            t.diverged = true;
            const std::string at = c.substr(14);
            if (at != "?") {
                t.diverged_at = std::stoll(at);
            }
        }
    }
    for (const auto& cells : table.rows) {
        TrajectoryRow row;
        row.step = std::stoll(cells[table.column("step")]);
        t.seed = std::stoull(cells[table.column("seed")]);
        row.train_loss = parse_double(cells[table.column("train_loss")]);
        row.test_loss = parse_optional(cells[table.column("test_loss")]);
        row.hessian_trace = parse_double(cells[table.column("hessian_trace")]);
        row.u_sqnorm = parse_optional(cells[table.column("u_sqnorm")]);
        row.reg_grad_sqnorm = parse_optional(cells[table.column("reg_grad_sqnorm")]);
        t.rows.push_back(row);
    }
    return t;
}

// ---------------------------------------------------------------------------
// Aggregation across seeds

struct MetricStats {
    std::optional<double> mean;
    /// Sample standard deviation; present only with two or more values.
    std::optional<double> std;
};

struct AggregateRow {
    std::string config;
    Index step = 0;
    std::size_t n_seeds = 0;
    std::array<MetricStats, kMetricColumns.size()> metrics;
};

inline MetricStats summarize(const std::vector<double>& values) {
    MetricStats s;
    if (values.empty()) {
        return s;
    }
    double sum = 0.0;
    for (const double v : values) {
        sum += v;
    }
    const double mean = sum / static_cast<double>(values.size());
    s.mean = mean;
    if (values.size() >= 2) {
        double ss = 0.0;
        for (const double v : values) {
            ss += (v - mean) * (v - mean);
        }
        s.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    return s;
}

/**
 * Reduces the runs of one config (in seed-index order) to per-step statistics.
 * A step contributes only the seeds that recorded it, so diverged runs drop
 * out after their last healthy row.
 */
inline std::vector<AggregateRow> aggregate_config(const std::string& config, const std::vector<Trajectory>& runs) {
    std::map<Index, std::vector<const TrajectoryRow*>> by_step;
    for (const auto& t : runs) {
        for (const auto& row : t.rows) {
            by_step[row.step].push_back(&row);
        }
    }
    std::vector<AggregateRow> out;
    for (const auto& [step, rows] : by_step) {
        AggregateRow agg;
        agg.config = config;
        agg.step = step;
        agg.n_seeds = rows.size();
        for (std::size_t m = 0; m < kMetricColumns.size(); ++m) {
            std::vector<double> values;
            for (const auto* r : rows) {
                if (const auto v = metric(*r, m)) {
                    values.push_back(*v);
                }
            }
            agg.metrics[m] = summarize(values);
        }
        out.push_back(std::move(agg));
    }
    return out;
}

inline std::vector<std::string> aggregate_header() {
    std::vector<std::string> h = {"config", "step", "n_seeds"};
    for (const auto m : kMetricColumns) {
        h.emplace_back(std::string(m) + "_mean");
        h.emplace_back(std::string(m) + "_std");
    }
    return h;
}

inline std::string aggregate_csv(const std::vector<AggregateRow>& rows) {
    std::string out = schema_comment("aggregate");
    out += join_row(aggregate_header());
    for (const auto& r : rows) {
        std::vector<std::string> cells = {r.config, std::to_string(r.step), std::to_string(r.n_seeds)};
        for (const auto& m : r.metrics) {
            cells.push_back(format_optional(m.mean));
            cells.push_back(format_optional(m.std));
        }
        out += join_row(cells);
    }
    return out;
}

}  // namespace antipgd

#endif  // ANTIPGD_TRAJECTORY_IO_HPP
