#ifndef ANTIPGD_DATASET_IO_HPP
#define ANTIPGD_DATASET_IO_HPP

#include "antipgd/csv.hpp"
#include "antipgd/matrix_sensing.hpp"
#include "antipgd/quad_regression.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

// Datasets are stored as one CSV per matrix or vector (no header, one row per
// matrix row, %.17g so they round-trip exactly) plus a meta.json describing
// shapes and generation parameters.

namespace antipgd {

template <typename Derived>
std::string matrix_csv(const Eigen::MatrixBase<Derived>& m) {
    std::string out;
    for (Index i = 0; i < m.rows(); ++i) {
        std::vector<std::string> cells;
        cells.reserve(static_cast<std::size_t>(m.cols()));
        for (Index j = 0; j < m.cols(); ++j) {
            cells.push_back(format_double(m(i, j)));
        }
        out += join_row(cells);
    }
    return out;
}

inline Matrix parse_matrix_csv(std::string_view text, Index rows, Index cols, const std::string& what) {
    Matrix m(rows, cols);
    Index i = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) {
            end = text.size();
        }
        const std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        if (line.empty()) {
            continue;
        }
        require(i < rows, what + ": more rows than declared (" + std::to_string(rows) + ")");
        const auto cells = split_csv_line(line);
        require(static_cast<Index>(cells.size()) == cols,
                what + ": row " + std::to_string(i) + " has " + std::to_string(cells.size()) + " columns, expected " +
                    std::to_string(cols));
        for (Index j = 0; j < cols; ++j) {
            m(i, j) = parse_double(cells[static_cast<std::size_t>(j)]);
        }
        ++i;
    }
    require(i == rows, what + ": " + std::to_string(i) + " rows, expected " + std::to_string(rows));
    return m;
}

namespace dataset_detail {

inline std::string json_text(const nlohmann::ordered_json& j) { return j.dump(2) + "\n"; }

inline nlohmann::json read_meta(const std::filesystem::path& dir) {
    const auto path = dir / "meta.json";
    try {
        return nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

inline Matrix load_matrix(const std::filesystem::path& dir, const std::string& file, Index rows, Index cols) {
    const auto path = dir / file;
    return parse_matrix_csv(read_file(path), rows, cols, path.string());
}

}  // namespace dataset_detail

// ---------------------------------------------------------------------------
// Quadratic regression

inline void save_quad_regression(const std::filesystem::path& dir, const QuadRegressionData& data) {
    write_file_atomic(dir / "X.csv", matrix_csv(data.X));
    write_file_atomic(dir / "y.csv", matrix_csv(data.y));
    write_file_atomic(dir / "X_test.csv", matrix_csv(data.X_test));
    write_file_atomic(dir / "y_test.csv", matrix_csv(data.y_test));
    write_file_atomic(dir / "w_star.csv", matrix_csv(data.w_star));
    nlohmann::ordered_json meta;
    meta["kind"] = "quad_regression";
    meta["schema_version"] = std::string(kSchemaVersion);
    meta["seed"] = data.seed;
    meta["d"] = data.X.cols();
    meta["M"] = data.X.rows();
    meta["M_test"] = data.X_test.rows();
    meta["n_nonzero"] = static_cast<Index>((data.w_star.array() != 0.0).count());
    meta["files"] = {{"X", "X.csv"}, {"y", "y.csv"}, {"X_test", "X_test.csv"}, {"y_test", "y_test.csv"},
                     {"w_star", "w_star.csv"}};
    write_file_atomic(dir / "meta.json", dataset_detail::json_text(meta));
}

inline QuadRegressionData load_quad_regression(const std::filesystem::path& dir) {
    const auto meta = dataset_detail::read_meta(dir);
    require(meta.value("kind", "") == "quad_regression", (dir / "meta.json").string() + ": not a quad_regression dataset");
    const Index d = meta.at("d").get<Index>();
    const Index M = meta.at("M").get<Index>();
    const Index M_test = meta.at("M_test").get<Index>();
    QuadRegressionData data;
    data.seed = meta.value("seed", std::uint64_t{0});
    data.X = dataset_detail::load_matrix(dir, "X.csv", M, d);
    data.y = dataset_detail::load_matrix(dir, "y.csv", M, 1);
    data.X_test = dataset_detail::load_matrix(dir, "X_test.csv", M_test, d);
    data.y_test = dataset_detail::load_matrix(dir, "y_test.csv", M_test, 1);
    data.w_star = dataset_detail::load_matrix(dir, "w_star.csv", d, 1);
    return data;
}

// ---------------------------------------------------------------------------
// Matrix sensing

inline void save_matrix_sensing(const std::filesystem::path& dir, const MatrixSensingData& data) {
    write_file_atomic(dir / "A.csv", matrix_csv(data.A));
    write_file_atomic(dir / "y.csv", matrix_csv(data.y));
    write_file_atomic(dir / "A_test.csv", matrix_csv(data.A_test));
    write_file_atomic(dir / "y_test.csv", matrix_csv(data.y_test));
    write_file_atomic(dir / "V_star.csv", matrix_csv(data.V_star));
    nlohmann::ordered_json meta;
    meta["kind"] = "matrix_sensing";
    meta["schema_version"] = std::string(kSchemaVersion);
    meta["seed"] = data.seed;
    meta["n"] = data.n;
    meta["rank"] = data.rank;
    meta["M"] = data.A.rows();
    meta["M_test"] = data.A_test.rows();
    meta["noise_std"] = data.noise_std;
    meta["layout"] = "one measurement per row, flattened row-major";
    meta["files"] = {{"A", "A.csv"}, {"y", "y.csv"}, {"A_test", "A_test.csv"}, {"y_test", "y_test.csv"},
                     {"V_star", "V_star.csv"}};
    write_file_atomic(dir / "meta.json", dataset_detail::json_text(meta));
}

inline MatrixSensingData load_matrix_sensing(const std::filesystem::path& dir) {
    const auto meta = dataset_detail::read_meta(dir);
    require(meta.value("kind", "") == "matrix_sensing", (dir / "meta.json").string() + ": not a matrix_sensing dataset");
    MatrixSensingData data;
    data.n = meta.at("n").get<Index>();
    data.rank = meta.at("rank").get<Index>();
    data.noise_std = meta.value("noise_std", 0.0);
    data.seed = meta.value("seed", std::uint64_t{0});
    const Index M = meta.at("M").get<Index>();
    const Index M_test = meta.at("M_test").get<Index>();
    const Index nn = data.n * data.n;
    data.A = dataset_detail::load_matrix(dir, "A.csv", M, nn);
    data.y = dataset_detail::load_matrix(dir, "y.csv", M, 1);
    data.A_test = dataset_detail::load_matrix(dir, "A_test.csv", M_test, nn);
    data.y_test = dataset_detail::load_matrix(dir, "y_test.csv", M_test, 1);
    data.V_star = dataset_detail::load_matrix(dir, "V_star.csv", data.n, data.rank);
    data.X_star = data.V_star * data.V_star.transpose();
    return data;
}

}  // namespace antipgd

#endif  // ANTIPGD_DATASET_IO_HPP
