#ifndef ANTIPGD_CSV_HPP
#define ANTIPGD_CSV_HPP

#include "antipgd/types.hpp"

#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <thread>
#include <vector>

namespace antipgd {

inline constexpr std::string_view kSchemaVersion = "1";

/// Shortest-round-trip formatting (%.17g); non-finite values print as nan/inf.
inline std::string format_double(double x) {
    char buf[32];
    const int n = std::snprintf(buf, sizeof buf, "%.17g", x);
    return std::string(buf, static_cast<std::size_t>(n));
}

inline std::string format_optional(const std::optional<double>& x) { return x ? format_double(*x) : std::string(); }

inline double parse_double(std::string_view text) {
    const std::string s(text);
    if (s == "nan" || s == "-nan") {
        return std::nan("");
    }
    if (s == "inf") {
        return HUGE_VAL;
    }
    if (s == "-inf") {
        return -HUGE_VAL;
    }
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    require(ec == std::errc() && ptr == s.data() + s.size(), "not a number: '" + s + "'");
    return value;
}

inline std::optional<double> parse_optional(std::string_view text) {
    if (text.empty()) {
        return std::nullopt;
    }
    return parse_double(text);
}

inline std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.emplace_back(line.substr(start));
            break;
        }
        out.emplace_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return out;
}

/// Header plus string cells; lines starting with '#' are kept as comments.
struct CsvTable {
    std::vector<std::string> comments;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(std::string_view name) const {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) {
                return i;
            }
        }
        throw ValidationError("missing column '" + std::string(name) + "'");
    }

    bool has_column(std::string_view name) const {
        for (const auto& h : header) {
            if (h == name) {
                return true;
            }
        }
        return false;
    }
};

inline CsvTable parse_csv(std::string_view text) {
    CsvTable table;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) {
            end = text.size();
        }
        std::string_view line = text.substr(pos, end - pos);
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        pos = end + 1;
        if (line.empty()) {
            continue;
        }
        if (line.front() == '#') {
            table.comments.emplace_back(line);
        } else if (table.header.empty()) {
            table.header = split_csv_line(line);
        } else {
            auto cells = split_csv_line(line);
            require(cells.size() == table.header.size(),
                    "CSV row has " + std::to_string(cells.size()) + " cells, header has " +
                        std::to_string(table.header.size()));
            table.rows.push_back(std::move(cells));
        }
    }
    return table;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline CsvTable read_csv(const std::filesystem::path& path) { return parse_csv(read_file(path)); }

/// Writes to a sibling temporary file and renames it into place.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
    static std::atomic<unsigned long> counter{0};
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    const auto tid = std::hash<std::thread::id>{}(std::this_thread::get_id());
    std::filesystem::path tmp = path;
    tmp += ".tmp." + std::to_string(tid) + "." + std::to_string(counter.fetch_add(1));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw std::runtime_error("cannot write " + tmp.string());
        }
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) {
            throw std::runtime_error("write failed for " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

/// "# antipgd <kind> v<version>" followed by optional extra comment lines.
inline std::string schema_comment(std::string_view kind) {
    return "# antipgd " + std::string(kind) + " v" + std::string(kSchemaVersion) + "\n";
}

inline std::string join_row(const std::vector<std::string>& cells) {
    std::string line;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i > 0) {
            line += ',';
        }
        line += cells[i];
    }
    line += '\n';
    return line;
}

}  // namespace antipgd

#endif  // ANTIPGD_CSV_HPP
