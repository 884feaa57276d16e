#include "csv.hpp"

#include "stgf/error.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace stgf::csv {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        cells.push_back(trim(line.substr(start, pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return cells;
}

}  // namespace

std::optional<double> parse_real(std::string_view cell) {
    if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (ec != std::errc() || ptr != cell.data() + cell.size() || cell.empty()) return std::nullopt;
    return v;
}

Table read(const std::filesystem::path& path, Header header) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());

    Table table;
    std::vector<double> data;
    std::size_t cols = 0;
    std::size_t rows = 0;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        if (header == Header::Always && !table.header) {
            table.header = std::string(trim(line));
            continue;
        }
        const auto cells = split(line);
        std::vector<double> parsed;
        parsed.reserve(cells.size());
        bool numeric = true;
        for (auto c : cells) {
            auto v = parse_real(c);
            if (!v) {
                numeric = false;
                break;
            }
            parsed.push_back(*v);
        }
        if (!numeric) {
            if (header == Header::Auto && rows == 0 && !table.header) {
                table.header = std::string(trim(line));
                continue;
            }
            throw FormatError(path.string() + ": non-numeric cell on row " + std::to_string(line_no));
        }
        if (rows == 0) {
            cols = parsed.size();
        } else if (parsed.size() != cols) {
            throw FormatError(path.string() + ": row " + std::to_string(line_no) + " has " +
                              std::to_string(parsed.size()) + " columns, expected " +
                              std::to_string(cols));
        }
        data.insert(data.end(), parsed.begin(), parsed.end());
        ++rows;
    }
    table.values = Matrix(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    std::copy(data.begin(), data.end(), table.values.data());
    return table;
}

std::string format_real(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

void write(const std::filesystem::path& path, const Matrix& values,
           const std::optional<std::string>& header) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    if (header) out << *header << '\n';
    for (Eigen::Index r = 0; r < values.rows(); ++r) {
        for (Eigen::Index c = 0; c < values.cols(); ++c) {
            if (c) out << ',';
            out << format_real(values(r, c));
        }
        out << '\n';
    }
    if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace stgf::csv
