#pragma once

// Minimal numeric CSV helpers shared by the file formats.

#include "stgf/autodiff.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace stgf::csv {

struct Table {
    std::optional<std::string> header;  // raw first line when it was not numeric
    Matrix values;
};

/// Parses a real with from_chars; nullopt when the cell is not a number.
std::optional<double> parse_real(std::string_view cell);

enum class Header { None, Auto, Always };

/// Reads a rectangular numeric table. Header::Auto returns a first line holding
/// any non-numeric cell as the header; Header::Always takes the first line as-is.
Table read(const std::filesystem::path& path, Header header);

/// Shortest round-trip decimal form of v.
std::string format_real(double v);

void write(const std::filesystem::path& path, const Matrix& values,
           const std::optional<std::string>& header = std::nullopt);

}  // namespace stgf::csv
