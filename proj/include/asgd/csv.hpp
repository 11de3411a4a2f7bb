#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace asgd::csv
{
    /// Shortest representation that round-trips to the same binary64.
    std::string format(double value);

    std::vector<std::string_view> split(std::string_view line, char sep = ',');

    double parse_double(std::string_view field);
    long long parse_int(std::string_view field);

    /// Dense numeric matrix, one row per line. A non-numeric first line is
    /// treated as a header and skipped.
    std::vector<std::vector<double>> read_matrix(const std::string &path);
} // namespace asgd::csv
