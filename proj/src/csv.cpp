#include "asgd/csv.hpp"

#include "asgd/types.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <system_error>

namespace asgd::csv
{
    std::string format(double value)
    {
        if (std::isnan(value))
        {
            return "nan";
        }
        if (std::isinf(value))
        {
            return value > 0 ? "inf" : "-inf";
        }
        std::array<char, 32> buf{};
        auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
        if (ec != std::errc{})
        {
            throw std::runtime_error("csv::format: to_chars failed");
        }
        return std::string(buf.data(), ptr);
    }

    std::vector<std::string_view> split(std::string_view line, char sep)
    {
        std::vector<std::string_view> out;
        std::size_t start = 0;
        while (true)
        {
            const auto pos = line.find(sep, start);
            if (pos == std::string_view::npos)
            {
                out.push_back(line.substr(start));
                break;
            }
            out.push_back(line.substr(start, pos - start));
            start = pos + 1;
        }
        return out;
    }

    namespace
    {
        std::string_view trim(std::string_view s)
        {
            while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
            {
                s.remove_prefix(1);
            }
            while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
            {
                s.remove_suffix(1);
            }
            return s;
        }
    } // namespace

    double parse_double(std::string_view field)
    {
        field = trim(field);
        if (field == "nan")
        {
            return std::nan("");
        }
        if (field == "inf")
        {
            return INFINITY;
        }
        if (field == "-inf")
        {
            return -INFINITY;
        }
        double value = 0.0;
        auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
        if (ec != std::errc{} || ptr != field.data() + field.size())
        {
            throw std::invalid_argument("not a number: '" + std::string(field) + "'");
        }
        return value;
    }

    long long parse_int(std::string_view field)
    {
        field = trim(field);
        long long value = 0;
        auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
        if (ec != std::errc{} || ptr != field.data() + field.size())
        {
            throw std::invalid_argument("not an integer: '" + std::string(field) + "'");
        }
        return value;
    }

    std::vector<std::vector<double>> read_matrix(const std::string &path)
    {
        std::ifstream in(path);
        if (!in)
        {
            throw std::runtime_error("cannot open " + path);
        }
        std::vector<std::vector<double>> rows;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line))
        {
            ++lineno;
            if (trim(line).empty())
            {
                continue;
            }
            std::vector<double> row;
            try
            {
                for (auto field : split(line))
                {
                    row.push_back(parse_double(field));
                }
            }
            catch (const std::invalid_argument &e)
            {
                if (rows.empty() && lineno == 1)
                {
                    continue; // header
                }
                throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + e.what());
            }
            if (!rows.empty() && row.size() != rows.front().size())
            {
                throw std::runtime_error(path + ":" + std::to_string(lineno) + ": ragged row");
            }
            rows.push_back(std::move(row));
        }
        return rows;
    }
} // namespace asgd::csv
