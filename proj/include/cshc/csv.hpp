#ifndef CSHC_CSV_HPP
#define CSHC_CSV_HPP

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "core.hpp"

namespace cshc::csv {

inline std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

/// Splits one CSV record. Double-quoted fields may contain commas and "" escapes.
inline std::vector<std::string> split_record(std::string_view line)
{
    std::vector<std::string> fields;
    std::string current;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    current.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                current.push_back(ch);
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            fields.emplace_back(trim(current));
            current.clear();
        } else {
            current.push_back(ch);
        }
    }
    fields.emplace_back(trim(current));
    return fields;
}

/// Header plus records, with line numbers kept for diagnostics.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;

    std::optional<std::size_t> column(std::string_view name) const
    {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name)
                return i;
        return std::nullopt;
    }
};

inline Table read(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw DataError(DataError::Kind::empty, "cannot open '" + path + "'");
    Table table;
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty())
            continue;
        auto fields = split_record(line);
        if (!have_header) {
            table.header = std::move(fields);
            have_header = true;
            continue;
        }
        if (fields.size() != table.header.size())
            throw DataError(DataError::Kind::other, path + ":" + std::to_string(line_no) + ": expected " +
                                                        std::to_string(table.header.size()) + " fields, found " +
                                                        std::to_string(fields.size()));
        table.rows.push_back(std::move(fields));
        table.line_numbers.push_back(line_no);
    }
    if (!have_header)
        throw DataError(DataError::Kind::empty, "'" + path + "' is empty");
    return table;
}

/// Parses a real number; accepts anything strtod accepts, including nan/inf.
inline std::optional<double> parse_double(std::string_view s)
{
    s = trim(s);
    if (s.empty())
        return std::nullopt;
    double value = 0;
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, value);
    if (ec == std::errc::result_out_of_range)
        return s.front() == '-' ? -HUGE_VAL : HUGE_VAL;
    if (ec != std::errc() || ptr != end)
        return std::nullopt;
    return value;
}

inline std::optional<long long> parse_int(std::string_view s)
{
    s = trim(s);
    long long value = 0;
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, value);
    if (s.empty() || ec != std::errc() || ptr != end)
        return std::nullopt;
    return value;
}

/// Shortest representation that reads back to the same double.
inline std::string format_double(double value)
{
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return ec == std::errc() ? std::string(buf, ptr) : std::string("nan");
}

/// Fixed-point formatting, used for human-facing report tables.
inline std::string format_fixed(double value, int digits)
{
    if (std::isnan(value))
        return "n/a";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, value);
    return buf;
}

inline std::string quote_if_needed(const std::string& field)
{
    if (field.find_first_of(",\"\n") == std::string::npos)
        return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"')
            out += "\"\"";
        else
            out += c;
    }
    return out + "\"";
}

inline void write_row(std::ostream& out, const std::vector<std::string>& fields)
{
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i != 0)
            out << ',';
        out << quote_if_needed(fields[i]);
    }
    out << '\n';
}

} // namespace cshc::csv

#endif
