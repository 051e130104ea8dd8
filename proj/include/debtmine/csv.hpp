#pragma once

#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace debtmine::csv {

/// One parsed record. Fields follow RFC 4180 quoting: a field wrapped in
/// double quotes may contain commas and doubled quotes.
using Record = std::vector<std::string>;

/// Reads the next record; returns false at end of input. Multi-line quoted
/// fields are supported. A trailing '\r' is stripped.
bool read_record(std::istream& in, Record& out);

std::string escape(std::string_view field);

void write_record(std::ostream& out, const std::vector<std::string>& fields);

/// Shortest decimal text that parses back to the same double.
std::string format_exact(double v);

/// Fixed-significance text for report tables (10 significant digits).
std::string format(double v);

double parse_double(std::string_view text);

/// Whole-file table: header + rows.
struct Table {
    Record header;
    std::vector<Record> rows;

    std::size_t column(std::string_view name) const; ///< throws ValidationError
};

Table read_table(std::istream& in);
Table read_table_file(const std::string& path);
void write_table(std::ostream& out, const Table& table);

} // namespace debtmine::csv
