#include "debtmine/csv.hpp"

#include "debtmine/error.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

namespace debtmine::csv {

bool read_record(std::istream& in, Record& out) {
    out.clear();
    std::string field;
    bool in_quotes = false;
    bool any = false;
    char c;
    while (in.get(c)) {
        any = true;
        if (in_quotes) {
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get(c);
                    field.push_back('"');
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
            continue;
        }
        if (c == '"') {
            in_quotes = true;
        } else if (c == ',') {
            out.push_back(std::move(field));
            field.clear();
        } else if (c == '\n') {
            if (!field.empty() && field.back() == '\r') field.pop_back();
            out.push_back(std::move(field));
            return true;
        } else {
            field.push_back(c);
        }
    }
    if (!any) return false;
    if (in_quotes) throw ValidationError("csv: unterminated quoted field");
    if (!field.empty() && field.back() == '\r') field.pop_back();
    out.push_back(std::move(field));
    return true;
}

std::string escape(std::string_view field) {
    if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
    std::string s = "\"";
    for (char c : field) {
        if (c == '"') s.push_back('"');
        s.push_back(c);
    }
    s.push_back('"');
    return s;
}

void write_record(std::ostream& out, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out << ',';
        out << escape(fields[i]);
    }
    out << '\n';
}

std::string format_exact(double v) {
    if (std::isnan(v)) return "NA";
    return fmt::format("{}", v);
}

std::string format(double v) {
    if (std::isnan(v)) return "NA";
    if (v == 0.0) return "0";
    return fmt::format("{:.10g}", v);
}

double parse_double(std::string_view text) {
    if (text == "NA") return std::nan("");
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size())
        throw ValidationError(fmt::format("not a number: '{}'", text));
    return v;
}

std::size_t Table::column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    throw ValidationError(fmt::format("missing column '{}'", name));
}

Table read_table(std::istream& in) {
    Table t;
    if (!read_record(in, t.header)) throw ValidationError("csv: empty input");
    Record r;
    while (read_record(in, r)) {
        if (r.size() == 1 && r[0].empty()) continue;
        t.rows.push_back(r);
    }
    return t;
}

Table read_table_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingArtifactError(fmt::format("cannot open '{}'", path));
    return read_table(in);
}

void write_table(std::ostream& out, const Table& table) {
    write_record(out, table.header);
    for (const auto& r : table.rows) write_record(out, r);
}

} // namespace debtmine::csv
