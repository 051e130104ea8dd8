#include "debtmine/survey.hpp"

#include "debtmine/csv.hpp"
#include "debtmine/error.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

namespace debtmine::survey {

namespace {

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string s;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) s += sep;
        s += parts[i];
    }
    return s;
}

} // namespace

std::string_view to_string(VariableKind kind) {
    switch (kind) {
    case VariableKind::categorical: return "categorical";
    case VariableKind::likert: return "likert";
    case VariableKind::numeric_band: return "numeric-band";
    }
    return "?";
}

std::string_view to_string(VariableGroup group) {
    switch (group) {
    case VariableGroup::demographic: return "demographic";
    case VariableGroup::financial: return "financial";
    case VariableGroup::psychological: return "psychological";
    case VariableGroup::target: return "target";
    }
    return "?";
}

VariableKind parse_kind(std::string_view text) {
    if (text == "categorical") return VariableKind::categorical;
    if (text == "likert") return VariableKind::likert;
    if (text == "numeric-band") return VariableKind::numeric_band;
    throw ValidationError(fmt::format("unknown variable kind '{}'", text));
}

VariableGroup parse_group(std::string_view text) {
    if (text == "demographic") return VariableGroup::demographic;
    if (text == "financial") return VariableGroup::financial;
    if (text == "psychological") return VariableGroup::psychological;
    if (text == "target") return VariableGroup::target;
    throw ValidationError(fmt::format("unknown variable group '{}'", text));
}

std::optional<std::size_t> VariableSpec::category_index(std::string_view label) const {
    for (std::size_t i = 0; i < categories.size(); ++i)
        if (categories[i] == label) return i;
    return std::nullopt;
}

bool VariableSpec::is_uncertain(std::size_t category) const {
    return category < categories.size() &&
           std::find(uncertain_codes.begin(), uncertain_codes.end(), categories[category]) != uncertain_codes.end();
}

SurveySchema::SurveySchema(std::vector<VariableSpec> variables) : variables_(std::move(variables)) {
    if (variables_.empty()) throw ValidationError("schema: no variables");
    std::set<std::string> names;
    std::size_t targets = 0;
    for (std::size_t i = 0; i < variables_.size(); ++i) {
        const auto& v = variables_[i];
        if (v.name.empty()) throw ValidationError("schema: empty variable name");
        if (v.name == "id") throw ValidationError("schema: 'id' is reserved for row identifiers");
        if (!names.insert(v.name).second) throw ValidationError(fmt::format("schema: duplicate variable '{}'", v.name));
        if (v.categories.empty()) throw ValidationError(fmt::format("schema: variable '{}' has no categories", v.name));
        std::set<std::string> cats(v.categories.begin(), v.categories.end());
        if (cats.size() != v.categories.size())
            throw ValidationError(fmt::format("schema: variable '{}' repeats a category", v.name));
        for (const auto& u : v.uncertain_codes)
            if (!cats.count(u))
                throw ValidationError(
                    fmt::format("schema: uncertain code '{}' of '{}' is not one of its categories", u, v.name));
        if (v.kind == VariableKind::likert && v.categories.size() < 2)
            throw ValidationError(fmt::format("schema: likert variable '{}' needs at least 2 categories", v.name));
        if (v.group == VariableGroup::target) {
            ++targets;
            target_ = i;
        }
    }
    if (targets != 1)
        throw ValidationError(fmt::format("schema: expected exactly one target variable, found {}", targets));
}

std::optional<std::size_t> SurveySchema::find(std::string_view name) const {
    for (std::size_t i = 0; i < variables_.size(); ++i)
        if (variables_[i].name == name) return i;
    return std::nullopt;
}

std::size_t SurveySchema::index_of(std::string_view name) const {
    if (auto i = find(name)) return *i;
    throw ValidationError(fmt::format("unknown variable '{}'", name));
}

std::vector<std::size_t> SurveySchema::group_indices(VariableGroup group) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < variables_.size(); ++i)
        if (variables_[i].group == group) out.push_back(i);
    return out;
}

SurveySchema parse_schema(std::istream& in) {
    std::vector<VariableSpec> vars;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        auto parts = split(t, '|');
        if (parts.size() != 4 && parts.size() != 5)
            throw ValidationError(fmt::format("schema line {}: expected 4 or 5 '|'-separated fields", line_no));
        VariableSpec v;
        v.name = parts[0];
        v.kind = parse_kind(parts[1]);
        v.group = parse_group(parts[2]);
        v.categories = split(parts[3], ';');
        if (parts.size() == 5 && !parts[4].empty()) v.uncertain_codes = split(parts[4], ';');
        vars.push_back(std::move(v));
    }
    return SurveySchema(std::move(vars));
}

SurveySchema load_schema(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw MissingArtifactError(fmt::format("cannot open schema '{}'", path.string()));
    return parse_schema(in);
}

void write_schema(const SurveySchema& schema, std::ostream& out) {
    out << "# name | kind | group | categories | uncertain codes\n";
    for (const auto& v : schema.variables())
        out << v.name << " | " << to_string(v.kind) << " | " << to_string(v.group) << " | "
            << join(v.categories, ";") << " | " << join(v.uncertain_codes, ";") << '\n';
}

Dataset::Dataset(std::shared_ptr<const SurveySchema> schema, std::vector<std::vector<int>> columns,
                 std::vector<std::string> row_ids)
    : schema_(std::move(schema)), columns_(std::move(columns)), row_ids_(std::move(row_ids)) {
    if (!schema_) throw ValidationError("dataset: null schema");
    if (row_ids_.empty()) throw ValidationError("dataset: no rows");
    if (columns_.size() != schema_->size()) throw ValidationError("dataset: column count differs from schema");
    for (std::size_t j = 0; j < columns_.size(); ++j) {
        if (columns_[j].size() != row_ids_.size())
            throw ValidationError(fmt::format("dataset: column '{}' has the wrong length", schema_->variable(j).name));
        const int k = static_cast<int>(schema_->variable(j).categories.size());
        for (int v : columns_[j])
            if (v < 0 || v >= k)
                throw ValidationError(
                    fmt::format("dataset: invalid category index {} for '{}'", v, schema_->variable(j).name));
    }
}

const std::string& Dataset::label(std::size_t row, std::size_t variable) const {
    return schema_->variable(variable).categories[static_cast<std::size_t>(columns_[variable][row])];
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
    std::vector<std::vector<int>> cols(columns_.size());
    for (std::size_t j = 0; j < columns_.size(); ++j) {
        cols[j].reserve(rows.size());
        for (auto r : rows) cols[j].push_back(columns_[j].at(r));
    }
    std::vector<std::string> ids;
    ids.reserve(rows.size());
    for (auto r : rows) ids.push_back(row_ids_.at(r));
    return Dataset(schema_, std::move(cols), std::move(ids));
}

bool Dataset::operator==(const Dataset& other) const {
    if (columns_ != other.columns_ || row_ids_ != other.row_ids_) return false;
    if (schema_ == other.schema_) return true;
    if (schema_->size() != other.schema_->size()) return false;
    for (std::size_t j = 0; j < schema_->size(); ++j) {
        const auto &a = schema_->variable(j), &b = other.schema_->variable(j);
        if (a.name != b.name || a.categories != b.categories || a.uncertain_codes != b.uncertain_codes ||
            a.kind != b.kind || a.group != b.group)
            return false;
    }
    return true;
}

Dataset read_dataset(std::shared_ptr<const SurveySchema> schema, std::istream& in) {
    csv::Record header;
    if (!csv::read_record(in, header)) throw ValidationError("data: empty file");
    const std::size_t offset = (!header.empty() && header[0] == "id") ? 1 : 0;
    if (header.size() - offset != schema->size())
        throw ValidationError(fmt::format("data: header has {} variable columns, schema declares {}",
                                          header.size() - offset, schema->size()));
    std::vector<std::size_t> var_of_col(header.size() - offset);
    std::vector<bool> seen(schema->size(), false);
    for (std::size_t c = offset; c < header.size(); ++c) {
        const auto idx = schema->find(header[c]);
        if (!idx) throw ValidationError(fmt::format("data: unknown column '{}'", header[c]));
        if (seen[*idx]) throw ValidationError(fmt::format("data: duplicate column '{}'", header[c]));
        seen[*idx] = true;
        var_of_col[c - offset] = *idx;
    }

    std::vector<std::vector<int>> columns(schema->size());
    std::vector<std::string> ids;
    csv::Record rec;
    std::size_t row = 0;
    while (csv::read_record(in, rec)) {
        if (rec.size() == 1 && rec[0].empty()) continue;
        ++row;
        if (rec.size() != header.size())
            throw ValidationError(
                fmt::format("data row {}: expected {} fields, found {}", row, header.size(), rec.size()));
        ids.push_back(offset ? rec[0] : std::to_string(row));
        for (std::size_t c = offset; c < rec.size(); ++c) {
            const std::size_t var = var_of_col[c - offset];
            const auto& spec = schema->variable(var);
            const auto cat = spec.category_index(rec[c]);
            if (!cat)
                throw ValidationError(fmt::format("data row {}, column '{}': unknown category '{}'", row,
                                                  spec.name, rec[c]));
            columns[var].push_back(static_cast<int>(*cat));
        }
    }
    if (ids.empty()) throw ValidationError("data: no rows");
    return Dataset(std::move(schema), std::move(columns), std::move(ids));
}

Dataset load_dataset(const std::filesystem::path& schema_path, const std::filesystem::path& csv_path) {
    auto schema = std::make_shared<const SurveySchema>(load_schema(schema_path));
    std::ifstream in(csv_path, std::ios::binary);
    if (!in) throw MissingArtifactError(fmt::format("cannot open data '{}'", csv_path.string()));
    return read_dataset(std::move(schema), in);
}

void write_dataset(const Dataset& data, std::ostream& out) {
    std::vector<std::string> fields{"id"};
    for (const auto& v : data.schema().variables()) fields.push_back(v.name);
    csv::write_record(out, fields);
    for (std::size_t i = 0; i < data.rows(); ++i) {
        fields.clear();
        fields.push_back(data.row_ids()[i]);
        for (std::size_t j = 0; j < data.variables(); ++j) fields.push_back(data.label(i, j));
        csv::write_record(out, fields);
    }
}

std::vector<std::size_t> uncertain_counts(const Dataset& data) {
    std::vector<std::size_t> counts(data.variables(), 0);
    for (std::size_t j = 0; j < data.variables(); ++j) {
        const auto& spec = data.schema().variable(j);
        for (int v : data.column(j))
            if (spec.is_uncertain(static_cast<std::size_t>(v))) ++counts[j];
    }
    return counts;
}

CleanedData drop_systematic_nonresponse(const Dataset& data, std::span<const std::string> watched,
                                        std::size_t min_hits) {
    if (min_hits < 1) throw ValidationError("drop_systematic_nonresponse: min_hits must be >= 1");
    std::vector<std::size_t> vars;
    for (const auto& name : watched) vars.push_back(data.schema().index_of(name));

    std::vector<std::size_t> keep;
    RemovalReport report;
    report.rows_before = data.rows();
    report.watched.assign(watched.begin(), watched.end());
    report.uncertain_before.assign(vars.size(), 0);
    report.uncertain_after.assign(vars.size(), 0);
    for (std::size_t i = 0; i < data.rows(); ++i) {
        std::size_t hits = 0;
        for (std::size_t w = 0; w < vars.size(); ++w) {
            const bool u =
                data.schema().variable(vars[w]).is_uncertain(static_cast<std::size_t>(data.value(i, vars[w])));
            if (u) {
                ++hits;
                ++report.uncertain_before[w];
            }
        }
        if (!vars.empty() && hits >= min_hits) {
            report.removed_ids.push_back(data.row_ids()[i]);
        } else {
            keep.push_back(i);
            for (std::size_t w = 0; w < vars.size(); ++w)
                if (data.schema().variable(vars[w]).is_uncertain(static_cast<std::size_t>(data.value(i, vars[w]))))
                    ++report.uncertain_after[w];
        }
    }
    if (keep.size() < 2)
        throw ValidationError(fmt::format("drop_systematic_nonresponse: removal would leave {} row(s)", keep.size()));
    report.removed = data.rows() - keep.size();
    return {data.subset(keep), std::move(report)};
}

void write_removal_report(const RemovalReport& report, std::ostream& out) {
    csv::write_record(out, {"variable", "uncertain_before", "uncertain_after"});
    for (std::size_t w = 0; w < report.watched.size(); ++w)
        csv::write_record(out, {report.watched[w], std::to_string(report.uncertain_before[w]),
                                std::to_string(report.uncertain_after[w])});
    csv::write_record(out, {"(rows)", std::to_string(report.rows_before),
                            std::to_string(report.rows_before - report.removed)});
}

std::string dummy_name(std::string_view variable, std::string_view category) {
    std::string s(variable);
    for (char c : category) s.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '_' ? c : '.');
    return s;
}

EncodedMatrix encode(const Dataset& data, std::span<const std::size_t> variables, Encoding scheme) {
    if (variables.empty()) throw ValidationError("encode: no variables requested");
    EncodedMatrix out;
    for (auto v : variables) {
        const auto& spec = data.schema().variable(v);
        if (scheme == Encoding::likert_numeric) {
            if (spec.kind != VariableKind::likert)
                throw ValidationError(fmt::format("encode: '{}' is not a likert variable", spec.name));
            out.columns.push_back({v, spec.name, -1, {}, false});
            out.names.push_back(spec.name);
            continue;
        }
        const std::size_t first = scheme == Encoding::reference_dropped ? 1 : 0;
        for (std::size_t c = first; c < spec.categories.size(); ++c) {
            out.columns.push_back({v, spec.name, static_cast<int>(c), spec.categories[c], spec.is_uncertain(c)});
            out.names.push_back(dummy_name(spec.name, spec.categories[c]));
        }
    }
    const auto n = static_cast<Eigen::Index>(data.rows());
    out.values = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(out.columns.size()));
    for (std::size_t c = 0; c < out.columns.size(); ++c) {
        const auto& col = out.columns[c];
        const auto values = data.column(col.variable);
        const auto ci = static_cast<Eigen::Index>(c);
        if (col.category < 0) {
            for (Eigen::Index i = 0; i < n; ++i) out.values(i, ci) = values[static_cast<std::size_t>(i)] + 1.0;
            out.values.col(ci).array() -= out.values.col(ci).mean();
        } else {
            for (Eigen::Index i = 0; i < n; ++i)
                out.values(i, ci) = values[static_cast<std::size_t>(i)] == col.category ? 1.0 : 0.0;
        }
    }
    return out;
}

std::string_view to_string(ClassMode mode) {
    return mode == ClassMode::two_class ? "two_class" : "three_class";
}

ClassMode parse_class_mode(std::string_view text) {
    if (text == "two_class") return ClassMode::two_class;
    if (text == "three_class") return ClassMode::three_class;
    throw ValidationError(fmt::format("unknown class mode '{}'", text));
}

std::vector<std::size_t> TargetLabelling::counts() const {
    std::vector<std::size_t> c(class_names.size(), 0);
    for (int l : labels) ++c[static_cast<std::size_t>(l)];
    return c;
}

TargetLabelling label_target(const Dataset& data, ClassMode mode, std::string_view split_label) {
    const std::size_t t = data.schema().target_index();
    const auto& spec = data.schema().variable(t);
    if (!spec.uncertain_codes.empty())
        throw ValidationError(fmt::format("target '{}' must not declare uncertain codes", spec.name));
    if (spec.categories.size() < 2) throw ValidationError("target needs a no-debt category and at least one level");
    const auto column = data.column(t);

    TargetLabelling out;
    out.mode = mode;
    out.labels.resize(column.size());
    if (mode == ClassMode::two_class) {
        out.class_names = {"NoDebt", "InDebt"};
        for (std::size_t i = 0; i < column.size(); ++i) out.labels[i] = column[i] == 0 ? 0 : 1;
        return out;
    }

    out.class_names = {"NoDebt", "Low", "High"};
    int split = -1;
    if (!split_label.empty() && split_label != "median") {
        const auto idx = spec.category_index(split_label);
        if (!idx || *idx == 0)
            throw ValidationError(fmt::format("debt split '{}' is not a positive-debt category", split_label));
        split = static_cast<int>(*idx);
    } else {
        std::vector<int> positive;
        for (int v : column)
            if (v > 0) positive.push_back(v);
        if (positive.empty()) throw ValidationError("three-class labelling: no positive-debt rows");
        std::sort(positive.begin(), positive.end());
        split = positive[(positive.size() - 1) / 2];
    }
    out.split_category = split;
    for (std::size_t i = 0; i < column.size(); ++i) out.labels[i] = column[i] == 0 ? 0 : (column[i] <= split ? 1 : 2);
    return out;
}

} // namespace debtmine::survey
