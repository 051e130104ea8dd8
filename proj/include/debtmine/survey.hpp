#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <filesystem>
#include <istream>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace debtmine::survey {

enum class VariableKind { categorical, likert, numeric_band };
enum class VariableGroup { demographic, financial, psychological, target };

std::string_view to_string(VariableKind kind);
std::string_view to_string(VariableGroup group);
VariableKind parse_kind(std::string_view text);
VariableGroup parse_group(std::string_view text);

struct VariableSpec {
    std::string name;
    VariableKind kind = VariableKind::categorical;
    VariableGroup group = VariableGroup::demographic;
    std::vector<std::string> categories;      ///< ordered
    std::vector<std::string> uncertain_codes; ///< subset of categories

    std::optional<std::size_t> category_index(std::string_view label) const;
    bool is_uncertain(std::size_t category) const;
};

/// Ordered list of variables. Construction validates: unique names,
/// uncertain codes drawn from the categories, likert scales of length >= 2
/// and exactly one target variable.
class SurveySchema {
public:
    explicit SurveySchema(std::vector<VariableSpec> variables);

    const std::vector<VariableSpec>& variables() const noexcept { return variables_; }
    const VariableSpec& variable(std::size_t i) const { return variables_.at(i); }
    std::size_t size() const noexcept { return variables_.size(); }

    std::optional<std::size_t> find(std::string_view name) const;
    std::size_t index_of(std::string_view name) const; ///< throws ValidationError
    std::size_t target_index() const noexcept { return target_; }
    std::vector<std::size_t> group_indices(VariableGroup group) const;

private:
    std::vector<VariableSpec> variables_;
    std::size_t target_ = 0;
};

/// Text schema, one variable per line:
///   name | kind | group | cat1;cat2;... | uncertain1;uncertain2
/// Blank lines and lines starting with '#' are ignored.
SurveySchema parse_schema(std::istream& in);
SurveySchema load_schema(const std::filesystem::path& path);
void write_schema(const SurveySchema& schema, std::ostream& out);

/// Rectangular table of category indices, stored column-wise.
class Dataset {
public:
    Dataset(std::shared_ptr<const SurveySchema> schema, std::vector<std::vector<int>> columns,
            std::vector<std::string> row_ids);

    const SurveySchema& schema() const noexcept { return *schema_; }
    std::shared_ptr<const SurveySchema> schema_ptr() const noexcept { return schema_; }
    std::size_t rows() const noexcept { return row_ids_.size(); }
    std::size_t variables() const noexcept { return columns_.size(); }
    int value(std::size_t row, std::size_t variable) const { return columns_[variable][row]; }
    std::span<const int> column(std::size_t variable) const { return columns_.at(variable); }
    const std::string& label(std::size_t row, std::size_t variable) const;
    const std::vector<std::string>& row_ids() const noexcept { return row_ids_; }

    /// Rows in the given order (duplicates allowed).
    Dataset subset(std::span<const std::size_t> rows) const;

    bool operator==(const Dataset& other) const;

private:
    std::shared_ptr<const SurveySchema> schema_;
    std::vector<std::vector<int>> columns_;
    std::vector<std::string> row_ids_;
};

/// Reads a CSV whose header names every schema variable exactly once. An
/// optional leading "id" column supplies row identifiers; otherwise rows are
/// numbered from 1. Errors name the 1-based data row and the column.
Dataset read_dataset(std::shared_ptr<const SurveySchema> schema, std::istream& in);
Dataset load_dataset(const std::filesystem::path& schema_path, const std::filesystem::path& csv_path);

/// Writes "id" followed by the schema variables, labels as cells.
void write_dataset(const Dataset& data, std::ostream& out);

/// Uncertain-answer count per schema variable.
std::vector<std::size_t> uncertain_counts(const Dataset& data);

struct RemovalReport {
    std::size_t rows_before = 0;
    std::size_t removed = 0;
    std::vector<std::string> watched;
    std::vector<std::size_t> uncertain_before; ///< per watched variable
    std::vector<std::size_t> uncertain_after;
    std::vector<std::string> removed_ids;
};

struct CleanedData {
    Dataset data;
    RemovalReport report;
};

/// Removes every row with at least `min_hits` uncertain answers over the
/// watched variables.
CleanedData drop_systematic_nonresponse(const Dataset& data, std::span<const std::string> watched,
                                        std::size_t min_hits);

void write_removal_report(const RemovalReport& report, std::ostream& out);

enum class Encoding { full_indicator, reference_dropped, likert_numeric };

struct EncodedColumn {
    std::size_t variable = 0; ///< schema index
    std::string variable_name;
    int category = -1; ///< -1 for a likert-numeric column
    std::string category_label;
    bool uncertain = false;
};

struct EncodedMatrix {
    std::vector<EncodedColumn> columns;
    std::vector<std::string> names;
    Eigen::MatrixXd values; ///< rows x columns
};

/// Dummy name in R's make.names style: "House_Status" + "Own outright" gives
/// "House_StatusOwn.outright".
std::string dummy_name(std::string_view variable, std::string_view category);

/// Columns follow the order of `variables`, then category order.
/// reference-dropped omits each variable's first category; likert-numeric
/// codes categories 1..k and centers each column.
EncodedMatrix encode(const Dataset& data, std::span<const std::size_t> variables, Encoding scheme);

enum class ClassMode { two_class, three_class };

std::string_view to_string(ClassMode mode);
ClassMode parse_class_mode(std::string_view text);

/// Class labels derived from the target variable, whose first category is
/// read as "no debt". Two-class: {NoDebt, InDebt}. Three-class:
/// {NoDebt, Low, High}, Low meaning a positive-debt category at or below
/// `split_category`.
struct TargetLabelling {
    ClassMode mode = ClassMode::two_class;
    std::vector<std::string> class_names;
    std::vector<int> labels;
    int split_category = -1; ///< three-class only

    std::vector<std::size_t> counts() const;
};

/// `split_label` names the highest "Low" category; when empty the lower
/// median of the positive-debt category indices is used.
TargetLabelling label_target(const Dataset& data, ClassMode mode, std::string_view split_label = {});

} // namespace debtmine::survey
