#pragma once

#include "debtmine/classifiers.hpp"
#include "debtmine/homals.hpp"
#include "debtmine/survey.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

namespace debtmine::eval {

// Cross-validation plan -----------------------------------------------------

struct CvPlan {
    std::size_t k = 10;
    std::size_t repeats = 10;
    bool stratified = true;
    std::uint64_t seed = 0;
    std::vector<std::vector<int>> fold; ///< [repeat][row] -> fold index

    std::size_t rows() const { return fold.empty() ? 0 : fold.front().size(); }
    std::size_t cells() const { return k * repeats; }
    std::vector<std::size_t> train_rows(std::size_t repeat, std::size_t f) const;
    std::vector<std::size_t> test_rows(std::size_t repeat, std::size_t f) const;
    /// Seed of the (repeat, fold) cell; independent of execution order.
    std::uint64_t cell_seed(std::size_t repeat, std::size_t f) const;
};

/// Repeat r is a stratified partition drawn from derive_seed(seed, {r}).
CvPlan make_cv_plan(const std::vector<int>& labels, std::size_t classes, std::size_t k, std::size_t repeats,
                    std::uint64_t seed);

// Metrics -------------------------------------------------------------------

struct CellMetrics {
    std::size_t repeat = 0;
    std::size_t fold = 0;
    Eigen::MatrixXi confusion; ///< rows: truth, columns: prediction
    double accuracy = 0.0;
    std::vector<double> recall; ///< per class, one-vs-rest
    /// Two-class only: recall of class 1 (InDebt) and of class 0 (NoDebt).
    double sensitivity = 0.0;
    double specificity = 0.0;
};

CellMetrics score(const std::vector<int>& truth, const std::vector<int>& predicted, std::size_t classes);

struct FoldMetrics {
    std::vector<CellMetrics> cells; ///< repeat-major order

    std::vector<double> accuracies() const;
    double mean_accuracy() const;
    double sd_accuracy() const;
    double mean_sensitivity() const;
    double mean_specificity() const;
};

// Feature blocks ------------------------------------------------------------

struct BlockMatrices {
    std::vector<std::string> names;
    Eigen::MatrixXd train;
    Eigen::MatrixXd test;
};

/// A group of predictors whose preprocessing is learnt on training rows only.
class FeatureBlock {
public:
    virtual ~FeatureBlock() = default;
    virtual std::string name() const = 0;
    virtual std::vector<std::string> names() const = 0;
    virtual BlockMatrices build(const std::vector<std::size_t>& train, const std::vector<std::size_t>& test) const = 0;
};

/// Predictors that need no fitting (dummies, precomputed scores).
class FixedBlock : public FeatureBlock {
public:
    FixedBlock(std::string name, std::vector<std::string> names, Eigen::MatrixXd values);
    std::string name() const override { return name_; }
    std::vector<std::string> names() const override { return names_; }
    BlockMatrices build(const std::vector<std::size_t>& train, const std::vector<std::size_t>& test) const override;
    const Eigen::MatrixXd& values() const { return values_; }

private:
    std::string name_;
    std::vector<std::string> names_;
    Eigen::MatrixXd values_;
};

/// Homals dimensions of a variable block, fitted on the training rows and
/// projected onto the test rows.
class HomalsBlock : public FeatureBlock {
public:
    HomalsBlock(std::string name, survey::Dataset data, std::vector<std::size_t> variables,
                homals::HomalsOptions options);
    std::string name() const override { return name_; }
    std::vector<std::string> names() const override;
    BlockMatrices build(const std::vector<std::size_t>& train, const std::vector<std::size_t>& test) const override;

private:
    std::string name_;
    survey::Dataset data_;
    std::vector<std::size_t> variables_;
    homals::HomalsOptions options_;
};

/// Reference-dropped dummies of the given variables.
std::unique_ptr<FixedBlock> dummy_block(std::string name, const survey::Dataset& data,
                                        const std::vector<std::size_t>& variables);

/// Concatenation of the blocks' predictors over all rows (no fitting).
ml::TrainingMatrix assemble_full(const std::vector<const FeatureBlock*>& blocks, const std::vector<int>& labels,
                                 std::size_t classes, const std::vector<std::string>& class_names);

// Cross-validation ----------------------------------------------------------

struct CvOptions {
    Execution execution = Execution::parallel;
};

/// Trains on k-1 folds and scores the held-out fold for every cell. Errors
/// are rethrown with the (repeat, fold) coordinates.
FoldMetrics cross_validate(const ml::ModelConfig& model, const std::vector<const FeatureBlock*>& blocks,
                           const std::vector<int>& labels, std::size_t classes, const CvPlan& plan,
                           const CvOptions& options = {});

// Significance tests --------------------------------------------------------

struct PairedTTest {
    double t = 0.0;
    double df = 0.0;
    double p = 1.0;
    double mean_difference = 0.0;
    bool significant = false;
    bool degenerate = false;
};

/// Two-sided paired t-test of a - b.
PairedTTest paired_t_test(const std::vector<double>& a, const std::vector<double>& b, double alpha);

struct ChiSquare {
    double statistic = 0.0;
    double df = 0.0;
    double p = 1.0;
    double max_shift = 0.0; ///< largest |proportion in a - proportion in b|
};

/// Homogeneity test of two count vectors over the same categories.
ChiSquare chi_square_homogeneity(const std::vector<double>& a, const std::vector<double>& b);

/// Category counts of one variable over the given rows.
std::vector<double> category_counts(const survey::Dataset& data, std::size_t variable,
                                    const std::vector<std::size_t>& rows);

struct VariableComparison {
    std::string variable;
    ChiSquare test;
};

/// Per-variable comparison of `subset` rows against `reference` rows;
/// categories empty in both are skipped.
std::vector<VariableComparison> compare_distributions(const survey::Dataset& data,
                                                      const std::vector<std::size_t>& variables,
                                                      const std::vector<std::size_t>& subset,
                                                      const std::vector<std::size_t>& reference);

void write_comparison_csv(const std::vector<VariableComparison>& rows, std::ostream& out);

struct Undersampling {
    std::vector<std::size_t> kept; ///< ascending row indices
    std::size_t removed = 0;
    std::vector<VariableComparison> representativeness; ///< subsample vs whole class
};

/// Keeps a uniform random `target_count` rows of `target_class` and every
/// other row. With a dataset, the subsample is compared with the whole class
/// on each of `variables`.
Undersampling undersample(const std::vector<int>& labels, int target_class, std::size_t target_count,
                          std::uint64_t seed, const survey::Dataset* data = nullptr,
                          const std::vector<std::size_t>& variables = {});

// Stepwise protocol ---------------------------------------------------------

enum class Variant { original, transformed };
std::string_view to_string(Variant v);

/// Feature blocks for one variant: financial, demographic, psychological.
struct GroupBlocks {
    Variant variant = Variant::original;
    std::shared_ptr<const FeatureBlock> financial;
    std::shared_ptr<const FeatureBlock> demographic;
    std::shared_ptr<const FeatureBlock> psychological;
};

/// Original: reference-dropped dummies. Transformed: homals dimensions per
/// group. The psychological block is shared.
GroupBlocks make_group_blocks(const survey::Dataset& data, Variant variant, std::shared_ptr<const FeatureBlock> psych,
                              const homals::HomalsOptions& homals_options);

/// Evaluations in order: Financial (= Step 1), Demographic, Psychological,
/// Step 2 (financial + demographic), Step 3 (+ psychological).
std::vector<std::string> stepwise_evaluations();
std::vector<const FeatureBlock*> evaluation_blocks(const GroupBlocks& groups, std::string_view evaluation);

struct FamilyResult {
    ml::Family family;
    std::vector<FoldMetrics> metrics; ///< one per stepwise_evaluations() entry
    PairedTTest step3_vs_step2;
};

struct StepwiseResult {
    Variant variant = Variant::original;
    std::vector<std::string> evaluations;
    std::vector<FamilyResult> families;
};

struct StepwiseOptions {
    std::vector<ml::ModelConfig> models;
    double alpha = 0.025;
    Execution execution = Execution::parallel;
    std::vector<std::string> evaluations = stepwise_evaluations(); ///< subset to run; must include Step 2 and Step 3
};

/// Every (cell, evaluation, family) uses the same plan so folds pair across
/// steps. Cell seeds come from the plan; family f uses derive_seed(cell, {f}).
StepwiseResult run_stepwise(const GroupBlocks& groups, const std::vector<int>& labels, std::size_t classes,
                            const CvPlan& plan, const StepwiseOptions& options);

void write_cells_csv(const StepwiseResult& result, std::string_view mode, std::ostream& out, bool header);
void write_summary_csv(const StepwiseResult& result, std::string_view mode, std::ostream& out, bool header);
void write_significance_csv(const StepwiseResult& result, std::string_view mode, std::ostream& out, bool header);
void write_step_chart(const StepwiseResult& result, std::string_view mode, std::ostream& out);

} // namespace debtmine::eval
