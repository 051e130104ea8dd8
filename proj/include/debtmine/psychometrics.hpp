#pragma once

#include "debtmine/parallel.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace debtmine::psych {

/// Pearson correlations of item columns; exact unit diagonal.
struct CorrelationMatrix {
    Eigen::MatrixXd values;
    std::vector<std::string> items;
};

/// Throws ValidationError naming the first zero-variance item.
CorrelationMatrix correlation(const Eigen::MatrixXd& items, std::vector<std::string> names);

/// Eigenvalues of R, descending.
std::vector<double> scree(const CorrelationMatrix& r);

/// Which random-eigenvalue summary an observed eigenvalue must exceed.
enum class RetentionCriterion { mean, quantile };

struct ParallelAnalysisOptions {
    std::size_t n_random = 100;
    std::uint64_t seed = 0;
    RetentionCriterion criterion = RetentionCriterion::quantile;
    double quantile = 0.95;
    Execution execution = Execution::parallel;
};

struct ParallelAnalysis {
    std::size_t retained = 0;
    std::vector<double> observed;
    std::vector<double> random_mean;
    std::vector<double> random_quantile;
    RetentionCriterion criterion = RetentionCriterion::quantile;
};

/// Compares the observed eigenvalues of `items` with those of n_random
/// standard-normal datasets of the same shape. Factors are retained from the
/// top while the observed eigenvalue exceeds the chosen random summary at
/// the same rank. Replicate r draws from derive_seed(seed, {r}).
ParallelAnalysis parallel_analysis(const Eigen::MatrixXd& items, const ParallelAnalysisOptions& options);

/// Mean and quantile of the random eigenvalues only.
ParallelAnalysis random_eigenvalues(std::size_t rows, std::size_t cols, const ParallelAnalysisOptions& options);

enum class Rotation { none, varimax };

struct FactorModel {
    std::size_t factors = 0;
    std::vector<std::string> items;
    Eigen::MatrixXd loadings;             ///< items x factors
    std::vector<double> eigenvalues;      ///< of the unreduced R, descending
    Eigen::VectorXd communalities;
    double variance_explained = 0.0;      ///< sum of communalities / items
    Rotation rotation = Rotation::none;
    Eigen::MatrixXd rotation_matrix;      ///< factors x factors; loadings = unrotated * rotation_matrix
    std::vector<double> criterion_history; ///< varimax criterion per sweep
    bool converged = false;
    std::size_t iterations = 0;
    std::vector<std::string> warnings;

    /// Factor index with the largest |loading| per item.
    std::vector<std::size_t> item_assignment() const;
};

struct ExtractionOptions {
    std::size_t max_iter = 1000;
    double tol = 1e-6; ///< max change in any communality
};

/// Iterated principal-axis factoring. Communalities start at the squared
/// multiple correlations and are clamped to [0, 1]; reaching 1 records a
/// Heywood warning.
FactorModel extract_factors(const CorrelationMatrix& r, std::size_t factors, const ExtractionOptions& options = {});

/// Raw varimax criterion: sum over factors of the variance of squared loadings.
double varimax_criterion(const Eigen::MatrixXd& loadings);

/// Pairwise planar rotations until the criterion gains less than tol per
/// sweep. Columns are then ordered by explained variance and signed so
/// their loadings sum to a positive value. One factor is returned unchanged.
FactorModel varimax(const FactorModel& model, double tol = 1e-12, std::size_t max_sweeps = 1000);

/// Regression-method scores F = Z R^{-1} Lambda, Z the standardized items.
/// A ridge of 1e-8 is added if R is not positive definite.
Eigen::MatrixXd factor_scores(const FactorModel& model, const Eigen::MatrixXd& items);

enum class ReliabilityBand { good, acceptable, poor, unacceptable };

std::string_view to_string(ReliabilityBand band);
ReliabilityBand reliability_band(double alpha);

/// Cronbach's alpha of the item columns of `items`.
double cronbach_alpha(const Eigen::MatrixXd& items);
double cronbach_alpha_from_covariance(const Eigen::MatrixXd& covariance);

/// Reverse-codes a centered column (negation; an exact involution).
Eigen::VectorXd reverse_code(const Eigen::VectorXd& centered);

struct ScaleReliability {
    std::string name;
    std::vector<std::string> items;
    std::vector<bool> reversed;
    double alpha = 0.0;
    ReliabilityBand band = ReliabilityBand::unacceptable;
};

struct ReliabilityReport {
    std::vector<ScaleReliability> scales;
};

/// One scale per factor, made of the items assigned to it. Items with a
/// negative loading on their factor are reverse coded first. Every scale
/// needs at least two items.
ReliabilityReport reliability(const FactorModel& model, const Eigen::MatrixXd& items,
                              const std::vector<std::string>& factor_names);

/// Loadings table with |loading| < suppress left blank.
void write_loadings_csv(const FactorModel& model, const std::vector<std::string>& factor_names, std::ostream& out,
                        double suppress = 0.1);
void write_reliability_csv(const ReliabilityReport& report, std::ostream& out);
void write_scree_csv(const ParallelAnalysis& pa, std::ostream& out);
void write_scree_plot(const ParallelAnalysis& pa, std::ostream& out);

} // namespace debtmine::psych
