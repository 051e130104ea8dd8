#pragma once

#include "debtmine/survey.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

namespace debtmine::homals {

struct HomalsOptions {
    std::size_t dimensions = 2;
    double tol = 1e-8;       ///< relative loss decrease that counts as converged
    std::size_t max_iter = 500;
    std::uint64_t seed = 0;
    std::string name = "homals"; ///< prefix for transformed column names
};

/// One variable's categories as seen by the fit.
struct VariableBlock {
    std::string name;
    std::vector<std::string> categories;
    std::vector<bool> uncertain;
    std::vector<std::size_t> counts;
    Eigen::MatrixXd quantifications; ///< categories x dimensions (Y_j)
};

/// Homogeneity analysis fit. Object scores X are centered with X^T X = n I;
/// each quantification row is the centroid of its category's object scores.
struct HomalsSolution {
    std::string name;
    std::size_t dimensions = 0;
    Eigen::MatrixXd object_scores; ///< rows x dimensions
    std::vector<VariableBlock> variables;
    std::vector<double> loss_history; ///< departure from homogeneity per iteration
    bool converged = false;
    std::size_t iterations = 0;

    /// Maps an averaged category-point matrix Z to object scores:
    /// X = (Z - center) * transform. Reproduces object_scores at convergence
    /// and places unseen rows by centroid projection.
    Eigen::RowVectorXd center;
    Eigen::MatrixXd transform;

    double final_loss() const { return loss_history.empty() ? 0.0 : loss_history.back(); }
};

/// Alternating least squares over a full-indicator matrix. Requires
/// 1 <= dimensions <= (total categories - number of variables) and no empty
/// category; empty categories must be dropped beforehand (see
/// drop_empty_categories).
HomalsSolution fit_homals(const survey::EncodedMatrix& indicators, const HomalsOptions& options);

/// Removes indicator columns with no members.
survey::EncodedMatrix drop_empty_categories(const survey::EncodedMatrix& indicators);

/// Departure from homogeneity for given object scores with optimal
/// (centroid) quantifications.
double homogeneity_loss(const survey::EncodedMatrix& indicators, const Eigen::MatrixXd& scores);

/// Object scores as predictors named "<name>_dim1", "<name>_dim2", ...
struct DimensionScores {
    std::vector<std::string> names;
    Eigen::MatrixXd values;
};

DimensionScores transform(const HomalsSolution& solution);

/// Scores for rows outside the fit. Categories are matched by (variable,
/// label); a category the fit never saw contributes the origin.
DimensionScores project(const HomalsSolution& solution, const survey::EncodedMatrix& indicators);

struct CategoryPoint {
    std::string variable;
    std::string category;
    bool uncertain = false;
    std::vector<double> coordinates;
    double distance = 0.0;
    std::size_t count = 0;
    bool flagged = false;
};

struct CategoryDiagnostics {
    double flag_multiple = 0.0;
    double median_distance = 0.0;
    std::vector<CategoryPoint> points;

    std::vector<const CategoryPoint*> flagged() const;
    std::vector<const CategoryPoint*> uncertain() const;
};

/// Flags categories farther from the origin than flag_multiple times the
/// median category distance.
CategoryDiagnostics category_diagnostics(const HomalsSolution& solution,
                                         double flag_multiple = std::numeric_limits<double>::infinity());

void write_category_csv(const CategoryDiagnostics& diagnostics, std::ostream& out);
void write_loss_history(const HomalsSolution& solution, std::ostream& out);
void write_category_plot(const CategoryDiagnostics& diagnostics, const std::string& title, std::ostream& out);

} // namespace debtmine::homals
