#pragma once

#include "debtmine/random.hpp"
#include "debtmine/survey.hpp"

#include <Eigen/Dense>

#include <memory>
#include <random>
#include <string>
#include <vector>

namespace testing {

using debtmine::survey::Dataset;
using debtmine::survey::SurveySchema;
using debtmine::survey::VariableGroup;
using debtmine::survey::VariableKind;
using debtmine::survey::VariableSpec;

/// Categorical variables v1..vm with the given category counts, plus a
/// two-level target. Every category is used at least once.
inline Dataset random_categorical(std::size_t rows, const std::vector<std::size_t>& levels, std::uint64_t seed,
                                  VariableGroup group = VariableGroup::demographic) {
    std::vector<VariableSpec> vars;
    for (std::size_t j = 0; j < levels.size(); ++j) {
        VariableSpec v;
        v.name = "v" + std::to_string(j + 1);
        v.group = group;
        for (std::size_t k = 0; k < levels[j]; ++k) v.categories.push_back("c" + std::to_string(k + 1));
        vars.push_back(v);
    }
    VariableSpec t;
    t.name = "Debt";
    t.group = VariableGroup::target;
    t.categories = {"None", "Some"};
    vars.push_back(t);
    auto schema = std::make_shared<const SurveySchema>(vars);

    auto rng = debtmine::make_rng(seed);
    std::vector<std::vector<int>> cols(vars.size(), std::vector<int>(rows));
    for (std::size_t j = 0; j < vars.size(); ++j) {
        const std::size_t k = vars[j].categories.size();
        for (std::size_t i = 0; i < rows; ++i)
            cols[j][i] = i < k ? static_cast<int>(i) : static_cast<int>(std::uniform_int_distribution<std::size_t>(0, k - 1)(rng));
        std::shuffle(cols[j].begin(), cols[j].end(), rng);
    }
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < rows; ++i) ids.push_back(std::to_string(i + 1));
    return Dataset(schema, cols, ids);
}

/// Largest principal angle (radians) between the column spaces of a and b.
inline double max_principal_angle(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    const Eigen::MatrixXd qa = Eigen::HouseholderQR<Eigen::MatrixXd>(a).householderQ() *
                               Eigen::MatrixXd::Identity(a.rows(), a.cols());
    const Eigen::MatrixXd qb = Eigen::HouseholderQR<Eigen::MatrixXd>(b).householderQ() *
                               Eigen::MatrixXd::Identity(b.rows(), b.cols());
    const Eigen::MatrixXd residual = qb - qa * (qa.transpose() * qb);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(residual);
    return std::asin(std::min(1.0, svd.singularValues()(0)));
}

} // namespace testing

namespace testing {

/// Closed-form MCA: top-p eigenvectors of the centered, degree-normalized
/// Burt matrix, mapped back to object space.
inline Eigen::MatrixXd burt_object_space(const Eigen::MatrixXd& g, std::size_t p) {
    const Eigen::VectorXd degree = g.colwise().sum().transpose();
    const Eigen::MatrixXd gc = g.rowwise() - g.colwise().mean();
    const Eigen::VectorXd inv_sqrt = degree.array().rsqrt();
    const Eigen::MatrixXd burt_c = inv_sqrt.asDiagonal() * (gc.transpose() * gc) * inv_sqrt.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(burt_c);
    const Eigen::Index k = burt_c.cols();
    Eigen::MatrixXd v(k, static_cast<Eigen::Index>(p));
    for (std::size_t d = 0; d < p; ++d) v.col(static_cast<Eigen::Index>(d)) = es.eigenvectors().col(k - 1 - static_cast<Eigen::Index>(d));
    return gc * inv_sqrt.asDiagonal() * v;
}

/// Relative gap between the p-th and (p+1)-th centered Burt eigenvalues.
inline double burt_gap(const Eigen::MatrixXd& g, std::size_t p) {
    const Eigen::VectorXd degree = g.colwise().sum().transpose();
    const Eigen::MatrixXd gc = g.rowwise() - g.colwise().mean();
    const Eigen::VectorXd inv_sqrt = degree.array().rsqrt();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(inv_sqrt.asDiagonal() * (gc.transpose() * gc) * inv_sqrt.asDiagonal());
    const auto& ev = es.eigenvalues();
    const Eigen::Index k = ev.size();
    const double lp = ev(k - static_cast<Eigen::Index>(p)), lnext = ev(k - 1 - static_cast<Eigen::Index>(p));
    return (lp - lnext) / lp;
}

} // namespace testing
