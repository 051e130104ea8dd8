#pragma once

#include "debtmine/survey.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace debtmine::synth {

/// Shape of a consumer-debt survey. Psychological items are ordinal
/// discretizations of a linear factor model with orthogonal standard-normal
/// factors; debt status follows a logistic model over financial,
/// demographic and psychological effects.
struct SyntheticConfig {
    std::size_t n = 2084;

    std::size_t psych_items = 28;
    std::size_t factors = 5;
    /// Loading of each item on its own factor, per factor (cycled if shorter).
    std::vector<double> primary_loadings{0.75, 0.65, 0.6, 0.55, 0.55};
    double cross_loading = 0.0;  ///< loading on the next factor
    std::size_t reverse_every = 4; ///< every k-th item is reverse keyed; 0 disables
    std::size_t likert_levels = 5;

    double nonresponse_fraction = 0.4;        ///< systematic non-responders
    double nonresponder_uncertain_rate = 0.97; ///< per watched financial item
    double demographic_refusal_rate = 0.04;   ///< share of non-responders also refusing demographics
    double background_uncertain_rate = 0.002; ///< everybody, per item with uncertain codes

    double intercept = 0.0;
    double financial_effect = 0.8;
    double demographic_effect = 0.5;
    std::vector<double> psych_effects{1.0, 0.5, 0.45, 0.4, 0.6}; ///< per factor (cycled)

    std::size_t guardian_items = 5;
    std::size_t insurance_items = 11;
};

struct SyntheticSurvey {
    survey::Dataset data;
    Eigen::MatrixXd loadings;        ///< items x factors
    std::vector<std::string> item_names;
    Eigen::MatrixXd latent_factors;  ///< rows x factors
    std::vector<bool> systematic_nonresponder;
    std::vector<bool> demographic_refuser;
    std::vector<double> debt_propensity; ///< deterministic part of the logit
    std::vector<std::pair<std::string, double>> class_coefficients;
    std::vector<std::string> watch_list; ///< variables the non-responders skip
};

/// Same config and seed give bit-identical output.
SyntheticSurvey generate_synthetic_survey(const SyntheticConfig& config, std::uint64_t seed);

/// Continuous factor-model correlation: Lambda Lambda^T with unit diagonal.
Eigen::MatrixXd implied_latent_correlation(const Eigen::MatrixXd& loadings);

/// Pearson correlation of the discretized item codes implied by the model
/// (equal-probability cutpoints), computed by quadrature.
Eigen::MatrixXd implied_item_correlation(const Eigen::MatrixXd& loadings, std::size_t levels);

/// ground_truth_loadings.csv, ground_truth_coefficients.csv, ground_truth_rows.csv.
void write_ground_truth(const SyntheticSurvey& survey, const std::filesystem::path& dir);

} // namespace debtmine::synth
