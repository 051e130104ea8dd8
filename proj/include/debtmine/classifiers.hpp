#pragma once

#include "debtmine/parallel.hpp"
#include "debtmine/random.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace debtmine::ml {

enum class Family { multinomial_lr, random_forest, neural_net };

std::string_view to_string(Family family);
Family parse_family(std::string_view text);

/// Predictors and labels 0..classes-1.
struct TrainingMatrix {
    Eigen::MatrixXd X;
    std::vector<int> y;
    std::size_t classes = 0;
    std::vector<std::string> feature_names;
    std::vector<std::string> class_names;

    /// Throws ValidationError on non-finite values, out-of-range labels or
    /// an absent class.
    void validate() const;
    TrainingMatrix rows(const std::vector<std::size_t>& index) const;
};

/// Stratified assignment of rows to folds 0..k-1: each class is shuffled,
/// the classes are concatenated and position i goes to fold i mod k.
std::vector<int> stratified_folds(const std::vector<int>& y, std::size_t classes, std::size_t k, std::uint64_t seed);

/// Column centering and scaling learnt on training rows.
struct Standardizer {
    Eigen::RowVectorXd mean;
    Eigen::RowVectorXd scale; ///< 1 for zero-variance columns

    static Standardizer fit(const Eigen::MatrixXd& x);
    Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
};

// Multinomial logistic regression ------------------------------------------

struct LogisticOptions {
    double l2 = 1e-4;
    double tol = 1e-6; ///< gradient max-norm
    std::size_t max_iter = 5000;
};

struct LogisticModel {
    Standardizer standardizer;
    /// classes x (1 + d); column 0 holds intercepts, row 0 is the reference class.
    Eigen::MatrixXd coefficients;
    std::size_t iterations = 0;
    bool converged = false;
    double loss = 0.0;
};

/// Mean negative log-likelihood plus (l2/2) times the squared non-intercept
/// coefficients of rows 1.. of `theta` (classes x (1 + d), row 0 ignored).
/// The gradient has the same shape with row 0 zero.
double logistic_loss(const Eigen::MatrixXd& x, const std::vector<int>& y, const Eigen::MatrixXd& theta, double l2,
                     Eigen::MatrixXd* gradient);

/// Gradient descent with Barzilai-Borwein trial steps and Armijo backtracking.
/// `loss_trace`, when given, receives the loss after every accepted step.
LogisticModel train_multinomial_lr(const TrainingMatrix& data, const LogisticOptions& options,
                                   std::vector<double>* loss_trace = nullptr);

// Random forest ------------------------------------------------------------

struct ForestOptions {
    std::size_t n_trees = 500;
    std::size_t mtry = 0; ///< 0 means floor(sqrt(d))
    std::size_t min_leaf = 1;
    bool bootstrap = true;
    std::uint64_t seed = 0;
    Execution execution = Execution::parallel;
};

struct TreeNode {
    int feature = -1; ///< -1 for a leaf
    double threshold = 0.0; ///< x <= threshold goes left
    int left = -1;
    int right = -1;
    int label = 0; ///< majority class, ties to the lower index
};

struct DecisionTree {
    std::vector<TreeNode> nodes; ///< nodes[0] is the root
    std::vector<double> importance; ///< summed count-weighted Gini decrease per feature

    int predict(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;
};

/// Grows one tree on `sample` (row indices, repeats allowed). Each node
/// draws `mtry` candidate features from `rng`; mtry = d is plain CART.
DecisionTree train_decision_tree(const TrainingMatrix& data, const std::vector<std::size_t>& sample, std::size_t mtry,
                                 std::size_t min_leaf, Rng& rng);

struct ForestModel {
    std::vector<DecisionTree> trees;
    std::size_t features = 0;
    std::size_t mtry = 0;
    double oob_accuracy = 0.0; ///< NaN when no row was ever out of bag
    std::vector<double> importance; ///< mean over trees
};

ForestModel train_random_forest(const TrainingMatrix& data, const ForestOptions& options);

// Neural network -----------------------------------------------------------

struct NeuralNetOptions {
    std::size_t hidden = 1;
    std::size_t epochs = 10000;
    double learning_rate = 0.1;
    std::uint64_t seed = 0;
};

struct NeuralNetModel {
    Standardizer standardizer;
    std::size_t inputs = 0;
    std::size_t hidden = 0;
    std::size_t classes = 0;
    Eigen::VectorXd parameters; ///< packed W1 (hidden x inputs), b1, W2 (classes x hidden), b2; column-major
    double best_loss = 0.0;
    std::size_t best_epoch = 0;
};

std::size_t nn_parameter_count(std::size_t inputs, std::size_t hidden, std::size_t classes);

/// Mean cross-entropy of a sigmoid-hidden, softmax-output network with
/// packed parameters `theta`; fills `gradient` when given.
double nn_loss(const Eigen::MatrixXd& x, const std::vector<int>& y, std::size_t hidden, std::size_t classes,
               const Eigen::VectorXd& theta, Eigen::VectorXd* gradient);

NeuralNetModel train_neural_net(const TrainingMatrix& data, const NeuralNetOptions& options);

/// Class probabilities for raw (unstandardized) rows.
Eigen::MatrixXd nn_forward(const NeuralNetModel& model, const Eigen::MatrixXd& x);

struct TuningOptions {
    std::size_t hidden_min = 1;
    std::size_t hidden_max = 10;
    std::size_t inner_folds = 5;
};

struct TuningResult {
    std::size_t best_hidden = 0;
    std::vector<std::size_t> candidates;
    std::vector<double> cv_accuracy; ///< per candidate
    NeuralNetModel model;            ///< refit on all rows at best_hidden
};

/// Inner stratified CV over hidden sizes; ties go to the smaller network.
TuningResult tune_neural_net(const TrainingMatrix& data, const TuningOptions& tuning, const NeuralNetOptions& options);

// Uniform interface --------------------------------------------------------

struct ModelConfig {
    Family family = Family::multinomial_lr;
    LogisticOptions lr;
    ForestOptions rf;
    NeuralNetOptions nn;
    TuningOptions tuning;
    bool tune_hidden = true;
};

struct FittedModel {
    Family family = Family::multinomial_lr;
    std::size_t classes = 0;
    std::vector<std::string> class_names;
    std::vector<std::string> feature_names;
    std::vector<std::pair<std::string, std::string>> config; ///< training settings snapshot
    std::variant<LogisticModel, ForestModel, NeuralNetModel> model;

    Eigen::MatrixXd predict_proba(const Eigen::MatrixXd& x) const;
    std::vector<int> predict(const Eigen::MatrixXd& x) const;
};

/// Trains `config.family`; `seed` overrides the family's own seed. A neural
/// net with tune_hidden set is tuned first.
FittedModel train(const ModelConfig& config, const TrainingMatrix& data, std::uint64_t seed);

/// Row-wise argmax, ties to the lower class.
std::vector<int> argmax_rows(const Eigen::MatrixXd& p);

double accuracy(const std::vector<int>& truth, const std::vector<int>& predicted);

// Importance ---------------------------------------------------------------

struct DescriptiveStats {
    double min = 0, q1 = 0, median = 0, mean = 0, q3 = 0, max = 0;
};

/// Sample quantiles by linear interpolation between order statistics.
DescriptiveStats describe(std::vector<double> values);

struct GiniImportance {
    std::vector<std::string> features;
    std::vector<double> values;
    DescriptiveStats stats;

    /// Indices by decreasing importance, ties by feature order.
    std::vector<std::size_t> ranking() const;
};

/// Throws ValidationError for a model that is not a random forest.
GiniImportance gini_importance(const FittedModel& model);

void write_importance_csv(const GiniImportance& importance, std::ostream& out, std::size_t top = 0);
void write_importance_stats_csv(const GiniImportance& importance, std::ostream& out);

// Persistence --------------------------------------------------------------

void save_model(const FittedModel& model, std::ostream& out);
FittedModel load_model(std::istream& in);
void save_model(const FittedModel& model, const std::filesystem::path& path);
FittedModel load_model(const std::filesystem::path& path);

} // namespace debtmine::ml
