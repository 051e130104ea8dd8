#include "debtmine/classifiers.hpp"

#include "debtmine/csv.hpp"
#include "debtmine/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

namespace debtmine::ml {

std::string_view to_string(Family family) {
    switch (family) {
    case Family::multinomial_lr: return "multinomial_lr";
    case Family::random_forest: return "random_forest";
    case Family::neural_net: return "neural_net";
    }
    return "?";
}

Family parse_family(std::string_view text) {
    for (Family f : {Family::multinomial_lr, Family::random_forest, Family::neural_net})
        if (to_string(f) == text) return f;
    throw ValidationError(fmt::format("unknown model family '{}'", text));
}

void TrainingMatrix::validate() const {
    if (X.rows() == 0 || X.cols() == 0) throw ValidationError("training matrix is empty");
    if (static_cast<std::size_t>(X.rows()) != y.size()) throw ValidationError("training matrix: label count differs from rows");
    if (classes < 2) throw ValidationError("training matrix: need at least 2 classes");
    if (!X.allFinite()) throw ValidationError("training matrix contains non-finite values");
    std::vector<std::size_t> seen(classes, 0);
    for (int label : y) {
        if (label < 0 || static_cast<std::size_t>(label) >= classes)
            throw ValidationError(fmt::format("training matrix: label {} out of range", label));
        ++seen[static_cast<std::size_t>(label)];
    }
    for (std::size_t c = 0; c < classes; ++c)
        if (seen[c] == 0)
            throw ValidationError(fmt::format("training matrix: class '{}' has no rows",
                                              c < class_names.size() ? class_names[c] : std::to_string(c)));
}

TrainingMatrix TrainingMatrix::rows(const std::vector<std::size_t>& index) const {
    TrainingMatrix out;
    out.X.resize(static_cast<Eigen::Index>(index.size()), X.cols());
    out.y.reserve(index.size());
    for (std::size_t i = 0; i < index.size(); ++i) {
        out.X.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(index[i]));
        out.y.push_back(y[index[i]]);
    }
    out.classes = classes;
    out.feature_names = feature_names;
    out.class_names = class_names;
    return out;
}

std::vector<int> stratified_folds(const std::vector<int>& y, std::size_t classes, std::size_t k, std::uint64_t seed) {
    if (k < 2) throw ValidationError("folds: k must be at least 2");
    std::vector<std::vector<std::size_t>> members(classes);
    for (std::size_t i = 0; i < y.size(); ++i) members.at(static_cast<std::size_t>(y[i])).push_back(i);
    Rng rng = make_rng(seed);
    std::vector<int> fold(y.size(), -1);
    std::size_t pos = 0;
    for (std::size_t c = 0; c < classes; ++c) {
        if (members[c].size() < k)
            throw ValidationError(fmt::format("folds: class {} has {} rows, fewer than k = {}", c, members[c].size(), k));
        const auto order = sample_without_replacement(members[c].size(), members[c].size(), rng);
        for (std::size_t i : order) fold[members[c][i]] = static_cast<int>(pos++ % k);
    }
    return fold;
}

Standardizer Standardizer::fit(const Eigen::MatrixXd& x) {
    Standardizer s;
    s.mean = x.colwise().mean();
    s.scale.resize(x.cols());
    const double denom = std::max<double>(1.0, static_cast<double>(x.rows() - 1));
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const double sd = std::sqrt((x.col(j).array() - s.mean(j)).square().sum() / denom);
        s.scale(j) = sd > 1e-12 ? sd : 1.0;
    }
    return s;
}

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& x) const {
    if (x.cols() != mean.size()) throw ValidationError("standardizer: column count differs from training");
    return ((x.rowwise() - mean).array().rowwise() / scale.array()).matrix();
}

std::vector<int> argmax_rows(const Eigen::MatrixXd& p) {
    std::vector<int> out(static_cast<std::size_t>(p.rows()));
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        Eigen::Index best = 0;
        for (Eigen::Index c = 1; c < p.cols(); ++c)
            if (p(i, c) > p(i, best)) best = c;
        out[static_cast<std::size_t>(i)] = static_cast<int>(best);
    }
    return out;
}

double accuracy(const std::vector<int>& truth, const std::vector<int>& predicted) {
    if (truth.size() != predicted.size() || truth.empty()) throw ValidationError("accuracy: size mismatch");
    std::size_t hit = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) hit += truth[i] == predicted[i];
    return static_cast<double>(hit) / static_cast<double>(truth.size());
}

namespace {

Eigen::MatrixXd softmax_rows(Eigen::MatrixXd z) {
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        z.row(i).array() -= z.row(i).maxCoeff();
        z.row(i) = z.row(i).array().exp().matrix();
        z.row(i) /= z.row(i).sum();
    }
    return z;
}

Eigen::MatrixXd forest_votes(const ForestModel& forest, const Eigen::MatrixXd& x, std::size_t classes) {
    Eigen::MatrixXd votes = Eigen::MatrixXd::Zero(x.rows(), static_cast<Eigen::Index>(classes));
    for (const auto& tree : forest.trees)
        for (Eigen::Index i = 0; i < x.rows(); ++i) votes(i, tree.predict(x.row(i))) += 1.0;
    return votes / static_cast<double>(forest.trees.size());
}

} // namespace

Eigen::MatrixXd FittedModel::predict_proba(const Eigen::MatrixXd& x) const {
    if (static_cast<std::size_t>(x.cols()) != feature_names.size())
        throw ValidationError(fmt::format("predict: expected {} features, got {}", feature_names.size(), x.cols()));
    return std::visit(
        [&](const auto& m) -> Eigen::MatrixXd {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, LogisticModel>) {
                const Eigen::MatrixXd xs = m.standardizer.apply(x);
                Eigen::MatrixXd z = (xs * m.coefficients.rightCols(xs.cols()).transpose()).rowwise() +
                                    m.coefficients.col(0).transpose();
                return softmax_rows(std::move(z));
            } else if constexpr (std::is_same_v<T, ForestModel>) {
                return forest_votes(m, x, classes);
            } else {
                return nn_forward(m, x);
            }
        },
        model);
}

std::vector<int> FittedModel::predict(const Eigen::MatrixXd& x) const { return argmax_rows(predict_proba(x)); }

FittedModel train(const ModelConfig& config, const TrainingMatrix& data, std::uint64_t seed) {
    data.validate();
    FittedModel out;
    out.family = config.family;
    out.classes = data.classes;
    out.class_names = data.class_names;
    if (out.class_names.empty())
        for (std::size_t c = 0; c < data.classes; ++c) out.class_names.push_back(fmt::format("class{}", c));
    out.feature_names = data.feature_names;
    if (out.feature_names.empty())
        for (Eigen::Index j = 0; j < data.X.cols(); ++j) out.feature_names.push_back(fmt::format("x{}", j + 1));
    auto note = [&](std::string key, auto value) { out.config.emplace_back(std::move(key), fmt::format("{}", value)); };
    note("family", to_string(config.family));
    note("seed", seed);
    switch (config.family) {
    case Family::multinomial_lr:
        note("l2", config.lr.l2);
        note("tol", config.lr.tol);
        note("max_iter", config.lr.max_iter);
        out.model = train_multinomial_lr(data, config.lr);
        break;
    case Family::random_forest: {
        ForestOptions rf = config.rf;
        rf.seed = seed;
        auto forest = train_random_forest(data, rf);
        note("n_trees", rf.n_trees);
        note("mtry", forest.mtry);
        note("min_leaf", rf.min_leaf);
        note("bootstrap", rf.bootstrap);
        out.model = std::move(forest);
        break;
    }
    case Family::neural_net: {
        NeuralNetOptions nn = config.nn;
        nn.seed = seed;
        note("epochs", nn.epochs);
        note("learning_rate", nn.learning_rate);
        if (config.tune_hidden) {
            auto tuned = tune_neural_net(data, config.tuning, nn);
            note("hidden_min", config.tuning.hidden_min);
            note("hidden_max", config.tuning.hidden_max);
            note("inner_folds", config.tuning.inner_folds);
            note("hidden", tuned.best_hidden);
            out.model = std::move(tuned.model);
        } else {
            note("hidden", nn.hidden);
            out.model = train_neural_net(data, nn);
        }
        break;
    }
    }
    return out;
}

DescriptiveStats describe(std::vector<double> values) {
    if (values.empty()) throw ValidationError("describe: no values");
    std::sort(values.begin(), values.end());
    auto q = [&](double p) {
        const double h = (static_cast<double>(values.size()) - 1.0) * p;
        const auto lo = static_cast<std::size_t>(std::floor(h));
        const auto hi = std::min(lo + 1, values.size() - 1);
        return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
    };
    DescriptiveStats s;
    s.min = values.front();
    s.q1 = q(0.25);
    s.median = q(0.5);
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    s.q3 = q(0.75);
    s.max = values.back();
    return s;
}

std::vector<std::size_t> GiniImportance::ranking() const {
    std::vector<std::size_t> idx(values.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
    return idx;
}

GiniImportance gini_importance(const FittedModel& model) {
    const auto* forest = std::get_if<ForestModel>(&model.model);
    if (!forest)
        throw ValidationError(fmt::format("Gini importance needs a random forest, not {}", to_string(model.family)));
    GiniImportance out;
    out.features = model.feature_names;
    out.values = forest->importance;
    out.stats = describe(out.values);
    return out;
}

void write_importance_csv(const GiniImportance& importance, std::ostream& out, std::size_t top) {
    csv::write_record(out, {"rank", "variable", "mean_decrease_gini"});
    const auto order = importance.ranking();
    const std::size_t count = top == 0 ? order.size() : std::min(top, order.size());
    for (std::size_t r = 0; r < count; ++r)
        csv::write_record(out, {std::to_string(r + 1), importance.features[order[r]],
                                fmt::format("{:.4f}", importance.values[order[r]])});
}

void write_importance_stats_csv(const GiniImportance& importance, std::ostream& out) {
    const auto& s = importance.stats;
    csv::write_record(out, {"min", "q1", "median", "mean", "q3", "max"});
    csv::write_record(out, {fmt::format("{:.4f}", s.min), fmt::format("{:.4f}", s.q1), fmt::format("{:.4f}", s.median),
                            fmt::format("{:.4f}", s.mean), fmt::format("{:.4f}", s.q3), fmt::format("{:.4f}", s.max)});
}

} // namespace debtmine::ml
