#include "debtmine/classifiers.hpp"
#include "debtmine/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

namespace debtmine::ml {

int DecisionTree::predict(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
    std::size_t node = 0;
    while (nodes[node].feature >= 0)
        node = static_cast<std::size_t>(row(nodes[node].feature) <= nodes[node].threshold ? nodes[node].left
                                                                                          : nodes[node].right);
    return nodes[node].label;
}

namespace {

using Counts = std::vector<long long>;

double sum_sq_over_n(const Counts& counts, long long n) {
    double s = 0.0;
    for (long long c : counts) s += static_cast<double>(c) * static_cast<double>(c);
    return s / static_cast<double>(n);
}

// Sign of nR * n * sum(cL^2) + nL * n * sum(cR^2) - nL * nR * sum(c^2), the
// count-weighted Gini decrease scaled by n * nL * nR, in exact arithmetic.
bool positive_decrease(const Counts& left, const Counts& right, long long nl, long long nr) {
    __int128 sl = 0, sr = 0, st = 0;
    for (std::size_t c = 0; c < left.size(); ++c) {
        sl += static_cast<__int128>(left[c]) * left[c];
        sr += static_cast<__int128>(right[c]) * right[c];
        const __int128 t = left[c] + right[c];
        st += t * t;
    }
    const __int128 n = nl + nr;
    return static_cast<__int128>(nr) * n * sl + static_cast<__int128>(nl) * n * sr -
               static_cast<__int128>(nl) * nr * st >
           0;
}

int majority(const Counts& counts) {
    return static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

class TreeBuilder {
public:
    TreeBuilder(const TrainingMatrix& data, std::size_t mtry, std::size_t min_leaf, Rng& rng)
        : data_(data), mtry_(mtry), min_leaf_(static_cast<long long>(min_leaf)), rng_(rng) {
        tree_.importance.assign(static_cast<std::size_t>(data.X.cols()), 0.0);
    }

    DecisionTree build(std::vector<std::size_t> rows) {
        grow(std::move(rows));
        return std::move(tree_);
    }

private:
    struct Split {
        int feature = -1;
        double threshold = 0.0;
        double decrease = -1.0;
    };

    int grow(std::vector<std::size_t> rows) {
        const int id = static_cast<int>(tree_.nodes.size());
        tree_.nodes.emplace_back();
        Counts counts(data_.classes, 0);
        for (std::size_t r : rows) ++counts[static_cast<std::size_t>(data_.y[r])];
        const auto n = static_cast<long long>(rows.size());
        tree_.nodes[static_cast<std::size_t>(id)].label = majority(counts);
        const bool pure = std::count(counts.begin(), counts.end(), 0LL) == static_cast<long>(counts.size()) - 1;
        if (pure || n < 2 * min_leaf_) return id;

        const Split split = best_split(rows, counts);
        if (split.feature < 0) return id;

        std::vector<std::size_t> left, right;
        for (std::size_t r : rows)
            (data_.X(static_cast<Eigen::Index>(r), split.feature) <= split.threshold ? left : right).push_back(r);
        rows.clear();
        rows.shrink_to_fit();
        tree_.importance[static_cast<std::size_t>(split.feature)] += split.decrease;
        const int l = grow(std::move(left));
        const int r = grow(std::move(right));
        auto& node = tree_.nodes[static_cast<std::size_t>(id)];
        node.feature = split.feature;
        node.threshold = split.threshold;
        node.left = l;
        node.right = r;
        return id;
    }

    Split best_split(const std::vector<std::size_t>& rows, const Counts& counts) {
        const auto d = static_cast<std::size_t>(data_.X.cols());
        auto features = sample_without_replacement(d, mtry_, rng_);
        std::sort(features.begin(), features.end());
        const auto n = static_cast<long long>(rows.size());
        const double parent = sum_sq_over_n(counts, n);

        Split best;
        const std::size_t k = counts.size();
        Counts left(k), right(k);
        auto consider = [&](std::size_t f, long long nl, double lo, double hi) {
            const auto nr = n - nl;
            if (nl < min_leaf_ || nr < min_leaf_) return;
            const double decrease = sum_sq_over_n(left, nl) + sum_sq_over_n(right, nr) - parent;
            if (decrease > best.decrease && positive_decrease(left, right, nl, nr)) {
                best.feature = static_cast<int>(f);
                best.threshold = 0.5 * (lo + hi);
                best.decrease = decrease;
            }
        };
        for (std::size_t f : features) {
            const auto col = static_cast<Eigen::Index>(f);
            // Few distinct values: per-class histogram instead of a sort.
            levels_.clear();
            level_counts_.clear();
            bool few = true;
            for (std::size_t r : rows) {
                const double v = data_.X(static_cast<Eigen::Index>(r), col);
                std::size_t j = 0;
                while (j < levels_.size() && levels_[j] != v) ++j;
                if (j == levels_.size()) {
                    if (levels_.size() == kMaxLevels) {
                        few = false;
                        break;
                    }
                    levels_.push_back(v);
                    level_counts_.resize(level_counts_.size() + k, 0);
                }
                ++level_counts_[j * k + static_cast<std::size_t>(data_.y[r])];
            }
            if (few) {
                if (levels_.size() < 2) continue;
                order_.resize(levels_.size());
                for (std::size_t j = 0; j < order_.size(); ++j) order_[j] = j;
                std::sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) { return levels_[a] < levels_[b]; });
                std::fill(left.begin(), left.end(), 0);
                right = counts;
                long long nl = 0;
                for (std::size_t j = 0; j + 1 < order_.size(); ++j) {
                    for (std::size_t c = 0; c < k; ++c) {
                        const long long m = level_counts_[order_[j] * k + c];
                        left[c] += m;
                        right[c] -= m;
                        nl += m;
                    }
                    consider(f, nl, levels_[order_[j]], levels_[order_[j + 1]]);
                }
                continue;
            }
            values_.resize(rows.size());
            for (std::size_t i = 0; i < rows.size(); ++i)
                values_[i] = {data_.X(static_cast<Eigen::Index>(rows[i]), col), data_.y[rows[i]]};
            std::sort(values_.begin(), values_.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
            if (values_.front().first == values_.back().first) continue;
            std::fill(left.begin(), left.end(), 0);
            right = counts;
            for (std::size_t i = 0; i + 1 < values_.size(); ++i) {
                ++left[static_cast<std::size_t>(values_[i].second)];
                --right[static_cast<std::size_t>(values_[i].second)];
                if (values_[i].first == values_[i + 1].first) continue;
                consider(f, static_cast<long long>(i + 1), values_[i].first, values_[i + 1].first);
            }
        }
        return best;
    }

    static constexpr std::size_t kMaxLevels = 16;

    const TrainingMatrix& data_;
    std::size_t mtry_;
    long long min_leaf_;
    Rng& rng_;
    DecisionTree tree_;
    std::vector<double> levels_;
    std::vector<long long> level_counts_;
    std::vector<std::size_t> order_;
    std::vector<std::pair<double, int>> values_;
};

} // namespace

DecisionTree train_decision_tree(const TrainingMatrix& data, const std::vector<std::size_t>& sample, std::size_t mtry,
                                 std::size_t min_leaf, Rng& rng) {
    if (sample.empty()) throw ValidationError("decision tree: empty sample");
    if (mtry < 1 || mtry > static_cast<std::size_t>(data.X.cols()))
        throw ValidationError(fmt::format("decision tree: mtry must lie in [1, {}]", data.X.cols()));
    return TreeBuilder(data, mtry, min_leaf, rng).build(sample);
}

ForestModel train_random_forest(const TrainingMatrix& data, const ForestOptions& options) {
    data.validate();
    const auto n = static_cast<std::size_t>(data.X.rows());
    const auto d = static_cast<std::size_t>(data.X.cols());
    if (options.n_trees < 1) throw ValidationError("random_forest: n_trees must be at least 1");
    if (options.min_leaf < 1 || options.min_leaf >= n)
        throw ValidationError(fmt::format("random_forest: min_leaf must lie in [1, {})", n));
    const std::size_t mtry =
        options.mtry == 0 ? std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::sqrt(double(d)))))
                          : options.mtry;
    if (mtry > d) throw ValidationError(fmt::format("random_forest: mtry {} exceeds {} features", mtry, d));

    ForestModel forest;
    forest.features = d;
    forest.mtry = mtry;
    forest.trees.resize(options.n_trees);
    std::vector<std::vector<char>> in_bag(options.n_trees);
    for_each_task(options.n_trees, options.execution, [&](std::size_t t) {
        Rng rng = make_rng(options.seed, {t});
        std::vector<std::size_t> sample(n);
        std::vector<char> bag(n, 0);
        if (options.bootstrap) {
            std::uniform_int_distribution<std::size_t> pick(0, n - 1);
            for (auto& s : sample) bag[s = pick(rng)] = 1;
        } else {
            for (std::size_t i = 0; i < n; ++i) sample[i] = i;
            std::fill(bag.begin(), bag.end(), 1);
        }
        forest.trees[t] = TreeBuilder(data, mtry, options.min_leaf, rng).build(std::move(sample));
        in_bag[t] = std::move(bag);
    });

    forest.importance.assign(d, 0.0);
    for (const auto& tree : forest.trees)
        for (std::size_t j = 0; j < d; ++j) forest.importance[j] += tree.importance[j];
    for (auto& v : forest.importance) v /= static_cast<double>(options.n_trees);

    Eigen::MatrixXi votes = Eigen::MatrixXi::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(data.classes));
    for (std::size_t t = 0; t < options.n_trees; ++t)
        for (std::size_t i = 0; i < n; ++i)
            if (!in_bag[t][i]) ++votes(static_cast<Eigen::Index>(i), forest.trees[t].predict(data.X.row(static_cast<Eigen::Index>(i))));
    std::size_t scored = 0, hit = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = votes.row(static_cast<Eigen::Index>(i));
        if (row.sum() == 0) continue;
        Eigen::Index best = 0;
        for (Eigen::Index c = 1; c < row.size(); ++c)
            if (row(c) > row(best)) best = c;
        ++scored;
        hit += static_cast<int>(best) == data.y[i];
    }
    forest.oob_accuracy = scored ? static_cast<double>(hit) / static_cast<double>(scored)
                                 : std::numeric_limits<double>::quiet_NaN();
    return forest;
}

} // namespace debtmine::ml
