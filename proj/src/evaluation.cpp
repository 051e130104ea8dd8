#include "debtmine/evaluation.hpp"

#include "debtmine/csv.hpp"
#include "debtmine/error.hpp"
#include "debtmine/random.hpp"
#include "debtmine/svg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>

namespace debtmine::eval {

std::vector<std::size_t> CvPlan::train_rows(std::size_t repeat, std::size_t f) const {
    std::vector<std::size_t> out;
    const auto& a = fold.at(repeat);
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] != static_cast<int>(f)) out.push_back(i);
    return out;
}

std::vector<std::size_t> CvPlan::test_rows(std::size_t repeat, std::size_t f) const {
    std::vector<std::size_t> out;
    const auto& a = fold.at(repeat);
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] == static_cast<int>(f)) out.push_back(i);
    return out;
}

std::uint64_t CvPlan::cell_seed(std::size_t repeat, std::size_t f) const {
    return derive_seed(seed, {0x63656c6cULL, repeat, f});
}

CvPlan make_cv_plan(const std::vector<int>& labels, std::size_t classes, std::size_t k, std::size_t repeats,
                    std::uint64_t seed) {
    if (repeats < 1) throw ValidationError("cv plan: repeats must be at least 1");
    CvPlan plan;
    plan.k = k;
    plan.repeats = repeats;
    plan.seed = seed;
    for (std::size_t r = 0; r < repeats; ++r)
        plan.fold.push_back(ml::stratified_folds(labels, classes, k, derive_seed(seed, {r})));
    return plan;
}

CellMetrics score(const std::vector<int>& truth, const std::vector<int>& predicted, std::size_t classes) {
    if (truth.size() != predicted.size() || truth.empty()) throw ValidationError("score: size mismatch");
    CellMetrics m;
    const auto c = static_cast<Eigen::Index>(classes);
    m.confusion = Eigen::MatrixXi::Zero(c, c);
    for (std::size_t i = 0; i < truth.size(); ++i) ++m.confusion(truth[i], predicted[i]);
    m.accuracy = static_cast<double>(m.confusion.trace()) / static_cast<double>(truth.size());
    for (Eigen::Index k = 0; k < c; ++k) {
        const int row = m.confusion.row(k).sum();
        m.recall.push_back(row ? static_cast<double>(m.confusion(k, k)) / row : 0.0);
    }
    if (classes == 2) {
        m.sensitivity = m.recall[1];
        m.specificity = m.recall[0];
    }
    return m;
}

std::vector<double> FoldMetrics::accuracies() const {
    std::vector<double> out;
    for (const auto& c : cells) out.push_back(c.accuracy);
    return out;
}

namespace {

double mean_of(const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

} // namespace

double FoldMetrics::mean_accuracy() const { return mean_of(accuracies()); }

double FoldMetrics::sd_accuracy() const {
    const auto a = accuracies();
    if (a.size() < 2) return 0.0;
    const double m = mean_of(a);
    double ss = 0.0;
    for (double x : a) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(a.size() - 1));
}

double FoldMetrics::mean_sensitivity() const {
    std::vector<double> v;
    for (const auto& c : cells) v.push_back(c.sensitivity);
    return mean_of(v);
}

double FoldMetrics::mean_specificity() const {
    std::vector<double> v;
    for (const auto& c : cells) v.push_back(c.specificity);
    return mean_of(v);
}

// Feature blocks ------------------------------------------------------------

namespace {

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& m, const std::vector<std::size_t>& rows) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
    return out;
}

} // namespace

FixedBlock::FixedBlock(std::string name, std::vector<std::string> names, Eigen::MatrixXd values)
    : name_(std::move(name)), names_(std::move(names)), values_(std::move(values)) {
    if (static_cast<Eigen::Index>(names_.size()) != values_.cols())
        throw ValidationError(fmt::format("block '{}': name count differs from columns", name_));
}

BlockMatrices FixedBlock::build(const std::vector<std::size_t>& train, const std::vector<std::size_t>& test) const {
    return {names_, take_rows(values_, train), take_rows(values_, test)};
}

HomalsBlock::HomalsBlock(std::string name, survey::Dataset data, std::vector<std::size_t> variables,
                         homals::HomalsOptions options)
    : name_(std::move(name)), data_(std::move(data)), variables_(std::move(variables)), options_(std::move(options)) {
    options_.name = name_;
}

std::vector<std::string> HomalsBlock::names() const {
    std::vector<std::string> out;
    for (std::size_t d = 0; d < options_.dimensions; ++d) out.push_back(fmt::format("{}_dim{}", name_, d + 1));
    return out;
}

BlockMatrices HomalsBlock::build(const std::vector<std::size_t>& train, const std::vector<std::size_t>& test) const {
    const auto train_data = data_.subset(train);
    const auto indicators = homals::drop_empty_categories(encode(train_data, variables_, survey::Encoding::full_indicator));
    const auto sol = homals::fit_homals(indicators, options_);
    BlockMatrices out;
    out.names = names();
    out.train = sol.object_scores;
    out.test = test.empty() ? Eigen::MatrixXd(0, out.train.cols())
                            : homals::project(sol, encode(data_.subset(test), variables_, survey::Encoding::full_indicator)).values;
    return out;
}

std::unique_ptr<FixedBlock> dummy_block(std::string name, const survey::Dataset& data,
                                        const std::vector<std::size_t>& variables) {
    auto enc = encode(data, variables, survey::Encoding::reference_dropped);
    return std::make_unique<FixedBlock>(std::move(name), std::move(enc.names), std::move(enc.values));
}

ml::TrainingMatrix assemble_full(const std::vector<const FeatureBlock*>& blocks, const std::vector<int>& labels,
                                 std::size_t classes, const std::vector<std::string>& class_names) {
    std::vector<std::size_t> all(labels.size());
    std::iota(all.begin(), all.end(), 0);
    ml::TrainingMatrix out;
    std::vector<Eigen::MatrixXd> parts;
    Eigen::Index cols = 0;
    for (const auto* b : blocks) {
        auto m = b->build(all, {});
        cols += m.train.cols();
        out.feature_names.insert(out.feature_names.end(), m.names.begin(), m.names.end());
        parts.push_back(std::move(m.train));
    }
    out.X.resize(static_cast<Eigen::Index>(labels.size()), cols);
    Eigen::Index at = 0;
    for (auto& p : parts) {
        out.X.middleCols(at, p.cols()) = p;
        at += p.cols();
    }
    out.y = labels;
    out.classes = classes;
    out.class_names = class_names;
    return out;
}

// Cross-validation ----------------------------------------------------------

namespace {

struct CellData {
    std::vector<std::size_t> train, test;
    std::vector<BlockMatrices> blocks;
};

CellData prepare_cell(const std::vector<const FeatureBlock*>& blocks, const CvPlan& plan, std::size_t r, std::size_t f) {
    CellData cell;
    cell.train = plan.train_rows(r, f);
    cell.test = plan.test_rows(r, f);
    for (const auto* b : blocks) cell.blocks.push_back(b->build(cell.train, cell.test));
    return cell;
}

std::pair<ml::TrainingMatrix, Eigen::MatrixXd> combine(const CellData& cell, const std::vector<std::size_t>& which,
                                                       const std::vector<int>& labels, std::size_t classes) {
    ml::TrainingMatrix train;
    Eigen::Index cols = 0;
    for (std::size_t b : which) cols += cell.blocks[b].train.cols();
    train.X.resize(static_cast<Eigen::Index>(cell.train.size()), cols);
    Eigen::MatrixXd test(static_cast<Eigen::Index>(cell.test.size()), cols);
    Eigen::Index at = 0;
    for (std::size_t b : which) {
        const auto& m = cell.blocks[b];
        train.X.middleCols(at, m.train.cols()) = m.train;
        test.middleCols(at, m.test.cols()) = m.test;
        train.feature_names.insert(train.feature_names.end(), m.names.begin(), m.names.end());
        at += m.train.cols();
    }
    for (std::size_t i : cell.train) train.y.push_back(labels[i]);
    train.classes = classes;
    return {std::move(train), std::move(test)};
}

std::vector<int> labels_of(const std::vector<int>& labels, const std::vector<std::size_t>& rows) {
    std::vector<int> out;
    for (std::size_t i : rows) out.push_back(labels[i]);
    return out;
}

void check_plan(const CvPlan& plan, const std::vector<int>& labels) {
    if (plan.rows() != labels.size())
        throw ValidationError(fmt::format("cv plan covers {} rows but {} labels were given", plan.rows(), labels.size()));
}

template <class Fn>
void run_cells(const CvPlan& plan, Execution exec, Fn&& fn) {
    for_each_task(plan.cells(), exec, [&](std::size_t cell) {
        const std::size_t r = cell / plan.k, f = cell % plan.k;
        try {
            fn(cell, r, f);
        } catch (const NumericalError& e) {
            throw NumericalError(fmt::format("repeat {}, fold {}: {}", r + 1, f + 1, e.what()));
        } catch (const ValidationError& e) {
            throw ValidationError(fmt::format("repeat {}, fold {}: {}", r + 1, f + 1, e.what()));
        }
    });
}

} // namespace

FoldMetrics cross_validate(const ml::ModelConfig& model, const std::vector<const FeatureBlock*>& blocks,
                           const std::vector<int>& labels, std::size_t classes, const CvPlan& plan,
                           const CvOptions& options) {
    check_plan(plan, labels);
    FoldMetrics out;
    out.cells.resize(plan.cells());
    std::vector<std::size_t> all(blocks.size());
    std::iota(all.begin(), all.end(), 0);
    run_cells(plan, options.execution, [&](std::size_t cell, std::size_t r, std::size_t f) {
        const auto data = prepare_cell(blocks, plan, r, f);
        auto [train, test] = combine(data, all, labels, classes);
        const auto fitted = ml::train(model, train, plan.cell_seed(r, f));
        auto m = score(labels_of(labels, data.test), fitted.predict(test), classes);
        m.repeat = r;
        m.fold = f;
        out.cells[cell] = std::move(m);
    });
    return out;
}

// Significance tests --------------------------------------------------------

PairedTTest paired_t_test(const std::vector<double>& a, const std::vector<double>& b, double alpha) {
    if (a.size() != b.size()) throw ValidationError(fmt::format("paired t-test: lengths {} and {} differ", a.size(), b.size()));
    if (a.size() < 2) throw ValidationError("paired t-test: need at least 2 pairs");
    const auto n = static_cast<double>(a.size());
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    PairedTTest out;
    out.df = n - 1.0;
    out.mean_difference = mean_of(d);
    if (std::all_of(d.begin(), d.end(), [](double x) { return x == 0.0; })) {
        out.degenerate = true;
        return out;
    }
    double ss = 0.0;
    for (double x : d) ss += (x - out.mean_difference) * (x - out.mean_difference);
    const double se = std::sqrt(ss / (n - 1.0) / n);
    if (se == 0.0) {
        out.t = std::copysign(std::numeric_limits<double>::infinity(), out.mean_difference);
        out.p = 0.0;
    } else {
        out.t = out.mean_difference / se;
        const boost::math::students_t dist(out.df);
        out.p = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(out.t))));
    }
    out.significant = out.p < alpha;
    return out;
}

ChiSquare chi_square_homogeneity(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw ValidationError("chi-square: category counts differ in length");
    if (a.size() < 2) throw ValidationError("chi-square: need at least 2 categories");
    const double na = std::accumulate(a.begin(), a.end(), 0.0);
    const double nb = std::accumulate(b.begin(), b.end(), 0.0);
    if (!(na > 0.0) || !(nb > 0.0)) throw ValidationError("chi-square: a sample has no observations");
    const double total = na + nb;
    ChiSquare out;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double col = a[k] + b[k];
        if (!(col > 0.0))
            throw ValidationError(fmt::format("chi-square: category {} has zero expected count; merge it with a neighbour", k + 1));
        const double ea = na * col / total, eb = nb * col / total;
        out.statistic += (a[k] - ea) * (a[k] - ea) / ea + (b[k] - eb) * (b[k] - eb) / eb;
        out.max_shift = std::max(out.max_shift, std::abs(a[k] / na - b[k] / nb));
    }
    out.df = static_cast<double>(a.size() - 1);
    out.p = out.statistic > 0.0
                ? boost::math::cdf(boost::math::complement(boost::math::chi_squared(out.df), out.statistic))
                : 1.0;
    return out;
}

std::vector<double> category_counts(const survey::Dataset& data, std::size_t variable,
                                    const std::vector<std::size_t>& rows) {
    std::vector<double> out(data.schema().variable(variable).categories.size(), 0.0);
    for (std::size_t r : rows) out[static_cast<std::size_t>(data.value(r, variable))] += 1.0;
    return out;
}

std::vector<VariableComparison> compare_distributions(const survey::Dataset& data,
                                                      const std::vector<std::size_t>& variables,
                                                      const std::vector<std::size_t>& subset,
                                                      const std::vector<std::size_t>& reference) {
    std::vector<VariableComparison> out;
    for (std::size_t v : variables) {
        const auto a = category_counts(data, v, subset);
        const auto b = category_counts(data, v, reference);
        std::vector<double> ka, kb;
        for (std::size_t k = 0; k < a.size(); ++k)
            if (a[k] + b[k] > 0.0) {
                ka.push_back(a[k]);
                kb.push_back(b[k]);
            }
        VariableComparison c;
        c.variable = data.schema().variable(v).name;
        if (ka.size() >= 2) c.test = chi_square_homogeneity(ka, kb);
        out.push_back(std::move(c));
    }
    return out;
}

void write_comparison_csv(const std::vector<VariableComparison>& rows, std::ostream& out) {
    csv::write_record(out, {"variable", "chi_square", "df", "p_value", "max_proportion_shift"});
    for (const auto& r : rows)
        csv::write_record(out, {r.variable, csv::format(r.test.statistic), csv::format(r.test.df), csv::format(r.test.p),
                                csv::format(r.test.max_shift)});
}

Undersampling undersample(const std::vector<int>& labels, int target_class, std::size_t target_count,
                          std::uint64_t seed, const survey::Dataset* data, const std::vector<std::size_t>& variables) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == target_class) members.push_back(i);
    if (target_count > members.size())
        throw ValidationError(fmt::format("undersample: target {} exceeds the {} rows of class {}", target_count,
                                          members.size(), target_class));
    Rng rng = make_rng(seed);
    const auto pick = sample_without_replacement(members.size(), target_count, rng);
    std::vector<char> keep(labels.size(), 1);
    for (std::size_t i : members) keep[i] = 0;
    std::vector<std::size_t> chosen;
    for (std::size_t p : pick) {
        keep[members[p]] = 1;
        chosen.push_back(members[p]);
    }
    std::sort(chosen.begin(), chosen.end());
    Undersampling out;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (keep[i]) out.kept.push_back(i);
    out.removed = labels.size() - out.kept.size();
    if (data) out.representativeness = compare_distributions(*data, variables, chosen, members);
    return out;
}

// Stepwise protocol ---------------------------------------------------------

std::string_view to_string(Variant v) { return v == Variant::original ? "original" : "transformed"; }

GroupBlocks make_group_blocks(const survey::Dataset& data, Variant variant, std::shared_ptr<const FeatureBlock> psych,
                              const homals::HomalsOptions& homals_options) {
    const auto& schema = data.schema();
    const auto fin = schema.group_indices(survey::VariableGroup::financial);
    const auto dem = schema.group_indices(survey::VariableGroup::demographic);
    if (fin.empty() || dem.empty()) throw ValidationError("stepwise: schema needs financial and demographic variables");
    GroupBlocks g;
    g.variant = variant;
    g.psychological = std::move(psych);
    if (variant == Variant::original) {
        g.financial = dummy_block("Financial", data, fin);
        g.demographic = dummy_block("Demographic", data, dem);
    } else {
        g.financial = std::make_shared<HomalsBlock>("Financial", data, fin, homals_options);
        g.demographic = std::make_shared<HomalsBlock>("Demographic", data, dem, homals_options);
    }
    return g;
}

std::vector<std::string> stepwise_evaluations() {
    return {"Financial", "Demographic", "Psychological", "Step 2", "Step 3"};
}

std::vector<const FeatureBlock*> evaluation_blocks(const GroupBlocks& g, std::string_view evaluation) {
    if (evaluation == "Financial" || evaluation == "Step 1") return {g.financial.get()};
    if (evaluation == "Demographic") return {g.demographic.get()};
    if (evaluation == "Psychological") return {g.psychological.get()};
    if (evaluation == "Step 2") return {g.financial.get(), g.demographic.get()};
    if (evaluation == "Step 3") return {g.financial.get(), g.demographic.get(), g.psychological.get()};
    throw ValidationError(fmt::format("unknown evaluation '{}'", evaluation));
}

StepwiseResult run_stepwise(const GroupBlocks& groups, const std::vector<int>& labels, std::size_t classes,
                            const CvPlan& plan, const StepwiseOptions& options) {
    check_plan(plan, labels);
    const auto& evals = options.evaluations;
    const auto step2 = std::find(evals.begin(), evals.end(), "Step 2") - evals.begin();
    const auto step3 = std::find(evals.begin(), evals.end(), "Step 3") - evals.begin();
    if (step2 == static_cast<long>(evals.size()) || step3 == static_cast<long>(evals.size()))
        throw ValidationError("stepwise: evaluations must include Step 2 and Step 3");
    if (options.models.empty()) throw ValidationError("stepwise: no model families");

    // Blocks 0..2 are financial, demographic, psychological.
    const std::vector<const FeatureBlock*> blocks{groups.financial.get(), groups.demographic.get(),
                                                  groups.psychological.get()};
    std::vector<std::vector<std::size_t>> which;
    for (const auto& e : evals) {
        std::vector<std::size_t> idx;
        for (const auto* b : evaluation_blocks(groups, e))
            idx.push_back(static_cast<std::size_t>(std::find(blocks.begin(), blocks.end(), b) - blocks.begin()));
        which.push_back(std::move(idx));
    }
    std::vector<bool> used(3, false);
    for (const auto& w : which)
        for (std::size_t b : w) used[b] = true;

    StepwiseResult result;
    result.variant = groups.variant;
    result.evaluations = evals;
    for (const auto& m : options.models) {
        FamilyResult fr;
        fr.family = m.family;
        fr.metrics.assign(evals.size(), FoldMetrics{std::vector<CellMetrics>(plan.cells())});
        result.families.push_back(std::move(fr));
    }

    run_cells(plan, options.execution, [&](std::size_t cell, std::size_t r, std::size_t f) {
        CellData data;
        data.train = plan.train_rows(r, f);
        data.test = plan.test_rows(r, f);
        for (std::size_t b = 0; b < 3; ++b)
            data.blocks.push_back(used[b] ? blocks[b]->build(data.train, data.test) : BlockMatrices{});
        const auto truth = labels_of(labels, data.test);
        for (std::size_t e = 0; e < evals.size(); ++e) {
            auto [train, test] = combine(data, which[e], labels, classes);
            for (std::size_t m = 0; m < options.models.size(); ++m) {
                std::vector<int> predicted;
                try {
                    predicted = ml::train(options.models[m], train, derive_seed(plan.cell_seed(r, f), {m})).predict(test);
                } catch (const NumericalError& err) {
                    throw NumericalError(fmt::format("{}, {}: {}", evals[e], ml::to_string(options.models[m].family), err.what()));
                } catch (const ValidationError& err) {
                    throw ValidationError(fmt::format("{}, {}: {}", evals[e], ml::to_string(options.models[m].family), err.what()));
                }
                auto metrics = score(truth, predicted, classes);
                metrics.repeat = r;
                metrics.fold = f;
                result.families[m].metrics[e].cells[cell] = std::move(metrics);
            }
        }
    });

    for (auto& fr : result.families)
        fr.step3_vs_step2 = paired_t_test(fr.metrics[static_cast<std::size_t>(step3)].accuracies(),
                                          fr.metrics[static_cast<std::size_t>(step2)].accuracies(), options.alpha);
    return result;
}

void write_cells_csv(const StepwiseResult& result, std::string_view mode, std::ostream& out, bool header) {
    if (header)
        csv::write_record(out, {"mode", "variant", "evaluation", "family", "repeat", "fold", "accuracy", "sensitivity",
                                "specificity", "recall"});
    for (const auto& fr : result.families)
        for (std::size_t e = 0; e < result.evaluations.size(); ++e)
            for (const auto& c : fr.metrics[e].cells) {
                std::string recall;
                for (std::size_t k = 0; k < c.recall.size(); ++k) recall += (k ? ";" : "") + csv::format(c.recall[k]);
                const bool two = c.recall.size() == 2;
                csv::write_record(out, {std::string(mode), std::string(to_string(result.variant)), result.evaluations[e],
                                        std::string(ml::to_string(fr.family)), std::to_string(c.repeat + 1),
                                        std::to_string(c.fold + 1), csv::format(c.accuracy),
                                        two ? csv::format(c.sensitivity) : "NA", two ? csv::format(c.specificity) : "NA",
                                        recall});
            }
}

void write_summary_csv(const StepwiseResult& result, std::string_view mode, std::ostream& out, bool header) {
    if (header)
        csv::write_record(out, {"mode", "variant", "evaluation", "family", "cells", "mean_accuracy", "sd_accuracy",
                                "mean_sensitivity", "mean_specificity"});
    for (const auto& fr : result.families)
        for (std::size_t e = 0; e < result.evaluations.size(); ++e) {
            const auto& m = fr.metrics[e];
            const bool two = !m.cells.empty() && m.cells.front().recall.size() == 2;
            csv::write_record(out, {std::string(mode), std::string(to_string(result.variant)), result.evaluations[e],
                                    std::string(ml::to_string(fr.family)), std::to_string(m.cells.size()),
                                    csv::format(m.mean_accuracy()), csv::format(m.sd_accuracy()),
                                    two ? csv::format(m.mean_sensitivity()) : "NA",
                                    two ? csv::format(m.mean_specificity()) : "NA"});
        }
}

void write_significance_csv(const StepwiseResult& result, std::string_view mode, std::ostream& out, bool header) {
    if (header)
        csv::write_record(out, {"mode", "variant", "family", "comparison", "mean_difference", "t", "df", "p_value",
                                "significant", "degenerate"});
    for (const auto& fr : result.families) {
        const auto& t = fr.step3_vs_step2;
        csv::write_record(out, {std::string(mode), std::string(to_string(result.variant)),
                                std::string(ml::to_string(fr.family)), "Step 3 vs Step 2", csv::format(t.mean_difference),
                                csv::format(t.t), csv::format(t.df), fmt::format("{:.4g}", t.p),
                                t.significant ? "yes" : "no", t.degenerate ? "yes" : "no"});
    }
}

void write_step_chart(const StepwiseResult& result, std::string_view mode, std::ostream& out) {
    std::vector<std::string> series;
    for (const auto& fr : result.families) series.emplace_back(ml::to_string(fr.family));
    std::vector<svg::BarGroup> groups;
    for (std::size_t e = 0; e < result.evaluations.size(); ++e) {
        svg::BarGroup g;
        g.label = result.evaluations[e];
        for (const auto& fr : result.families) g.values.push_back(fr.metrics[e].mean_accuracy());
        groups.push_back(std::move(g));
    }
    svg::grouped_bars(out, fmt::format("Mean CV accuracy, {} classes, {} variables", mode, to_string(result.variant)),
                      series, groups, "Accuracy");
}

} // namespace debtmine::eval
