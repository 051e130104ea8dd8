// Acceptance criteria, one PASS/FAIL line each. Pass criterion numbers as
// arguments to run a subset.

#include "debtmine/classifiers.hpp"
#include "debtmine/config.hpp"
#include "debtmine/csv.hpp"
#include "debtmine/evaluation.hpp"
#include "debtmine/homals.hpp"
#include "debtmine/pipeline.hpp"
#include "debtmine/psychometrics.hpp"
#include "debtmine/random.hpp"
#include "debtmine/synth.hpp"

#include "../support.hpp"

#include <fmt/core.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace debtmine;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("debtmine_acceptance_" + name);
    fs::remove_all(p);
    return p;
}

bool uniform_loss_decrease(const homals::HomalsSolution& sol) {
    for (std::size_t i = 1; i < sol.loss_history.size(); ++i)
        if (sol.loss_history[i] > sol.loss_history[i - 1] * (1 + 1e-12)) return false;
    return true;
}

homals::HomalsSolution fit_all(const survey::Dataset& d, const homals::HomalsOptions& o) {
    std::vector<std::size_t> vars;
    for (std::size_t v = 0; v < d.variables(); ++v)
        if (d.schema().variable(v).group != survey::VariableGroup::target) vars.push_back(v);
    return homals::fit_homals(homals::drop_empty_categories(survey::encode(d, vars, survey::Encoding::full_indicator)), o);
}

homals::HomalsOptions tight(std::uint64_t seed) {
    homals::HomalsOptions o;
    o.tol = 1e-15;
    o.max_iter = 20000;
    o.seed = seed;
    return o;
}

/// Random instance with at most 8 variables and 40 rows.
survey::Dataset small_instance(std::uint64_t seed) {
    auto rng = make_rng(seed, {101});
    const std::size_t m = std::uniform_int_distribution<std::size_t>(2, 8)(rng);
    const std::size_t rows = std::uniform_int_distribution<std::size_t>(20, 40)(rng);
    std::vector<std::size_t> levels(m);
    for (auto& l : levels) l = std::uniform_int_distribution<std::size_t>(2, 4)(rng);
    return testing::random_categorical(rows, levels, seed);
}

bool constraints_hold(const homals::HomalsSolution& sol) {
    const auto& x = sol.object_scores;
    const double n = static_cast<double>(x.rows());
    const Eigen::MatrixXd xtx = x.transpose() * x;
    return (xtx - n * Eigen::MatrixXd::Identity(x.cols(), x.cols())).cwiseAbs().maxCoeff() <= 1e-7 &&
           x.colwise().mean().cwiseAbs().maxCoeff() <= 1e-9;
}

// 1 -------------------------------------------------------------------------

Outcome homals_oracle() {
    Stopwatch clock;
    std::size_t checked = 0, skipped = 0, monotone = 0, fits = 0;
    double worst = 0.0;
    for (std::uint64_t seed = 1; checked < 20 && seed < 500; ++seed) {
        const auto d = small_instance(seed);
        const auto sol = fit_all(d, tight(seed));
        ++fits;
        monotone += uniform_loss_decrease(sol);
        std::vector<std::size_t> vars(d.variables() - 1);
        for (std::size_t j = 0; j < vars.size(); ++j) vars[j] = j;
        const auto g = homals::drop_empty_categories(survey::encode(d, vars, survey::Encoding::full_indicator));
        if (testing::burt_gap(g.values, 2) < 0.05) {
            ++skipped; // second and third eigenvalues too close for a well-defined subspace
            continue;
        }
        worst = std::max(worst, testing::max_principal_angle(sol.object_scores, testing::burt_object_space(g.values, 2)));
        ++checked;
    }
    const double secs = clock.seconds();
    return {checked >= 20 && worst < 1e-4 && monotone == fits && secs < 10.0,
            fmt::format("{} instances compared ({} near-degenerate skipped), max angle {:.2e} rad, monotone loss {}/{}, {:.1f} s",
                        checked, skipped, worst, monotone, fits, secs)};
}

// 2 -------------------------------------------------------------------------

Outcome homals_constraints() {
    std::size_t converged = 0, ok = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        homals::HomalsOptions o;
        o.seed = seed;
        o.dimensions = 1 + seed % 2;
        for (const auto& options : {o, tight(seed)}) {
            const auto sol = fit_all(small_instance(seed), options);
            if (!sol.converged) continue;
            ++converged;
            ok += constraints_hold(sol);
        }
    }
    return {converged > 0 && ok == converged, fmt::format("{}/{} converged fits satisfy both constraints", ok, converged)};
}

// 3 -------------------------------------------------------------------------

/// Every category equally frequent, rows assigned at random.
survey::Dataset uniform_categorical(std::size_t rows, std::size_t vars, std::size_t levels, std::uint64_t seed) {
    std::vector<survey::VariableSpec> specs;
    for (std::size_t j = 0; j < vars; ++j) {
        survey::VariableSpec v;
        v.name = "v" + std::to_string(j + 1);
        v.group = survey::VariableGroup::financial;
        for (std::size_t k = 0; k < levels; ++k) v.categories.push_back("c" + std::to_string(k + 1));
        specs.push_back(v);
    }
    survey::VariableSpec target;
    target.name = "Debt";
    target.group = survey::VariableGroup::target;
    target.categories = {"None", "Some"};
    specs.push_back(target);
    auto schema = std::make_shared<const survey::SurveySchema>(specs);
    auto rng = make_rng(seed, {303});
    std::vector<std::vector<int>> cols(vars + 1, std::vector<int>(rows));
    for (auto& col : cols) {
        for (std::size_t i = 0; i < rows; ++i) col[i] = static_cast<int>(i % (&col == &cols.back() ? 2 : levels));
        std::shuffle(col.begin(), col.end(), rng);
    }
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < rows; ++i) ids.push_back(std::to_string(i + 1));
    return survey::Dataset(schema, cols, ids);
}

Outcome noise_diagnosis() {
    std::size_t planted_ok = 0, null_ok = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        const auto s = synth::generate_synthetic_survey({}, seed);
        bool all_flagged = true;
        std::size_t uncertain = 0;
        for (auto group : {survey::VariableGroup::financial, survey::VariableGroup::demographic}) {
            homals::HomalsOptions o;
            o.seed = seed;
            const auto vars = s.data.schema().group_indices(group);
            const auto sol = homals::fit_homals(
                homals::drop_empty_categories(survey::encode(s.data, vars, survey::Encoding::full_indicator)), o);
            for (const auto* p : homals::category_diagnostics(sol, 2.0).uncertain()) {
                all_flagged &= p->flagged;
                ++uncertain;
            }
        }
        planted_ok += all_flagged && uncertain > 0;

        homals::HomalsOptions o;
        o.seed = seed;
        const auto null_sol = fit_all(uniform_categorical(2000, 8, 4, seed), o);
        null_ok += homals::category_diagnostics(null_sol, 3.0).flagged().empty();
    }
    return {planted_ok >= 95 && null_ok >= 95,
            fmt::format("planted: all uncertain categories flagged at 2x in {}/100 seeds; null: no flags at 3x in {}/100 seeds",
                        planted_ok, null_ok)};
}

// 4 -------------------------------------------------------------------------

Outcome parallel_analysis_recovery() {
    Stopwatch clock;
    std::size_t five = 0, zero = 0;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        synth::SyntheticConfig cfg;
        cfg.n = 1253;
        const auto s = synth::generate_synthetic_survey(cfg, seed);
        const auto vars = s.data.schema().group_indices(survey::VariableGroup::psychological);
        const auto items = survey::encode(s.data, vars, survey::Encoding::likert_numeric).values;
        psych::ParallelAnalysisOptions o;
        o.seed = derive_seed(seed, {1});
        five += psych::parallel_analysis(items, o).retained == 5;

        auto rng = make_rng(seed, {404});
        std::normal_distribution<double> z;
        Eigen::MatrixXd noise(1000, 28);
        for (Eigen::Index i = 0; i < noise.size(); ++i) noise(i) = z(rng);
        o.seed = derive_seed(seed, {2});
        zero += psych::parallel_analysis(noise, o).retained == 0;
    }
    const double secs = clock.seconds();
    return {five >= 48 && zero >= 45 && secs < 60.0,
            fmt::format("5 retained in {}/50 planted seeds, 0 retained in {}/50 noise seeds, {:.1f} s", five, zero, secs)};
}

// 5 -------------------------------------------------------------------------

double worst_congruence(const Eigen::MatrixXd& est, const Eigen::MatrixXd& truth) {
    std::vector<bool> used(static_cast<std::size_t>(est.cols()), false);
    double worst = 1.0;
    for (Eigen::Index k = 0; k < truth.cols(); ++k) {
        double best = -1.0;
        Eigen::Index at = 0;
        for (Eigen::Index j = 0; j < est.cols(); ++j) {
            if (used[static_cast<std::size_t>(j)]) continue;
            const double c = std::abs(est.col(j).dot(truth.col(k))) / (est.col(j).norm() * truth.col(k).norm());
            if (c > best) {
                best = c;
                at = j;
            }
        }
        used[static_cast<std::size_t>(at)] = true;
        worst = std::min(worst, best);
    }
    return worst;
}

Outcome efa_recovery() {
    double worst = 1.0;
    std::size_t cases = 0;
    auto check = [&](const Eigen::MatrixXd& lambda) {
        Eigen::MatrixXd r = lambda * lambda.transpose();
        r.diagonal().setOnes(); // Psi = 1 - communality
        psych::ExtractionOptions eo;
        eo.tol = 1e-12;
        eo.max_iter = 20000;
        const auto model = psych::varimax(psych::extract_factors({r, {}}, static_cast<std::size_t>(lambda.cols()), eo));
        worst = std::min(worst, worst_congruence(model.loadings, lambda));
        ++cases;
    };
    for (Eigen::Index m : {2, 3, 4, 5}) {
        for (Eigen::Index per : {3, 5}) {
            Eigen::MatrixXd l = Eigen::MatrixXd::Zero(m * per, m);
            for (Eigen::Index i = 0; i < m * per; ++i) l(i, i % m) = 0.8 - 0.07 * static_cast<double>(i / m);
            check(l);
        }
    }
    {
        // The generator's 28-item, 5-factor battery.
        const synth::SyntheticConfig cfg;
        Eigen::MatrixXd l = Eigen::MatrixXd::Zero(28, 5);
        for (Eigen::Index i = 0; i < 28; ++i)
            l(i, i % 5) = cfg.primary_loadings[static_cast<std::size_t>(i % 5)] * (i % 4 == 3 ? -1.0 : 1.0);
        check(l);
    }

    double grid_gap = 0.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        auto rng = make_rng(seed, {505});
        std::normal_distribution<double> z;
        Eigen::MatrixXd l(9, 2);
        for (Eigen::Index i = 0; i < l.size(); ++i) l(i) = 0.4 * z(rng);
        psych::FactorModel model;
        model.factors = 2;
        model.loadings = l;
        model.communalities = l.rowwise().squaredNorm();
        model.rotation_matrix = Eigen::MatrixXd::Identity(2, 2);
        const double got = psych::varimax_criterion(psych::varimax(model).loadings);
        auto at = [&](double th) {
            Eigen::Matrix2d rot;
            rot << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
            return psych::varimax_criterion(l * rot);
        };
        const int steps = 20000;
        double best_t = 0.0, best = -1.0;
        for (int s = 0; s < steps; ++s) {
            const double th = std::numbers::pi / 2 * s / steps;
            if (at(th) > best) {
                best = at(th);
                best_t = th;
            }
        }
        double lo = best_t - std::numbers::pi / steps, hi = best_t + std::numbers::pi / steps;
        for (int it = 0; it < 200; ++it) {
            const double a = lo + (hi - lo) / 3, b = hi - (hi - lo) / 3;
            if (at(a) < at(b))
                lo = a;
            else
                hi = b;
        }
        grid_gap = std::max(grid_gap, std::abs(got - at((lo + hi) / 2)));
    }
    return {worst >= 0.999 && grid_gap <= 1e-6,
            fmt::format("worst congruence {:.6f} over {} structures; angle-grid criterion gap {:.1e}", worst, cases, grid_gap)};
}

// 6 -------------------------------------------------------------------------

Outcome cronbach() {
    Eigen::MatrixXd cov = Eigen::MatrixXd::Constant(3, 3, 0.5);
    cov.diagonal().setOnes();
    const double alpha = psych::cronbach_alpha_from_covariance(cov);
    const std::vector<std::pair<double, std::string>> table{
        {0.86, "good"}, {0.64, "acceptable"}, {0.61, "acceptable"}, {0.57, "poor"}};
    std::string bands;
    bool ok = std::abs(alpha - 0.75) <= 1e-9;
    for (const auto& [a, label] : table) {
        const std::string got(psych::to_string(psych::reliability_band(a)));
        ok &= got == label;
        bands += fmt::format(" {}->{}", a, got);
    }
    return {ok, fmt::format("alpha {:.12f};{}", alpha, bands)};
}

// 7 -------------------------------------------------------------------------

ml::TrainingMatrix random_problem(std::size_t n, std::size_t d, std::size_t classes, std::uint64_t seed) {
    auto rng = make_rng(seed, {707});
    std::normal_distribution<double> z;
    ml::TrainingMatrix t;
    t.X.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < t.X.size(); ++i) t.X(i) = z(rng);
    for (std::size_t i = 0; i < n; ++i) t.y.push_back(static_cast<int>(i % classes));
    t.classes = classes;
    for (std::size_t j = 0; j < d; ++j) t.feature_names.push_back("x" + std::to_string(j + 1));
    for (std::size_t k = 0; k < classes; ++k) t.class_names.push_back("c" + std::to_string(k));
    return t;
}

double relative_error(const Eigen::VectorXd& analytic, const Eigen::VectorXd& numeric) {
    return (analytic - numeric).cwiseAbs().maxCoeff() / std::max(1e-8, numeric.cwiseAbs().maxCoeff());
}

Outcome gradients() {
    double lr_worst = 0.0, nn_worst = 0.0;
    const double h = 1e-5;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const std::size_t c = 2 + seed % 3, d = 1 + seed % 4;
        const auto t = random_problem(15 + seed, d, c, seed);
        auto rng = make_rng(seed, {1});
        std::normal_distribution<double> z;
        Eigen::MatrixXd theta(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(d + 1));
        for (Eigen::Index i = 0; i < theta.size(); ++i) theta(i) = z(rng);
        theta.row(0).setZero();
        Eigen::MatrixXd grad;
        ml::logistic_loss(t.X, t.y, theta, 0.3, &grad);
        Eigen::MatrixXd numeric = Eigen::MatrixXd::Zero(theta.rows(), theta.cols());
        for (Eigen::Index i = 1; i < theta.rows(); ++i)
            for (Eigen::Index j = 0; j < theta.cols(); ++j) {
                Eigen::MatrixXd up = theta, dn = theta;
                up(i, j) += h;
                dn(i, j) -= h;
                numeric(i, j) =
                    (ml::logistic_loss(t.X, t.y, up, 0.3, nullptr) - ml::logistic_loss(t.X, t.y, dn, 0.3, nullptr)) / (2 * h);
            }
        lr_worst = std::max(lr_worst, relative_error(grad.reshaped(), numeric.reshaped()));
    }
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const std::size_t c = 2 + seed % 2, d = 1 + seed % 3, hidden = 1 + seed % 4;
        const auto t = random_problem(12 + seed, d, c, seed);
        auto rng = make_rng(seed, {2});
        std::normal_distribution<double> z;
        Eigen::VectorXd theta(static_cast<Eigen::Index>(ml::nn_parameter_count(d, hidden, c)));
        for (auto& v : theta) v = z(rng);
        Eigen::VectorXd grad;
        ml::nn_loss(t.X, t.y, hidden, c, theta, &grad);
        Eigen::VectorXd numeric(theta.size());
        for (Eigen::Index i = 0; i < theta.size(); ++i) {
            Eigen::VectorXd up = theta, dn = theta;
            up(i) += h;
            dn(i) -= h;
            numeric(i) = (ml::nn_loss(t.X, t.y, hidden, c, up, nullptr) - ml::nn_loss(t.X, t.y, hidden, c, dn, nullptr)) / (2 * h);
        }
        nn_worst = std::max(nn_worst, relative_error(grad, numeric));
    }
    return {lr_worst < 1e-6 && nn_worst < 1e-5,
            fmt::format("max relative error: multinomial-lr {:.1e}, neural net {:.1e} (20 instances each)", lr_worst, nn_worst)};
}

// 8 -------------------------------------------------------------------------

ml::TrainingMatrix xor_data(std::size_t n, std::uint64_t seed) {
    auto rng = make_rng(seed, {808});
    std::normal_distribution<double> noise(0.0, 0.15);
    ml::TrainingMatrix t;
    t.X.resize(static_cast<Eigen::Index>(n), 2);
    for (std::size_t i = 0; i < n; ++i) {
        const int a = static_cast<int>(i % 2), b = static_cast<int>(i / 2 % 2);
        t.X(static_cast<Eigen::Index>(i), 0) = a + noise(rng);
        t.X(static_cast<Eigen::Index>(i), 1) = b + noise(rng);
        t.y.push_back(a ^ b);
    }
    t.classes = 2;
    t.feature_names = {"a", "b"};
    t.class_names = {"zero", "one"};
    return t;
}

Outcome nonlinearity() {
    double rf_min = 1.0, nn_min = 1.0, lr_max = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto train_set = xor_data(400, 2 * seed), test_set = xor_data(400, 2 * seed + 1);
        ml::ModelConfig rf;
        rf.family = ml::Family::random_forest;
        rf.rf.n_trees = 100;
        rf_min = std::min(rf_min, ml::accuracy(test_set.y, ml::train(rf, train_set, seed).predict(test_set.X)));
        ml::ModelConfig nn;
        nn.family = ml::Family::neural_net;
        nn.tune_hidden = false;
        nn.nn.hidden = 4;
        nn.nn.epochs = 3000;
        nn.nn.learning_rate = 0.5;
        nn_min = std::min(nn_min, ml::accuracy(test_set.y, ml::train(nn, train_set, seed).predict(test_set.X)));
        const ml::ModelConfig lr;
        lr_max = std::max(lr_max, ml::accuracy(test_set.y, ml::train(lr, train_set, seed).predict(test_set.X)));
    }
    return {rf_min >= 0.95 && nn_min >= 0.95 && lr_max <= 0.60,
            fmt::format("over 5 seeds: forest min {:.3f}, neural net (4 hidden) min {:.3f}, multinomial-lr max {:.3f}",
                        rf_min, nn_min, lr_max)};
}

// 9 -------------------------------------------------------------------------

Outcome gini() {
    std::size_t zero = 0, first = 0;
    std::string stats_csv;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        auto t = random_problem(120, 5, 2, seed);
        t.X.col(1).setConstant(2.0);
        t.X.col(4).setConstant(-1.0);
        for (std::size_t i = 0; i < t.y.size(); ++i)
            t.X(static_cast<Eigen::Index>(i), 3) = t.y[i] + 0.01 * static_cast<double>(i % 7);
        ml::ModelConfig cfg;
        cfg.family = ml::Family::random_forest;
        cfg.rf.n_trees = 50;
        const auto imp = ml::gini_importance(ml::train(cfg, t, seed));
        zero += imp.values[1] == 0.0 && imp.values[4] == 0.0;
        first += imp.ranking().front() == 3;
        if (seed == 1) {
            std::ostringstream out;
            ml::write_importance_stats_csv(imp, out);
            stats_csv = out.str();
        }
    }
    std::istringstream in(stats_csv);
    const auto table = csv::read_table(in);
    const bool stats_ok = table.header == std::vector<std::string>{"min", "q1", "median", "mean", "q3", "max"} &&
                          table.rows.size() == 1 && table.rows[0].size() == 6;
    return {zero == 100 && first == 100 && stats_ok,
            fmt::format("constants exactly 0 in {}/100, perfect splitter first in {}/100, statistics row {}", zero, first,
                        stats_ok ? "emitted" : "malformed")};
}

// 10 ------------------------------------------------------------------------

Outcome cv_harness() {
    std::size_t vectors_ok = 0, leak_free = 0, leak_checked = 0;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        auto rng = make_rng(seed, {1010});
        const std::size_t classes = 2 + seed % 2, n = 60 + 3 * seed, k = 5 + seed % 6;
        std::vector<int> y(n);
        for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<int>(i < 2 * k * classes ? i % classes : std::uniform_int_distribution<std::size_t>(0, classes - 1)(rng));
        std::shuffle(y.begin(), y.end(), rng);
        const auto plan = eval::make_cv_plan(y, classes, k, 2, seed);
        bool ok = plan.cells() == 2 * k;
        for (std::size_t r = 0; r < 2; ++r) {
            std::vector<int> seen(n, 0);
            for (std::size_t f = 0; f < k; ++f) {
                const auto train = plan.train_rows(r, f), test = plan.test_rows(r, f);
                const std::set<std::size_t> tr(train.begin(), train.end());
                ok &= train.size() + test.size() == n && tr.size() == train.size();
                for (std::size_t i : test) {
                    ok &= !tr.count(i);
                    ++seen[i];
                }
                for (std::size_t c = 0; c < classes; ++c) {
                    double in_test = 0, total = 0;
                    for (std::size_t i : test) in_test += y[i] == static_cast<int>(c);
                    for (int v : y) total += v == static_cast<int>(c);
                    ok &= std::abs(in_test - total / static_cast<double>(k)) <= 1.0;
                }
            }
            for (int s : seen) ok &= s == 1;
        }
        vectors_ok += ok;

        if (seed <= 10) {
            // Deleting the test rows before training must leave the cell's model unchanged.
            const auto d = testing::random_categorical(n, {3, 4, 3}, seed, survey::VariableGroup::financial);
            const auto train = plan.train_rows(0, 0), test = plan.test_rows(0, 0);
            const eval::HomalsBlock full("F", d, {0, 1, 2}, {});
            const eval::HomalsBlock trimmed("F", d.subset(train), {0, 1, 2}, {});
            std::vector<std::size_t> all_train(train.size());
            for (std::size_t i = 0; i < train.size(); ++i) all_train[i] = i;
            const auto a = full.build(train, test), b = trimmed.build(all_train, {});
            ml::TrainingMatrix ta, tb;
            ta.X = a.train;
            tb.X = b.train;
            for (std::size_t i : train) ta.y.push_back(y[i]);
            tb.y = ta.y;
            ta.classes = tb.classes = classes;
            ta.feature_names = tb.feature_names = a.names;
            for (std::size_t c = 0; c < classes; ++c) ta.class_names.push_back("c" + std::to_string(c));
            tb.class_names = ta.class_names;
            ml::ModelConfig cfg;
            cfg.family = ml::Family::random_forest;
            cfg.rf.n_trees = 20;
            const auto ma = ml::train(cfg, ta, plan.cell_seed(0, 0)), mb = ml::train(cfg, tb, plan.cell_seed(0, 0));
            leak_free += a.train == b.train && ma.predict_proba(a.test) == mb.predict_proba(a.test);
            ++leak_checked;
        }
    }

    auto rng = make_rng(1011);
    std::normal_distribution<double> z;
    const std::size_t n = 400;
    Eigen::MatrixXd x(n, 3);
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = z(rng);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<int>(i % 2);
    std::shuffle(y.begin(), y.end(), rng);
    const eval::FixedBlock block("noise", {"a", "b", "c"}, x);
    const auto plan = eval::make_cv_plan(y, 2, 10, 3, 12);
    const auto null_acc = eval::cross_validate(ml::ModelConfig{}, {&block}, y, 2, plan).mean_accuracy();
    const double sigma = std::sqrt(0.25 / static_cast<double>(n));

    const Config defaults;
    const auto default_plan = eval::make_cv_plan(y, 2, defaults.count("eval.k"), defaults.count("eval.repeats"), 1);
    const bool hundred = default_plan.cells() == 100 && default_plan.fold.size() == 10;

    return {vectors_ok == 50 && leak_free == leak_checked && std::abs(null_acc - 0.5) <= 3 * sigma && hundred,
            fmt::format("invariants on {}/50 label vectors, leakage-free cells {}/{}, permutation null accuracy {:.4f} "
                        "(|diff| {:.1f} sigma), default cells {}",
                        vectors_ok, leak_free, leak_checked, null_acc, std::abs(null_acc - 0.5) / sigma,
                        default_plan.cells())};
}

// 11 ------------------------------------------------------------------------

Outcome t_test() {
    const auto r = eval::paired_t_test({1, 2, 3}, {0, 0, 0}, 0.025);
    const double oracle = 1.0 - r.t / std::sqrt(2.0 + r.t * r.t); // Student-t df = 2 two-sided tail
    const auto zero = eval::paired_t_test({0, 0, 0}, {0, 0, 0}, 0.025);
    const bool ok = std::abs(r.t - 3.464) < 5e-4 && r.df == 2 && std::abs(r.p - oracle) <= 1e-3 &&
                    std::abs(r.p - 0.0742) <= 1e-3 && zero.p == 1.0;
    return {ok, fmt::format("t {:.4f}, df {}, p {:.5f} (oracle {:.5f}); all-zero p {}", r.t, r.df, r.p, oracle, zero.p)};
}

// 12 ------------------------------------------------------------------------

/// Reduced budget so the check fits on a laptop; see README.
Config reduced(const fs::path& out, std::uint64_t seed) {
    Config c;
    c.set("paths.out", out.string());
    c.set("seed", std::to_string(seed));
    c.set("eval.repeats", "1");
    c.set("rf.n_trees", "100");
    c.set("nn.epochs", "100");
    c.set("nn.learning_rate", "0.5");
    c.set("nn.inner_folds", "3");
    return c;
}

/// Replaces the factor-score columns of the factors stage with standard normal noise.
void replace_scores_with_noise(const fs::path& out, std::uint64_t seed) {
    const auto scores_path = out / "factors/factor_scores.csv", analysis_path = out / "factors/analysis.csv";
    auto scores = csv::read_table_file(scores_path.string());
    auto analysis = csv::read_table_file(analysis_path.string());
    auto rng = make_rng(seed, {1212});
    std::normal_distribution<double> z;
    for (std::size_t j = 1; j < scores.header.size(); ++j) {
        const std::size_t a = analysis.column(scores.header[j]);
        for (std::size_t i = 0; i < scores.rows.size(); ++i) {
            const auto v = csv::format_exact(z(rng));
            scores.rows[i][j] = v;
            analysis.rows[i][a] = v;
        }
    }
    std::ofstream(scores_path, std::ios::binary | std::ios::trunc) << [&] {
        std::ostringstream s;
        csv::write_table(s, scores);
        return s.str();
    }();
    std::ofstream(analysis_path, std::ios::binary | std::ios::trunc) << [&] {
        std::ostringstream s;
        csv::write_table(s, analysis);
        return s.str();
    }();
}

csv::Table significance(const fs::path& out) {
    return csv::read_table_file((out / "evaluate/significance.csv").string());
}

Outcome end_to_end() {
    Stopwatch clock;
    const auto dir = scratch("signal");
    const auto c = reduced(dir, 20140611);
    pipeline::cmd_synth(c);
    pipeline::cmd_clean(c);
    pipeline::cmd_factors(c);
    pipeline::cmd_evaluate(c);
    const auto sig = significance(dir);
    const auto col = [&](const char* name) { return sig.column(name); };
    std::size_t positive = 0;
    double worst_p = 0.0;
    for (const auto& row : sig.rows) {
        positive += row[col("significant")] == "yes" && csv::parse_double(row[col("mean_difference")]) > 0.0;
        worst_p = std::max(worst_p, csv::parse_double(row[col("p_value")]));
    }
    const bool signal_ok = sig.rows.size() == 12 && positive == 12;

    // Null: psychological block replaced by noise; only Step 2 and Step 3 are compared.
    const std::size_t null_seeds = 20;
    std::map<std::string, std::size_t> significant;
    for (const auto& row : sig.rows)
        significant[row[col("mode")] + "/" + row[col("variant")] + "/" + row[col("family")]] = 0;
    for (std::uint64_t s = 1; s <= null_seeds; ++s) {
        const auto ndir = scratch("null");
        auto nc = reduced(ndir, 9000 + s);
        nc.set("eval.evaluations", "Step 2,Step 3");
        pipeline::cmd_synth(nc);
        pipeline::cmd_clean(nc);
        pipeline::cmd_factors(nc);
        replace_scores_with_noise(ndir, s);
        pipeline::cmd_evaluate(nc);
        const auto ns = significance(ndir);
        for (const auto& row : ns.rows)
            significant[row[col("mode")] + "/" + row[col("variant")] + "/" + row[col("family")]] +=
                row[col("significant")] == "yes";
    }
    bool null_ok = significant.size() == 12;
    std::size_t worst_count = 0;
    std::string worst_cell;
    for (const auto& [cell, count] : significant) {
        null_ok &= static_cast<double>(null_seeds - count) >= 0.9 * static_cast<double>(null_seeds);
        if (count >= worst_count) {
            worst_count = count;
            worst_cell = cell;
        }
    }
    const double secs = clock.seconds();
    return {signal_ok && null_ok && secs < 900.0,
            fmt::format("signal: {}/12 Step 3 > Step 2 at p < 0.025 (largest p {:.2e}); null: most rejections {}/{} "
                        "seeds ({}); {:.0f} s",
                        positive, worst_p, worst_count, null_seeds, worst_cell, secs)};
}

// 13 ------------------------------------------------------------------------

Outcome determinism() {
    const auto a = scratch("det_a"), b = scratch("det_b");
    for (int run = 0; run < 2; ++run) {
        auto c = reduced(a, 20140611);
        c.set("rf.n_trees", "30");
        c.set("nn.epochs", "40");
        c.set("nn.hidden_max", "3");
        pipeline::cmd_synth(c);
        pipeline::cmd_clean(c);
        pipeline::cmd_factors(c);
        pipeline::cmd_evaluate(c);
        pipeline::cmd_report(c);
        if (run == 0) fs::rename(a, b); // manifests hash the config, which names the output directory
    }
    std::size_t files = 0, identical = 0;
    for (const auto& entry : fs::recursive_directory_iterator(a)) {
        const auto ext = entry.path().extension();
        if (ext != ".csv" && ext != ".svg") continue;
        ++files;
        identical += slurp(entry.path()) == slurp(b / fs::relative(entry.path(), a));
    }
    return {files > 25 && identical == files, fmt::format("{}/{} CSV and SVG files byte-identical", identical, files)};
}

} // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"homals matches the Burt-matrix oracle", homals_oracle},
        {"homals normalization constraints", homals_constraints},
        {"non-response categories form the outlier cluster", noise_diagnosis},
        {"parallel analysis recovers five factors", parallel_analysis_recovery},
        {"factor extraction and varimax recover known loadings", efa_recovery},
        {"Cronbach's alpha and reliability bands", cronbach},
        {"classifier gradients match finite differences", gradients},
        {"XOR separates the model families", nonlinearity},
        {"Gini importance sanity", gini},
        {"cross-validation harness", cv_harness},
        {"paired t-test", t_test},
        {"psychological factors improve Step 3 over Step 2", end_to_end},
        {"pipeline determinism", determinism},
    };
    std::set<std::size_t> only;
    for (int i = 1; i < argc; ++i) only.insert(static_cast<std::size_t>(std::stoul(argv[i])));

    std::size_t failed = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        if (!only.empty() && !only.count(k + 1)) continue;
        Outcome o;
        try {
            o = criteria[k].second();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        failed += !o.pass;
        fmt::print("{} {:>2} {}: {}\n", o.pass ? "PASS" : "FAIL", k + 1, criteria[k].first, o.detail);
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
