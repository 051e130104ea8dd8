#include "debtmine/csv.hpp"
#include "debtmine/error.hpp"
#include "debtmine/evaluation.hpp"
#include "debtmine/random.hpp"

#include "../support.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

using namespace debtmine;
using namespace debtmine::eval;

namespace {

/// Two-sided Student-t tail by Simpson integration of the density.
double t_two_sided(double t, double df) {
    auto density = [df](double x) {
        return std::tgamma((df + 1) / 2) / (std::sqrt(df * std::numbers::pi) * std::tgamma(df / 2)) *
               std::pow(1 + x * x / df, -(df + 1) / 2);
    };
    const int n = 200000;
    const double h = std::abs(t) / n;
    double s = density(0) + density(std::abs(t));
    for (int i = 1; i < n; ++i) s += (i % 2 ? 4 : 2) * density(i * h);
    return 1.0 - 2.0 * s * h / 3.0;
}

std::vector<int> random_labels(std::size_t n, std::size_t classes, std::uint64_t seed) {
    auto rng = make_rng(seed, {77});
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<int>(i % classes);
    std::shuffle(y.begin(), y.end(), rng);
    for (std::size_t i = 0; i < n / 3; ++i) y[i] = static_cast<int>(std::uniform_int_distribution<std::size_t>(0, classes - 1)(rng));
    return y;
}

} // namespace

TEST_CASE("paired t-test against the closed-form df = 2 tail") {
    const auto r = paired_t_test({2, 3, 4}, {1, 1, 1}, 0.05);
    CHECK(r.t == doctest::Approx(3.464101615).epsilon(1e-9));
    CHECK(r.df == 2);
    const double oracle = 1.0 - r.t / std::sqrt(2.0 + r.t * r.t);
    CHECK(std::abs(r.p - oracle) < 1e-12);
    CHECK(std::abs(r.p - 0.0742) < 1e-3);
    CHECK_FALSE(r.significant);

    const std::vector<double> a{0.71, 0.74, 0.69, 0.75, 0.72, 0.70, 0.73, 0.76, 0.71, 0.74};
    const std::vector<double> b{0.70, 0.71, 0.69, 0.72, 0.70, 0.71, 0.70, 0.72, 0.69, 0.71};
    const auto s = paired_t_test(a, b, 0.025);
    CHECK(std::abs(s.p - t_two_sided(s.t, 9)) < 1e-8);
    CHECK(s.significant);

    const auto zero = paired_t_test({1, 2}, {1, 2}, 0.05);
    CHECK(zero.degenerate);
    CHECK(zero.p == 1.0);
    CHECK_FALSE(zero.significant);
    const auto constant = paired_t_test({2, 3}, {1, 2}, 0.05);
    CHECK(constant.p == 0.0);
    CHECK(std::isinf(constant.t));
    CHECK_THROWS_AS(paired_t_test({1}, {1}, 0.05), ValidationError);
}

TEST_CASE("chi-square homogeneity by hand") {
    const auto r = chi_square_homogeneity({10, 20, 30}, {30, 20, 10});
    // Expected 20 in every cell: (100 + 0 + 100) / 20 * 2.
    CHECK(std::abs(r.statistic - 20.0) < 1e-9);
    CHECK(r.df == 2);
    CHECK(std::abs(r.p - std::exp(-10.0)) < 1e-12); // chi-square(2) tail is exp(-x/2)
    CHECK(r.max_shift == doctest::Approx(1.0 / 3.0));
    const auto same = chi_square_homogeneity({5, 10}, {10, 20});
    CHECK(same.statistic == 0.0);
    CHECK(same.p == 1.0);
    CHECK_THROWS_AS(chi_square_homogeneity({0, 3}, {0, 4}), ValidationError);
}

TEST_CASE("scores and confusion matrices") {
    const auto m = score({0, 0, 1, 1, 1}, {0, 1, 1, 1, 0}, 2);
    CHECK(m.confusion(0, 0) == 1);
    CHECK(m.confusion(0, 1) == 1);
    CHECK(m.confusion(1, 0) == 1);
    CHECK(m.confusion(1, 1) == 2);
    CHECK(m.accuracy == doctest::Approx(0.6));
    CHECK(m.sensitivity == doctest::Approx(2.0 / 3.0));
    CHECK(m.specificity == doctest::Approx(0.5));
}

TEST_CASE("cv plan invariants on random label vectors") {
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        const std::size_t classes = 2 + seed % 2, n = 60 + seed;
        const auto y = random_labels(n, classes, seed);
        const auto plan = make_cv_plan(y, classes, 5, 3, seed);
        CHECK(plan.cells() == 15);
        for (std::size_t r = 0; r < 3; ++r) {
            std::vector<int> seen(n, 0);
            for (std::size_t f = 0; f < 5; ++f) {
                const auto train = plan.train_rows(r, f), test = plan.test_rows(r, f);
                CHECK(train.size() + test.size() == n);
                std::set<std::size_t> tr(train.begin(), train.end());
                for (std::size_t i : test) {
                    CHECK_FALSE(tr.count(i));
                    ++seen[i];
                }
                for (std::size_t k = 0; k < classes; ++k) {
                    const double in_test = static_cast<double>(std::count_if(test.begin(), test.end(), [&](std::size_t i) { return y[i] == static_cast<int>(k); }));
                    const double total = static_cast<double>(std::count(y.begin(), y.end(), static_cast<int>(k)));
                    CHECK(std::abs(in_test - total / 5) <= 1.0);
                }
            }
            for (int s : seen) CHECK(s == 1);
        }
    }
    const auto y = random_labels(100, 2, 1);
    CHECK(make_cv_plan(y, 2, 10, 10, 1).cells() == 100);
}

TEST_CASE("homals block never sees test rows") {
    const auto d = testing::random_categorical(60, {3, 4, 3}, 5, survey::VariableGroup::financial);
    std::vector<std::size_t> train, test;
    for (std::size_t i = 0; i < 60; ++i) (i % 4 == 0 ? test : train).push_back(i);
    // Scramble the test rows; training output must not move.
    std::vector<std::vector<int>> cols;
    for (std::size_t v = 0; v < d.variables(); ++v) {
        auto c = d.column(v);
        cols.emplace_back(c.begin(), c.end());
        for (std::size_t i : test) cols.back()[i] = static_cast<int>((cols.back()[i] + 1) % d.schema().variable(v).categories.size());
    }
    const survey::Dataset other(d.schema_ptr(), cols, d.row_ids());
    homals::HomalsOptions o;
    const HomalsBlock a("Financial", d, {0, 1, 2}, o), b("Financial", other, {0, 1, 2}, o);
    const auto ma = a.build(train, test), mb = b.build(train, test);
    CHECK(ma.train == mb.train);
    CHECK(ma.names == std::vector<std::string>{"Financial_dim1", "Financial_dim2"});
    CHECK(ma.test.rows() == static_cast<Eigen::Index>(test.size()));
    CHECK(a.build(train, {}).test.rows() == 0);
}

TEST_CASE("label-permutation null stays near chance") {
    auto rng = make_rng(3);
    std::normal_distribution<double> z;
    const std::size_t n = 200;
    Eigen::MatrixXd x(n, 3);
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = z(rng);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<int>(i % 2);
    std::shuffle(y.begin(), y.end(), rng);
    const FixedBlock block("noise", {"a", "b", "c"}, x);
    const auto plan = make_cv_plan(y, 2, 10, 3, 4);
    ml::ModelConfig cfg;
    const auto metrics = cross_validate(cfg, {&block}, y, 2, plan);
    CHECK(metrics.cells.size() == 30);
    CHECK(std::abs(metrics.mean_accuracy() - 0.5) < 3 * std::sqrt(0.25 / n));
}

TEST_CASE("cross validation is identical serially and in parallel") {
    const auto d = testing::random_categorical(80, {3, 3, 2}, 8, survey::VariableGroup::financial);
    std::vector<int> y(80);
    for (std::size_t i = 0; i < 80; ++i) y[i] = d.value(i, 0) == 0 ? 1 : static_cast<int>(i % 2);
    const HomalsBlock block("F", d, {0, 1, 2}, {});
    const auto plan = make_cv_plan(y, 2, 5, 2, 9);
    ml::ModelConfig cfg;
    cfg.family = ml::Family::random_forest;
    cfg.rf.n_trees = 20;
    CvOptions serial{Execution::serial}, parallel{Execution::parallel};
    CHECK(cross_validate(cfg, {&block}, y, 2, plan, serial).accuracies() ==
          cross_validate(cfg, {&block}, y, 2, plan, parallel).accuracies());
}

TEST_CASE("undersampling keeps the class representative") {
    const auto d = testing::random_categorical(600, {3, 4}, 2);
    std::vector<int> y(600);
    for (std::size_t i = 0; i < 600; ++i) y[i] = i % 3 == 0 ? 1 : 0;
    std::size_t representative = 0;
    for (std::uint64_t seed = 1; seed <= 40; ++seed) {
        const auto u = undersample(y, 0, 200, seed, &d, {0, 1});
        CHECK(u.kept.size() == 400);
        CHECK(u.removed == 200);
        CHECK(std::is_sorted(u.kept.begin(), u.kept.end()));
        std::size_t zeros = 0;
        for (std::size_t i : u.kept) zeros += y[i] == 0;
        CHECK(zeros == 200);
        bool ok = true;
        for (const auto& c : u.representativeness) ok &= c.test.p > 0.05;
        representative += ok;
    }
    CHECK(representative >= 38);
    CHECK(undersample(y, 0, 200, 5).kept == undersample(y, 0, 200, 5).kept);
    CHECK_THROWS_AS(undersample(y, 0, 500, 1), ValidationError);
}

TEST_CASE("stepwise protocol pairs folds and writes tables") {
    const auto d = testing::random_categorical(120, {3, 3, 2, 3}, 3, survey::VariableGroup::financial);
    // Reassign groups: v1, v2 financial; v3, v4 demographic.
    std::vector<survey::VariableSpec> vars = d.schema().variables();
    vars[2].group = vars[3].group = survey::VariableGroup::demographic;
    auto schema = std::make_shared<const survey::SurveySchema>(vars);
    std::vector<std::vector<int>> cols;
    for (std::size_t v = 0; v < d.variables(); ++v) cols.emplace_back(d.column(v).begin(), d.column(v).end());
    const survey::Dataset data(schema, cols, d.row_ids());

    auto rng = make_rng(1);
    std::normal_distribution<double> z;
    Eigen::MatrixXd psych(120, 2);
    std::vector<int> y(120);
    for (Eigen::Index i = 0; i < 120; ++i) {
        psych(i, 0) = z(rng);
        psych(i, 1) = z(rng);
        y[static_cast<std::size_t>(i)] = psych(i, 0) + 0.3 * z(rng) > 0 ? 1 : 0;
    }
    auto pblock = std::make_shared<FixedBlock>("Psychological", std::vector<std::string>{"P1", "P2"}, psych);
    const auto plan = make_cv_plan(y, 2, 5, 2, 3);
    StepwiseOptions o;
    ml::ModelConfig lr;
    o.models = {lr};
    for (auto variant : {Variant::original, Variant::transformed}) {
        const auto groups = make_group_blocks(data, variant, pblock, {});
        const auto result = run_stepwise(groups, y, 2, plan, o);
        REQUIRE(result.families.size() == 1);
        REQUIRE(result.evaluations.size() == 5);
        const auto& m = result.families[0].metrics;
        CHECK(m[4].mean_accuracy() > m[3].mean_accuracy());
        CHECK(result.families[0].step3_vs_step2.significant);
        std::ostringstream cells, summary, sig, chart;
        write_cells_csv(result, "two_class", cells, true);
        write_summary_csv(result, "two_class", summary, true);
        write_significance_csv(result, "two_class", sig, true);
        write_step_chart(result, "two_class", chart);
        std::istringstream back(cells.str());
        CHECK(csv::read_table(back).rows.size() == 50);
        CHECK(sig.str().find("Step 3 vs Step 2") != std::string::npos);
    }
    o.evaluations = {"Financial", "Step 2"};
    CHECK_THROWS_AS(run_stepwise(make_group_blocks(data, Variant::original, pblock, {}), y, 2, plan, o), ValidationError);
}
