// OpenMP kernels against their serial references.

#include "debtmine/classifiers.hpp"
#include "debtmine/evaluation.hpp"
#include "debtmine/psychometrics.hpp"
#include "debtmine/random.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace debtmine;

namespace {

ml::TrainingMatrix problem(std::size_t n, std::size_t d) {
    auto rng = make_rng(1);
    std::normal_distribution<double> z;
    ml::TrainingMatrix t;
    t.X.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < t.X.size(); ++i) t.X(i) = z(rng);
    for (std::size_t i = 0; i < n; ++i) t.y.push_back(t.X(static_cast<Eigen::Index>(i), 0) + 0.5 * z(rng) > 0 ? 1 : 0);
    t.classes = 2;
    for (std::size_t j = 0; j < d; ++j) t.feature_names.push_back("x" + std::to_string(j));
    t.class_names = {"no", "yes"};
    return t;
}

Execution mode(const benchmark::State& state) { return state.range(0) ? Execution::parallel : Execution::serial; }

void forest(benchmark::State& state) {
    const auto t = problem(1200, 40);
    ml::ForestOptions o;
    o.n_trees = 100;
    o.execution = mode(state);
    for (auto _ : state) benchmark::DoNotOptimize(ml::train_random_forest(t, o).oob_accuracy);
}

void parallel_analysis(benchmark::State& state) {
    const auto t = problem(1250, 28);
    psych::ParallelAnalysisOptions o;
    o.n_random = 100;
    o.execution = mode(state);
    for (auto _ : state) benchmark::DoNotOptimize(psych::parallel_analysis(t.X, o).retained);
}

void cross_validation(benchmark::State& state) {
    const auto t = problem(1200, 20);
    const eval::FixedBlock block("x", t.feature_names, t.X);
    const auto plan = eval::make_cv_plan(t.y, 2, 10, 2, 3);
    ml::ModelConfig cfg;
    cfg.family = ml::Family::random_forest;
    cfg.rf.n_trees = 30;
    cfg.rf.execution = Execution::serial;
    const eval::CvOptions o{mode(state)};
    for (auto _ : state) benchmark::DoNotOptimize(eval::cross_validate(cfg, {&block}, t.y, 2, plan, o).mean_accuracy());
}

} // namespace

BENCHMARK(forest)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(parallel_analysis)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(cross_validation)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
