#include "debtmine/psychometrics.hpp"

#include "debtmine/csv.hpp"
#include "debtmine/error.hpp"
#include "debtmine/linalg.hpp"
#include "debtmine/random.hpp"
#include "debtmine/svg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

namespace debtmine::psych {

namespace {

Eigen::MatrixXd correlation_of(const Eigen::MatrixXd& x, const std::vector<std::string>* names) {
    const auto n = x.rows();
    if (n < 3) throw ValidationError("correlation: need at least 3 rows");
    Eigen::MatrixXd z = x.rowwise() - x.colwise().mean();
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
        const double norm = z.col(j).norm();
        if (!(norm > 0.0))
            throw ValidationError(fmt::format("correlation: item '{}' has zero variance",
                                              names ? (*names)[static_cast<std::size_t>(j)] : std::to_string(j + 1)));
        z.col(j) /= norm;
    }
    Eigen::MatrixXd r = z.transpose() * z;
    r = 0.5 * (r + r.transpose());
    r.diagonal().setOnes();
    return r;
}

// Type-7 sample quantile of sorted values.
double quantile_sorted(const std::vector<double>& v, double q) {
    const double h = (static_cast<double>(v.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

} // namespace

CorrelationMatrix correlation(const Eigen::MatrixXd& items, std::vector<std::string> names) {
    if (items.cols() < 2) throw ValidationError("correlation: need at least 2 items");
    if (names.empty())
        for (Eigen::Index j = 0; j < items.cols(); ++j) names.push_back(fmt::format("item{}", j + 1));
    if (static_cast<Eigen::Index>(names.size()) != items.cols())
        throw ValidationError("correlation: name count differs from item count");
    return {correlation_of(items, &names), std::move(names)};
}

std::vector<double> scree(const CorrelationMatrix& r) { return to_vector(symmetric_eigen(r.values).values); }

ParallelAnalysis random_eigenvalues(std::size_t rows, std::size_t cols, const ParallelAnalysisOptions& options) {
    if (options.n_random < 20) throw ValidationError("parallel analysis: n_random must be >= 20");
    if (!(options.quantile > 0.0 && options.quantile < 1.0))
        throw ValidationError("parallel analysis: quantile must lie in (0, 1)");
    std::vector<std::vector<double>> eig(options.n_random);
    for_each_task(options.n_random, options.execution, [&](std::size_t rep) {
        Rng rng = make_rng(options.seed, {rep});
        std::normal_distribution<double> gauss(0.0, 1.0);
        Eigen::MatrixXd x(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        for (Eigen::Index i = 0; i < x.rows(); ++i)
            for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = gauss(rng);
        eig[rep] = to_vector(symmetric_eigen(correlation_of(x, nullptr)).values);
    });

    ParallelAnalysis out;
    out.criterion = options.criterion;
    out.random_mean.assign(cols, 0.0);
    out.random_quantile.assign(cols, 0.0);
    std::vector<double> at_rank(options.n_random);
    for (std::size_t k = 0; k < cols; ++k) {
        for (std::size_t rep = 0; rep < options.n_random; ++rep) at_rank[rep] = eig[rep][k];
        out.random_mean[k] = std::accumulate(at_rank.begin(), at_rank.end(), 0.0) / static_cast<double>(at_rank.size());
        std::sort(at_rank.begin(), at_rank.end());
        out.random_quantile[k] = quantile_sorted(at_rank, options.quantile);
    }
    return out;
}

ParallelAnalysis parallel_analysis(const Eigen::MatrixXd& items, const ParallelAnalysisOptions& options) {
    ParallelAnalysis out = random_eigenvalues(static_cast<std::size_t>(items.rows()),
                                              static_cast<std::size_t>(items.cols()), options);
    out.observed = to_vector(symmetric_eigen(correlation_of(items, nullptr)).values);
    const auto& threshold = options.criterion == RetentionCriterion::mean ? out.random_mean : out.random_quantile;
    while (out.retained < out.observed.size() && out.observed[out.retained] > threshold[out.retained]) ++out.retained;
    return out;
}

std::vector<std::size_t> FactorModel::item_assignment() const {
    std::vector<std::size_t> out(static_cast<std::size_t>(loadings.rows()), 0);
    for (Eigen::Index i = 0; i < loadings.rows(); ++i) {
        Eigen::Index best = 0;
        loadings.row(i).cwiseAbs().maxCoeff(&best);
        out[static_cast<std::size_t>(i)] = static_cast<std::size_t>(best);
    }
    return out;
}

FactorModel extract_factors(const CorrelationMatrix& r, std::size_t factors, const ExtractionOptions& options) {
    const auto p = r.values.rows();
    const auto m = static_cast<Eigen::Index>(factors);
    if (m < 1 || m >= p) throw ValidationError(fmt::format("extract_factors: need 1 <= factors < {}", p));

    FactorModel model;
    model.factors = factors;
    model.items = r.items;
    model.eigenvalues = scree(r);

    // Squared multiple correlations as starting communalities.
    Eigen::VectorXd h2(p);
    Eigen::LLT<Eigen::MatrixXd> llt(r.values);
    if (llt.info() == Eigen::Success) {
        const Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(p, p));
        for (Eigen::Index i = 0; i < p; ++i) h2(i) = std::clamp(1.0 - 1.0 / inv(i, i), 0.0, 1.0);
    } else {
        for (Eigen::Index i = 0; i < p; ++i) {
            double best = 0.0;
            for (Eigen::Index j = 0; j < p; ++j)
                if (j != i) best = std::max(best, std::abs(r.values(i, j)));
            h2(i) = best;
        }
        model.warnings.push_back("correlation matrix is singular; starting communalities from max |r|");
    }

    Eigen::MatrixXd lambda = Eigen::MatrixXd::Zero(p, m);
    bool heywood = false;
    for (std::size_t iter = 1; iter <= options.max_iter; ++iter) {
        Eigen::MatrixXd reduced = r.values;
        reduced.diagonal() = h2;
        const auto eig = symmetric_eigen(reduced);
        for (Eigen::Index f = 0; f < m; ++f)
            lambda.col(f) = eig.vectors.col(f) * std::sqrt(std::max(eig.values(f), 0.0));
        Eigen::VectorXd next = lambda.rowwise().squaredNorm();
        for (Eigen::Index i = 0; i < p; ++i) {
            if (next(i) >= 1.0) heywood = true;
            next(i) = std::clamp(next(i), 0.0, 1.0);
        }
        const double change = (next - h2).cwiseAbs().maxCoeff();
        h2 = next;
        model.iterations = iter;
        if (change < options.tol) {
            model.converged = true;
            break;
        }
    }
    if (heywood) model.warnings.push_back("Heywood case: a communality reached 1");
    if (!model.converged) model.warnings.push_back("principal-axis iteration did not converge");

    for (Eigen::Index f = 0; f < m; ++f)
        if (lambda.col(f).sum() < 0.0) lambda.col(f) *= -1.0;
    model.loadings = lambda;
    model.communalities = lambda.rowwise().squaredNorm();
    model.variance_explained = model.communalities.sum() / static_cast<double>(p);
    model.rotation_matrix = Eigen::MatrixXd::Identity(m, m);
    return model;
}

double varimax_criterion(const Eigen::MatrixXd& loadings) {
    const double p = static_cast<double>(loadings.rows());
    const Eigen::ArrayXXd sq = loadings.array().square();
    double total = 0.0;
    for (Eigen::Index f = 0; f < sq.cols(); ++f) {
        const double mean = sq.col(f).sum() / p;
        total += sq.col(f).square().sum() / p - mean * mean;
    }
    return total;
}

FactorModel varimax(const FactorModel& model, double tol, std::size_t max_sweeps) {
    FactorModel out = model;
    const auto m = model.loadings.cols();
    if (m < 2) return out;
    const double p = static_cast<double>(model.loadings.rows());

    Eigen::MatrixXd a = model.loadings;
    Eigen::MatrixXd t = Eigen::MatrixXd::Identity(m, m);
    out.criterion_history = {varimax_criterion(a)};
    for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
        for (Eigen::Index j = 0; j < m - 1; ++j) {
            for (Eigen::Index k = j + 1; k < m; ++k) {
                const Eigen::ArrayXd x = a.col(j).array(), y = a.col(k).array();
                const Eigen::ArrayXd u = x.square() - y.square();
                const Eigen::ArrayXd v = 2.0 * x * y;
                const double sa = u.sum(), sb = v.sum();
                const double sc = (u.square() - v.square()).sum();
                const double sd = 2.0 * (u * v).sum();
                const double phi = 0.25 * std::atan2(sd - 2.0 * sa * sb / p, sc - (sa * sa - sb * sb) / p);
                if (phi == 0.0) continue;
                const double c = std::cos(phi), s = std::sin(phi);
                Eigen::Matrix2d rot;
                rot << c, -s, s, c;
                Eigen::MatrixXd pair(a.rows(), 2);
                pair << a.col(j), a.col(k);
                pair = pair * rot;
                a.col(j) = pair.col(0);
                a.col(k) = pair.col(1);
                Eigen::MatrixXd tp(m, 2);
                tp << t.col(j), t.col(k);
                tp = tp * rot;
                t.col(j) = tp.col(0);
                t.col(k) = tp.col(1);
            }
        }
        const double crit = varimax_criterion(a);
        const double gain = crit - out.criterion_history.back();
        out.criterion_history.push_back(crit);
        if (gain < tol) break;
    }

    // Order by explained variance, positive column sums.
    std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
    std::iota(order.begin(), order.end(), 0);
    const Eigen::VectorXd ss = a.colwise().squaredNorm();
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index x, Eigen::Index y) { return ss(x) > ss(y); });
    Eigen::MatrixXd sorted_a(a.rows(), m), sorted_t(m, m);
    for (Eigen::Index f = 0; f < m; ++f) {
        const double sign = a.col(order[static_cast<std::size_t>(f)]).sum() < 0.0 ? -1.0 : 1.0;
        sorted_a.col(f) = sign * a.col(order[static_cast<std::size_t>(f)]);
        sorted_t.col(f) = sign * t.col(order[static_cast<std::size_t>(f)]);
    }
    out.loadings = sorted_a;
    out.rotation_matrix = model.rotation_matrix * sorted_t;
    out.rotation = Rotation::varimax;
    out.communalities = sorted_a.rowwise().squaredNorm();
    out.variance_explained = out.communalities.sum() / p;
    return out;
}

Eigen::MatrixXd factor_scores(const FactorModel& model, const Eigen::MatrixXd& items) {
    if (items.cols() != model.loadings.rows())
        throw ValidationError("factor_scores: item count differs from the model");
    const Eigen::MatrixXd r = correlation_of(items, &model.items);
    const Eigen::MatrixXd z = standardize_columns(items);
    Eigen::LLT<Eigen::MatrixXd> llt(r);
    if (llt.info() != Eigen::Success) {
        llt.compute(r + 1e-8 * Eigen::MatrixXd::Identity(r.rows(), r.cols()));
        if (llt.info() != Eigen::Success)
            throw NumericalError("factor_scores: correlation matrix is singular even with a 1e-8 ridge");
    }
    const Eigen::MatrixXd weights = llt.solve(model.loadings);
    return z * weights;
}

std::string_view to_string(ReliabilityBand band) {
    switch (band) {
    case ReliabilityBand::good: return "good";
    case ReliabilityBand::acceptable: return "acceptable";
    case ReliabilityBand::poor: return "poor";
    case ReliabilityBand::unacceptable: return "unacceptable";
    }
    return "?";
}

ReliabilityBand reliability_band(double alpha) {
    if (alpha > 0.7) return ReliabilityBand::good;
    if (alpha > 0.6) return ReliabilityBand::acceptable;
    if (alpha > 0.5) return ReliabilityBand::poor;
    return ReliabilityBand::unacceptable;
}

double cronbach_alpha_from_covariance(const Eigen::MatrixXd& cov) {
    const double k = static_cast<double>(cov.rows());
    if (k < 2) throw ValidationError("cronbach_alpha: need at least 2 items");
    const double total = cov.sum();
    if (!(total > 0.0)) throw ValidationError("cronbach_alpha: total score has zero variance");
    return k / (k - 1.0) * (1.0 - cov.trace() / total);
}

double cronbach_alpha(const Eigen::MatrixXd& items) {
    if (items.cols() < 2) throw ValidationError("cronbach_alpha: need at least 2 items");
    return cronbach_alpha_from_covariance(covariance(items));
}

Eigen::VectorXd reverse_code(const Eigen::VectorXd& centered) { return -centered; }

ReliabilityReport reliability(const FactorModel& model, const Eigen::MatrixXd& items,
                              const std::vector<std::string>& factor_names) {
    if (items.cols() != model.loadings.rows()) throw ValidationError("reliability: item count differs from the model");
    const auto assignment = model.item_assignment();
    ReliabilityReport report;
    for (std::size_t f = 0; f < model.factors; ++f) {
        ScaleReliability scale;
        scale.name = f < factor_names.size() ? factor_names[f] : fmt::format("Factor {}", f + 1);
        std::vector<Eigen::Index> cols;
        for (std::size_t i = 0; i < assignment.size(); ++i) {
            if (assignment[i] != f) continue;
            cols.push_back(static_cast<Eigen::Index>(i));
            scale.items.push_back(model.items[i]);
            scale.reversed.push_back(model.loadings(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(f)) < 0.0);
        }
        if (cols.size() < 2)
            throw ValidationError(fmt::format("reliability: scale '{}' has {} item(s); need at least 2", scale.name,
                                              cols.size()));
        Eigen::MatrixXd block(items.rows(), static_cast<Eigen::Index>(cols.size()));
        for (std::size_t c = 0; c < cols.size(); ++c) {
            const Eigen::VectorXd centered = items.col(cols[c]).array() - items.col(cols[c]).mean();
            block.col(static_cast<Eigen::Index>(c)) = scale.reversed[c] ? reverse_code(centered) : centered;
        }
        scale.alpha = cronbach_alpha(block);
        scale.band = reliability_band(scale.alpha);
        report.scales.push_back(std::move(scale));
    }
    return report;
}

void write_loadings_csv(const FactorModel& model, const std::vector<std::string>& factor_names, std::ostream& out,
                        double suppress) {
    std::vector<std::string> header{"item"};
    for (std::size_t f = 0; f < model.factors; ++f)
        header.push_back(f < factor_names.size() ? factor_names[f] : fmt::format("Factor {}", f + 1));
    header.push_back("communality");
    csv::write_record(out, header);
    for (Eigen::Index i = 0; i < model.loadings.rows(); ++i) {
        std::vector<std::string> row{model.items[static_cast<std::size_t>(i)]};
        for (Eigen::Index f = 0; f < model.loadings.cols(); ++f) {
            const double v = model.loadings(i, f);
            row.push_back(std::abs(v) < suppress ? std::string() : fmt::format("{:.3f}", v));
        }
        row.push_back(fmt::format("{:.3f}", model.communalities(i)));
        csv::write_record(out, row);
    }
}

void write_reliability_csv(const ReliabilityReport& report, std::ostream& out) {
    csv::write_record(out, {"factor", "cronbach_alpha", "band", "items", "reversed"});
    for (const auto& s : report.scales) {
        std::string items, reversed;
        for (std::size_t i = 0; i < s.items.size(); ++i) {
            items += (i ? ";" : "") + s.items[i];
            if (s.reversed[i]) reversed += (reversed.empty() ? "" : ";") + s.items[i];
        }
        csv::write_record(out, {s.name, fmt::format("{:.2f}", s.alpha), std::string(to_string(s.band)), items, reversed});
    }
}

void write_scree_csv(const ParallelAnalysis& pa, std::ostream& out) {
    csv::write_record(out, {"rank", "observed", "random_mean", "random_quantile"});
    for (std::size_t k = 0; k < pa.observed.size(); ++k)
        csv::write_record(out, {std::to_string(k + 1), csv::format(pa.observed[k]), csv::format(pa.random_mean[k]),
                                csv::format(pa.random_quantile[k])});
}

void write_scree_plot(const ParallelAnalysis& pa, std::ostream& out) {
    svg::line_chart(out, "Scree plot and parallel analysis",
                    {{"observed", pa.observed}, {"random (mean)", pa.random_mean},
                     {"random (quantile)", pa.random_quantile}},
                    "Factor number", "Eigenvalue");
}

} // namespace debtmine::psych
