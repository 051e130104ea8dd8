#include "debtmine/homals.hpp"

#include "debtmine/csv.hpp"
#include "debtmine/error.hpp"
#include "debtmine/random.hpp"
#include "debtmine/svg.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <fmt/format.h>

namespace debtmine::homals {

namespace {

// Per-variable category index of every row, recovered from the indicators.
struct Coded {
    std::vector<std::vector<int>> codes; // [variable][row]
    std::vector<VariableBlock> blocks;
    std::vector<std::size_t> variable_ids;
};

Coded decode(const survey::EncodedMatrix& ind) {
    Coded out;
    const auto n = static_cast<std::size_t>(ind.values.rows());
    std::size_t c = 0;
    while (c < ind.columns.size()) {
        const std::size_t var = ind.columns[c].variable;
        if (ind.columns[c].category < 0)
            throw ValidationError("homals: expected a full-indicator encoding, found a numeric column");
        VariableBlock block;
        block.name = ind.columns[c].variable_name;
        const std::size_t first = c;
        while (c < ind.columns.size() && ind.columns[c].variable == var) {
            block.categories.push_back(ind.columns[c].category_label);
            block.uncertain.push_back(ind.columns[c].uncertain);
            ++c;
        }
        std::vector<int> codes(n, -1);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t k = first; k < c; ++k) {
                const double v = ind.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
                if (v == 1.0) {
                    if (codes[i] >= 0)
                        throw ValidationError(fmt::format("homals: row {} has two categories of '{}'", i + 1, block.name));
                    codes[i] = static_cast<int>(k - first);
                } else if (v != 0.0) {
                    throw ValidationError("homals: indicator matrix must hold 0/1 values");
                }
            }
        }
        block.counts.assign(block.categories.size(), 0);
        for (int code : codes)
            if (code >= 0) ++block.counts[static_cast<std::size_t>(code)];
        out.codes.push_back(std::move(codes));
        out.blocks.push_back(std::move(block));
        out.variable_ids.push_back(var);
    }
    return out;
}

// Centroid of the object scores of each category.
void update_quantifications(const Coded& coded, const Eigen::MatrixXd& x, std::vector<Eigen::MatrixXd>& y) {
    const auto p = x.cols();
    y.resize(coded.blocks.size());
    for (std::size_t j = 0; j < coded.blocks.size(); ++j) {
        const auto k = static_cast<Eigen::Index>(coded.blocks[j].categories.size());
        y[j] = Eigen::MatrixXd::Zero(k, p);
        const auto& codes = coded.codes[j];
        for (std::size_t i = 0; i < codes.size(); ++i) y[j].row(codes[i]) += x.row(static_cast<Eigen::Index>(i));
        for (Eigen::Index c = 0; c < k; ++c) y[j].row(c) /= static_cast<double>(coded.blocks[j].counts[static_cast<std::size_t>(c)]);
    }
}

double loss_of(const Coded& coded, const Eigen::MatrixXd& x, const std::vector<Eigen::MatrixXd>& y) {
    double loss = 0.0;
    for (std::size_t j = 0; j < y.size(); ++j) {
        const auto& codes = coded.codes[j];
        for (std::size_t i = 0; i < codes.size(); ++i)
            loss += (x.row(static_cast<Eigen::Index>(i)) - y[j].row(codes[i])).squaredNorm();
    }
    return loss;
}

// Zc = Q R; returns X = sqrt(n) Q and T = sqrt(n) R^{-1} so that X = Zc T.
void orthonormalize(const Eigen::MatrixXd& zc, Eigen::MatrixXd& x, Eigen::MatrixXd& t) {
    const auto n = zc.rows();
    const auto p = zc.cols();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(zc);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, p);
    Eigen::MatrixXd r = qr.matrixQR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
    const double scale = r.cwiseAbs().maxCoeff();
    for (Eigen::Index d = 0; d < p; ++d) {
        if (!(std::abs(r(d, d)) > 1e-12 * std::max(scale, 1e-300)))
            throw NumericalError("homals: object scores became rank deficient; reduce the number of dimensions");
        if (r(d, d) < 0) {
            q.col(d) *= -1.0;
            r.row(d) *= -1.0;
        }
    }
    const double root_n = std::sqrt(static_cast<double>(n));
    x = root_n * q;
    t = root_n * r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
}

} // namespace

survey::EncodedMatrix drop_empty_categories(const survey::EncodedMatrix& ind) {
    std::vector<Eigen::Index> keep;
    for (Eigen::Index c = 0; c < ind.values.cols(); ++c)
        if (ind.values.col(c).sum() > 0.0) keep.push_back(c);
    survey::EncodedMatrix out;
    out.values.resize(ind.values.rows(), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t i = 0; i < keep.size(); ++i) {
        out.columns.push_back(ind.columns[static_cast<std::size_t>(keep[i])]);
        out.names.push_back(ind.names[static_cast<std::size_t>(keep[i])]);
        out.values.col(static_cast<Eigen::Index>(i)) = ind.values.col(keep[i]);
    }
    return out;
}

HomalsSolution fit_homals(const survey::EncodedMatrix& indicators, const HomalsOptions& options) {
    const auto coded = decode(indicators);
    const auto n = indicators.values.rows();
    const auto m = coded.blocks.size();
    const auto p = static_cast<Eigen::Index>(options.dimensions);
    if (m == 0 || n < 2) throw ValidationError("homals: need at least one variable and two rows");
    std::size_t total_categories = 0;
    for (std::size_t j = 0; j < m; ++j) {
        for (std::size_t c = 0; c < coded.blocks[j].counts.size(); ++c)
            if (coded.blocks[j].counts[c] == 0)
                throw ValidationError(fmt::format("homals: category '{}' of '{}' has no members",
                                                  coded.blocks[j].categories[c], coded.blocks[j].name));
        for (std::size_t i = 0; i < coded.codes[j].size(); ++i)
            if (coded.codes[j][i] < 0)
                throw ValidationError(fmt::format("homals: row {} has no category for '{}'", i + 1, coded.blocks[j].name));
        total_categories += coded.blocks[j].categories.size();
    }
    if (p < 1 || options.dimensions > total_categories - m)
        throw ValidationError(fmt::format("homals: dimensions must lie in 1..{}", total_categories - m));
    if (options.max_iter < 1) throw ValidationError("homals: max_iter must be >= 1");

    HomalsSolution sol;
    sol.name = options.name;
    sol.dimensions = options.dimensions;

    Rng rng(options.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd x(n, p);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index d = 0; d < p; ++d) x(i, d) = gauss(rng);
    sol.center = x.colwise().mean();
    Eigen::MatrixXd t;
    orthonormalize(x.rowwise() - sol.center, x, t);
    sol.transform = t;

    std::vector<Eigen::MatrixXd> y;
    const double inv_m = 1.0 / static_cast<double>(m);
    for (std::size_t iter = 0;; ++iter) {
        update_quantifications(coded, x, y);
        const double loss = loss_of(coded, x, y);
        if (!std::isfinite(loss)) throw NumericalError("homals: loss became non-finite");
        sol.loss_history.push_back(loss);
        if (iter > 0) {
            const double prev = sol.loss_history[iter - 1];
            if (prev - loss <= options.tol * prev) {
                sol.converged = true;
                break;
            }
        }
        if (iter == options.max_iter) break;

        Eigen::MatrixXd z = Eigen::MatrixXd::Zero(n, p);
        for (std::size_t j = 0; j < m; ++j) {
            const auto& codes = coded.codes[j];
            for (Eigen::Index i = 0; i < n; ++i) z.row(i) += y[j].row(codes[static_cast<std::size_t>(i)]);
        }
        z *= inv_m;
        sol.center = z.colwise().mean();
        orthonormalize(z.rowwise() - sol.center, x, sol.transform);
        sol.iterations = iter + 1;
    }

    // Sign convention: the largest-magnitude category coordinate of each
    // dimension is positive.
    for (Eigen::Index d = 0; d < p; ++d) {
        double best = 0.0;
        for (const auto& yj : y)
            for (Eigen::Index c = 0; c < yj.rows(); ++c)
                if (std::abs(yj(c, d)) > std::abs(best)) best = yj(c, d);
        if (best < 0.0) {
            x.col(d) *= -1.0;
            for (auto& yj : y) yj.col(d) *= -1.0;
            sol.transform.col(d) *= -1.0;
        }
    }

    sol.object_scores = std::move(x);
    sol.variables = coded.blocks;
    for (std::size_t j = 0; j < m; ++j) sol.variables[j].quantifications = std::move(y[j]);
    return sol;
}

double homogeneity_loss(const survey::EncodedMatrix& indicators, const Eigen::MatrixXd& scores) {
    const auto coded = decode(indicators);
    std::vector<Eigen::MatrixXd> y;
    update_quantifications(coded, scores, y);
    return loss_of(coded, scores, y);
}

DimensionScores transform(const HomalsSolution& sol) {
    DimensionScores out;
    for (std::size_t d = 0; d < sol.dimensions; ++d) out.names.push_back(fmt::format("{}_dim{}", sol.name, d + 1));
    out.values = sol.object_scores;
    return out;
}

DimensionScores project(const HomalsSolution& sol, const survey::EncodedMatrix& indicators) {
    const auto n = indicators.values.rows();
    const auto p = static_cast<Eigen::Index>(sol.dimensions);
    std::map<std::string, std::size_t> block_of;
    for (std::size_t j = 0; j < sol.variables.size(); ++j) block_of[sol.variables[j].name] = j;

    // For every indicator column: (block, category row) or unseen.
    std::vector<std::pair<std::size_t, Eigen::Index>> target(indicators.columns.size(), {SIZE_MAX, -1});
    std::vector<bool> present(sol.variables.size(), false);
    for (std::size_t c = 0; c < indicators.columns.size(); ++c) {
        const auto& col = indicators.columns[c];
        auto it = block_of.find(col.variable_name);
        if (it == block_of.end()) continue;
        present[it->second] = true;
        const auto& cats = sol.variables[it->second].categories;
        const auto pos = std::find(cats.begin(), cats.end(), col.category_label);
        if (pos != cats.end()) target[c] = {it->second, static_cast<Eigen::Index>(pos - cats.begin())};
    }
    for (std::size_t j = 0; j < present.size(); ++j)
        if (!present[j])
            throw ValidationError(fmt::format("homals projection: variable '{}' missing", sol.variables[j].name));

    Eigen::MatrixXd z = Eigen::MatrixXd::Zero(n, p);
    for (std::size_t c = 0; c < target.size(); ++c) {
        if (target[c].first == SIZE_MAX) continue;
        const auto& yj = sol.variables[target[c].first].quantifications;
        for (Eigen::Index i = 0; i < n; ++i)
            if (indicators.values(i, static_cast<Eigen::Index>(c)) != 0.0) z.row(i) += yj.row(target[c].second);
    }
    z /= static_cast<double>(sol.variables.size());

    DimensionScores out;
    for (std::size_t d = 0; d < sol.dimensions; ++d) out.names.push_back(fmt::format("{}_dim{}", sol.name, d + 1));
    out.values = (z.rowwise() - sol.center) * sol.transform;
    return out;
}

std::vector<const CategoryPoint*> CategoryDiagnostics::flagged() const {
    std::vector<const CategoryPoint*> out;
    for (const auto& p : points)
        if (p.flagged) out.push_back(&p);
    return out;
}

std::vector<const CategoryPoint*> CategoryDiagnostics::uncertain() const {
    std::vector<const CategoryPoint*> out;
    for (const auto& p : points)
        if (p.uncertain) out.push_back(&p);
    return out;
}

CategoryDiagnostics category_diagnostics(const HomalsSolution& sol, double flag_multiple) {
    if (!(flag_multiple > 0.0)) throw ValidationError("category_diagnostics: flag_multiple must be positive");
    CategoryDiagnostics out;
    out.flag_multiple = flag_multiple;
    std::vector<double> distances;
    for (const auto& block : sol.variables) {
        for (Eigen::Index c = 0; c < block.quantifications.rows(); ++c) {
            CategoryPoint pt;
            pt.variable = block.name;
            pt.category = block.categories[static_cast<std::size_t>(c)];
            pt.uncertain = block.uncertain[static_cast<std::size_t>(c)];
            pt.count = block.counts[static_cast<std::size_t>(c)];
            for (Eigen::Index d = 0; d < block.quantifications.cols(); ++d)
                pt.coordinates.push_back(block.quantifications(c, d));
            pt.distance = block.quantifications.row(c).norm();
            distances.push_back(pt.distance);
            out.points.push_back(std::move(pt));
        }
    }
    std::sort(distances.begin(), distances.end());
    const std::size_t k = distances.size();
    out.median_distance = k % 2 ? distances[k / 2] : 0.5 * (distances[k / 2 - 1] + distances[k / 2]);
    const double threshold = flag_multiple * out.median_distance;
    for (auto& pt : out.points) pt.flagged = std::isfinite(threshold) && pt.distance > threshold;
    return out;
}

void write_category_csv(const CategoryDiagnostics& diag, std::ostream& out) {
    std::vector<std::string> header{"variable", "category", "uncertain", "count"};
    const std::size_t p = diag.points.empty() ? 0 : diag.points.front().coordinates.size();
    for (std::size_t d = 0; d < p; ++d) header.push_back(fmt::format("dim{}", d + 1));
    header.insert(header.end(), {"distance", "flagged"});
    csv::write_record(out, header);
    for (const auto& pt : diag.points) {
        std::vector<std::string> row{pt.variable, pt.category, pt.uncertain ? "1" : "0", std::to_string(pt.count)};
        for (double v : pt.coordinates) row.push_back(csv::format(v));
        row.push_back(csv::format(pt.distance));
        row.push_back(pt.flagged ? "1" : "0");
        csv::write_record(out, row);
    }
}

void write_loss_history(const HomalsSolution& sol, std::ostream& out) {
    csv::write_record(out, {"iteration", "loss"});
    for (std::size_t i = 0; i < sol.loss_history.size(); ++i)
        csv::write_record(out, {std::to_string(i), csv::format(sol.loss_history[i])});
}

void write_category_plot(const CategoryDiagnostics& diag, const std::string& title, std::ostream& out) {
    std::vector<svg::Point> pts;
    for (const auto& pt : diag.points) {
        if (pt.coordinates.size() < 2) continue;
        pts.push_back({pt.coordinates[0], pt.coordinates[1], pt.variable + ": " + pt.category, pt.uncertain});
    }
    svg::scatter(out, title, pts, "Dimension 1", "Dimension 2");
}

} // namespace debtmine::homals
