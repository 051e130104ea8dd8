#include "debtmine/synth.hpp"

#include "debtmine/csv.hpp"
#include "debtmine/error.hpp"
#include "debtmine/random.hpp"

#include <boost/math/distributions/normal.hpp>

#include <cmath>
#include <fstream>
#include <memory>

#include <fmt/format.h>

namespace debtmine::synth {

using survey::VariableGroup;
using survey::VariableKind;
using survey::VariableSpec;

namespace {

constexpr const char* kDontKnow = "Don't know";
constexpr const char* kPreferNot = "Prefer not to answer";

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::vector<double> cutpoints(std::size_t levels) {
    boost::math::normal standard;
    std::vector<double> t;
    for (std::size_t k = 1; k < levels; ++k)
        t.push_back(boost::math::quantile(standard, static_cast<double>(k) / static_cast<double>(levels)));
    return t;
}

int band(double x, std::initializer_list<double> thresholds) {
    int b = 0;
    for (double t : thresholds)
        if (x > t) ++b;
    return b;
}

std::vector<std::string> likert_labels(std::size_t levels) {
    if (levels == 5) return {"Strongly disagree", "Disagree", "Neither", "Agree", "Strongly agree"};
    std::vector<std::string> out;
    for (std::size_t k = 1; k <= levels; ++k) out.push_back(std::to_string(k));
    return out;
}

std::string item_name(std::size_t i) {
    return i < 17 ? fmt::format("Q70r{}", i + 1) : fmt::format("Q71r{}", i - 16);
}

// Column builder keeping the schema and the values in step.
struct Builder {
    std::vector<VariableSpec> specs;
    std::vector<std::vector<int>> columns;

    std::size_t add(std::string name, VariableKind kind, VariableGroup group, std::vector<std::string> cats,
                    std::vector<std::string> uncertain, std::size_t n) {
        specs.push_back({std::move(name), kind, group, std::move(cats), std::move(uncertain)});
        columns.emplace_back(n, 0);
        return specs.size() - 1;
    }
};

} // namespace

Eigen::MatrixXd implied_latent_correlation(const Eigen::MatrixXd& loadings) {
    Eigen::MatrixXd r = loadings * loadings.transpose();
    r.diagonal().setOnes();
    return r;
}

Eigen::MatrixXd implied_item_correlation(const Eigen::MatrixXd& loadings, std::size_t levels) {
    const auto t = cutpoints(levels);
    const double l = static_cast<double>(levels);
    const double mean = (l + 1.0) / 2.0;
    const double var = (l * l - 1.0) / 12.0;
    const Eigen::MatrixXd rho = implied_latent_correlation(loadings);

    // E[g(X) g(Y)] = sum over X-intervals of g * integral phi(x) E[g(Y)|x] dx,
    // each interval integrated with composite Simpson.
    auto cross_moment = [&](double r) {
        const double s = std::sqrt(std::max(1.0 - r * r, 1e-300));
        std::vector<double> edges{-9.0};
        edges.insert(edges.end(), t.begin(), t.end());
        edges.push_back(9.0);
        double total = 0.0;
        for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
            const double a = edges[k], b = edges[k + 1];
            const int m = 2000;
            const double h = (b - a) / m;
            double acc = 0.0;
            for (int q = 0; q <= m; ++q) {
                const double x = a + q * h;
                double ey = 1.0;
                for (double tk : t) ey += normal_cdf((r * x - tk) / s);
                const double f = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI) * ey;
                acc += f * ((q == 0 || q == m) ? 1.0 : (q % 2 ? 4.0 : 2.0));
            }
            total += static_cast<double>(k + 1) * acc * h / 3.0;
        }
        return total;
    };

    const Eigen::Index p = loadings.rows();
    Eigen::MatrixXd out = Eigen::MatrixXd::Identity(p, p);
    for (Eigen::Index i = 0; i < p; ++i)
        for (Eigen::Index j = i + 1; j < p; ++j) {
            const double r = rho(i, j);
            const double c = (std::abs(r) < 1e-15) ? 0.0 : (cross_moment(r) - mean * mean) / var;
            out(i, j) = out(j, i) = c;
        }
    return out;
}

SyntheticSurvey generate_synthetic_survey(const SyntheticConfig& cfg, std::uint64_t seed) {
    const std::size_t n = cfg.n;
    const std::size_t m = cfg.factors;
    const std::size_t p = cfg.psych_items;
    if (m == 0 || p == 0) throw ValidationError("synth: need at least one factor and one item");
    if (n < 10 * m)
        throw ValidationError(fmt::format("synth: n = {} is below 10 x {} factors (unidentifiable)", n, m));
    if (cfg.likert_levels < 2) throw ValidationError("synth: likert_levels must be >= 2");
    if (cfg.primary_loadings.empty() || cfg.psych_effects.empty())
        throw ValidationError("synth: primary_loadings and psych_effects must be non-empty");

    // Planted loadings.
    Eigen::MatrixXd lambda = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(m));
    std::vector<std::string> item_names;
    for (std::size_t i = 0; i < p; ++i) {
        const std::size_t f = i * m / p;
        double sign = (cfg.reverse_every > 0 && i % cfg.reverse_every == cfg.reverse_every - 1) ? -1.0 : 1.0;
        lambda(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(f)) =
            sign * cfg.primary_loadings[f % cfg.primary_loadings.size()];
        if (m > 1 && cfg.cross_loading != 0.0)
            lambda(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>((f + 1) % m)) = cfg.cross_loading;
        if (lambda.row(static_cast<Eigen::Index>(i)).squaredNorm() > 1.0)
            throw ValidationError(fmt::format("synth: item {} has communality above 1", i + 1));
        item_names.push_back(p <= 28 ? item_name(i) : fmt::format("Psy{}", i + 1));
    }

    Rng rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    auto bern = [&](double prob) { return unif(rng) < prob; };

    Builder b;
    const auto v_marital = b.add("Marital_Status", VariableKind::categorical, VariableGroup::demographic,
                                 {"Married", "Cohabiting", "Single", "Divorced", "Widowed", kPreferNot},
                                 {kPreferNot}, n);
    const auto v_emp = b.add("Emp_Status", VariableKind::categorical, VariableGroup::demographic,
                             {"Full time", "Part time", "Self employed", "Unemployed", "retired", "Student",
                              kPreferNot},
                             {kPreferNot}, n);
    const auto v_age = b.add("Age_Sex", VariableKind::categorical, VariableGroup::demographic,
                             {"Male 18-34", "Male 35-54", "Male 55+", "Female 18-34", "Female 35-54", "Female 55+"},
                             {}, n);
    const auto v_grade = b.add("Social_Grade", VariableKind::categorical, VariableGroup::demographic,
                               {"AB", "C1", "C2", "DE"}, {}, n);
    const auto v_edu = b.add("Education", VariableKind::categorical, VariableGroup::demographic,
                             {"Degree", "A level", "GCSE", "No qualification", "Other", kPreferNot}, {kPreferNot}, n);
    std::vector<std::size_t> v_guardian;
    for (std::size_t g = 0; g < cfg.guardian_items; ++g)
        v_guardian.push_back(b.add(fmt::format("Guardian_{}", g + 1), VariableKind::categorical,
                                   VariableGroup::demographic, {"No", "Yes"}, {}, n));

    const auto v_hhinc = b.add("Household_Income", VariableKind::numeric_band, VariableGroup::financial,
                               {"Under 10k", "10k-20k", "20k-30k", "30k-40k", "40k-60k", "60k+", kDontKnow, kPreferNot},
                               {kDontKnow, kPreferNot}, n);
    const auto v_inc = b.add("Income", VariableKind::numeric_band, VariableGroup::financial,
                             {"Under 5k", "5k-10k", "10k-20k", "20k-30k", "30k-50k", "50k+", kDontKnow, kPreferNot},
                             {kDontKnow, kPreferNot}, n);
    const auto v_liquid = b.add("Liquid_Assets", VariableKind::numeric_band, VariableGroup::financial,
                                {"None", "Under 1k", "1k-5k", "5k-20k", "20k+", kDontKnow, kPreferNot},
                                {kDontKnow, kPreferNot}, n);
    const auto v_house = b.add("House_Status", VariableKind::categorical, VariableGroup::financial,
                               {"Own outright", "Own with mortgage", "Rent", "Other", kDontKnow, kPreferNot},
                               {kDontKnow, kPreferNot}, n);
    std::vector<std::size_t> v_insurance;
    for (std::size_t k = 0; k < cfg.insurance_items; ++k)
        v_insurance.push_back(b.add(fmt::format("Insurance_{}", k + 1), VariableKind::categorical,
                                    VariableGroup::financial, {"No", "Yes"}, {}, n));

    const auto levels = likert_labels(cfg.likert_levels);
    std::vector<std::size_t> v_items;
    for (std::size_t i = 0; i < p; ++i)
        v_items.push_back(
            b.add(item_names[i], VariableKind::likert, VariableGroup::psychological, levels, {}, n));

    const auto v_debt = b.add("Unsecured_Debt", VariableKind::numeric_band, VariableGroup::target,
                              {"None", "Under 500", "500-1999", "2000-4999", "5000-9999", "10000-19999", "20000+"},
                              {}, n);

    const auto cuts = cutpoints(cfg.likert_levels);
    Eigen::MatrixXd latent = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
    std::vector<bool> nonresponders(n, false), refusers(n, false);
    std::vector<double> propensity(n, 0.0);
    auto code_of = [&](std::size_t var, const char* label) {
        return static_cast<int>(*b.specs[var].category_index(label));
    };

    std::vector<std::string> ids;
    ids.reserve(n);
    for (std::size_t r = 0; r < n; ++r) {
        ids.push_back(std::to_string(r + 1));
        auto set = [&](std::size_t var, int value) { b.columns[var][r] = value; };

        // Demographics.
        const int age = static_cast<int>(std::uniform_int_distribution<int>(0, 2)(rng));
        const int sex = static_cast<int>(std::uniform_int_distribution<int>(0, 1)(rng));
        const double wealth = gauss(rng) + 0.3 * (age - 1);
        set(v_age, sex * 3 + age);

        const double edu_score = wealth + gauss(rng);
        int edu = bern(0.05) ? 4 : 3 - band(edu_score, {-0.8, 0.0, 0.8});
        set(v_edu, edu);
        set(v_grade, 3 - band(wealth + 0.5 * gauss(rng), {-0.7, 0.0, 0.7}));

        int emp = 0;
        if (age == 2 && bern(0.6))
            emp = 4;
        else if (bern(logistic(-2.2 - wealth)))
            emp = 3;
        else if (age == 0 && bern(0.12))
            emp = 5;
        else if (bern(0.15))
            emp = 1;
        else if (bern(0.1))
            emp = 2;
        set(v_emp, emp);

        {
            const double u = unif(rng);
            int marital;
            if (age == 0)
                marital = u < 0.25 ? 0 : (u < 0.5 ? 1 : (u < 0.95 ? 2 : 3));
            else if (age == 1)
                marital = u < 0.55 ? 0 : (u < 0.7 ? 1 : (u < 0.85 ? 2 : (u < 0.97 ? 3 : 4)));
            else
                marital = u < 0.55 ? 0 : (u < 0.6 ? 1 : (u < 0.7 ? 2 : (u < 0.82 ? 3 : 4)));
            set(v_marital, marital);
        }
        for (auto g : v_guardian) set(g, bern(age <= 1 ? 0.35 : 0.1) ? 1 : 0);

        // Finances.
        set(v_hhinc, band(wealth + 0.6 * gauss(rng), {-1.2, -0.5, 0.0, 0.5, 1.2}));
        set(v_inc, band(wealth + 0.8 * gauss(rng) - (emp == 3 || emp == 5 ? 0.8 : 0.0), {-1.2, -0.5, 0.0, 0.5, 1.2}));
        set(v_liquid, band(wealth + 0.8 * gauss(rng), {-1.0, -0.3, 0.4, 1.1}));
        int house;
        {
            const double s = wealth + 0.6 * (age - 1) + 0.7 * gauss(rng);
            if (bern(0.05))
                house = 3;
            else if (s > 0.9 && age >= 1)
                house = 0;
            else if (s > -0.2)
                house = 1;
            else
                house = 2;
        }
        set(v_house, house);
        for (std::size_t k = 0; k < v_insurance.size(); ++k)
            set(v_insurance[k], bern(logistic(-0.4 + 0.6 * wealth + 0.15 * static_cast<double>(k % 4))) ? 1 : 0);

        // Psychological battery.
        Eigen::VectorXd f(static_cast<Eigen::Index>(m));
        for (Eigen::Index q = 0; q < f.size(); ++q) f(q) = gauss(rng);
        latent.row(static_cast<Eigen::Index>(r)) = f.transpose();
        for (std::size_t i = 0; i < p; ++i) {
            const auto ii = static_cast<Eigen::Index>(i);
            const double common = lambda.row(ii).dot(f);
            const double unique = std::sqrt(std::max(0.0, 1.0 - lambda.row(ii).squaredNorm()));
            const double z = common + unique * gauss(rng);
            int code = 0;
            for (double c : cuts)
                if (z > c) ++code;
            set(v_items[i], code);
        }

        // Debt.
        const bool renter = house == 2;
        const bool young = age == 0;
        double eta = cfg.intercept - cfg.financial_effect * wealth + 0.5 * cfg.financial_effect * (renter ? 1.0 : 0.0) +
                     cfg.demographic_effect * ((emp == 3 ? 1.0 : 0.0) + (young ? 1.0 : 0.0) - (emp == 4 ? 1.0 : 0.0));
        for (std::size_t q = 0; q < m; ++q)
            eta += cfg.psych_effects[q % cfg.psych_effects.size()] * f(static_cast<Eigen::Index>(q));
        propensity[r] = eta;
        const double noise = std::log(unif(rng) + 1e-300) - std::log(unif(rng) + 1e-300); // logistic draw
        const double latent = eta + noise;
        set(v_debt, latent > 0.0 ? 1 + band(eta + 0.7 * gauss(rng), {-0.4, 0.2, 0.8, 1.4, 2.0}) : 0);

        // Uncertain answers.
        const bool nonresponder = bern(cfg.nonresponse_fraction);
        nonresponders[r] = nonresponder;
        if (nonresponder) {
            // Each non-responder sticks to one style.
            const bool prefers_pna = bern(0.5);
            for (auto v : {v_hhinc, v_inc, v_liquid, v_house})
                if (bern(cfg.nonresponder_uncertain_rate)) set(v, code_of(v, prefers_pna ? kPreferNot : kDontKnow));
            if (bern(cfg.demographic_refusal_rate)) {
                refusers[r] = true;
                for (auto v : {v_marital, v_emp, v_edu})
                    if (bern(cfg.nonresponder_uncertain_rate)) set(v, code_of(v, kPreferNot));
            }
        }
        for (std::size_t v = 0; v < b.specs.size(); ++v) {
            const auto& spec = b.specs[v];
            if (spec.uncertain_codes.empty()) continue;
            if (bern(cfg.background_uncertain_rate)) {
                const auto which = std::uniform_int_distribution<std::size_t>(0, spec.uncertain_codes.size() - 1)(rng);
                set(v, static_cast<int>(*spec.category_index(spec.uncertain_codes[which])));
            }
        }
    }

    std::vector<std::pair<std::string, double>> coefficients{{"intercept", cfg.intercept},
                                                             {"wealth", -cfg.financial_effect},
                                                             {"renter", 0.5 * cfg.financial_effect},
                                                             {"unemployed", cfg.demographic_effect},
                                                             {"age_18_34", cfg.demographic_effect},
                                                             {"retired", -cfg.demographic_effect}};
    for (std::size_t q = 0; q < m; ++q)
        coefficients.emplace_back(fmt::format("factor{}", q + 1), cfg.psych_effects[q % cfg.psych_effects.size()]);

    return SyntheticSurvey{
        survey::Dataset(std::make_shared<const survey::SurveySchema>(std::move(b.specs)), std::move(b.columns),
                        std::move(ids)),
        lambda,
        item_names,
        std::move(latent),
        std::move(nonresponders),
        std::move(refusers),
        std::move(propensity),
        std::move(coefficients),
        {"Household_Income", "Income", "Liquid_Assets", "House_Status", "Marital_Status", "Emp_Status", "Education"}};
}

void write_ground_truth(const SyntheticSurvey& s, const std::filesystem::path& dir) {
    {
        std::ofstream out(dir / "ground_truth_loadings.csv", std::ios::binary);
        std::vector<std::string> header{"item"};
        for (Eigen::Index f = 0; f < s.loadings.cols(); ++f) header.push_back(fmt::format("factor{}", f + 1));
        csv::write_record(out, header);
        for (Eigen::Index i = 0; i < s.loadings.rows(); ++i) {
            std::vector<std::string> row{s.item_names[static_cast<std::size_t>(i)]};
            for (Eigen::Index f = 0; f < s.loadings.cols(); ++f) row.push_back(csv::format_exact(s.loadings(i, f)));
            csv::write_record(out, row);
        }
    }
    {
        std::ofstream out(dir / "ground_truth_coefficients.csv", std::ios::binary);
        csv::write_record(out, {"term", "coefficient"});
        for (const auto& [name, value] : s.class_coefficients) csv::write_record(out, {name, csv::format_exact(value)});
    }
    {
        std::ofstream out(dir / "ground_truth_rows.csv", std::ios::binary);
        std::vector<std::string> header{"id", "systematic_nonresponder", "demographic_refuser", "debt_propensity"};
        for (Eigen::Index f = 0; f < s.latent_factors.cols(); ++f) header.push_back(fmt::format("factor{}", f + 1));
        csv::write_record(out, header);
        for (std::size_t r = 0; r < s.data.rows(); ++r) {
            std::vector<std::string> row{s.data.row_ids()[r], s.systematic_nonresponder[r] ? "1" : "0",
                                         s.demographic_refuser[r] ? "1" : "0", csv::format_exact(s.debt_propensity[r])};
            for (Eigen::Index f = 0; f < s.latent_factors.cols(); ++f)
                row.push_back(csv::format_exact(s.latent_factors(static_cast<Eigen::Index>(r), f)));
            csv::write_record(out, row);
        }
    }
}

} // namespace debtmine::synth
