#include "debtmine/config.hpp"

#include "debtmine/csv.hpp"
#include "debtmine/error.hpp"

#include <charconv>
#include <fstream>

#include <fmt/format.h>

namespace debtmine {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

} // namespace

Config::Config() {
    entries_ = {
        {"seed", "20140611", "master seed; every random stream derives from it"},
        {"execution", "parallel", "parallel or serial kernels (identical results)"},
        {"paths.schema", "", "schema file; empty means <out>/data/schema.txt"},
        {"paths.data", "", "survey CSV; empty means <out>/data/survey.csv"},
        {"paths.out", "out", "output directory"},

        {"synth.n", "2084", "respondents"},
        {"synth.psych_items", "28", "likert items"},
        {"synth.factors", "5", "planted latent factors"},
        {"synth.likert_levels", "5", "points on the agreement scale"},
        {"synth.primary_loadings", "0.75,0.65,0.6,0.55,0.55", "loading of each item on its factor, per factor"},
        {"synth.cross_loading", "0", "loading on the next factor"},
        {"synth.nonresponse_fraction", "0.4", "share of systematic non-responders"},
        {"synth.intercept", "0", "debt logit intercept"},
        {"synth.financial_effect", "0.8", "wealth effect on the debt logit"},
        {"synth.demographic_effect", "0.5", "employment and age effect on the debt logit"},
        {"synth.psych_effects", "1,0.5,0.45,0.4,0.6", "factor effects on the debt logit"},

        {"cleaning.watch", "Household_Income,Income,Liquid_Assets,House_Status,Marital_Status,Emp_Status,Education",
         "variables whose uncertain answers count towards removal"},
        {"cleaning.min_hits", "3", "uncertain answers on watched variables that remove a row"},
        {"cleaning.flag_multiple", "2", "category flagged beyond this multiple of the median distance"},

        {"homals.dimensions", "2", "dimensions per group"},
        {"homals.tol", "1e-8", "relative loss decrease for convergence"},
        {"homals.max_iter", "500", "iteration cap"},

        {"efa.n_random", "100", "random datasets in parallel analysis"},
        {"efa.retention", "quantile", "parallel analysis threshold: mean or quantile"},
        {"efa.quantile", "0.95", "random-eigenvalue quantile when efa.retention = quantile"},
        {"efa.factors", "auto", "factor count; auto takes the parallel analysis result"},
        {"efa.tol", "1e-6", "communality change for convergence"},
        {"efa.max_iter", "1000", "principal-axis iteration cap"},
        {"efa.rotation", "varimax", "varimax or none"},
        {"efa.factor_names", "Impulsivity,Risk Aversion,Organisational Responsibility,Risk Management Belief,Planful Saving",
         "names for factors 1..m; missing names become Factor k"},

        {"labelling.modes", "two_class,three_class", "class definitions to evaluate"},
        {"labelling.debt_split", "", "highest Low debt category; empty means the median positive category"},
        {"labelling.undersample", "auto", "three-class NoDebt size: auto (mean of the other classes), none or a count"},

        {"eval.k", "10", "folds"},
        {"eval.repeats", "10", "repetitions"},
        {"eval.alpha", "0.025", "significance level of the Step 3 vs Step 2 test"},
        {"eval.families", "multinomial_lr,random_forest,neural_net", "model families"},
        {"eval.variants", "original,transformed", "predictor variants"},
        {"eval.evaluations", "Financial,Demographic,Psychological,Step 2,Step 3", "groups and steps to evaluate"},
        {"lr.l2", "1e-4", "ridge penalty"},
        {"lr.tol", "1e-6", "gradient max-norm for convergence"},
        {"lr.max_iter", "5000", "iteration cap"},
        {"rf.n_trees", "500", "trees"},
        {"rf.mtry", "0", "candidate features per split; 0 means floor(sqrt(d))"},
        {"rf.min_leaf", "1", "minimum rows per leaf"},
        {"nn.epochs", "10000", "full-batch gradient steps"},
        {"nn.learning_rate", "0.1", "step size"},
        {"nn.hidden_min", "1", "smallest hidden layer tried"},
        {"nn.hidden_max", "10", "largest hidden layer tried"},
        {"nn.inner_folds", "5", "inner CV folds for the hidden-size sweep"},
        {"importance.top", "10", "rows in the top-variable table"},
    };
}

Config::Entry& Config::find(std::string_view key) {
    for (auto& e : entries_)
        if (e.key == key) return e;
    throw ValidationError(fmt::format("unknown config key '{}'", key));
}

const Config::Entry& Config::find(std::string_view key) const { return const_cast<Config*>(this)->find(key); }

Config Config::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw MissingArtifactError(fmt::format("config file {} not found", path.string()));
    Config c;
    c.merge(in, path.string());
    return c;
}

void Config::merge(std::istream& in, std::string_view source) {
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ValidationError(fmt::format("{}:{}: expected 'key = value'", source, number));
        try {
            set(trim(std::string_view(t).substr(0, eq)), trim(std::string_view(t).substr(eq + 1)));
        } catch (const ValidationError& e) {
            throw ValidationError(fmt::format("{}:{}: {}", source, number, e.what()));
        }
    }
}

void Config::apply_override(std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos)
        throw ValidationError(fmt::format("override '{}' is not key=value", assignment));
    set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void Config::set(std::string_view key, std::string value) { find(key).value = std::move(value); }

const std::string& Config::text(std::string_view key) const { return find(key).value; }

long long Config::integer(std::string_view key) const {
    const auto& v = text(key);
    long long out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size())
        throw ValidationError(fmt::format("config '{}': '{}' is not an integer", key, v));
    return out;
}

std::size_t Config::count(std::string_view key) const {
    const long long v = integer(key);
    if (v < 0) throw ValidationError(fmt::format("config '{}' must be non-negative", key));
    return static_cast<std::size_t>(v);
}

double Config::real(std::string_view key) const {
    try {
        return csv::parse_double(text(key));
    } catch (const ValidationError&) {
        throw ValidationError(fmt::format("config '{}': '{}' is not a number", key, text(key)));
    }
}

bool Config::flag(std::string_view key) const {
    const auto& v = text(key);
    if (v == "true" || v == "yes" || v == "1") return true;
    if (v == "false" || v == "no" || v == "0") return false;
    throw ValidationError(fmt::format("config '{}': '{}' is not a boolean", key, v));
}

std::uint64_t Config::seed() const {
    const auto& v = text("seed");
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || ec != std::errc() || ptr != v.data() + v.size())
        throw ValidationError(fmt::format("config 'seed': '{}' is not an unsigned integer", v));
    return out;
}

std::vector<std::string> Config::list(std::string_view key) const {
    std::vector<std::string> out;
    const auto& v = text(key);
    std::size_t start = 0;
    while (start <= v.size()) {
        const auto comma = v.find(',', start);
        const auto item = trim(std::string_view(v).substr(start, comma == std::string::npos ? std::string::npos : comma - start));
        if (!item.empty()) out.push_back(item);
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

std::vector<double> Config::reals(std::string_view key) const {
    std::vector<double> out;
    for (const auto& s : list(key)) {
        try {
            out.push_back(csv::parse_double(s));
        } catch (const ValidationError&) {
            throw ValidationError(fmt::format("config '{}': '{}' is not a number", key, s));
        }
    }
    return out;
}

void Config::write(std::ostream& out) const {
    for (const auto& e : entries_) out << "# " << e.help << '\n' << e.key << " = " << e.value << '\n';
}

} // namespace debtmine
