#include "debtmine/pipeline.hpp"

#include "debtmine/classifiers.hpp"
#include "debtmine/csv.hpp"
#include "debtmine/error.hpp"
#include "debtmine/evaluation.hpp"
#include "debtmine/homals.hpp"
#include "debtmine/psychometrics.hpp"
#include "debtmine/random.hpp"
#include "debtmine/survey.hpp"
#include "debtmine/synth.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include <fmt/format.h>

namespace fs = std::filesystem;

namespace debtmine::pipeline {

namespace {

constexpr std::string_view kVersion = "debtmine 0.1.0";

// Stream tags under the master seed.
enum SeedTag : std::uint64_t { kSynth = 1, kClean = 2, kFactors = 3, kEvaluate = 4 };

const std::vector<std::string> kGroupNames{"Financial", "Demographic"};

std::string_view producer_of(std::string_view rel) {
    const auto slash = rel.find('/');
    return slash == std::string_view::npos ? rel : rel.substr(0, slash);
}

/// Bookkeeping for one stage: inputs and outputs with checksums, snapshot,
/// wall clock.
class Stage {
public:
    Stage(std::string name, const Config& config)
        : name_(std::move(name)), config_(config), out_(output_dir(config)),
          start_(std::chrono::steady_clock::now()) {
        std::error_code ec;
        fs::create_directories(out_ / name_, ec);
        if (ec || !fs::is_directory(out_ / name_))
            throw ValidationError(fmt::format("output directory {} is not writable", (out_ / name_).string()));
    }

    /// Artifact of an earlier stage, relative to the output directory.
    fs::path artifact(const std::string& rel) {
        const fs::path p = out_ / rel;
        if (!fs::is_regular_file(p))
            throw MissingArtifactError(
                fmt::format("missing artifact {} (run the {} stage first)", rel, producer_of(rel)));
        inputs_.emplace_back(rel, p);
        return p;
    }

    /// File outside the run directory, or an artifact when `path` is empty.
    fs::path external(const std::string& path, const std::string& fallback_rel) {
        if (path.empty()) return artifact(fallback_rel);
        if (!fs::is_regular_file(path)) throw MissingArtifactError(fmt::format("input file {} not found", path));
        inputs_.emplace_back(path, path);
        return path;
    }

    std::ofstream create(const std::string& file) {
        const std::string rel = name_ + "/" + file;
        std::ofstream f(out_ / rel, std::ios::binary);
        if (!f) throw ValidationError(fmt::format("cannot write {}", (out_ / rel).string()));
        outputs_.push_back(rel);
        return f;
    }

    void record_output(const std::string& file) { outputs_.push_back(name_ + "/" + file); }

    fs::path dir() const { return out_ / name_; }

    void finish() {
        {
            std::ofstream snap(out_ / name_ / "config.txt", std::ios::binary);
            config_.write(snap);
        }
        std::ofstream m(out_ / name_ / "manifest.csv", std::ios::binary);
        csv::write_record(m, {"role", "path", "sha256"});
        csv::write_record(m, {"version", std::string(kVersion), ""});
        csv::write_record(m, {"config", name_ + "/config.txt", sha256_file(out_ / name_ / "config.txt")});
        for (const auto& [rel, p] : inputs_) csv::write_record(m, {"input", rel, sha256_file(p)});
        for (const auto& rel : outputs_) csv::write_record(m, {"output", rel, sha256_file(out_ / rel)});
        const double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        std::ofstream t(out_ / name_ / "timing.txt", std::ios::binary);
        t << fmt::format("{} {:.3f}\n", name_, seconds);
    }

private:
    std::string name_;
    const Config& config_;
    fs::path out_;
    std::chrono::steady_clock::time_point start_;
    std::vector<std::pair<std::string, fs::path>> inputs_;
    std::vector<std::string> outputs_;
};

template <class Fn>
void run_stage(std::string_view name, Fn&& fn) {
    try {
        fn();
    } catch (const ValidationError& e) {
        throw ValidationError(fmt::format("{}: {}", name, e.what()));
    } catch (const NumericalError& e) {
        throw NumericalError(fmt::format("{}: {}", name, e.what()));
    } catch (const MissingArtifactError& e) {
        throw MissingArtifactError(fmt::format("{}: {}", name, e.what()));
    }
}

Execution execution_of(const Config& c) {
    const auto& v = c.text("execution");
    if (v == "parallel") return Execution::parallel;
    if (v == "serial") return Execution::serial;
    throw ValidationError(fmt::format("config 'execution': '{}' is neither parallel nor serial", v));
}

homals::HomalsOptions homals_options(const Config& c) {
    homals::HomalsOptions o;
    o.dimensions = c.count("homals.dimensions");
    o.tol = c.real("homals.tol");
    o.max_iter = c.count("homals.max_iter");
    return o;
}

std::vector<std::size_t> group_variables(const survey::SurveySchema& schema, std::size_t g) {
    return schema.group_indices(g == 0 ? survey::VariableGroup::financial : survey::VariableGroup::demographic);
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    return s;
}

homals::HomalsSolution fit_group(const survey::Dataset& data, std::size_t g, const homals::HomalsOptions& base,
                                 std::uint64_t seed) {
    const auto vars = group_variables(data.schema(), g);
    if (vars.empty()) throw ValidationError(fmt::format("schema has no {} variables", lower(kGroupNames[g])));
    auto options = base;
    options.name = kGroupNames[g];
    options.seed = seed;
    const auto indicators =
        homals::drop_empty_categories(survey::encode(data, vars, survey::Encoding::full_indicator));
    return homals::fit_homals(indicators, options);
}

survey::Dataset load_cleaned(Stage& stage, std::shared_ptr<const survey::SurveySchema>& schema) {
    schema = std::make_shared<const survey::SurveySchema>(survey::load_schema(stage.artifact("clean/schema.txt")));
    std::ifstream in(stage.artifact("clean/cleaned.csv"), std::ios::binary);
    return survey::read_dataset(schema, in);
}

std::vector<std::string> factor_names(const Config& c, std::size_t m) {
    auto names = c.list("efa.factor_names");
    names.resize(std::max(names.size(), m));
    for (std::size_t k = 0; k < m; ++k)
        if (names[k].empty()) names[k] = fmt::format("Factor {}", k + 1);
    names.resize(m);
    return names;
}

ml::ModelConfig model_config(const Config& c, ml::Family family, Execution exec) {
    ml::ModelConfig m;
    m.family = family;
    m.lr.l2 = c.real("lr.l2");
    m.lr.tol = c.real("lr.tol");
    m.lr.max_iter = c.count("lr.max_iter");
    m.rf.n_trees = c.count("rf.n_trees");
    m.rf.mtry = c.count("rf.mtry");
    m.rf.min_leaf = c.count("rf.min_leaf");
    m.rf.execution = exec;
    m.nn.epochs = c.count("nn.epochs");
    m.nn.learning_rate = c.real("nn.learning_rate");
    m.tuning.hidden_min = c.count("nn.hidden_min");
    m.tuning.hidden_max = c.count("nn.hidden_max");
    m.tuning.inner_folds = c.count("nn.inner_folds");
    m.nn.hidden = m.tuning.hidden_min;
    m.tune_hidden = m.tuning.hidden_min != m.tuning.hidden_max;
    return m;
}

std::vector<std::size_t> index_rows(const std::vector<std::string>& ids, const std::vector<std::string>& subset) {
    std::unordered_set<std::string> drop(subset.begin(), subset.end());
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < ids.size(); ++i)
        if (!drop.count(ids[i])) keep.push_back(i);
    return keep;
}

} // namespace

fs::path output_dir(const Config& config) { return config.text("paths.out"); }

std::string sha256_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingArtifactError(fmt::format("cannot open {}", path.string()));
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
        EVP_MD_CTX_free(ctx);
        throw NumericalError("sha256: digest initialisation failed");
    }
    char buf[1 << 15];
    while (in.read(buf, sizeof buf) || in.gcount() > 0)
        EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, md, &len);
    EVP_MD_CTX_free(ctx);
    std::string hex;
    for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", md[i]);
    return hex;
}

// synth ---------------------------------------------------------------------

void cmd_synth(const Config& c) {
    run_stage("synth", [&] {
        Stage stage("data", c);
        synth::SyntheticConfig cfg;
        cfg.n = c.count("synth.n");
        cfg.psych_items = c.count("synth.psych_items");
        cfg.factors = c.count("synth.factors");
        cfg.likert_levels = c.count("synth.likert_levels");
        cfg.primary_loadings = c.reals("synth.primary_loadings");
        cfg.cross_loading = c.real("synth.cross_loading");
        cfg.nonresponse_fraction = c.real("synth.nonresponse_fraction");
        cfg.intercept = c.real("synth.intercept");
        cfg.financial_effect = c.real("synth.financial_effect");
        cfg.demographic_effect = c.real("synth.demographic_effect");
        cfg.psych_effects = c.reals("synth.psych_effects");
        const auto s = synth::generate_synthetic_survey(cfg, derive_seed(c.seed(), {kSynth}));
        {
            auto f = stage.create("schema.txt");
            survey::write_schema(s.data.schema(), f);
        }
        {
            auto f = stage.create("survey.csv");
            survey::write_dataset(s.data, f);
        }
        synth::write_ground_truth(s, stage.dir());
        for (const char* f : {"ground_truth_loadings.csv", "ground_truth_coefficients.csv", "ground_truth_rows.csv"})
            stage.record_output(f);
        stage.finish();
    });
}

// clean ---------------------------------------------------------------------

void cmd_clean(const Config& c) {
    run_stage("clean", [&] {
        Stage stage("clean", c);
        const auto schema_path = stage.external(c.text("paths.schema"), "data/schema.txt");
        const auto data_path = stage.external(c.text("paths.data"), "data/survey.csv");
        const auto data = survey::load_dataset(schema_path, data_path);
        const auto& schema = data.schema();
        const auto watch = c.list("cleaning.watch");
        for (const auto& w : watch) schema.index_of(w);
        const double multiple = c.real("cleaning.flag_multiple");
        const auto hopts = homals_options(c);

        for (std::size_t g = 0; g < kGroupNames.size(); ++g) {
            const auto sol = fit_group(data, g, hopts, derive_seed(c.seed(), {kClean, g}));
            const auto diag = homals::category_diagnostics(sol, multiple);
            const std::string stem = "homals_" + lower(kGroupNames[g]);
            {
                auto f = stage.create(stem + "_categories.csv");
                homals::write_category_csv(diag, f);
            }
            {
                auto f = stage.create(stem + "_loss.csv");
                homals::write_loss_history(sol, f);
            }
            {
                auto f = stage.create(stem + ".svg");
                homals::write_category_plot(diag, fmt::format("{} category quantifications", kGroupNames[g]), f);
            }
        }

        const auto cleaned = survey::drop_systematic_nonresponse(data, watch, c.count("cleaning.min_hits"));
        {
            auto f = stage.create("removal_report.csv");
            survey::write_removal_report(cleaned.report, f);
        }
        {
            const auto before = survey::uncertain_counts(data);
            const auto after = survey::uncertain_counts(cleaned.data);
            auto f = stage.create("uncertain_counts.csv");
            csv::write_record(f, {"variable", "group", "uncertain_before", "uncertain_after"});
            for (std::size_t v = 0; v < schema.size(); ++v) {
                if (schema.variable(v).uncertain_codes.empty()) continue;
                csv::write_record(f, {schema.variable(v).name, std::string(survey::to_string(schema.variable(v).group)),
                                      std::to_string(before[v]), std::to_string(after[v])});
            }
        }
        {
            // Variables outside the watch list: did removal shift their distribution?
            std::vector<std::size_t> vars;
            const std::set<std::string> watched(watch.begin(), watch.end());
            for (std::size_t g = 0; g < kGroupNames.size(); ++g)
                for (std::size_t v : group_variables(schema, g))
                    if (!watched.count(schema.variable(v).name)) vars.push_back(v);
            std::sort(vars.begin(), vars.end());
            std::vector<std::size_t> all(data.rows());
            for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
            const auto kept = index_rows(data.row_ids(), cleaned.report.removed_ids);
            auto f = stage.create("representativeness.csv");
            eval::write_comparison_csv(eval::compare_distributions(data, vars, kept, all), f);
        }
        {
            auto f = stage.create("schema.txt");
            survey::write_schema(schema, f);
        }
        {
            auto f = stage.create("cleaned.csv");
            survey::write_dataset(cleaned.data, f);
        }
        {
            // Full-data homals dimensions of the cleaned table, for inspection.
            // Evaluation refits inside each training fold.
            std::vector<homals::DimensionScores> dims;
            for (std::size_t g = 0; g < kGroupNames.size(); ++g)
                dims.push_back(homals::transform(fit_group(cleaned.data, g, hopts, derive_seed(c.seed(), {kClean, 10 + g}))));
            auto f = stage.create("homals_dimensions.csv");
            std::vector<std::string> header{"id"};
            for (const auto& d : dims) header.insert(header.end(), d.names.begin(), d.names.end());
            csv::write_record(f, header);
            for (std::size_t i = 0; i < cleaned.data.rows(); ++i) {
                std::vector<std::string> row{cleaned.data.row_ids()[i]};
                for (const auto& d : dims)
                    for (Eigen::Index k = 0; k < d.values.cols(); ++k)
                        row.push_back(csv::format_exact(d.values(static_cast<Eigen::Index>(i), k)));
                csv::write_record(f, row);
            }
        }
        stage.finish();
    });
}

// factors -------------------------------------------------------------------

void cmd_factors(const Config& c) {
    run_stage("factors", [&] {
        Stage stage("factors", c);
        std::shared_ptr<const survey::SurveySchema> schema;
        const auto data = load_cleaned(stage, schema);
        const auto items_idx = schema->group_indices(survey::VariableGroup::psychological);
        if (items_idx.size() < 2) throw ValidationError("need at least two psychological items");
        const auto enc = survey::encode(data, items_idx, survey::Encoding::likert_numeric);
        const auto r = psych::correlation(enc.values, enc.names);

        psych::ParallelAnalysisOptions pa_opts;
        pa_opts.n_random = c.count("efa.n_random");
        pa_opts.seed = derive_seed(c.seed(), {kFactors});
        pa_opts.quantile = c.real("efa.quantile");
        pa_opts.execution = execution_of(c);
        const auto& crit = c.text("efa.retention");
        if (crit == "mean")
            pa_opts.criterion = psych::RetentionCriterion::mean;
        else if (crit == "quantile")
            pa_opts.criterion = psych::RetentionCriterion::quantile;
        else
            throw ValidationError(fmt::format("config 'efa.retention': '{}' is neither mean nor quantile", crit));
        const auto pa = psych::parallel_analysis(enc.values, pa_opts);
        {
            auto f = stage.create("scree.csv");
            psych::write_scree_csv(pa, f);
        }
        {
            auto f = stage.create("scree.svg");
            psych::write_scree_plot(pa, f);
        }

        std::size_t m = pa.retained;
        if (c.text("efa.factors") != "auto") m = c.count("efa.factors");
        if (m == 0)
            throw ValidationError("parallel analysis retained no factors; set efa.factors to extract anyway");
        if (m >= items_idx.size())
            throw ValidationError(fmt::format("cannot extract {} factors from {} items", m, items_idx.size()));

        psych::ExtractionOptions eo;
        eo.tol = c.real("efa.tol");
        eo.max_iter = c.count("efa.max_iter");
        auto model = psych::extract_factors(r, m, eo);
        const auto& rot = c.text("efa.rotation");
        if (rot == "varimax") {
            if (m > 1) model = psych::varimax(model);
        } else if (rot != "none") {
            throw ValidationError(fmt::format("config 'efa.rotation': '{}' is neither varimax nor none", rot));
        }
        const auto names = factor_names(c, m);
        {
            auto f = stage.create("loadings.csv");
            psych::write_loadings_csv(model, names, f);
        }
        {
            auto f = stage.create("reliability.csv");
            psych::write_reliability_csv(psych::reliability(model, enc.values, names), f);
        }
        {
            auto f = stage.create("efa_summary.csv");
            csv::write_record(f, {"key", "value"});
            std::string warnings;
            for (const auto& w : model.warnings) warnings += (warnings.empty() ? "" : "; ") + w;
            const std::vector<std::pair<std::string, std::string>> rows{
                {"items", std::to_string(items_idx.size())},
                {"rows", std::to_string(data.rows())},
                {"retention_criterion", crit},
                {"retained_by_parallel_analysis", std::to_string(pa.retained)},
                {"factors", std::to_string(m)},
                {"rotation", m > 1 ? rot : "none"},
                {"variance_explained", csv::format(model.variance_explained)},
                {"converged", model.converged ? "yes" : "no"},
                {"iterations", std::to_string(model.iterations)},
                {"warnings", warnings}};
            for (const auto& [k, v] : rows) csv::write_record(f, {k, v});
        }

        const Eigen::MatrixXd scores = psych::factor_scores(model, enc.values);
        {
            auto f = stage.create("factor_scores.csv");
            std::vector<std::string> header{"id"};
            header.insert(header.end(), names.begin(), names.end());
            csv::write_record(f, header);
            for (std::size_t i = 0; i < data.rows(); ++i) {
                std::vector<std::string> row{data.row_ids()[i]};
                for (std::size_t k = 0; k < m; ++k)
                    row.push_back(csv::format_exact(scores(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k))));
                csv::write_record(f, row);
            }
        }
        {
            std::stringstream ss;
            survey::write_dataset(data, ss);
            auto table = csv::read_table(ss);
            table.header.insert(table.header.end(), names.begin(), names.end());
            for (std::size_t i = 0; i < table.rows.size(); ++i)
                for (std::size_t k = 0; k < m; ++k)
                    table.rows[i].push_back(
                        csv::format_exact(scores(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k))));
            auto f = stage.create("analysis.csv");
            csv::write_table(f, table);
        }
        stage.finish();
    });
}

// evaluate ------------------------------------------------------------------

void cmd_evaluate(const Config& c) {
    run_stage("evaluate", [&] {
        Stage stage("evaluate", c);
        const auto exec = execution_of(c);
        auto schema =
            std::make_shared<const survey::SurveySchema>(survey::load_schema(stage.artifact("clean/schema.txt")));
        const auto table = csv::read_table_file(stage.artifact("factors/analysis.csv").string());
        const auto score_header = csv::read_table_file(stage.artifact("factors/factor_scores.csv").string()).header;
        stage.artifact("clean/homals_dimensions.csv");
        const std::vector<std::string> score_names(score_header.begin() + 1, score_header.end());
        if (score_names.empty()) throw ValidationError("factors/factor_scores.csv has no score columns");

        // Split the analysis table into survey variables and score columns.
        csv::Table survey_part;
        std::vector<std::size_t> survey_cols;
        std::set<std::string> score_set(score_names.begin(), score_names.end());
        for (std::size_t j = 0; j < table.header.size(); ++j)
            if (!score_set.count(table.header[j])) {
                survey_cols.push_back(j);
                survey_part.header.push_back(table.header[j]);
            }
        for (const auto& row : table.rows) {
            csv::Record r;
            for (std::size_t j : survey_cols) r.push_back(row.at(j));
            survey_part.rows.push_back(std::move(r));
        }
        std::stringstream ss;
        csv::write_table(ss, survey_part);
        const auto full = survey::read_dataset(schema, ss);
        Eigen::MatrixXd scores_full(static_cast<Eigen::Index>(table.rows.size()),
                                    static_cast<Eigen::Index>(score_names.size()));
        for (std::size_t k = 0; k < score_names.size(); ++k) {
            const std::size_t j = table.column(score_names[k]);
            for (std::size_t i = 0; i < table.rows.size(); ++i)
                scores_full(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
                    csv::parse_double(table.rows[i].at(j));
        }

        std::vector<ml::ModelConfig> models;
        for (const auto& fam : c.list("eval.families")) models.push_back(model_config(c, ml::parse_family(fam), exec));
        if (models.empty()) throw ValidationError("eval.families is empty");
        std::vector<eval::Variant> variants;
        for (const auto& v : c.list("eval.variants")) {
            if (v == "original")
                variants.push_back(eval::Variant::original);
            else if (v == "transformed")
                variants.push_back(eval::Variant::transformed);
            else
                throw ValidationError(fmt::format("unknown variant '{}'", v));
        }
        const auto modes = c.list("labelling.modes");
        if (modes.empty()) throw ValidationError("labelling.modes is empty");

        eval::StepwiseOptions sopts;
        sopts.models = models;
        sopts.alpha = c.real("eval.alpha");
        sopts.execution = exec;
        sopts.evaluations = c.list("eval.evaluations");
        const auto hopts = homals_options(c);

        std::vector<std::size_t> fin_dem = group_variables(*schema, 0);
        for (std::size_t v : group_variables(*schema, 1)) fin_dem.push_back(v);
        std::sort(fin_dem.begin(), fin_dem.end());

        auto cells = stage.create("cells.csv");
        auto summary = stage.create("summary.csv");
        auto significance = stage.create("significance.csv");
        auto counts = stage.create("class_counts.csv");
        csv::write_record(counts, {"mode", "class", "rows", "used"});
        bool header = true;
        bool importance_done = false;

        for (std::size_t mi = 0; mi < modes.size(); ++mi) {
            const auto mode = survey::parse_class_mode(modes[mi]);
            const std::string mode_name(survey::to_string(mode));
            const auto lab = survey::label_target(full, mode, c.text("labelling.debt_split"));
            const auto before = lab.counts();

            std::vector<std::size_t> rows(full.rows());
            for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
            const auto& us = c.text("labelling.undersample");
            if (mode == survey::ClassMode::three_class && us != "none") {
                std::size_t target = 0;
                if (us == "auto") {
                    std::size_t other = 0;
                    for (std::size_t k = 1; k < before.size(); ++k) other += before[k];
                    target = other / (before.size() - 1);
                } else {
                    target = c.count("labelling.undersample");
                }
                if (target < before[0]) {
                    const auto u = eval::undersample(lab.labels, 0, target, derive_seed(c.seed(), {kEvaluate, mi, 1}),
                                                     &full, fin_dem);
                    rows = u.kept;
                    auto f = stage.create(fmt::format("undersampling_{}.csv", mode_name));
                    eval::write_comparison_csv(u.representativeness, f);
                }
            }
            const auto data = full.subset(rows);
            std::vector<int> labels;
            for (std::size_t i : rows) labels.push_back(lab.labels[i]);
            Eigen::MatrixXd scores(static_cast<Eigen::Index>(rows.size()), scores_full.cols());
            for (std::size_t i = 0; i < rows.size(); ++i)
                scores.row(static_cast<Eigen::Index>(i)) = scores_full.row(static_cast<Eigen::Index>(rows[i]));
            std::vector<std::size_t> used(lab.class_names.size(), 0);
            for (int y : labels) ++used[static_cast<std::size_t>(y)];
            for (std::size_t k = 0; k < lab.class_names.size(); ++k)
                csv::write_record(counts, {mode_name, lab.class_names[k], std::to_string(before[k]), std::to_string(used[k])});

            const auto classes = lab.class_names.size();
            const auto plan = eval::make_cv_plan(labels, classes, c.count("eval.k"), c.count("eval.repeats"),
                                                 derive_seed(c.seed(), {kEvaluate, mi}));
            auto psych_block = std::make_shared<eval::FixedBlock>("Psychological", score_names, scores);

            for (const auto variant : variants) {
                const std::string vname(eval::to_string(variant));
                try {
                    const auto groups = eval::make_group_blocks(data, variant, psych_block, hopts);
                    const auto result = eval::run_stepwise(groups, labels, classes, plan, sopts);
                    eval::write_cells_csv(result, mode_name, cells, header);
                    eval::write_summary_csv(result, mode_name, summary, header);
                    eval::write_significance_csv(result, mode_name, significance, header);
                    header = false;
                    auto f = stage.create(fmt::format("chart_{}_{}.svg", mode_name, vname));
                    eval::write_step_chart(result, mode_name, f);
                } catch (const NumericalError& e) {
                    throw NumericalError(fmt::format("{}, {}: {}", mode_name, vname, e.what()));
                } catch (const ValidationError& e) {
                    throw ValidationError(fmt::format("{}, {}: {}", mode_name, vname, e.what()));
                }
            }

            if (!importance_done) {
                // Forest on every Step 3 predictor of the original variant.
                importance_done = true;
                const auto groups = eval::make_group_blocks(data, eval::Variant::original, psych_block, hopts);
                const auto train =
                    eval::assemble_full(eval::evaluation_blocks(groups, "Step 3"), labels, classes, lab.class_names);
                auto rf = model_config(c, ml::Family::random_forest, exec);
                const auto fitted = ml::train(rf, train, derive_seed(c.seed(), {kEvaluate, 99}));
                const auto imp = ml::gini_importance(fitted);
                {
                    auto f = stage.create("importance.csv");
                    ml::write_importance_csv(imp, f);
                }
                {
                    auto f = stage.create("importance_top.csv");
                    ml::write_importance_csv(imp, f, c.count("importance.top"));
                }
                {
                    auto f = stage.create("importance_stats.csv");
                    ml::write_importance_stats_csv(imp, f);
                }
                ml::save_model(fitted, stage.dir() / "importance_forest.txt");
                stage.record_output("importance_forest.txt");
            }
        }
        for (auto* f : {&cells, &summary, &significance, &counts}) f->close();
        stage.finish();
    });
}

// report --------------------------------------------------------------------

std::vector<std::string> stage_artifacts(const std::string& stage, const Config& config) {
    if (stage == "clean")
        return {"clean/uncertain_counts.csv", "clean/homals_financial_categories.csv",
                "clean/homals_demographic_categories.csv", "clean/homals_financial.svg",
                "clean/homals_demographic.svg", "clean/removal_report.csv", "clean/representativeness.csv",
                "clean/cleaned.csv", "clean/manifest.csv"};
    if (stage == "factors")
        return {"factors/scree.csv", "factors/scree.svg", "factors/efa_summary.csv", "factors/loadings.csv",
                "factors/reliability.csv", "factors/factor_scores.csv", "factors/manifest.csv"};
    if (stage == "evaluate") {
        std::vector<std::string> out{"evaluate/summary.csv", "evaluate/significance.csv", "evaluate/class_counts.csv",
                                     "evaluate/importance_stats.csv", "evaluate/importance_top.csv",
                                     "evaluate/manifest.csv"};
        for (const auto& m : config.list("labelling.modes"))
            for (const auto& v : config.list("eval.variants")) out.push_back(fmt::format("evaluate/chart_{}_{}.svg", m, v));
        return out;
    }
    throw ValidationError(fmt::format("unknown stage '{}'", stage));
}

namespace {

void markdown_table(std::ostream& out, const csv::Table& t) {
    auto cell = [](std::string s) {
        std::string r;
        for (char ch : s) r += ch == '|' ? std::string("\\|") : std::string(1, ch);
        return r;
    };
    out << '|';
    for (const auto& h : t.header) out << ' ' << cell(h) << " |";
    out << "\n|";
    for (std::size_t j = 0; j < t.header.size(); ++j) out << " --- |";
    out << '\n';
    for (const auto& row : t.rows) {
        out << '|';
        for (const auto& v : row) out << ' ' << cell(v) << " |";
        out << '\n';
    }
    out << '\n';
}

csv::Table filter_rows(const csv::Table& t, std::string_view column, std::string_view value) {
    csv::Table out;
    out.header = t.header;
    const auto j = t.column(column);
    for (const auto& r : t.rows)
        if (r.at(j) == value) out.rows.push_back(r);
    return out;
}

} // namespace

void cmd_report(const Config& c) {
    run_stage("report", [&] {
        const fs::path out = output_dir(c);
        std::vector<std::string> missing;
        std::set<std::string> stages;
        for (const char* stage : {"clean", "factors", "evaluate"})
            for (const auto& rel : stage_artifacts(stage, c))
                if (!fs::is_regular_file(out / rel)) {
                    missing.push_back(rel);
                    stages.insert(stage);
                }
        if (!missing.empty()) {
            std::string which, list;
            for (const auto& s : stages) which += (which.empty() ? "" : ", ") + s;
            for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
            throw MissingArtifactError(fmt::format("incomplete run; rerun stage(s) {}; missing: {}", which, list));
        }
        auto read = [&](const std::string& rel) { return csv::read_table_file((out / rel).string()); };

        std::ofstream r(out / "report.md", std::ios::binary);
        if (!r) throw ValidationError(fmt::format("cannot write {}", (out / "report.md").string()));
        r << "# Unsecured debt analysis report\n\n";

        r << "## Uncertain answers\n\n";
        markdown_table(r, read("clean/uncertain_counts.csv"));

        r << "## Homogeneity analysis of demographic and financial variables\n\n";
        for (const auto& g : kGroupNames) {
            const std::string stem = "clean/homals_" + lower(g);
            r << "### " << g << "\n\n![" << g << " categories](" << stem << ".svg)\n\n";
            auto cats = read(stem + "_categories.csv");
            markdown_table(r, filter_rows(cats, "flagged", "1"));
        }

        r << "## Removal of systematic non-response\n\n";
        markdown_table(r, read("clean/removal_report.csv"));
        r << "Distribution of unwatched variables, cleaned rows against all rows:\n\n";
        markdown_table(r, read("clean/representativeness.csv"));

        r << "## Factor retention\n\n![scree](factors/scree.svg)\n\n";
        markdown_table(r, read("factors/efa_summary.csv"));
        markdown_table(r, read("factors/scree.csv"));

        r << "## Factor loadings\n\n";
        markdown_table(r, read("factors/loadings.csv"));

        r << "## Reliability of the factors\n\n";
        markdown_table(r, read("factors/reliability.csv"));

        const auto sig = read("evaluate/significance.csv");
        const auto summary = read("evaluate/summary.csv");
        r << "## Class counts\n\n";
        markdown_table(r, read("evaluate/class_counts.csv"));
        for (const auto& m : c.list("labelling.modes")) {
            r << "## Step 3 against Step 2, " << (m == "two_class" ? "two classes" : "three classes") << "\n\n";
            markdown_table(r, filter_rows(sig, "mode", m));
            r << "### Cross-validated accuracy, " << m << "\n\n";
            for (const auto& v : c.list("eval.variants"))
                r << "![" << m << ' ' << v << "](evaluate/chart_" << m << '_' << v << ".svg)\n\n";
            markdown_table(r, filter_rows(summary, "mode", m));
        }

        r << "## Descriptive statistics of variable importance\n\n";
        markdown_table(r, read("evaluate/importance_stats.csv"));
        r << "## Most important variables\n\n";
        markdown_table(r, read("evaluate/importance_top.csv"));

        r << "## Run manifest\n\n";
        for (const char* stage : {"clean", "factors", "evaluate"}) {
            r << "### " << stage << "\n\n";
            markdown_table(r, read(std::string(stage) + "/manifest.csv"));
        }
        r << "### Configuration\n\n```\n";
        c.write(r);
        r << "```\n\n";

        // Wall-clock figures vary run to run; they stay in this last section.
        r << "## Timing\n\n";
        for (const char* stage : {"data", "clean", "factors", "evaluate"}) {
            std::ifstream t(out / stage / "timing.txt");
            std::string line;
            if (t && std::getline(t, line)) r << "- " << line << " s\n";
        }
    });
}

} // namespace debtmine::pipeline
