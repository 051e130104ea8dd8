#include "debtmine/config.hpp"
#include "debtmine/error.hpp"
#include "debtmine/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

enum Exit { kOk = 0, kValidation = 1, kNumerical = 2, kMissing = 3 };

struct Options {
    std::string config;
    std::optional<std::string> seed;
    std::optional<std::string> out;
    std::vector<std::string> overrides;
};

debtmine::Config build_config(const Options& o) {
    debtmine::Config c = o.config.empty() ? debtmine::Config{} : debtmine::Config::load(o.config);
    for (const auto& kv : o.overrides) c.apply_override(kv);
    if (o.seed) c.set("seed", *o.seed);
    if (o.out) c.set("paths.out", *o.out);
    c.seed();
    return c;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Survey cleaning, factor analysis and debt classification"};
    app.require_subcommand(1);
    Options opts;
    app.add_option("--config", opts.config, "key = value configuration file");
    app.add_option("--seed", opts.seed, "master seed");
    app.add_option("--out", opts.out, "output directory");
    app.add_option("--override", opts.overrides, "key=value, repeatable")->take_all();
    bool print_config = false;
    app.add_flag("--print-config", print_config, "print the effective configuration and exit");

    struct Command {
        const char* name;
        const char* help;
        void (*run)(const debtmine::Config&);
    };
    const Command commands[] = {
        {"synth", "generate a synthetic survey into <out>/data", debtmine::pipeline::cmd_synth},
        {"clean", "homals diagnostics and removal of systematic non-response", debtmine::pipeline::cmd_clean},
        {"factors", "parallel analysis, factor extraction, reliability", debtmine::pipeline::cmd_factors},
        {"evaluate", "stepwise cross-validated classification", debtmine::pipeline::cmd_evaluate},
        {"report", "assemble <out>/report.md", debtmine::pipeline::cmd_report},
    };
    for (const auto& cmd : commands) app.add_subcommand(cmd.name, cmd.help)->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kValidation;
    }

    try {
        const auto config = build_config(opts);
        if (print_config) {
            config.write(std::cout);
            return kOk;
        }
        for (const auto& cmd : commands)
            if (app.got_subcommand(cmd.name)) cmd.run(config);
        return kOk;
    } catch (const debtmine::ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kValidation;
    } catch (const debtmine::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kNumerical;
    } catch (const debtmine::MissingArtifactError& e) {
        std::cerr << "missing artifact: " << e.what() << '\n';
        return kMissing;
    }
}
