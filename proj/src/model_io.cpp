#include "debtmine/classifiers.hpp"
#include "debtmine/csv.hpp"
#include "debtmine/error.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>

// Text format: a "debtmine-model v1" line, named lists one entry per line,
// then family-specific numeric blocks written with 17 significant digits.
namespace debtmine::ml {

namespace {

constexpr std::string_view kMagic = "debtmine-model v1";

void put_list(std::ostream& out, std::string_view tag, const std::vector<std::string>& items) {
    out << tag << ' ' << items.size() << '\n';
    for (const auto& s : items) out << s << '\n';
}

void put_numbers(std::ostream& out, std::string_view tag, const double* v, std::size_t n) {
    out << tag << ' ' << n << '\n';
    for (std::size_t i = 0; i < n; ++i) out << fmt::format("{:.17g}", v[i]) << (i + 1 == n ? "\n" : " ");
    if (n == 0) out << '\n';
}

class Reader {
public:
    explicit Reader(std::istream& in) : in_(in) {}

    std::string line() {
        std::string s;
        if (!std::getline(in_, s)) throw ValidationError(fmt::format("model file truncated after line {}", line_));
        ++line_;
        if (!s.empty() && s.back() == '\r') s.pop_back();
        return s;
    }

    std::size_t header(std::string_view tag) {
        const std::string s = line();
        if (s.rfind(std::string(tag) + ' ', 0) != 0)
            throw ValidationError(fmt::format("model file line {}: expected '{}'", line_, tag));
        return static_cast<std::size_t>(csv::parse_double(std::string_view(s).substr(tag.size() + 1)));
    }

    std::string value(std::string_view tag) {
        const std::string s = line();
        if (s.rfind(std::string(tag) + ' ', 0) != 0)
            throw ValidationError(fmt::format("model file line {}: expected '{}'", line_, tag));
        return s.substr(tag.size() + 1);
    }

    std::vector<std::string> list(std::string_view tag) {
        std::vector<std::string> out(header(tag));
        for (auto& s : out) s = line();
        return out;
    }

    std::vector<double> numbers(std::string_view tag) {
        std::vector<double> out(header(tag));
        std::istringstream ss(line());
        std::string tok;
        for (auto& v : out) {
            if (!(ss >> tok)) throw ValidationError(fmt::format("model file line {}: too few numbers", line_));
            v = csv::parse_double(tok);
        }
        return out;
    }

private:
    std::istream& in_;
    std::size_t line_ = 0;
};

void put_standardizer(std::ostream& out, const Standardizer& s) {
    put_numbers(out, "mean", s.mean.data(), static_cast<std::size_t>(s.mean.size()));
    put_numbers(out, "scale", s.scale.data(), static_cast<std::size_t>(s.scale.size()));
}

Standardizer get_standardizer(Reader& r) {
    Standardizer s;
    const auto m = r.numbers("mean");
    const auto sc = r.numbers("scale");
    s.mean = Eigen::Map<const Eigen::RowVectorXd>(m.data(), static_cast<Eigen::Index>(m.size()));
    s.scale = Eigen::Map<const Eigen::RowVectorXd>(sc.data(), static_cast<Eigen::Index>(sc.size()));
    return s;
}

} // namespace

void save_model(const FittedModel& model, std::ostream& out) {
    out << kMagic << '\n';
    out << "family " << to_string(model.family) << '\n';
    put_list(out, "classes", model.class_names);
    put_list(out, "features", model.feature_names);
    std::vector<std::string> config;
    for (const auto& [k, v] : model.config) config.push_back(k + '=' + v);
    put_list(out, "config", config);
    std::visit(
        [&](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, LogisticModel>) {
                put_standardizer(out, m.standardizer);
                out << "shape " << m.coefficients.rows() << ' ' << m.coefficients.cols() << '\n';
                put_numbers(out, "coefficients", m.coefficients.data(), static_cast<std::size_t>(m.coefficients.size()));
            } else if constexpr (std::is_same_v<T, ForestModel>) {
                out << "mtry " << m.mtry << '\n';
                put_numbers(out, "oob_accuracy", &m.oob_accuracy, 1);
                put_numbers(out, "importance", m.importance.data(), m.importance.size());
                out << "trees " << m.trees.size() << '\n';
                for (const auto& t : m.trees) {
                    out << "nodes " << t.nodes.size() << '\n';
                    for (const auto& nd : t.nodes)
                        out << fmt::format("{} {:.17g} {} {} {}\n", nd.feature, nd.threshold, nd.left, nd.right, nd.label);
                    put_numbers(out, "tree_importance", t.importance.data(), t.importance.size());
                }
            } else {
                put_standardizer(out, m.standardizer);
                out << "shape " << m.inputs << ' ' << m.hidden << ' ' << m.classes << '\n';
                put_numbers(out, "best_loss", &m.best_loss, 1);
                out << "best_epoch " << m.best_epoch << '\n';
                put_numbers(out, "parameters", m.parameters.data(), static_cast<std::size_t>(m.parameters.size()));
            }
        },
        model.model);
}

FittedModel load_model(std::istream& in) {
    Reader r(in);
    if (r.line() != kMagic) throw ValidationError("not a debtmine-model v1 file");
    FittedModel model;
    model.family = parse_family(r.value("family"));
    model.class_names = r.list("classes");
    model.classes = model.class_names.size();
    model.feature_names = r.list("features");
    for (const auto& kv : r.list("config")) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ValidationError(fmt::format("model config entry '{}' lacks '='", kv));
        model.config.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
    }
    auto ints = [&](std::string_view tag) {
        std::istringstream ss(r.value(tag));
        std::vector<long long> v;
        long long x;
        while (ss >> x) v.push_back(x);
        return v;
    };
    switch (model.family) {
    case Family::multinomial_lr: {
        LogisticModel m;
        m.standardizer = get_standardizer(r);
        const auto shape = ints("shape");
        const auto c = r.numbers("coefficients");
        if (shape.size() != 2 || static_cast<std::size_t>(shape[0] * shape[1]) != c.size())
            throw ValidationError("model file: coefficient shape mismatch");
        m.coefficients = Eigen::Map<const Eigen::MatrixXd>(c.data(), shape[0], shape[1]);
        model.model = std::move(m);
        break;
    }
    case Family::random_forest: {
        ForestModel m;
        m.features = model.feature_names.size();
        m.mtry = static_cast<std::size_t>(ints("mtry").at(0));
        m.oob_accuracy = r.numbers("oob_accuracy").at(0);
        m.importance = r.numbers("importance");
        m.trees.resize(static_cast<std::size_t>(ints("trees").at(0)));
        for (auto& t : m.trees) {
            t.nodes.resize(static_cast<std::size_t>(ints("nodes").at(0)));
            for (auto& nd : t.nodes) {
                std::istringstream ss(r.line());
                std::string thr;
                ss >> nd.feature >> thr >> nd.left >> nd.right >> nd.label;
                if (!ss) throw ValidationError("model file: malformed tree node");
                nd.threshold = csv::parse_double(thr);
            }
            t.importance = r.numbers("tree_importance");
        }
        model.model = std::move(m);
        break;
    }
    case Family::neural_net: {
        NeuralNetModel m;
        m.standardizer = get_standardizer(r);
        const auto shape = ints("shape");
        if (shape.size() != 3) throw ValidationError("model file: network shape needs 3 numbers");
        m.inputs = static_cast<std::size_t>(shape[0]);
        m.hidden = static_cast<std::size_t>(shape[1]);
        m.classes = static_cast<std::size_t>(shape[2]);
        m.best_loss = r.numbers("best_loss").at(0);
        m.best_epoch = static_cast<std::size_t>(ints("best_epoch").at(0));
        const auto p = r.numbers("parameters");
        if (p.size() != nn_parameter_count(m.inputs, m.hidden, m.classes))
            throw ValidationError("model file: parameter count mismatch");
        m.parameters = Eigen::Map<const Eigen::VectorXd>(p.data(), static_cast<Eigen::Index>(p.size()));
        model.model = std::move(m);
        break;
    }
    }
    return model;
}

void save_model(const FittedModel& model, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError(fmt::format("cannot write {}", path.string()));
    save_model(model, out);
}

FittedModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw MissingArtifactError(fmt::format("model file {} not found", path.string()));
    return load_model(in);
}

} // namespace debtmine::ml
