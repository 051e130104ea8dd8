#include "debtmine/classifiers.hpp"
#include "debtmine/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

namespace debtmine::ml {

std::size_t nn_parameter_count(std::size_t inputs, std::size_t hidden, std::size_t classes) {
    return hidden * inputs + hidden + classes * hidden + classes;
}

namespace {

struct Layers {
    Eigen::Map<const Eigen::MatrixXd> w1;
    Eigen::Map<const Eigen::VectorXd> b1;
    Eigen::Map<const Eigen::MatrixXd> w2;
    Eigen::Map<const Eigen::VectorXd> b2;
};

Layers unpack(const Eigen::VectorXd& theta, Eigen::Index d, Eigen::Index h, Eigen::Index c) {
    const double* p = theta.data();
    return {Eigen::Map<const Eigen::MatrixXd>(p, h, d), Eigen::Map<const Eigen::VectorXd>(p + h * d, h),
            Eigen::Map<const Eigen::MatrixXd>(p + h * d + h, c, h),
            Eigen::Map<const Eigen::VectorXd>(p + h * d + h + c * h, c)};
}

Eigen::MatrixXd hidden_layer(const Layers& l, const Eigen::MatrixXd& x) {
    Eigen::MatrixXd a = (x * l.w1.transpose()).rowwise() + l.b1.transpose();
    return (1.0 / (1.0 + (-a.array()).exp())).matrix();
}

// Row-wise softmax of z in place; returns the summed log-partition terms
// minus the true-class logits when y is given.
double softmax_in_place(Eigen::MatrixXd& z, const std::vector<int>* y) {
    double nll = 0.0;
    const Eigen::Index n = z.rows(), c = z.cols();
    double* base = z.data();
    for (Eigen::Index i = 0; i < n; ++i) {
        double* row = base + i;
        double top = row[0];
        for (Eigen::Index j = 1; j < c; ++j) top = std::max(top, row[j * n]);
        for (Eigen::Index j = 0; j < c; ++j) row[j * n] -= top;
        const double zy = y ? row[(*y)[static_cast<std::size_t>(i)] * n] : 0.0;
        double s = 0.0;
        for (Eigen::Index j = 0; j < c; ++j) {
            row[j * n] = std::exp(row[j * n]);
            s = j == 0 ? row[0] : s + row[j * n];
        }
        for (Eigen::Index j = 0; j < c; ++j) row[j * n] /= s;
        nll += std::log(s) - zy;
    }
    return nll;
}

} // namespace

double nn_loss(const Eigen::MatrixXd& x, const std::vector<int>& y, std::size_t hidden, std::size_t classes,
               const Eigen::VectorXd& theta, Eigen::VectorXd* gradient) {
    const auto n = x.rows();
    const auto d = x.cols();
    const auto h = static_cast<Eigen::Index>(hidden);
    const auto c = static_cast<Eigen::Index>(classes);
    if (static_cast<std::size_t>(theta.size()) != nn_parameter_count(static_cast<std::size_t>(d), hidden, classes))
        throw ValidationError("neural net: parameter vector has the wrong length");
    const Layers l = unpack(theta, d, h, c);
    const Eigen::MatrixXd hid = hidden_layer(l, x);
    Eigen::MatrixXd p = (hid * l.w2.transpose()).rowwise() + l.b2.transpose();
    const double loss = softmax_in_place(p, &y) / static_cast<double>(n);

    if (gradient) {
        for (Eigen::Index i = 0; i < n; ++i) p(i, y[static_cast<std::size_t>(i)]) -= 1.0;
        p /= static_cast<double>(n);
        gradient->resize(theta.size());
        double* g = gradient->data();
        Eigen::Map<Eigen::MatrixXd> gw1(g, h, d);
        Eigen::Map<Eigen::VectorXd> gb1(g + h * d, h);
        Eigen::Map<Eigen::MatrixXd> gw2(g + h * d + h, c, h);
        Eigen::Map<Eigen::VectorXd> gb2(g + h * d + h + c * h, c);
        gw2 = p.transpose() * hid;
        gb2 = p.colwise().sum().transpose();
        const Eigen::MatrixXd da = ((p * l.w2).array() * hid.array() * (1.0 - hid.array())).matrix();
        gw1 = da.transpose() * x;
        gb1 = da.colwise().sum().transpose();
    }
    return loss;
}

Eigen::MatrixXd nn_forward(const NeuralNetModel& model, const Eigen::MatrixXd& x) {
    const Eigen::MatrixXd xs = model.standardizer.apply(x);
    const Layers l = unpack(model.parameters, xs.cols(), static_cast<Eigen::Index>(model.hidden),
                            static_cast<Eigen::Index>(model.classes));
    Eigen::MatrixXd z = (hidden_layer(l, xs) * l.w2.transpose()).rowwise() + l.b2.transpose();
    softmax_in_place(z, nullptr);
    return z;
}

NeuralNetModel train_neural_net(const TrainingMatrix& data, const NeuralNetOptions& options) {
    data.validate();
    if (options.hidden < 1) throw ValidationError("neural net: hidden must be at least 1");
    if (options.epochs < 1) throw ValidationError("neural net: epochs must be at least 1");
    if (!(options.learning_rate > 0.0)) throw ValidationError("neural net: learning_rate must be positive");

    NeuralNetModel model;
    model.standardizer = Standardizer::fit(data.X);
    const Eigen::MatrixXd x = model.standardizer.apply(data.X);
    model.inputs = static_cast<std::size_t>(x.cols());
    model.hidden = options.hidden;
    model.classes = data.classes;

    // Glorot-uniform weights, zero biases.
    const auto d = x.cols();
    const auto h = static_cast<Eigen::Index>(model.hidden);
    const auto c = static_cast<Eigen::Index>(model.classes);
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nn_parameter_count(model.inputs, model.hidden, model.classes)));
    Rng rng = make_rng(options.seed);
    std::uniform_real_distribution<double> u1(-std::sqrt(6.0 / double(d + h)), std::sqrt(6.0 / double(d + h)));
    std::uniform_real_distribution<double> u2(-std::sqrt(6.0 / double(h + c)), std::sqrt(6.0 / double(h + c)));
    for (Eigen::Index i = 0; i < h * d; ++i) theta(i) = u1(rng);
    for (Eigen::Index i = 0; i < c * h; ++i) theta(h * d + h + i) = u2(rng);

    Eigen::VectorXd grad;
    model.best_loss = std::numeric_limits<double>::infinity();
    model.parameters = theta;
    for (std::size_t epoch = 0; epoch <= options.epochs; ++epoch) {
        const double loss = nn_loss(x, data.y, model.hidden, model.classes, theta,
                                    epoch < options.epochs ? &grad : nullptr);
        if (!std::isfinite(loss)) throw NumericalError(fmt::format("neural net: non-finite loss at epoch {}", epoch));
        if (loss < model.best_loss) {
            model.best_loss = loss;
            model.best_epoch = epoch;
            model.parameters = theta;
        }
        if (epoch < options.epochs) theta -= options.learning_rate * grad;
    }
    return model;
}

TuningResult tune_neural_net(const TrainingMatrix& data, const TuningOptions& tuning, const NeuralNetOptions& options) {
    if (tuning.hidden_min < 1 || tuning.hidden_max > 10 || tuning.hidden_min > tuning.hidden_max)
        throw ValidationError("neural net tuning: hidden sizes must satisfy 1 <= min <= max <= 10");
    data.validate();
    const auto folds = stratified_folds(data.y, data.classes, tuning.inner_folds, derive_seed(options.seed, {0x7475}));
    TuningResult out;
    double best = -1.0;
    for (std::size_t h = tuning.hidden_min; h <= tuning.hidden_max; ++h) {
        std::size_t hit = 0;
        for (std::size_t f = 0; f < tuning.inner_folds; ++f) {
            std::vector<std::size_t> train_rows, test_rows;
            for (std::size_t i = 0; i < folds.size(); ++i)
                (folds[i] == static_cast<int>(f) ? test_rows : train_rows).push_back(i);
            NeuralNetOptions o = options;
            o.hidden = h;
            o.seed = derive_seed(options.seed, {h, f});
            const auto train_part = data.rows(train_rows);
            const auto test_part = data.rows(test_rows);
            const auto pred = argmax_rows(nn_forward(train_neural_net(train_part, o), test_part.X));
            for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == test_part.y[i];
        }
        const double acc = static_cast<double>(hit) / static_cast<double>(data.y.size());
        out.candidates.push_back(h);
        out.cv_accuracy.push_back(acc);
        if (acc > best) {
            best = acc;
            out.best_hidden = h;
        }
    }
    NeuralNetOptions final_options = options;
    final_options.hidden = out.best_hidden;
    out.model = train_neural_net(data, final_options);
    return out;
}

} // namespace debtmine::ml
