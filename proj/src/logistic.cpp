#include "debtmine/classifiers.hpp"
#include "debtmine/error.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace debtmine::ml {

double logistic_loss(const Eigen::MatrixXd& x, const std::vector<int>& y, const Eigen::MatrixXd& theta, double l2,
                     Eigen::MatrixXd* gradient) {
    const auto n = x.rows();
    const auto d = x.cols();
    const auto c = theta.rows();
    Eigen::MatrixXd z = (x * theta.rightCols(d).transpose()).rowwise() + theta.col(0).transpose();
    z.col(0).setZero(); // reference class

    double nll = 0.0;
    Eigen::MatrixXd p(n, c);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double top = z.row(i).maxCoeff();
        const Eigen::RowVectorXd e = (z.row(i).array() - top).exp().matrix();
        const double s = e.sum();
        nll += top + std::log(s) - z(i, y[static_cast<std::size_t>(i)]);
        p.row(i) = e / s;
    }
    const double penalty = 0.5 * l2 * theta.bottomRightCorner(c - 1, d).squaredNorm();
    const double loss = nll / static_cast<double>(n) + penalty;

    if (gradient) {
        for (Eigen::Index i = 0; i < n; ++i) p(i, y[static_cast<std::size_t>(i)]) -= 1.0;
        p /= static_cast<double>(n);
        gradient->resize(c, d + 1);
        gradient->col(0) = p.colwise().sum().transpose();
        gradient->rightCols(d) = p.transpose() * x;
        gradient->rightCols(d) += l2 * theta.rightCols(d);
        gradient->row(0).setZero();
    }
    return loss;
}

LogisticModel train_multinomial_lr(const TrainingMatrix& data, const LogisticOptions& options,
                                   std::vector<double>* loss_trace) {
    data.validate();
    if (options.l2 < 0.0) throw ValidationError("multinomial_lr: l2 must be non-negative");
    LogisticModel model;
    model.standardizer = Standardizer::fit(data.X);
    const Eigen::MatrixXd x = model.standardizer.apply(data.X);
    const auto c = static_cast<Eigen::Index>(data.classes);

    Eigen::MatrixXd theta = Eigen::MatrixXd::Zero(c, x.cols() + 1);
    Eigen::MatrixXd grad;
    double loss = logistic_loss(x, data.y, theta, options.l2, &grad);
    double step = 1.0;
    for (std::size_t iter = 0; iter < options.max_iter; ++iter) {
        if (grad.cwiseAbs().maxCoeff() < options.tol) {
            model.converged = true;
            break;
        }
        const double g2 = grad.squaredNorm();
        Eigen::MatrixXd next, next_grad;
        double next_loss = 0.0;
        bool accepted = false;
        for (int halving = 0; halving < 60; ++halving, step *= 0.5) {
            next = theta - step * grad;
            next_loss = logistic_loss(x, data.y, next, options.l2, &next_grad);
            if (!std::isfinite(next_loss)) continue;
            if (next_loss <= loss - 1e-4 * step * g2) {
                accepted = true;
                break;
            }
        }
        if (!accepted) break; // no further decrease representable
        const Eigen::MatrixXd s = next - theta;
        const Eigen::MatrixXd yk = next_grad - grad;
        const double sy = (s.array() * yk.array()).sum();
        step = sy > 0.0 ? std::clamp(s.squaredNorm() / sy, 1e-10, 1e10) : 1.0;
        theta = std::move(next);
        grad = std::move(next_grad);
        loss = next_loss;
        model.iterations = iter + 1;
        if (loss_trace) loss_trace->push_back(loss);
        if (!std::isfinite(loss) || theta.cwiseAbs().maxCoeff() > 1e6)
            throw NumericalError(fmt::format("multinomial_lr: coefficients diverge at iteration {} (loss {}); the "
                                             "classes look separable, use l2 > 0",
                                             iter + 1, loss));
    }
    if (!model.converged && grad.cwiseAbs().maxCoeff() < options.tol) model.converged = true;
    model.coefficients = theta;
    model.loss = loss;
    return model;
}

} // namespace debtmine::ml
