#include "clumo/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "clumo/errors.hpp"

namespace clumo {

Tensor2D matmul(const Tensor2D& a, const Tensor2D& b) {
    if (a.cols != b.rows) {
        throw ShapeError("matmul: inner dimensions differ (" + std::to_string(a.cols) +
                         " vs " + std::to_string(b.rows) + ")");
    }
    Tensor2D out(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = a.data.data() + i * a.cols;
        double* orow = out.data.data() + i * out.cols;
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = arow[k];
            const double* brow = b.data.data() + k * b.cols;
            for (std::size_t j = 0; j < b.cols; ++j) orow[j] += aik * brow[j];
        }
    }
    return out;
}

Tensor2D mean_rows(const Tensor2D& x) {
    if (x.rows == 0) throw ValueError("mean_rows: empty input");
    Tensor2D out(1, x.cols);
    for (std::size_t i = 0; i < x.rows; ++i) {
        for (std::size_t j = 0; j < x.cols; ++j) out.data[j] += x.at(i, j);
    }
    for (double& v : out.data) v /= static_cast<double>(x.rows);
    return out;
}

double l2_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw ShapeError("l2_distance: length mismatch (" + std::to_string(a.size()) +
                         " vs " + std::to_string(b.size()) + ")");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        acc += d * d;
    }
    return std::sqrt(acc);
}

CrossEntropyResult softmax_cross_entropy(const Tensor2D& logits, const std::vector<int>& labels) {
    if (labels.size() != logits.rows) {
        throw ShapeError("softmax_cross_entropy: one label per logits row required");
    }
    const std::size_t batch = logits.rows;
    const std::size_t classes = logits.cols;
    CrossEntropyResult res;
    res.grad = Tensor2D(batch, classes);
    for (std::size_t i = 0; i < batch; ++i) {
        int label = labels[i];
        if (label < 0 || static_cast<std::size_t>(label) >= classes) {
            throw ValueError("softmax_cross_entropy: label " + std::to_string(label) +
                             " out of range [0, " + std::to_string(classes) + ")");
        }
        auto row = logits.row(i);
        double mx = *std::max_element(row.begin(), row.end());
        double sum = 0.0;
        for (std::size_t j = 0; j < classes; ++j) sum += std::exp(row[j] - mx);
        double log_sum = std::log(sum);
        res.loss += (log_sum + mx - row[label]) / static_cast<double>(batch);
        for (std::size_t j = 0; j < classes; ++j) {
            double p = std::exp(row[j] - mx) / sum;
            res.grad.at(i, j) = (p - (static_cast<std::size_t>(label) == j ? 1.0 : 0.0)) /
                                static_cast<double>(batch);
        }
    }
    return res;
}

MseResult mse(const Tensor2D& a, const Tensor2D& b) {
    if (!a.same_shape(b)) throw ShapeError("mse: shape mismatch");
    MseResult res;
    res.grad_a = Tensor2D(a.rows, a.cols);
    const double count = static_cast<double>(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a.data[i] - b.data[i];
        res.loss += d * d / count;
        res.grad_a.data[i] = 2.0 * d / count;
    }
    return res;
}

Tensor2D sgd_step(const Tensor2D& params, const Tensor2D& grads, double lr) {
    if (!params.same_shape(grads)) throw ShapeError("sgd_step: shape mismatch");
    Tensor2D out = params;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] -= lr * grads.data[i];
    return out;
}

double finite_difference_check(const std::function<double(const Tensor2D&)>& f,
                               const Tensor2D& at, const Tensor2D& analytic_grad,
                               double eps) {
    if (!at.same_shape(analytic_grad)) throw ShapeError("finite_difference_check: shape mismatch");
    if (eps <= 0.0) throw ValueError("finite_difference_check: eps must be > 0");
    Tensor2D probe = at;
    double worst = 0.0;
    for (std::size_t i = 0; i < probe.size(); ++i) {
        const double orig = probe.data[i];
        probe.data[i] = orig + eps;
        double up = f(probe);
        probe.data[i] = orig - eps;
        double down = f(probe);
        probe.data[i] = orig;
        double numeric = (up - down) / (2.0 * eps);
        double analytic = analytic_grad.data[i];
        double err = std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic));
        worst = std::max(worst, err);
    }
    return worst;
}

}  // namespace clumo
