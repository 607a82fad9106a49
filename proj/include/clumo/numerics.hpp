#pragma once

#include <functional>
#include <span>
#include <vector>

#include "clumo/tensor.hpp"

namespace clumo {

// a (m x k) times b (k x n) -> m x n.
Tensor2D matmul(const Tensor2D& a, const Tensor2D& b);

// Arithmetic mean over rows -> 1 x cols. Rejects empty input.
Tensor2D mean_rows(const Tensor2D& x);

// Euclidean norm of the difference of two equal-length rows.
double l2_distance(std::span<const double> a, std::span<const double> b);

struct CrossEntropyResult {
    double loss = 0.0;   // mean over the batch
    Tensor2D grad;       // (softmax - one_hot) / batch, same shape as logits
};

// logits: batch x classes, labels: one class id per row.
CrossEntropyResult softmax_cross_entropy(const Tensor2D& logits, const std::vector<int>& labels);

struct MseResult {
    double loss = 0.0;   // mean squared elementwise difference
    Tensor2D grad_a;     // 2 (a - b) / count
};

MseResult mse(const Tensor2D& a, const Tensor2D& b);

// Plain gradient step: params - lr * grads.
Tensor2D sgd_step(const Tensor2D& params, const Tensor2D& grads, double lr);

// Max over coordinates of |analytic - central difference| / max(1, |analytic|).
// f is re-evaluated at +/- eps perturbations of every coordinate of `at`.
double finite_difference_check(const std::function<double(const Tensor2D&)>& f,
                               const Tensor2D& at, const Tensor2D& analytic_grad,
                               double eps);

}  // namespace clumo
