#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "clumo/errors.hpp"
#include "clumo/numerics.hpp"
#include "clumo/tensor.hpp"

using namespace clumo;

namespace {

Tensor2D from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    Tensor2D t(rows.size(), rows.begin()->size());
    std::size_t i = 0;
    for (const auto& row : rows) {
        std::size_t j = 0;
        for (double v : row) t.at(i, j++) = v;
        ++i;
    }
    return t;
}

}  // namespace

TEST_CASE("matmul identity and hand cases") {
    Tensor2D eye = from_rows({{1, 0}, {0, 1}});
    Tensor2D b = from_rows({{3, 4}, {5, 6}});
    CHECK(matmul(eye, b) == b);

    Tensor2D a = from_rows({{1, 2}});
    Tensor2D c = from_rows({{3}, {4}});
    Tensor2D prod = matmul(a, c);
    CHECK(prod.rows == 1);
    CHECK(prod.cols == 1);
    CHECK(prod.at(0, 0) == doctest::Approx(11.0));
}

TEST_CASE("matmul matches a naive triple-loop oracle") {
    Rng rng(42);
    Tensor2D a = random_uniform(rng, 5, 7, -2.0, 2.0);
    Tensor2D b = random_uniform(rng, 7, 3, -2.0, 2.0);
    Tensor2D got = matmul(a, b);

    for (std::size_t i = 0; i < 5; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < 7; ++k) acc += a.at(i, k) * b.at(k, j);
            CHECK(got.at(i, j) == doctest::Approx(acc).epsilon(1e-12));
        }
    }
}

TEST_CASE("matmul identity property on random matrices") {
    Rng rng(7);
    for (int trial = 0; trial < 5; ++trial) {
        std::size_t n = 2 + rng.index(5);
        std::size_t m = 2 + rng.index(5);
        Tensor2D a = random_uniform(rng, n, m, -1.0, 1.0);
        Tensor2D left(n, n), right(m, m);
        for (std::size_t i = 0; i < n; ++i) left.at(i, i) = 1.0;
        for (std::size_t i = 0; i < m; ++i) right.at(i, i) = 1.0;
        CHECK(matmul(left, a) == a);
        CHECK(matmul(a, right) == a);
    }
}

TEST_CASE("matmul rejects mismatched shapes") {
    Tensor2D a(2, 3), b(4, 2);
    CHECK_THROWS_AS(matmul(a, b), ShapeError);
}

TEST_CASE("mean_rows examples and oracle") {
    CHECK(mean_rows(from_rows({{2, 4}, {4, 8}})) == from_rows({{3, 6}}));

    Tensor2D single = from_rows({{1.5, -2.5, 0.25}});
    CHECK(mean_rows(single) == single);

    Rng rng(11);
    Tensor2D x = random_uniform(rng, 10, 4, -3.0, 3.0);
    Tensor2D got = mean_rows(x);
    for (std::size_t j = 0; j < 4; ++j) {
        double sum = 0.0;
        for (std::size_t i = 0; i < 10; ++i) sum += x.at(i, j);
        CHECK(got.at(0, j) == doctest::Approx(sum / 10.0).epsilon(1e-12));
    }

    CHECK_THROWS_AS(mean_rows(Tensor2D(0, 3)), ValueError);
}

TEST_CASE("l2_distance examples") {
    Tensor2D a = from_rows({{1.0, 2.0, 3.0}});
    CHECK(l2_distance(a.row(0), a.row(0)) == 0.0);

    Tensor2D zero = from_rows({{0.0, 0.0}});
    Tensor2D p = from_rows({{3.0, 4.0}});
    CHECK(l2_distance(zero.row(0), p.row(0)) == doctest::Approx(5.0));

    Rng rng(3);
    Tensor2D x = random_uniform(rng, 1, 9, -2.0, 2.0);
    Tensor2D y = random_uniform(rng, 1, 9, -2.0, 2.0);
    double expect = 0.0;
    for (std::size_t j = 0; j < 9; ++j) {
        double d = x.at(0, j) - y.at(0, j);
        expect += d * d;
    }
    CHECK(l2_distance(x.row(0), y.row(0)) == doctest::Approx(std::sqrt(expect)).epsilon(1e-12));

    Tensor2D shorter(1, 4);
    CHECK_THROWS_AS(l2_distance(x.row(0), shorter.row(0)), ShapeError);
}

TEST_CASE("l2_distance symmetry and triangle inequality") {
    Rng rng(99);
    for (int trial = 0; trial < 50; ++trial) {
        Tensor2D pts = random_uniform(rng, 3, 6, -5.0, 5.0);
        double ab = l2_distance(pts.row(0), pts.row(1));
        double ba = l2_distance(pts.row(1), pts.row(0));
        double bc = l2_distance(pts.row(1), pts.row(2));
        double ac = l2_distance(pts.row(0), pts.row(2));
        CHECK(ab == ba);
        CHECK(ac <= ab + bc + 1e-12);
    }
}

TEST_CASE("softmax cross entropy on uniform logits is ln(classes)") {
    Tensor2D logits(1, 4, 0.7);
    auto res = softmax_cross_entropy(logits, {2});
    CHECK(res.loss == doctest::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("softmax cross entropy limit case and gradient structure") {
    Tensor2D logits(1, 5);
    logits.at(0, 3) = 60.0;
    auto res = softmax_cross_entropy(logits, {3});
    CHECK(res.loss < 1e-12);

    Rng rng(5);
    Tensor2D batch = random_uniform(rng, 4, 6, -2.0, 2.0);
    auto out = softmax_cross_entropy(batch, {0, 5, 2, 3});
    CHECK(out.loss >= 0.0);
    for (std::size_t i = 0; i < 4; ++i) {
        double row_sum = 0.0;
        for (std::size_t j = 0; j < 6; ++j) row_sum += out.grad.at(i, j);
        CHECK(row_sum == doctest::Approx(0.0).epsilon(1e-12));
    }

    CHECK_THROWS_AS(softmax_cross_entropy(batch, {0, 1, 2, 6}), ValueError);
    CHECK_THROWS_AS(softmax_cross_entropy(batch, {0, 1, 2, -1}), ValueError);
}

TEST_CASE("softmax cross entropy gradient matches finite differences") {
    Rng rng(17);
    Tensor2D logits = random_uniform(rng, 3, 5, -1.5, 1.5);
    std::vector<int> labels = {4, 0, 2};
    auto res = softmax_cross_entropy(logits, labels);
    double err = finite_difference_check(
        [&](const Tensor2D& z) { return softmax_cross_entropy(z, labels).loss; }, logits,
        res.grad, 1e-5);
    CHECK(err < 1e-4);
}

TEST_CASE("mse examples and gradient") {
    Tensor2D a = from_rows({{1, 2}});
    CHECK(mse(a, a).loss == 0.0);

    Tensor2D b = from_rows({{1, 4}});
    auto res = mse(a, b);
    CHECK(res.loss == doctest::Approx(2.0));

    Rng rng(23);
    Tensor2D x = random_uniform(rng, 2, 4, -2.0, 2.0);
    Tensor2D y = random_uniform(rng, 2, 4, -2.0, 2.0);
    auto out = mse(x, y);
    double err = finite_difference_check(
        [&](const Tensor2D& z) { return mse(z, y).loss; }, x, out.grad_a, 1e-5);
    CHECK(err < 1e-4);

    CHECK_THROWS_AS(mse(x, Tensor2D(3, 4)), ShapeError);
}

TEST_CASE("sgd_step examples and convergence on a quadratic") {
    Tensor2D params = from_rows({{2.0}});
    Tensor2D zeros(1, 1);
    CHECK(sgd_step(params, zeros, 0.3) == params);

    Tensor2D grads = from_rows({{0.5}});
    CHECK(sgd_step(params, grads, 1.0) == from_rows({{1.5}}));

    // f(x) = sum (x - c)^2 has its minimum at c.
    Rng rng(31);
    Tensor2D target = random_uniform(rng, 2, 3, -1.0, 1.0);
    Tensor2D x(2, 3, 0.0);
    for (int step = 0; step < 2000; ++step) {
        Tensor2D g(2, 3);
        for (std::size_t i = 0; i < g.size(); ++i) g.data[i] = 2.0 * (x.data[i] - target.data[i]);
        x = sgd_step(x, g, 0.1);
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
        CHECK(std::abs(x.data[i] - target.data[i]) < 1e-6);
    }

    CHECK_THROWS_AS(sgd_step(params, Tensor2D(2, 2), 0.1), ShapeError);
}

TEST_CASE("finite_difference_check sanity") {
    Tensor2D at = from_rows({{3.0}});
    Tensor2D analytic = from_rows({{6.0}});
    auto square = [](const Tensor2D& x) { return x.at(0, 0) * x.at(0, 0); };
    CHECK(finite_difference_check(square, at, analytic, 1e-4) < 1e-6);

    Tensor2D wrong = from_rows({{12.0}});
    double err = finite_difference_check(square, at, wrong, 1e-4);
    CHECK(err == doctest::Approx(0.5).epsilon(1e-3));  // |12 - 6| / 12

    CHECK_THROWS_AS(finite_difference_check(square, at, analytic, 0.0), ValueError);
}

TEST_CASE("rng determinism and bit-identical op outputs") {
    Rng a(123456), b(123456);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

    Rng r1(777), r2(777);
    Tensor2D x1 = random_uniform(r1, 6, 6, -1.0, 1.0);
    Tensor2D x2 = random_uniform(r2, 6, 6, -1.0, 1.0);
    CHECK(x1 == x2);
    CHECK(matmul(x1, x1) == matmul(x2, x2));
    CHECK(mean_rows(x1) == mean_rows(x2));
    CHECK(checksum(x1) == checksum(x2));

    Rng g1(42), g2(42);
    Tensor2D n1 = random_gaussian(g1, 4, 4, 0.0, 1.0);
    Tensor2D n2 = random_gaussian(g2, 4, 4, 0.0, 1.0);
    CHECK(n1 == n2);

    // fork derives from the seed, not the draw position
    Rng parent(9);
    parent.next_u64();
    Rng f1 = parent.fork(1);
    Rng f2 = Rng(9).fork(1);
    CHECK(f1.next_u64() == f2.next_u64());
}

TEST_CASE("exported op outputs stay finite") {
    Rng rng(2024);
    Tensor2D a = random_uniform(rng, 8, 8, -10.0, 10.0);
    Tensor2D b = random_uniform(rng, 8, 8, -10.0, 10.0);
    CHECK(matmul(a, b).all_finite());
    CHECK(mean_rows(a).all_finite());
    CHECK(softmax_cross_entropy(a, std::vector<int>(8, 3)).grad.all_finite());
    CHECK(mse(a, b).grad_a.all_finite());
    CHECK(sgd_step(a, b, 0.01).all_finite());
}
