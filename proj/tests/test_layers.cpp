#include "coverid/nn/layers.hpp"
#include "doctest.h"
#include "support/gradient_checks.hpp"

using namespace coverid;
using namespace coverid::nn;

TEST_SUITE("layers") {
  TEST_CASE("conv2d_same") {
    Tensor<float> x({1, 3, 3}, Vector<float>::LinSpaced(9, 1, 9));
    Tensor<float> w({1, 1, 1, 1}, Vector<float>::Ones(1));
    Tensor<float> b({1});
    CHECK(conv2d_same(x, w, b).data() == x.data());

    Tensor<float> ones({1, 3, 3}, Vector<float>::Ones(9));
    Tensor<float> k3({1, 1, 3, 3}, Vector<float>::Ones(9));
    const auto y = conv2d_same(ones, k3, b);
    CHECK(y.shape() == Shape{1, 3, 3});
    CHECK(y[4] == 9.0f);
    CHECK(y[0] == 4.0f);
    CHECK(y[1] == 6.0f);

    Tensor<float> big({1, 180, 180});
    Tensor<float> k5({32, 1, 5, 5});
    CHECK(conv2d_same(big, k5, Tensor<float>({32})).shape() == Shape{32, 180, 180});

    CHECK_THROWS_AS(conv2d_same(ones, Tensor<float>({1, 1, 2, 2}), b), Error);
    CHECK_THROWS_AS(conv2d_same(ones, Tensor<float>({1, 2, 3, 3}), b), Error);
  }

  TEST_CASE("conv gradients are additive over duplicated samples") {
    Rng rng(4);
    const auto one = gradcheck::random_tensor({1, 2, 4, 4}, rng);
    const auto w = gradcheck::random_tensor({3, 2, 3, 3}, rng);
    const auto dy = gradcheck::random_tensor({1, 3, 4, 4}, rng);
    Tensor<double> two({2, 2, 4, 4}), dy2({2, 3, 4, 4});
    two.slice(0) = one.slice(0);
    two.slice(1) = one.slice(0);
    dy2.slice(0) = dy.slice(0);
    dy2.slice(1) = dy.slice(0);
    const auto g1 = conv2d_same_backward(one, w, dy);
    const auto g2 = conv2d_same_backward(two, w, dy2);
    CHECK(g2.weight.data().isApprox(2 * g1.weight.data(), 1e-12));
    CHECK(g2.bias.data().isApprox(2 * g1.bias.data(), 1e-12));
  }

  TEST_CASE("relu") {
    Tensor<float> x({3});
    x.data() << -1, 0, 2;
    CHECK(relu(x).data() == Vector<float>((Vector<float>(3) << 0, 0, 2).finished()));
    Tensor<float> neg({4}, Vector<float>::Constant(4, -3));
    CHECK(relu(neg).data().isZero(0));
    Tensor<float> g({3}, Vector<float>::Ones(3));
    const auto dx = relu_backward(relu(x), g);
    CHECK(dx[0] == 0.0f);
    CHECK(dx[1] == 0.0f);
    CHECK(dx[2] == 1.0f);
  }

  TEST_CASE("maxpool") {
    Tensor<float> x({1, 2, 2});
    x.data() << 1, 2, 3, 4;
    const auto r = maxpool2x2(x);
    CHECK(r.output.shape() == Shape{1, 1, 1});
    CHECK(r.output[0] == 4.0f);
    CHECK(maxpool2x2(Tensor<float>({16, 45, 45})).output.shape() == Shape{16, 22, 22});
    CHECK(maxpool2x2(Tensor<float>({16, 11, 11})).output.shape() == Shape{16, 5, 5});
    CHECK_THROWS_AS(maxpool2x2(Tensor<float>({1, 1, 4})), Error);

    Tensor<float> ties({1, 2, 2}, Vector<float>::Ones(4));
    const auto t = maxpool2x2(ties);
    const auto back = maxpool2x2_backward(Tensor<float>({1, 1, 1}, Vector<float>::Ones(1)), t.argmax, ties.shape());
    CHECK(back[0] == 1.0f);
    CHECK(back.data().tail(3).isZero(0));
  }

  TEST_CASE("batch norm") {
    Tensor<double> x({2, 1, 1, 1});
    x.data() << -1, 1;
    Tensor<double> gamma({1}, Vector<double>::Ones(1)), beta({1});
    BatchNormCache<double> cache;
    const auto y = batch_norm_train(x, gamma, beta, cache);
    CHECK(y[0] == doctest::Approx(-1 / std::sqrt(1 + 1e-3)));
    CHECK(y[1] == doctest::Approx(1 / std::sqrt(1 + 1e-3)));

    Tensor<double> mean({1}), var({1}, Vector<double>::Ones(1));
    const auto id = batch_norm_infer(x, gamma, beta, mean, var);
    CHECK(id[0] == doctest::Approx(-1 / std::sqrt(1 + 1e-3)));
    CHECK(std::abs(id[1] - x[1]) < 1e-3);

    update_running_stats(mean, var, cache);
    CHECK(mean[0] == doctest::Approx(0.0));
    CHECK(var[0] == doctest::Approx(0.99 + 0.01 * 1.0));

    Rng rng(9);
    const auto z = gradcheck::random_tensor({4, 3, 5, 5}, rng, 3.0);
    Tensor<double> g3({3}, Vector<double>::Ones(3)), b3({3});
    BatchNormCache<double> c3;
    const auto out = batch_norm_train(z, g3, b3, c3);
    for (Index c = 0; c < 3; ++c) {
      double s = 0;
      for (Index n = 0; n < 4; ++n) s += out.slice(n).segment(c * 25, 25).sum();
      CHECK(std::abs(s / 100) < 1e-5);
    }

    Tensor<double> lone({1, 1, 1, 1});
    BatchNormCache<double> c1;
    CHECK_THROWS_WITH_AS(batch_norm_train(lone, gamma, beta, c1), doctest::Contains("DegenerateBatch"), Error);
  }

  TEST_CASE("dropout") {
    Rng rng(1);
    Tensor<float> x({1000}, Vector<float>::Ones(1000));
    CHECK(dropout(x, 0.0, Mode::Train, rng).data() == x.data());
    CHECK(dropout(x, 0.7, Mode::Infer, rng).data() == x.data());
    const auto y = dropout(x, 0.5, Mode::Train, rng);
    const auto kept = (y.data().array() > 0).count();
    CHECK(kept > 400);
    CHECK(kept < 600);
    CHECK(y.data().maxCoeff() == 2.0f);
    CHECK_THROWS_AS(dropout(x, 1.0, Mode::Train, rng), Error);
  }

  TEST_CASE("dense") {
    Tensor<float> x({2}), w({2, 2}), b({2});
    x.data() << 3, -4;
    w.data() << 1, 0, 0, 1;
    CHECK(dense(x, w, b).data() == x.data());
    Tensor<float> w1({1, 2}, Vector<float>::Ones(2)), b1({1}, Vector<float>::Ones(1)), x1({2});
    x1.data() << 2, 3;
    CHECK(dense(x1, w1, b1)[0] == 6.0f);
    CHECK(dense(Tensor<float>({400}), Tensor<float>({256, 400}), Tensor<float>({256})).shape() == Shape{256});
    CHECK_THROWS_AS(dense(Tensor<float>({3}), w, b), Error);
  }

  TEST_CASE("softmax cross-entropy") {
    Tensor<double> zero({1, 2});
    const auto p = softmax(zero);
    CHECK(p[0] == 0.5);
    CHECK(softmax_cross_entropy(zero, {0}).loss == doctest::Approx(std::log(2.0)));

    Tensor<double> extreme({1, 2});
    extreme.data() << 1000, -1000;
    const auto l = softmax_cross_entropy(extreme, {0});
    CHECK(std::isfinite(l.loss));
    CHECK(l.loss < 1e-12);

    Rng rng(3);
    const auto logits = gradcheck::random_tensor({6, 2}, rng, 3.0);
    const auto probs = softmax(logits);
    for (Index i = 0; i < 6; ++i) CHECK(std::abs(probs[2 * i] + probs[2 * i + 1] - 1) < 1e-6);
  }

  TEST_CASE("finite-difference gradient checks") {
    for (const auto& r : gradcheck::all()) {
      CAPTURE(r.name);
      CHECK(r.relative_error < 1e-4);
    }
    Rng rng(12);
    const auto sce = gradcheck::softmax_cross_entropy(rng);
    CHECK(sce.front().relative_error < 1e-6);
  }
}
