#include <doctest.h>

#include "hwgan/nn.hpp"
#include "test_util.hpp"

using namespace hwgan;
using nn::Mat;

TEST_SUITE_BEGIN("nn");

TEST_CASE("dense layer gradients match finite differences") {
  Rng rng(1);
  nn::Dense<double> layer("fc", 4, 3, rng);
  Mat<double> x(4, 2);
  nn::uniform_init(x, rng, 1.0);
  Mat<double> target(3, 2);
  nn::uniform_init(target, rng, 1.0);

  auto loss_fn = [&]() {
    const Mat<double> y = layer.forward(x);
    return 0.5 * (y - target).squaredNorm();
  };

  std::vector<nn::Param<double>*> params;
  layer.collect(params);
  nn::zero_grads(params);
  const Mat<double> y = layer.forward(x);
  layer.backward(x, y - target);

  CHECK(testing::max_relative_grad_error(params, loss_fn) < 1e-6);
}

TEST_CASE("lstm backward matches finite differences over a sequence") {
  Rng rng(2);
  const int in = 3, hidden = 4, batch = 2, steps = 5;
  nn::LstmLayer<double> lstm("lstm", in, hidden, rng);
  std::vector<Mat<double>> xs;
  for (int t = 0; t < steps; ++t) {
    Mat<double> x(in, batch);
    nn::uniform_init(x, rng, 1.0);
    xs.push_back(x);
  }
  Mat<double> proj(1, hidden);
  nn::uniform_init(proj, rng, 1.0);

  auto loss_fn = [&]() {
    Mat<double> h = Mat<double>::Zero(hidden, batch);
    Mat<double> c = Mat<double>::Zero(hidden, batch);
    double loss = 0.0;
    for (const auto& x : xs) {
      lstm.step(x, h, c);
      loss += (proj * h).sum();
    }
    return loss;
  };

  std::vector<nn::Param<double>*> params;
  lstm.collect(params);
  nn::zero_grads(params);

  // Forward with caches, then backprop d(loss)/dh = proj^T at every step.
  std::vector<nn::LstmLayer<double>::StepCache> caches(steps);
  {
    Mat<double> h = Mat<double>::Zero(hidden, batch);
    Mat<double> c = Mat<double>::Zero(hidden, batch);
    for (int t = 0; t < steps; ++t)
      lstm.step(xs[static_cast<std::size_t>(t)], h, c,
                &caches[static_cast<std::size_t>(t)]);
  }
  Mat<double> dh_step =
      proj.transpose() * Mat<double>::Ones(1, batch);
  Mat<double> dh_rec = Mat<double>::Zero(hidden, batch);
  Mat<double> dc = Mat<double>::Zero(hidden, batch);
  for (int t = steps - 1; t >= 0; --t) {
    const Mat<double> c_prev =
        t == 0 ? Mat<double>::Zero(hidden, batch)
               : caches[static_cast<std::size_t>(t - 1)].c;
    const Mat<double> dxh = lstm.backward_step(
        caches[static_cast<std::size_t>(t)], c_prev, dh_step + dh_rec, dc);
    dh_rec = dxh.bottomRows(hidden);
  }

  CHECK(testing::max_relative_grad_error(params, loss_fn) < 1e-4);
}

TEST_CASE("adam minimizes a quadratic deterministically") {
  auto run = [](uint64_t seed) {
    Rng rng(seed);
    nn::Param<double> p("p", 5, 1);
    nn::uniform_init(p.value, rng, 2.0);
    nn::Adam<double> opt({&p});
    for (int i = 0; i < 400; ++i) {
      p.grad = p.value;  // d/dp of 0.5 * |p|^2
      opt.step(0.05);
    }
    return p.value;
  };
  const auto a = run(3);
  CHECK(a.norm() < 1e-3);
  const auto b = run(3);
  CHECK((a - b).norm() == 0.0);  // bit-identical repeat
}

TEST_CASE("global gradient norm and rescaling") {
  nn::Param<double> a("a", 2, 2), b("b", 3, 1);
  a.grad << 3, 0, 0, 0;
  b.grad << 0, 4, 0;
  std::vector<nn::Param<double>*> params{&a, &b};
  CHECK(nn::global_grad_norm(params) == doctest::Approx(5.0));
  nn::scale_grads(params, 1.0 / 5.0);
  CHECK(nn::global_grad_norm(params) == doctest::Approx(1.0));
  CHECK(nn::grads_finite(params));
  b.grad(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK(!nn::grads_finite(params));
}

TEST_CASE("rng state round trips through hex serialization") {
  Rng rng(99);
  rng.uniform();
  rng.normal_pair();
  const auto hex = rng.serialize();
  Rng copy = Rng::deserialize(hex);
  for (int i = 0; i < 100; ++i) CHECK(rng.next_u64() == copy.next_u64());
  CHECK_THROWS_AS(Rng::deserialize("zz"), ParseError);
}

TEST_SUITE_END();
