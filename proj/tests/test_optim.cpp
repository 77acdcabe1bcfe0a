#include <doctest.h>

#include <cmath>

#include "igae/optim.hpp"

using namespace igae;

TEST_SUITE_BEGIN("optim");

TEST_CASE("first step with unit gradients moves by about lr") {
  auto p = Tensor::from_data({4}, {1.f, 2.f, 3.f, 4.f}, true);
  for (auto& g : p.grad()) g = 1.f;
  AdamT<float> opt({p});
  opt.step(0.01);
  // bias correction gives mhat = vhat = 1 on the first step
  for (int i = 0; i < 4; ++i)
    CHECK(p.data()[i] ==
          doctest::Approx(static_cast<float>(i + 1) - 0.01f).epsilon(1e-5));
}

TEST_CASE("zero gradients leave parameters unchanged, counter advances") {
  auto p = Tensor::from_data({3}, {0.5f, -0.5f, 2.f}, true);
  AdamT<float> opt({p});
  const auto before = p.data();
  opt.step(0.1);
  opt.step(0.1);
  CHECK(p.data() == before);
  CHECK(opt.step_count() == 2);
}

TEST_CASE("missing gradient is an error") {
  auto p = Tensor::zeros({3}, false);
  AdamT<float> opt({p});
  CHECK_THROWS_AS(opt.step(0.1), std::runtime_error);
}

TEST_CASE("three-step trajectory on f(x)=x^2 matches scalar reference") {
  auto x = DTensor::from_data({1}, {1.0}, true);
  AdamT<double> opt({x});
  const double lr = 0.1;
  // independent scalar Adam reference
  double xr = 1.0, m = 0, v = 0;
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  for (int t = 1; t <= 3; ++t) {
    x.zero_grad();
    square(x).backward();
    opt.step(lr);

    const double g = 2.0 * xr;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mhat = m / (1 - std::pow(b1, t));
    const double vhat = v / (1 - std::pow(b2, t));
    xr -= lr * mhat / (std::sqrt(vhat) + eps);
    CHECK(x.data()[0] == doctest::Approx(xr).epsilon(1e-7));
  }
}

TEST_CASE("first-step update is gradient-scale invariant at eps=0") {
  for (double k : {0.5, 3.0, 250.0}) {
    auto a = DTensor::from_data({2}, {1.0, -2.0}, true);
    auto b = DTensor::from_data({2}, {1.0, -2.0}, true);
    a.grad() = {0.3, -1.2};
    b.grad() = {0.3 * k, -1.2 * k};
    AdamConfig cfg;
    cfg.eps = 0.0;
    AdamT<double> oa({a}, cfg), ob({b}, cfg);
    oa.step(0.05);
    ob.step(0.05);
    for (int i = 0; i < 2; ++i)
      CHECK(a.data()[i] == doctest::Approx(b.data()[i]).epsilon(1e-9));
  }
}

TEST_CASE("schedule arithmetic") {
  Schedule s;
  s.base = 5e-5;
  s.gamma = 0.988;
  s.steps_per_epoch = 10;
  CHECK(s.rate(0) == doctest::Approx(5e-5));
  CHECK(s.rate(9) == doctest::Approx(5e-5));
  CHECK(s.rate(10) == doctest::Approx(4.94e-5).epsilon(1e-6));

  Schedule ls;
  ls.base = 2e-3;
  ls.xi = 0.1;
  ls.steps_per_epoch = 100;
  CHECK(ls.rate(0) == doctest::Approx(2e-4));
}

TEST_CASE("schedule is monotone non-increasing for gamma <= 1") {
  Schedule s;
  s.base = 1e-3;
  s.gamma = 0.97;
  s.steps_per_epoch = 7;
  double prev = s.rate(0);
  for (int t = 1; t < 200; ++t) {
    const double r = s.rate(t);
    CHECK(r <= prev + 1e-18);
    prev = r;
  }
}

TEST_SUITE_END();
