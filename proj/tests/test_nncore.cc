// Tests for the neural toolkit: layers, losses, Adam and the
// finite-difference gradient checker.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <doctest.h>

#include "featshift/nncore.h"

using namespace featshift;
using namespace featshift::nn;

namespace {

Matrix random_matrix(long r, long c, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, scale);
  Matrix m(r, c);
  for (long i = 0; i < r; ++i)
    for (long j = 0; j < c; ++j) m(i, j) = g(rng);
  return m;
}

// Wraps an input activation as a Param so finite_diff_check can probe
// d loss / d input as well as parameter gradients.
Param input_param(const Matrix& x, const std::string& name = "input") {
  Param p(name, x.rows(), x.cols());
  p.value = x;
  return p;
}

}  // namespace

TEST_SUITE("nncore") {

TEST_CASE("conv1d: kernel-1 identity weights pass the input through") {
  std::mt19937_64 rng(1);
  Conv1dSame conv;
  conv.init("c", 1, 3, 3, rng);
  conv.taps[0].value = Matrix::Identity(3, 3);
  conv.bias.value.setZero();
  Matrix x = random_matrix(7, 3, 2);
  CHECK((conv.forward(x) - x).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("conv1d: zero weights give constant bias output") {
  std::mt19937_64 rng(3);
  Conv1dSame conv;
  conv.init("c", 5, 4, 2, rng);
  for (auto& t : conv.taps) t.value.setZero();
  conv.bias.value << 0.7, -1.2;
  Matrix y = conv.forward(random_matrix(6, 4, 4));
  for (long t = 0; t < 6; ++t) {
    CHECK(y(t, 0) == doctest::Approx(0.7));
    CHECK(y(t, 1) == doctest::Approx(-1.2));
  }
}

TEST_CASE("conv1d matches a brute-force sliding-window oracle") {
  std::mt19937_64 rng(5);
  const int k = 5, cin = 3, cout = 4;
  const long T = 9;
  Conv1dSame conv;
  conv.init("c", k, cin, cout, rng);
  Matrix x = random_matrix(T, cin, 6);
  Matrix y = conv.forward(x);
  const int half = (k - 1) / 2;
  for (long t = 0; t < T; ++t) {
    for (int co = 0; co < cout; ++co) {
      double acc = conv.bias.value(0, co);
      for (int tap = 0; tap < k; ++tap) {
        long src = t + tap - half;
        if (src < 0 || src >= T) continue;  // zero padding
        for (int ci = 0; ci < cin; ++ci)
          acc += x(src, ci) * conv.taps[tap].value(ci, co);
      }
      CHECK(y(t, co) == doctest::Approx(acc).epsilon(1e-10));
    }
  }
}

TEST_CASE("conv1d gradients pass the finite-difference check") {
  std::mt19937_64 rng(7);
  Conv1dSame conv;
  conv.init("c", 3, 2, 3, rng);
  Param xin = input_param(random_matrix(5, 2, 8));
  Matrix target = random_matrix(5, 3, 9);
  ParamList params;
  conv.collect(params);
  params.push_back(&xin);
  double err = finite_diff_check(params, [&] {
    Matrix y = conv.forward(xin.value);
    Matrix g;
    double loss = mse_loss(y, target, &g);
    xin.grad += conv.backward(g);
    return loss;
  });
  CHECK(err < 1e-6);
}

TEST_CASE("linear gradients pass the finite-difference check") {
  std::mt19937_64 rng(10);
  Linear lin;
  lin.init("l", 4, 3, rng);
  Param xin = input_param(random_matrix(6, 4, 11));
  Matrix target = random_matrix(6, 3, 12);
  ParamList params;
  lin.collect(params);
  params.push_back(&xin);
  double err = finite_diff_check(params, [&] {
    Matrix y = lin.forward(xin.value);
    Matrix g;
    double loss = mse_loss(y, target, &g);
    xin.grad += lin.backward(g);
    return loss;
  });
  CHECK(err < 1e-6);
}

TEST_CASE("instance norm: constant channels collapse to zero") {
  InstanceNorm in;
  Matrix x = Matrix::Constant(6, 3, 4.2);
  CHECK(in.forward(x).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("instance norm: channel {1,3} becomes {-1,+1}") {
  InstanceNorm in;
  Matrix x(2, 1);
  x << 1.0, 3.0;
  Matrix y = in.forward(x);
  CHECK(y(0, 0) == doctest::Approx(-1.0).epsilon(1e-4));
  CHECK(y(1, 0) == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("instance norm standardizes every channel") {
  InstanceNorm in;
  Matrix y = in.forward(random_matrix(50, 4, 13, 3.0));
  for (long c = 0; c < 4; ++c) {
    double mean = y.col(c).mean();
    double var = y.col(c).array().square().mean() - mean * mean;
    CHECK(std::abs(mean) < 1e-6);
    CHECK(var == doctest::Approx(1.0).epsilon(1e-4));
  }
}

TEST_CASE("instance norm gradients pass the finite-difference check") {
  InstanceNorm in;
  Param xin = input_param(random_matrix(7, 3, 14));
  Matrix target = random_matrix(7, 3, 15);
  ParamList params = {&xin};
  double err = finite_diff_check(params, [&] {
    Matrix y = in.forward(xin.value);
    Matrix g;
    double loss = mse_loss(y, target, &g);
    xin.grad += in.backward(g);
    return loss;
  });
  CHECK(err < 1e-4);
}

TEST_CASE("adain: unit gamma, zero beta equals instance norm") {
  AdaIn ad;
  InstanceNorm in;
  Matrix x = random_matrix(8, 3, 16);
  Matrix y = ad.forward(x, RowVector::Ones(3), RowVector::Zero(3));
  CHECK((y - in.forward(x)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("adain: output channel statistics are (beta, |gamma|)") {
  AdaIn ad;
  RowVector gamma(3), beta(3);
  gamma << 2.0, -0.5, 1.3;
  beta << 1.0, 0.0, -4.0;
  Matrix y = ad.forward(random_matrix(200, 3, 17, 2.0), gamma, beta);
  for (long c = 0; c < 3; ++c) {
    double mean = y.col(c).mean();
    double var = y.col(c).array().square().mean() - mean * mean;
    CHECK(mean == doctest::Approx(beta(c)).epsilon(1e-6));
    CHECK(std::sqrt(var) ==
          doctest::Approx(std::abs(gamma(c))).epsilon(1e-3));
  }
}

TEST_CASE("adain: zero gamma gives constant beta") {
  AdaIn ad;
  RowVector beta(2);
  beta << 3.0, -1.0;
  Matrix y = ad.forward(random_matrix(5, 2, 18), RowVector::Zero(2), beta);
  for (long t = 0; t < 5; ++t) {
    CHECK(y(t, 0) == doctest::Approx(3.0));
    CHECK(y(t, 1) == doctest::Approx(-1.0));
  }
}

TEST_CASE("adain gradients (input, gamma, beta) pass the FD check") {
  AdaIn ad;
  Param xin = input_param(random_matrix(6, 3, 19));
  Param pg = input_param(random_matrix(1, 3, 20), "gamma");
  Param pb = input_param(random_matrix(1, 3, 21), "beta");
  Matrix target = random_matrix(6, 3, 22);
  ParamList params = {&xin, &pg, &pb};
  double err = finite_diff_check(params, [&] {
    Matrix y = ad.forward(xin.value, pg.value.row(0), pb.value.row(0));
    Matrix g;
    double loss = mse_loss(y, target, &g);
    RowVector gg, gb;
    xin.grad += ad.backward(g, &gg, &gb);
    pg.grad += gg;
    pb.grad += gb;
    return loss;
  });
  CHECK(err < 1e-4);
}

TEST_CASE("leaky relu forward and gradient") {
  LeakyReLU act;
  Matrix x(2, 2);
  x << 1.0, -1.0, 0.5, -4.0;
  Matrix y = act.forward(x);
  CHECK(y(0, 0) == doctest::Approx(1.0));
  CHECK(y(0, 1) == doctest::Approx(-0.2));
  CHECK(y(1, 1) == doctest::Approx(-0.8));
  Param xin = input_param(random_matrix(6, 3, 23));
  Matrix target = random_matrix(6, 3, 24);
  ParamList params = {&xin};
  double err = finite_diff_check(params, [&] {
    Matrix yy = act.forward(xin.value);
    Matrix g;
    double loss = mse_loss(yy, target, &g);
    xin.grad += act.backward(g);
    return loss;
  });
  CHECK(err < 1e-4);
}

TEST_CASE("mean pool over time and its adjoint") {
  Matrix x(3, 2);
  x << 1.0, 2.0, 3.0, 4.0, 5.0, 6.0;
  Matrix y = mean_pool_time(x);
  CHECK(y.rows() == 1);
  CHECK(y(0, 0) == doctest::Approx(3.0));
  CHECK(y(0, 1) == doctest::Approx(4.0));
  Param xin = input_param(random_matrix(5, 3, 25));
  Matrix target = random_matrix(1, 3, 26);
  ParamList params = {&xin};
  double err = finite_diff_check(params, [&] {
    Matrix p = mean_pool_time(xin.value);
    Matrix g;
    double loss = mse_loss(p, target, &g);
    xin.grad += mean_pool_time_backward(g, xin.value.rows());
    return loss;
  });
  CHECK(err < 1e-6);
}

TEST_CASE("gradient reversal semantics") {
  Matrix v = random_matrix(3, 3, 27);
  CHECK((grad_reverse_forward(v) - v).cwiseAbs().maxCoeff() == 0.0);
  Matrix g = random_matrix(3, 3, 28);
  CHECK((grad_reverse_backward(g, 1.0) + g).cwiseAbs().maxCoeff() == 0.0);
  CHECK(grad_reverse_backward(g, 0.0).cwiseAbs().maxCoeff() == 0.0);
  CHECK((grad_reverse_backward(g, 2.5) + 2.5 * g).cwiseAbs().maxCoeff() <
        1e-12);
}

TEST_CASE("losses: fixed values") {
  Matrix x = random_matrix(4, 3, 29);
  CHECK(l1_loss(x, x, nullptr) == 0.0);
  RowVector logits = RowVector::Constant(3, 0.77);
  CHECK(cross_entropy(logits, 1, nullptr) ==
        doctest::Approx(std::log(3.0)).epsilon(1e-12));
  Matrix z = Matrix::Zero(2, 3);
  CHECK(kl_std_normal(z, z, nullptr, nullptr) == 0.0);
  Matrix a(1, 2), b(1, 2);
  a << 1.0, 2.0;
  b << 3.0, 6.0;
  CHECK(mse_loss(a, b, nullptr) == doctest::Approx(10.0));  // (4+16)/2
  CHECK(l1_loss(a, b, nullptr) == doctest::Approx(3.0));    // (2+4)/2
}

TEST_CASE("cross entropy rejects out-of-range class") {
  RowVector logits = RowVector::Zero(3);
  CHECK_THROWS_AS(cross_entropy(logits, 3, nullptr), DataError);
  CHECK_THROWS_AS(cross_entropy(logits, -1, nullptr), DataError);
}

TEST_CASE("softmax sums to one and orders by logit") {
  RowVector logits(3);
  logits << 0.2, 2.0, -1.0;
  RowVector p = softmax(logits);
  CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(p(1) > p(0));
  CHECK(p(0) > p(2));
}

TEST_CASE("loss gradients pass the finite-difference check") {
  Param a = input_param(random_matrix(3, 4, 30), "a");
  Matrix b = random_matrix(3, 4, 31);
  ParamList pa = {&a};
  double err = finite_diff_check(pa, [&] {
    Matrix g;
    double loss = mse_loss(a.value, b, &g);
    a.grad += g;
    return loss;
  });
  CHECK(err < 1e-6);

  err = finite_diff_check(pa, [&] {
    Matrix g;
    double loss = l1_loss(a.value, b, &g);
    a.grad += g;
    return loss;
  });
  CHECK(err < 1e-4);

  Param logits = input_param(random_matrix(1, 5, 32), "logits");
  ParamList pl = {&logits};
  err = finite_diff_check(pl, [&] {
    RowVector g;
    double loss = cross_entropy(logits.value.row(0), 2, &g);
    logits.grad += g;
    return loss;
  });
  CHECK(err < 1e-6);

  Param mu = input_param(random_matrix(4, 3, 33), "mu");
  Param logvar = input_param(random_matrix(4, 3, 34), "logvar");
  ParamList pk = {&mu, &logvar};
  err = finite_diff_check(pk, [&] {
    Matrix gmu, glv;
    double loss = kl_std_normal(mu.value, logvar.value, &gmu, &glv);
    mu.grad += gmu;
    logvar.grad += glv;
    return loss;
  });
  CHECK(err < 1e-6);
}

TEST_CASE("adam: zero gradients leave parameters unchanged") {
  Param p("w", 2, 2);
  p.value = random_matrix(2, 2, 35);
  Matrix before = p.value;
  Adam adam({&p});
  p.zero_grad();
  adam.step();
  CHECK((p.value - before).cwiseAbs().maxCoeff() == 0.0);
  CHECK(adam.t() == 1);
}

TEST_CASE("adam: first step with unit gradient moves by about lr") {
  Param p("w", 1, 1);
  p.value(0, 0) = 3.0;
  AdamConfig cfg;
  cfg.lr = 0.1;
  Adam adam({&p}, cfg);
  p.grad(0, 0) = 1.0;
  adam.step();
  // Bias correction makes mhat/(sqrt(vhat)+eps) = 1/(1+eps) on step one.
  CHECK(p.value(0, 0) == doctest::Approx(3.0 - 0.1).epsilon(1e-6));
}

TEST_CASE("adam: two constant-gradient steps match a scripted trace") {
  Param p("w", 1, 1);
  p.value(0, 0) = 1.0;
  AdamConfig cfg;
  Adam adam({&p}, cfg);
  // Reference trace computed with the standard bias-corrected formulas.
  double w = 1.0, m = 0.0, v = 0.0;
  const double g = 0.37;
  for (int t = 1; t <= 2; ++t) {
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
    double mhat = m / (1.0 - std::pow(cfg.beta1, t));
    double vhat = v / (1.0 - std::pow(cfg.beta2, t));
    w -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    p.grad(0, 0) = g;
    adam.step();
    CHECK(p.value(0, 0) == doctest::Approx(w).epsilon(1e-12));
  }
}

TEST_CASE("adam: non-finite gradient raises an error naming the param") {
  Param p("enc.conv0.weight", 1, 1);
  Adam adam({&p});
  p.grad(0, 0) = std::nan("");
  try {
    adam.step();
    FAIL("expected an error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("enc.conv0.weight") != std::string::npos);
  }
}

TEST_CASE("fd checker: quadratic loss is exact to 1e-8") {
  Param w("w", 1, 1);
  w.value(0, 0) = 3.0;
  ParamList params = {&w};
  double err = finite_diff_check(params, [&] {
    double v = w.value(0, 0);
    w.grad(0, 0) += 2.0 * v;
    return v * v;
  });
  CHECK(err < 1e-8);
}

TEST_CASE("fd checker: linear loss is exact to machine precision") {
  Param w("w", 1, 2);
  w.value << 0.4, -1.1;
  ParamList params = {&w};
  double err = finite_diff_check(params, [&] {
    w.grad(0, 0) += 2.0;
    w.grad(0, 1) += -3.0;
    return 2.0 * w.value(0, 0) - 3.0 * w.value(0, 1);
  });
  CHECK(err < 1e-10);
}

TEST_CASE("fd checker restores parameter values and analytic grads") {
  Param w("w", 1, 1);
  w.value(0, 0) = 2.0;
  ParamList params = {&w};
  finite_diff_check(params, [&] {
    double v = w.value(0, 0);
    w.grad(0, 0) += 3.0 * v * v;
    return v * v * v;
  });
  CHECK(w.value(0, 0) == 2.0);
  CHECK(w.grad(0, 0) == doctest::Approx(12.0).epsilon(1e-12));
}

TEST_CASE("init_uniform stays inside its bound and is seed-deterministic") {
  Param a("a", 10, 10), b("b", 10, 10);
  std::mt19937_64 r1(42), r2(42);
  init_uniform(a, 0.3, r1);
  init_uniform(b, 0.3, r2);
  CHECK(a.value.cwiseAbs().maxCoeff() <= 0.3);
  CHECK((a.value - b.value).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.value.cwiseAbs().maxCoeff() > 0.0);
}

}  // TEST_SUITE
