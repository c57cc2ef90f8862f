// featshift/nncore.h
//
// Minimal deterministic neural toolkit with exact gradients: 1-D
// convolution, linear layers, instance / adaptive-instance normalization,
// gradient reversal, losses, Adam and finite-difference checking.
// Sequence data is T x C (time as rows), all in double precision.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#ifndef FEATSHIFT_NNCORE_H_
#define FEATSHIFT_NNCORE_H_

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "featshift/common.h"

namespace featshift::nn {

using RowVector = Eigen::RowVectorXd;

struct Param {
  std::string name;
  Matrix value;
  Matrix grad;

  Param() = default;
  Param(std::string n, long rows, long cols)
      : name(std::move(n)),
        value(Matrix::Zero(rows, cols)),
        grad(Matrix::Zero(rows, cols)) {}
  void zero_grad() { grad.setZero(); }
};

using ParamList = std::vector<Param*>;

void init_uniform(Param& p, double bound, std::mt19937_64& rng);

inline void zero_grads(const ParamList& params) {
  for (Param* p : params) p->zero_grad();
}

// --- Layers (each caches its forward activations; call backward in
// reverse order within the same sample) ---

// Stride-1 "same" convolution over time with odd kernel and zero padding.
struct Conv1dSame {
  int kernel = 0, cin = 0, cout = 0;
  std::vector<Param> taps;  // kernel matrices, each cin x cout
  Param bias;               // 1 x cout

  void init(const std::string& name, int kernel, int cin, int cout,
            std::mt19937_64& rng);
  Matrix forward(const Matrix& x);    // T x cin -> T x cout
  Matrix backward(const Matrix& gy);  // returns gx, accumulates grads
  void collect(ParamList& out);

 private:
  Matrix x_cache_;
};

struct Linear {
  Param weight;  // in x out
  Param bias;    // 1 x out

  void init(const std::string& name, int in, int out, std::mt19937_64& rng);
  Matrix forward(const Matrix& x);
  Matrix backward(const Matrix& gy);
  void collect(ParamList& out);

 private:
  Matrix x_cache_;
};

// Per-channel standardization over time (population variance).
struct InstanceNorm {
  double eps = 1e-5;

  Matrix forward(const Matrix& x);
  Matrix backward(const Matrix& gy);

 private:
  Matrix xhat_;
  RowVector istd_;
};

// instance_norm(x) * gamma + beta, channelwise. gamma/beta are activations
// (derived from a conditioning vector); their gradients are returned.
struct AdaIn {
  double eps = 1e-5;

  Matrix forward(const Matrix& x, const RowVector& gamma,
                 const RowVector& beta);
  Matrix backward(const Matrix& gy, RowVector* ggamma, RowVector* gbeta);

 private:
  InstanceNorm in_;
  Matrix xhat_;
  RowVector gamma_;
};

struct LeakyReLU {
  double slope = 0.2;

  Matrix forward(const Matrix& x);
  Matrix backward(const Matrix& gy);

 private:
  Matrix x_cache_;
};

// Mean over time: T x C -> 1 x C, and its adjoint.
Matrix mean_pool_time(const Matrix& x);
Matrix mean_pool_time_backward(const Matrix& g, long T);

// Gradient reversal: forward identity, backward multiplies by -lambda.
inline Matrix grad_reverse_forward(const Matrix& x) { return x; }
inline Matrix grad_reverse_backward(const Matrix& g, double lambda) {
  return -lambda * g;
}

// --- Losses (return the scalar; write the gradient w.r.t. the first
// argument into *grad when non-null) ---

double l1_loss(const Matrix& pred, const Matrix& target, Matrix* grad);
double mse_loss(const Matrix& a, const Matrix& b, Matrix* grad);
double cross_entropy(const RowVector& logits, int cls, RowVector* grad);
RowVector softmax(const RowVector& logits);
double kl_std_normal(const Matrix& mu, const Matrix& logvar, Matrix* gmu,
                     Matrix* glogvar);

// --- Optimizer ---

struct AdamConfig {
  double lr = 0.0005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(ParamList params, AdamConfig cfg = {});
  // One bias-corrected update from the accumulated gradients.
  void step();
  long t() const { return t_; }

 private:
  ParamList params_;
  AdamConfig cfg_;
  std::vector<Matrix> m_, v_;
  long t_ = 0;
};

// --- Gradient verification ---
//
// loss_fn must run forward + backward, accumulating into the params'
// grads, and return the scalar loss. Returns the max relative error
// between analytic and central-difference gradients, with denominator
// max(|analytic|, |fd|, 1e-8).
double finite_diff_check(const ParamList& params,
                         const std::function<double()>& loss_fn,
                         double eps = 1e-4);

}  // namespace featshift::nn

#endif  // FEATSHIFT_NNCORE_H_
