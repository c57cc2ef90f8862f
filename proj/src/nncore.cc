// featshift/nncore.cc
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#include "featshift/nncore.h"

#include <cmath>

namespace featshift::nn {

void init_uniform(Param& p, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (long c = 0; c < p.value.cols(); ++c)
    for (long r = 0; r < p.value.rows(); ++r)
      p.value(r, c) = dist(rng);
}

// ----- Conv1dSame -----

void Conv1dSame::init(const std::string& name, int k, int in, int out,
                      std::mt19937_64& rng) {
  if (k % 2 == 0) throw DataError("Conv1dSame: kernel size must be odd");
  kernel = k;
  cin = in;
  cout = out;
  taps.clear();
  double bound = std::sqrt(1.0 / (static_cast<double>(k) * in));
  for (int s = 0; s < k; ++s) {
    taps.emplace_back(name + ".w" + std::to_string(s), in, out);
    init_uniform(taps.back(), bound, rng);
  }
  bias = Param(name + ".b", 1, out);
}

Matrix Conv1dSame::forward(const Matrix& x) {
  if (x.cols() != cin) throw DataError("Conv1dSame: input channel mismatch");
  x_cache_ = x;
  const long T = x.rows();
  const int pad = (kernel - 1) / 2;
  Matrix y = bias.value.replicate(T, 1);
  for (int s = 0; s < kernel; ++s) {
    const long o = s - pad;
    const long a = std::max(0L, -o);
    const long len = T - std::abs(o);
    if (len <= 0) continue;
    y.middleRows(a, len).noalias() += x.middleRows(a + o, len) * taps[s].value;
  }
  return y;
}

Matrix Conv1dSame::backward(const Matrix& gy) {
  const long T = x_cache_.rows();
  const int pad = (kernel - 1) / 2;
  Matrix gx = Matrix::Zero(T, cin);
  for (int s = 0; s < kernel; ++s) {
    const long o = s - pad;
    const long a = std::max(0L, -o);
    const long len = T - std::abs(o);
    if (len <= 0) continue;
    gx.middleRows(a + o, len).noalias() +=
        gy.middleRows(a, len) * taps[s].value.transpose();
    taps[s].grad.noalias() +=
        x_cache_.middleRows(a + o, len).transpose() * gy.middleRows(a, len);
  }
  bias.grad += gy.colwise().sum();
  return gx;
}

void Conv1dSame::collect(ParamList& out) {
  for (auto& t : taps) out.push_back(&t);
  out.push_back(&bias);
}

// ----- Linear -----

void Linear::init(const std::string& name, int in, int out,
                  std::mt19937_64& rng) {
  weight = Param(name + ".w", in, out);
  init_uniform(weight, std::sqrt(1.0 / in), rng);
  bias = Param(name + ".b", 1, out);
}

Matrix Linear::forward(const Matrix& x) {
  if (x.cols() != weight.value.rows())
    throw DataError("Linear: input dim mismatch");
  x_cache_ = x;
  return (x * weight.value).rowwise() + bias.value.row(0);
}

Matrix Linear::backward(const Matrix& gy) {
  weight.grad.noalias() += x_cache_.transpose() * gy;
  bias.grad += gy.colwise().sum();
  return gy * weight.value.transpose();
}

void Linear::collect(ParamList& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

// ----- InstanceNorm -----

Matrix InstanceNorm::forward(const Matrix& x) {
  const long T = x.rows();
  RowVector mean = x.colwise().mean();
  RowVector var = ((x.rowwise() - mean).array().square().colwise().sum() /
                   static_cast<double>(T))
                      .matrix();
  istd_ = (var.array() + eps).sqrt().inverse().matrix();
  xhat_ = ((x.rowwise() - mean).array().rowwise() * istd_.array()).matrix();
  return xhat_;
}

Matrix InstanceNorm::backward(const Matrix& gy) {
  const long T = xhat_.rows();
  RowVector gmean = gy.colwise().mean();
  RowVector gdot = (gy.array() * xhat_.array()).colwise().mean().matrix();
  Matrix inner = ((gy.rowwise() - gmean).array() -
                  xhat_.array().rowwise() * gdot.array()).matrix();
  return (inner.array().rowwise() * istd_.array()).matrix();
}

// ----- AdaIn -----

Matrix AdaIn::forward(const Matrix& x, const RowVector& gamma,
                      const RowVector& beta) {
  in_.eps = eps;
  xhat_ = in_.forward(x);
  gamma_ = gamma;
  Matrix y = (xhat_.array().rowwise() * gamma.array()).matrix();
  return y.rowwise() + beta;
}

Matrix AdaIn::backward(const Matrix& gy, RowVector* ggamma, RowVector* gbeta) {
  if (gbeta) *gbeta = gy.colwise().sum();
  if (ggamma) *ggamma = (gy.array() * xhat_.array()).colwise().sum().matrix();
  Matrix gxhat = (gy.array().rowwise() * gamma_.array()).matrix();
  return in_.backward(gxhat);
}

// ----- LeakyReLU -----

Matrix LeakyReLU::forward(const Matrix& x) {
  x_cache_ = x;
  return x.array().max(slope * x.array()).matrix();
}

Matrix LeakyReLU::backward(const Matrix& gy) {
  return (x_cache_.array() >= 0.0)
      .select(gy.array(), slope * gy.array())
      .matrix();
}

// ----- pooling -----

Matrix mean_pool_time(const Matrix& x) { return x.colwise().mean(); }

Matrix mean_pool_time_backward(const Matrix& g, long T) {
  return g.replicate(T, 1) / static_cast<double>(T);
}

// ----- losses -----

double l1_loss(const Matrix& pred, const Matrix& target, Matrix* grad) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols())
    throw DataError("l1_loss: shape mismatch");
  const double n = static_cast<double>(pred.size());
  Matrix diff = pred - target;
  if (grad) *grad = diff.array().sign().matrix() / n;
  return diff.cwiseAbs().sum() / n;
}

double mse_loss(const Matrix& a, const Matrix& b, Matrix* grad) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DataError("mse_loss: shape mismatch");
  const double n = static_cast<double>(a.size());
  Matrix diff = a - b;
  if (grad) *grad = 2.0 * diff / n;
  return diff.array().square().sum() / n;
}

RowVector softmax(const RowVector& logits) {
  RowVector z = (logits.array() - logits.maxCoeff()).matrix();
  RowVector e = z.array().exp().matrix();
  return e / e.sum();
}

double cross_entropy(const RowVector& logits, int cls, RowVector* grad) {
  if (cls < 0 || cls >= logits.size())
    throw DataError("cross_entropy: class index out of range");
  RowVector p = softmax(logits);
  if (grad) {
    *grad = p;
    (*grad)(cls) -= 1.0;
  }
  return -std::log(std::max(p(cls), 1e-300));
}

double kl_std_normal(const Matrix& mu, const Matrix& logvar, Matrix* gmu,
                     Matrix* glogvar) {
  if (mu.rows() != logvar.rows() || mu.cols() != logvar.cols())
    throw DataError("kl_std_normal: shape mismatch");
  const double n = static_cast<double>(mu.size());
  Matrix ev = logvar.array().exp().matrix();
  double kl =
      -0.5 * (1.0 + logvar.array() - mu.array().square() - ev.array()).sum() /
      n;
  if (gmu) *gmu = mu / n;
  if (glogvar) *glogvar = (-0.5 / n) * (Matrix::Ones(mu.rows(), mu.cols()) - ev);
  return kl;
}

// ----- Adam -----

Adam::Adam(ParamList params, AdamConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
  for (Param* p : params_) {
    m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Param* p = params_[i];
    if (!p->grad.allFinite())
      throw DataError("adam_step: non-finite gradient in parameter " +
                      p->name);
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * p->grad;
    v_[i] = cfg_.beta2 * v_[i] +
            (1.0 - cfg_.beta2) * p->grad.array().square().matrix();
    Matrix mhat = m_[i] / bc1;
    Matrix vhat = v_[i] / bc2;
    p->value.array() -=
        cfg_.lr * mhat.array() / (vhat.array().sqrt() + cfg_.eps);
  }
}

// ----- finite differences -----

double finite_diff_check(const ParamList& params,
                         const std::function<double()>& loss_fn, double eps) {
  zero_grads(params);
  loss_fn();
  std::vector<Matrix> analytic;
  analytic.reserve(params.size());
  for (Param* p : params) analytic.push_back(p->grad);

  double max_rel = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Param* p = params[i];
    for (long c = 0; c < p->value.cols(); ++c) {
      for (long r = 0; r < p->value.rows(); ++r) {
        const double orig = p->value(r, c);
        p->value(r, c) = orig + eps;
        zero_grads(params);
        const double lp = loss_fn();
        p->value(r, c) = orig - eps;
        zero_grads(params);
        const double lm = loss_fn();
        p->value(r, c) = orig;
        const double fd = (lp - lm) / (2.0 * eps);
        const double a = analytic[i](r, c);
        const double rel =
            std::abs(fd - a) / std::max({std::abs(fd), std::abs(a), 1e-8});
        max_rel = std::max(max_rel, rel);
      }
    }
  }
  // restore analytic grads
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->grad = analytic[i];
  return max_rel;
}

}  // namespace featshift::nn
