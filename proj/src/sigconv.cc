// featshift/sigconv.cc
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#include "featshift/sigconv.h"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

namespace featshift::sigconv {

using json = nlohmann::json;

ChannelStats compute_channel_stats(const std::vector<Spectrogram>& set) {
  if (set.empty()) throw DataError("compute_channel_stats: empty set");
  const long C = set.front().channels();
  long n = 0;
  for (const auto& s : set) {
    if (s.channels() != C)
      throw DataError("compute_channel_stats: channel-count mismatch");
    n += s.frames();
  }
  if (n < 2) throw DataError("compute_channel_stats: need >= 2 pooled frames");

  ChannelStats st;
  st.n_frames = n;
  Vector sum = Vector::Zero(C);
  for (const auto& s : set) sum += s.values.colwise().sum().transpose();
  st.mean = sum / static_cast<double>(n);

  // Two-pass covariance for numerical stability.
  Matrix cov = Matrix::Zero(C, C);
  for (const auto& s : set) {
    Matrix centered = s.values.rowwise() - st.mean.transpose();
    cov.noalias() += centered.transpose() * centered;
  }
  st.cov = cov / static_cast<double>(n);
  st.std = st.cov.diagonal().array().max(0.0).sqrt().matrix();
  return st;
}

void save_channel_stats(const ChannelStats& stats, const std::string& path) {
  const long C = stats.mean.size();
  json j;
  j["mean"] = std::vector<double>(stats.mean.data(), stats.mean.data() + C);
  j["std"] = std::vector<double>(stats.std.data(), stats.std.data() + C);
  std::vector<std::vector<double>> cov(C);
  for (long r = 0; r < C; ++r) {
    cov[r].resize(C);
    for (long c = 0; c < C; ++c) cov[r][c] = stats.cov(r, c);
  }
  j["cov"] = cov;
  j["n_frames"] = stats.n_frames;
  std::ofstream os(path);
  if (!os) throw FormatError("cannot open for writing: " + path);
  os << j.dump() << "\n";
}

ChannelStats load_channel_stats(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open channel stats: " + path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw FormatError(path + ": bad stats json: " + e.what());
  }
  ChannelStats st;
  auto mean = j.at("mean").get<std::vector<double>>();
  auto std_ = j.at("std").get<std::vector<double>>();
  auto cov = j.at("cov").get<std::vector<std::vector<double>>>();
  const long C = static_cast<long>(mean.size());
  if (std_.size() != mean.size() || cov.size() != mean.size())
    throw FormatError(path + ": inconsistent stats dimensions");
  st.mean = Eigen::Map<const Vector>(mean.data(), C);
  st.std = Eigen::Map<const Vector>(std_.data(), C);
  st.cov.resize(C, C);
  for (long r = 0; r < C; ++r) {
    if (cov[r].size() != mean.size())
      throw FormatError(path + ": inconsistent covariance row length");
    for (long c = 0; c < C; ++c) st.cov(r, c) = cov[r][c];
  }
  st.n_frames = j.value("n_frames", 0L);
  return st;
}

Spectrogram stats_convert(const Spectrogram& x, const ChannelStats& src,
                          const ChannelStats& tgt) {
  if (x.channels() != src.mean.size() || x.channels() != tgt.mean.size())
    throw DataError("stats_convert: channel-count mismatch");
  Vector src_std = src.std.array().max(1e-8).matrix();
  Eigen::ArrayXXd a = (x.values.rowwise() - src.mean.transpose()).array();
  a.rowwise() /= src_std.transpose().array();
  a.rowwise() *= tgt.std.transpose().array();
  Spectrogram out;
  out.values = a.matrix().rowwise() + tgt.mean.transpose();
  out.normalized = x.normalized;
  return out;
}

PsdSqrt psd_sqrt(const Matrix& cov, double eps) {
  if (eps <= 0.0) throw DataError("psd_sqrt: eps must be positive");
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-6)
    throw DataError("psd_sqrt: matrix is not symmetric");
  Matrix reg = 0.5 * (cov + cov.transpose());
  reg.diagonal().array() += eps;
  Eigen::SelfAdjointEigenSolver<Matrix> es(reg);
  Vector lam = es.eigenvalues().array().max(0.0).matrix();
  Vector s = lam.array().sqrt().matrix();
  Vector si = (1.0 / lam.array().sqrt().max(1e-300)).matrix();
  PsdSqrt out;
  out.sqrt = es.eigenvectors() * s.asDiagonal() * es.eigenvectors().transpose();
  out.inv_sqrt =
      es.eigenvectors() * si.asDiagonal() * es.eigenvectors().transpose();
  return out;
}

Spectrogram coral_convert(const Spectrogram& x, const ChannelStats& src,
                          const ChannelStats& tgt, double eps) {
  if (x.channels() != src.mean.size() || x.channels() != tgt.mean.size())
    throw DataError("coral_convert: channel-count mismatch");
  Matrix whiten = psd_sqrt(src.cov, eps).inv_sqrt;
  Matrix recolor = psd_sqrt(tgt.cov, eps).sqrt;
  Spectrogram out;
  out.values = (x.values.rowwise() - src.mean.transpose()) * whiten * recolor;
  out.values = out.values.rowwise() + tgt.mean.transpose();
  out.normalized = x.normalized;
  return out;
}

Spectrogram f0norm_convert(const Spectrogram& x, double median_f0,
                           double target_f0, const mel::MelConfig& cfg) {
  if (median_f0 <= 0.0 || target_f0 <= 0.0)
    throw DataError("f0norm_convert: non-positive F0");
  if (x.channels() != cfg.n_mels)
    throw DataError("f0norm_convert: channel-count mismatch");

  const double k = mel::mel_scale(target_f0) / mel::mel_scale(median_f0);
  const auto centers = mel::mel_channel_centers(cfg);
  const long C = x.channels();

  // Precompute per output channel: the two input channels bracketing
  // mel position m_j / k and the interpolation weight.
  std::vector<long> lo(C);
  std::vector<double> w(C);
  for (long j = 0; j < C; ++j) {
    double pos = centers[j] / k;
    if (pos <= centers.front()) {
      lo[j] = 0;
      w[j] = 0.0;
    } else if (pos >= centers.back()) {
      lo[j] = C - 2;
      w[j] = 1.0;
    } else {
      long i = static_cast<long>(
          std::upper_bound(centers.begin(), centers.end(), pos) -
          centers.begin()) - 1;
      i = std::min(i, C - 2);
      lo[j] = i;
      w[j] = (pos - centers[i]) / (centers[i + 1] - centers[i]);
    }
  }

  Spectrogram out;
  out.values.resize(x.frames(), C);
  for (long j = 0; j < C; ++j)
    out.values.col(j) =
        (1.0 - w[j]) * x.values.col(lo[j]) + w[j] * x.values.col(lo[j] + 1);
  out.normalized = x.normalized;
  return out;
}

}  // namespace featshift::sigconv
