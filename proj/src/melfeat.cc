// featshift/melfeat.cc
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#include "featshift/melfeat.h"

#include <cmath>
#include <complex>
#include <fstream>

#include <nlohmann/json.hpp>

namespace featshift::mel {

using json = nlohmann::json;

double mel_scale(double hz) {
  if (hz < 0.0) throw DataError("mel_scale: negative frequency");
  return 2595.0 * std::log10(1.0 + hz / 700.0);
}

double mel_inverse(double m) {
  return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0);
}

namespace {

// In-place iterative radix-2 FFT; n must be a power of two.
void Fft(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    double ang = -2.0 * M_PI / static_cast<double>(len);
    std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t j = 0; j < len / 2; ++j) {
        std::complex<double> u = a[i + j];
        std::complex<double> v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

std::vector<double> MelPoints(const MelConfig& cfg) {
  // n_mels + 2 equally spaced points on the mel axis from fmin to fmax.
  std::vector<double> pts(cfg.n_mels + 2);
  double lo = mel_scale(cfg.fmin);
  double hi = mel_scale(cfg.fmax);
  for (int i = 0; i < cfg.n_mels + 2; ++i)
    pts[i] = lo + (hi - lo) * i / (cfg.n_mels + 1);
  return pts;
}

}  // namespace

Matrix mel_filterbank(const MelConfig& cfg) {
  const int n_bins = cfg.fft_size / 2 + 1;
  auto pts = MelPoints(cfg);
  Matrix fb = Matrix::Zero(cfg.n_mels, n_bins);
  for (int m = 0; m < cfg.n_mels; ++m) {
    double left = pts[m], center = pts[m + 1], right = pts[m + 2];
    for (int b = 0; b < n_bins; ++b) {
      double hz = static_cast<double>(b) * cfg.sample_rate / cfg.fft_size;
      double mb = mel_scale(hz);
      if (mb <= left || mb >= right) continue;
      fb(m, b) = mb <= center ? (mb - left) / (center - left)
                              : (right - mb) / (right - center);
    }
  }
  return fb;
}

std::vector<double> mel_channel_centers(const MelConfig& cfg) {
  auto pts = MelPoints(cfg);
  return std::vector<double>(pts.begin() + 1, pts.begin() + 1 + cfg.n_mels);
}

Spectrogram extract_logmel(const Waveform& w, const MelConfig& cfg) {
  if (w.sample_rate != cfg.sample_rate)
    throw DataError("extract_logmel: expected " +
                    std::to_string(cfg.sample_rate) + " Hz input");
  const long len = static_cast<long>(w.samples.size());
  if (len < cfg.window)
    throw DataError("extract_logmel: waveform shorter than one window");
  const long T = 1 + (len - cfg.window) / cfg.hop;
  const int n_bins = cfg.fft_size / 2 + 1;

  std::vector<double> hann(cfg.window);
  for (int i = 0; i < cfg.window; ++i)
    hann[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / (cfg.window - 1));

  Matrix fb = mel_filterbank(cfg);
  Spectrogram spec;
  spec.values.resize(T, cfg.n_mels);

  std::vector<std::complex<double>> buf(cfg.fft_size);
  Vector power(n_bins);
  for (long t = 0; t < T; ++t) {
    const long off = t * cfg.hop;
    for (int i = 0; i < cfg.window; ++i)
      buf[i] = w.samples[off + i] * hann[i];
    for (int i = cfg.window; i < cfg.fft_size; ++i) buf[i] = 0.0;
    Fft(buf);
    for (int b = 0; b < n_bins; ++b) power(b) = std::norm(buf[b]);
    Vector mels = fb * power;
    for (int m = 0; m < cfg.n_mels; ++m)
      spec.values(t, m) = std::log(std::max(mels(m), cfg.log_floor));
  }
  return spec;
}

GmvnStats gmvn_fit(const std::vector<Spectrogram>& sets) {
  if (sets.empty()) throw DataError("gmvn_fit: empty input");
  const long C = sets.front().channels();
  Vector sum = Vector::Zero(C), sumsq = Vector::Zero(C);
  long n = 0;
  for (const auto& s : sets) {
    if (s.channels() != C) throw DataError("gmvn_fit: channel-count mismatch");
    sum += s.values.colwise().sum().transpose();
    sumsq += s.values.array().square().colwise().sum().matrix().transpose();
    n += s.frames();
  }
  if (n < 1) throw DataError("gmvn_fit: no frames");
  GmvnStats st;
  st.mean = sum / static_cast<double>(n);
  Vector var = sumsq / static_cast<double>(n) - st.mean.array().square().matrix();
  st.std = var.array().max(0.0).sqrt().max(1e-8).matrix();
  return st;
}

Spectrogram gmvn_apply(const Spectrogram& x, const GmvnStats& stats) {
  if (x.channels() != stats.mean.size())
    throw DataError("gmvn_apply: channel-count mismatch");
  Spectrogram out;
  Eigen::ArrayXXd a = (x.values.rowwise() - stats.mean.transpose()).array();
  a.rowwise() /= stats.std.transpose().array();
  out.values = a.matrix();
  out.normalized = true;
  return out;
}

Spectrogram gmvn_invert(const Spectrogram& x_norm, const GmvnStats& stats) {
  if (x_norm.channels() != stats.mean.size())
    throw DataError("gmvn_invert: channel-count mismatch");
  Spectrogram out;
  Eigen::ArrayXXd a = x_norm.values.array();
  a.rowwise() *= stats.std.transpose().array();
  out.values = a.matrix().rowwise() + stats.mean.transpose();
  out.normalized = false;
  return out;
}

void save_gmvn(const GmvnStats& stats, const std::string& path) {
  json j;
  j["mean"] = std::vector<double>(stats.mean.data(),
                                  stats.mean.data() + stats.mean.size());
  j["std"] = std::vector<double>(stats.std.data(),
                                 stats.std.data() + stats.std.size());
  std::ofstream os(path);
  if (!os) throw FormatError("cannot open for writing: " + path);
  os << j.dump(2) << "\n";
}

GmvnStats load_gmvn(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open gmvn stats: " + path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw FormatError(path + ": bad gmvn json: " + e.what());
  }
  auto mean = j.at("mean").get<std::vector<double>>();
  auto std_ = j.at("std").get<std::vector<double>>();
  if (mean.size() != std_.size())
    throw FormatError(path + ": mean/std length mismatch");
  GmvnStats st;
  st.mean = Eigen::Map<const Vector>(mean.data(), mean.size());
  st.std = Eigen::Map<const Vector>(std_.data(), std_.size());
  return st;
}

}  // namespace featshift::mel
