// featshift/pitch.cc
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#include "featshift/pitch.h"

#include <algorithm>
#include <cmath>

namespace featshift::pitch {

namespace {

constexpr double kVoicingThreshold = 0.45;
constexpr double kF0Min = 75.0;
constexpr double kF0Max = 500.0;

// Normalized cross-correlation of the window with itself at the given lag.
double Ncc(const double* x, int window, int lag) {
  double num = 0.0, e0 = 0.0, e1 = 0.0;
  const int n = window - lag;
  for (int t = 0; t < n; ++t) {
    num += x[t] * x[t + lag];
    e0 += x[t] * x[t];
    e1 += x[t + lag] * x[t + lag];
  }
  double denom = std::sqrt(e0 * e1);
  if (denom < 1e-12) return 0.0;
  return num / denom;
}

}  // namespace

F0Track estimate_f0_track(const Waveform& w) {
  const int sr = w.sample_rate;
  const int window = static_cast<int>(0.040 * sr);
  const int hop = static_cast<int>(0.010 * sr);
  const long len = static_cast<long>(w.samples.size());
  if (len < window)
    throw DataError("estimate_f0_track: input shorter than 40 ms");

  const int lag_min = static_cast<int>(std::floor(sr / kF0Max));
  const int lag_max =
      std::min(static_cast<int>(std::ceil(sr / kF0Min)), window - 2);

  F0Track track;
  const long n_frames = 1 + (len - window) / hop;
  track.values.resize(n_frames, 0.0);

  std::vector<double> r(lag_max + 1, 0.0);
  for (long f = 0; f < n_frames; ++f) {
    const double* x = w.samples.data() + f * hop;
    double energy = 0.0;
    for (int t = 0; t < window; ++t) energy += x[t] * x[t];
    if (energy < 1e-10) continue;  // silence

    double r_max = 0.0;
    for (int lag = lag_min; lag <= lag_max; ++lag) {
      r[lag] = Ncc(x, window, lag);
      r_max = std::max(r_max, r[lag]);
    }
    if (r_max < kVoicingThreshold) continue;

    // Smallest local peak close to the global maximum guards against
    // octave errors (the period-doubled peak has nearly the same value).
    int best = 0;
    for (int lag = lag_min + 1; lag < lag_max; ++lag) {
      if (r[lag] >= r[lag - 1] && r[lag] >= r[lag + 1] &&
          r[lag] >= 0.95 * r_max) {
        best = lag;
        break;
      }
    }
    if (best == 0) continue;

    // Parabolic interpolation around the peak lag.
    double a = r[best - 1], b = r[best], c = r[best + 1];
    double denom = a - 2.0 * b + c;
    double shift = std::abs(denom) > 1e-12 ? 0.5 * (a - c) / denom : 0.0;
    shift = std::max(-0.5, std::min(0.5, shift));
    double f0 = sr / (best + shift);
    track.values[f] = std::max(kF0Min, std::min(kF0Max, f0));
  }
  return track;
}

double median_f0(const F0Track& track) {
  std::vector<double> voiced;
  for (double v : track.values)
    if (v > 0.0) voiced.push_back(v);
  if (voiced.empty())
    throw DataError("median_f0: no voiced frames");
  std::size_t k = (voiced.size() - 1) / 2;
  std::nth_element(voiced.begin(), voiced.begin() + k, voiced.end());
  return voiced[k];
}

int f0_bin(double median_hz) {
  if (median_hz <= 0.0) throw DataError("f0_bin: non-positive median F0");
  if (median_hz < 100.0) return 0;
  if (median_hz >= 350.0) return 9;
  return static_cast<int>((median_hz - 100.0) / 25.0);
}

double wasserstein1(const std::vector<double>& p,
                    const std::vector<double>& q) {
  if (p.empty() || q.empty())
    throw DataError("wasserstein1: empty sample set");
  std::vector<double> ps(p), qs(q);
  std::sort(ps.begin(), ps.end());
  std::sort(qs.begin(), qs.end());
  const std::size_t m = ps.size(), n = qs.size();

  // Integrate |F_p^-1(u) - F_q^-1(u)| piecewise on the merged grid
  // {i/m} U {j/n}.
  double total = 0.0;
  double u = 0.0;
  std::size_t i = 0, j = 0;
  while (i < m && j < n) {
    double next_i = static_cast<double>(i + 1) / m;
    double next_j = static_cast<double>(j + 1) / n;
    double next = std::min(next_i, next_j);
    total += (next - u) * std::abs(ps[i] - qs[j]);
    if (next_i <= next) ++i;
    if (next_j <= next) ++j;
    u = next;
  }
  return total;
}

}  // namespace featshift::pitch
