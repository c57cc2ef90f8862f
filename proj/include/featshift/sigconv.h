// featshift/sigconv.h
//
// Signal-statistics conversion: per-channel statistic matching (Stats),
// covariance alignment (Coral) and F0-driven mel-axis formant warping
// (F0-norm).
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#ifndef FEATSHIFT_SIGCONV_H_
#define FEATSHIFT_SIGCONV_H_

#include <string>
#include <vector>

#include "featshift/common.h"
#include "featshift/melfeat.h"

namespace featshift::sigconv {

struct ChannelStats {
  Vector mean;  // per channel
  Vector std;   // population std
  Matrix cov;   // full covariance
  long n_frames = 0;
};

// Pooled per-channel mean/std (population) and full covariance over all
// frames of all spectrograms.
ChannelStats compute_channel_stats(const std::vector<Spectrogram>& set);

void save_channel_stats(const ChannelStats& stats, const std::string& path);
ChannelStats load_channel_stats(const std::string& path);

// Per channel: (x - mu_src) / sigma_src * sigma_tgt + mu_tgt.
// Source stds below 1e-8 are floored, never an error.
Spectrogram stats_convert(const Spectrogram& x, const ChannelStats& src,
                          const ChannelStats& tgt);

// Symmetric PSD square root (and inverse square root) of cov + eps*I
// via eigendecomposition.
struct PsdSqrt {
  Matrix sqrt;
  Matrix inv_sqrt;
};
PsdSqrt psd_sqrt(const Matrix& cov, double eps);

// x' = (x - mu_src) * C_src^{-1/2} * C_tgt^{1/2} + mu_tgt, frames as rows.
Spectrogram coral_convert(const Spectrogram& x, const ChannelStats& src,
                          const ChannelStats& tgt, double eps = 1e-5);

// Warp the mel channel axis by k = mel(target_f0) / mel(median_f0):
// output channel j is interpolated from the input at mel position m_j / k
// on the filterbank's channel-center grid, clamped at the edges.
Spectrogram f0norm_convert(const Spectrogram& x, double median_f0,
                           double target_f0 = 270.0,
                           const mel::MelConfig& cfg = {});

}  // namespace featshift::sigconv

#endif  // FEATSHIFT_SIGCONV_H_
