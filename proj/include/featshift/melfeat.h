// featshift/melfeat.h
//
// STFT -> 80-channel log-Mel spectrogram extraction and global
// mean-variance normalization (GMVN).
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#ifndef FEATSHIFT_MELFEAT_H_
#define FEATSHIFT_MELFEAT_H_

#include <string>
#include <vector>

#include "featshift/common.h"

namespace featshift::mel {

struct MelConfig {
  int sample_rate = 16000;
  int window = 400;   // 25 ms
  int hop = 160;      // 10 ms
  int fft_size = 512;
  int n_mels = 80;
  double fmin = 0.0;
  double fmax = 8000.0;
  double log_floor = 1e-10;
};

// HTK mel scale: 2595 * log10(1 + f/700).
double mel_scale(double hz);
double mel_inverse(double mel);

// Triangular mel filterbank, n_mels x (fft_size/2 + 1).
Matrix mel_filterbank(const MelConfig& cfg);

// Center mel value of each filterbank channel (length n_mels).
std::vector<double> mel_channel_centers(const MelConfig& cfg);

// Hann-windowed power-spectrum STFT followed by the mel filterbank and
// natural log with floor. T = 1 + floor((len - window) / hop).
Spectrogram extract_logmel(const Waveform& w, const MelConfig& cfg = {});

struct GmvnStats {
  Vector mean;  // per channel
  Vector std;   // population std, floored at 1e-8
};

GmvnStats gmvn_fit(const std::vector<Spectrogram>& sets);
Spectrogram gmvn_apply(const Spectrogram& x, const GmvnStats& stats);
Spectrogram gmvn_invert(const Spectrogram& x_norm, const GmvnStats& stats);

void save_gmvn(const GmvnStats& stats, const std::string& path);
GmvnStats load_gmvn(const std::string& path);

}  // namespace featshift::mel

#endif  // FEATSHIFT_MELFEAT_H_
