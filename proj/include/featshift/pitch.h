// featshift/pitch.h
//
// Autocorrelation F0 tracking, utterance median F0, the 10-class F0
// binning and the exact 1-D Wasserstein distance between F0 samples.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#ifndef FEATSHIFT_PITCH_H_
#define FEATSHIFT_PITCH_H_

#include <vector>

#include "featshift/common.h"

namespace featshift::pitch {

struct F0Track {
  std::vector<double> values;  // Hz per 10 ms frame, 0 = unvoiced
  double hop = 0.01;           // seconds
};

// Normalized autocorrelation over lags for 75-500 Hz on a 40 ms window,
// peak below 0.45 -> unvoiced, parabolic interpolation around the peak lag.
F0Track estimate_f0_track(const Waveform& w);

// Median over voiced frames (lower-middle element for even counts).
double median_f0(const F0Track& track);

// 10 equal 25 Hz bins covering 100-350 Hz; out-of-range medians clamp
// into the edge bins.
int f0_bin(double median_hz);

// Exact empirical W1 between two 1-D sample sets via quantile functions.
double wasserstein1(const std::vector<double>& p, const std::vector<double>& q);

}  // namespace featshift::pitch

#endif  // FEATSHIFT_PITCH_H_
