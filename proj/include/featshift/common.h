// featshift/common.h
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#ifndef FEATSHIFT_COMMON_H_
#define FEATSHIFT_COMMON_H_

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace featshift {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Malformed or unexpected bytes in a file (wrong magic, bad header, truncation).
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

// Valid file, but the content violates a precondition (shape mismatch,
// duplicate id, empty set, out-of-range value).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// One utterance worth of log-Mel features, frames as rows.
struct Spectrogram {
  Matrix values;            // T x C
  bool normalized = false;  // true after GMVN

  long frames() const { return values.rows(); }
  long channels() const { return values.cols(); }
};

struct Waveform {
  std::vector<double> samples;  // amplitudes in [-1, 1]
  int sample_rate = 16000;
};

inline constexpr int kNumMelChannels = 80;

}  // namespace featshift

#endif  // FEATSHIFT_COMMON_H_
