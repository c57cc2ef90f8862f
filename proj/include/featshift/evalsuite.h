// featshift/evalsuite.h
//
// Conversion-quality diagnostics: domain classifier, classified-as-target
// percentage, F0-distribution distance of feature sets, mean-spectrum
// export and Pearson correlation.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#ifndef FEATSHIFT_EVALSUITE_H_
#define FEATSHIFT_EVALSUITE_H_

#include <cstdint>
#include <string>
#include <vector>

#include "featshift/corpus_io.h"
#include "featshift/nncore.h"

namespace featshift::eval {

struct EvalReport {
  double classified_as_target_pct = 0.0;
  double f0_w1_to_target = 0.0;
  Vector mean_spectrum;
  long n_utts = 0;
};

void save_report(const EvalReport& report, const std::string& path);

struct ClassifierConfig {
  int n_mels = 80;
  int channels = 32;
  int kernel = 5;
  long steps = 600;
  double lr = 0.001;
  double holdout_fraction = 0.2;
  std::uint64_t seed = 0;
};

// Two conv blocks -> global average pool over time -> two FC layers ->
// 3-class softmax.
class DomainClassifier {
 public:
  explicit DomainClassifier(const ClassifierConfig& cfg);

  const ClassifierConfig& config() const { return cfg_; }
  nn::ParamList params();
  nn::RowVector logits(const Matrix& feat);  // raw log-Mel, T x n_mels
  int predict(const Spectrogram& x);

  // forward + backward for one example; returns the CE loss
  double loss_and_grad(const Matrix& feat, int domain, double scale);

  // input standardization, fitted at training time
  Vector input_mean, input_std;

 private:
  ClassifierConfig cfg_;
  std::vector<nn::Conv1dSame> convs_;
  std::vector<nn::LeakyReLU> acts_;
  nn::Linear fc1_, fc2_;
  nn::LeakyReLU fc_act_;
  long T_ = 0;

  friend void save_classifier(DomainClassifier& clf, const std::string& path);
  friend DomainClassifier load_classifier(const std::string& path);
};

// Trains on the manifest's extracted features; requires all three
// domains. held_out_accuracy is measured on a seed-deterministic split.
struct ClassifierTrainResult {
  DomainClassifier classifier;
  double held_out_accuracy = 0.0;
};
ClassifierTrainResult train_domain_classifier(
    const std::vector<corpus::UtteranceRecord>& records,
    const ClassifierConfig& cfg);

void save_classifier(DomainClassifier& clf, const std::string& path);
DomainClassifier load_classifier(const std::string& path);

// Fraction of utterances whose argmax class equals target, times 100.
double classified_as_pct(const std::vector<Spectrogram>& set,
                         DomainClassifier& clf, corpus::Domain target);

// Coarse utterance F0 from features alone: per frame, the energy-weighted
// centroid of channels with center frequency < 500 Hz mapped back to Hz;
// the utterance value is the median over frames whose low-band energy
// fraction is above its 40th percentile.
double feature_f0_proxy(const Spectrogram& x_raw);

// W1 between the two sets' utterance-level F0 values. Waveform-based
// median F0 is taken from the records when present, feature_f0_proxy of
// the feature file otherwise.
double f0_distance_report(const std::vector<corpus::UtteranceRecord>& set,
                          const std::vector<corpus::UtteranceRecord>& target);

// Per-channel mean over all pooled frames.
Vector mean_spectrum(const std::vector<Spectrogram>& set);
void export_mean_spectrum_csv(const Vector& mean, const std::string& path);
void export_f0_samples_csv(const std::vector<std::string>& ids,
                           const std::vector<double>& f0s,
                           const std::string& path);

// Sample Pearson correlation coefficient.
double pearson(const std::vector<double>& xs, const std::vector<double>& ys);

// Linear softmax probe on fixed embeddings with a seed-deterministic
// train/held-out split; returns held-out accuracy.
double linear_probe_accuracy(const Matrix& embeddings,
                             const std::vector<int>& labels, int n_classes,
                             std::uint64_t seed, long steps = 2000,
                             double lr = 0.01, double holdout_fraction = 0.3);

}  // namespace featshift::eval

#endif  // FEATSHIFT_EVALSUITE_H_
