// featshift/evalsuite.cc
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#include "featshift/evalsuite.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "featshift/melfeat.h"
#include "featshift/pitch.h"

namespace featshift::eval {

using json = nlohmann::json;
using nn::RowVector;

void save_report(const EvalReport& report, const std::string& path) {
  json j;
  j["classified_as_target_pct"] = report.classified_as_target_pct;
  j["f0_w1_to_target"] = report.f0_w1_to_target;
  j["mean_spectrum"] = std::vector<double>(
      report.mean_spectrum.data(),
      report.mean_spectrum.data() + report.mean_spectrum.size());
  j["n_utts"] = report.n_utts;
  std::ofstream os(path);
  if (!os) throw FormatError("cannot open for writing: " + path);
  os << j.dump(2) << "\n";
}

// ----- DomainClassifier -----

DomainClassifier::DomainClassifier(const ClassifierConfig& cfg) : cfg_(cfg) {
  std::mt19937_64 rng(cfg_.seed);
  convs_.resize(2);
  acts_.resize(2);
  convs_[0].init("clf.conv0", cfg_.kernel, cfg_.n_mels, cfg_.channels, rng);
  convs_[1].init("clf.conv1", cfg_.kernel, cfg_.channels, cfg_.channels, rng);
  fc1_.init("clf.fc1", cfg_.channels, cfg_.channels, rng);
  fc2_.init("clf.fc2", cfg_.channels, 3, rng);
  input_mean = Vector::Zero(cfg_.n_mels);
  input_std = Vector::Ones(cfg_.n_mels);
}

nn::ParamList DomainClassifier::params() {
  nn::ParamList out;
  for (auto& c : convs_) c.collect(out);
  fc1_.collect(out);
  fc2_.collect(out);
  return out;
}

RowVector DomainClassifier::logits(const Matrix& feat) {
  if (feat.cols() != cfg_.n_mels)
    throw DataError("DomainClassifier: channel-count mismatch");
  Eigen::ArrayXXd a = (feat.rowwise() - input_mean.transpose()).array();
  a.rowwise() /= input_std.transpose().array();
  Matrix h = a.matrix();
  for (int i = 0; i < 2; ++i) h = acts_[i].forward(convs_[i].forward(h));
  T_ = h.rows();
  Matrix pooled = nn::mean_pool_time(h);
  return fc2_.forward(fc_act_.forward(fc1_.forward(pooled))).row(0);
}

int DomainClassifier::predict(const Spectrogram& x) {
  RowVector l = logits(x.values);
  Eigen::Index best = 0;
  l.maxCoeff(&best);
  return static_cast<int>(best);
}

double DomainClassifier::loss_and_grad(const Matrix& feat, int domain,
                                       double scale) {
  RowVector l = logits(feat);
  RowVector gce;
  double loss = nn::cross_entropy(l, domain, &gce);
  Matrix g = fc1_.backward(fc_act_.backward(fc2_.backward(gce * scale)));
  g = nn::mean_pool_time_backward(g, T_);
  for (int i = 1; i >= 0; --i) g = convs_[i].backward(acts_[i].backward(g));
  return loss;
}

ClassifierTrainResult train_domain_classifier(
    const std::vector<corpus::UtteranceRecord>& records,
    const ClassifierConfig& cfg) {
  bool have[3] = {false, false, false};
  for (const auto& r : records) have[static_cast<int>(r.domain)] = true;
  if (!have[0] || !have[1] || !have[2])
    throw DataError("train_domain_classifier: all three domains required");

  std::vector<Matrix> feats;
  std::vector<int> labels;
  for (const auto& r : records) {
    if (r.feat_path.empty())
      throw DataError("train_domain_classifier: record " + r.id +
                      " has no features");
    feats.push_back(corpus::read_features(r.feat_path).values);
    labels.push_back(static_cast<int>(r.domain));
  }

  ClassifierTrainResult result{DomainClassifier(cfg), 0.0};
  DomainClassifier& clf = result.classifier;

  // per-channel standardization stats from the training features
  {
    Vector sum = Vector::Zero(cfg.n_mels), sumsq = Vector::Zero(cfg.n_mels);
    long n = 0;
    for (const auto& f : feats) {
      sum += f.colwise().sum().transpose();
      sumsq += f.array().square().colwise().sum().matrix().transpose();
      n += f.rows();
    }
    clf.input_mean = sum / double(n);
    Vector var = sumsq / double(n) - clf.input_mean.array().square().matrix();
    clf.input_std = var.array().max(0.0).sqrt().max(1e-8).matrix();
  }

  std::mt19937_64 rng(cfg.seed ^ 0xd1b54a32d192ed03ULL);
  std::vector<std::size_t> order(feats.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t n_held =
      std::max<std::size_t>(1, std::size_t(cfg.holdout_fraction * feats.size()));
  std::vector<std::size_t> held(order.begin(), order.begin() + n_held);
  std::vector<std::size_t> train_idx(order.begin() + n_held, order.end());
  if (train_idx.empty())
    throw DataError("train_domain_classifier: too few utterances");

  nn::Adam adam(clf.params(), {cfg.lr});
  std::uniform_int_distribution<std::size_t> pick(0, train_idx.size() - 1);
  const int batch = 8;
  for (long step = 0; step < cfg.steps; ++step) {
    nn::zero_grads(clf.params());
    for (int b = 0; b < batch; ++b) {
      std::size_t i = train_idx[pick(rng)];
      clf.loss_and_grad(feats[i], labels[i], 1.0 / batch);
    }
    adam.step();
  }

  long correct = 0;
  for (std::size_t i : held) {
    RowVector l = clf.logits(feats[i]);
    Eigen::Index best = 0;
    l.maxCoeff(&best);
    if (static_cast<int>(best) == labels[i]) ++correct;
  }
  result.held_out_accuracy = double(correct) / double(held.size());
  return result;
}

double classified_as_pct(const std::vector<Spectrogram>& set,
                         DomainClassifier& clf, corpus::Domain target) {
  if (set.empty()) throw DataError("classified_as_pct: empty set");
  long hits = 0;
  for (const auto& s : set)
    if (clf.predict(s) == static_cast<int>(target))
      ++hits;
  return 100.0 * double(hits) / double(set.size());
}

// ----- classifier checkpoints -----

namespace {

constexpr char kClfMagic[4] = {'D', 'C', 'L', 'F'};

void WriteU32(std::ostream& os, std::uint32_t v) {
  char b[4] = {char(v & 0xff), char((v >> 8) & 0xff), char((v >> 16) & 0xff),
               char((v >> 24) & 0xff)};
  os.write(b, 4);
}

std::uint32_t ReadU32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) |
         (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
}

void WriteDoubles(std::ostream& os, const double* p, long n) {
  os.write(reinterpret_cast<const char*>(p), n * 8);
}

void ReadDoubles(std::istream& is, double* p, long n) {
  is.read(reinterpret_cast<char*>(p), n * 8);
}

}  // namespace

void save_classifier(DomainClassifier& clf, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open for writing: " + path);
  os.write(kClfMagic, 4);
  WriteU32(os, 1);
  json j;
  j["n_mels"] = clf.cfg_.n_mels;
  j["channels"] = clf.cfg_.channels;
  j["kernel"] = clf.cfg_.kernel;
  j["seed"] = clf.cfg_.seed;
  std::string cfg_json = j.dump();
  WriteU32(os, static_cast<std::uint32_t>(cfg_json.size()));
  os.write(cfg_json.data(), static_cast<std::streamsize>(cfg_json.size()));
  WriteDoubles(os, clf.input_mean.data(), clf.input_mean.size());
  WriteDoubles(os, clf.input_std.data(), clf.input_std.size());
  nn::ParamList ps = clf.params();
  WriteU32(os, static_cast<std::uint32_t>(ps.size()));
  for (const nn::Param* p : ps) {
    WriteU32(os, static_cast<std::uint32_t>(p->value.rows()));
    WriteU32(os, static_cast<std::uint32_t>(p->value.cols()));
    for (long c = 0; c < p->value.cols(); ++c)
      WriteDoubles(os, p->value.col(c).data(), p->value.rows());
  }
  if (!os) throw FormatError("write failed: " + path);
}

DomainClassifier load_classifier(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open classifier: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kClfMagic, 4) != 0)
    throw FormatError(path + ": bad classifier magic");
  std::uint32_t version = ReadU32(is);
  if (version != 1)
    throw FormatError(path + ": unsupported classifier version");
  std::uint32_t cfg_len = ReadU32(is);
  std::string cfg_json(cfg_len, '\0');
  is.read(cfg_json.data(), cfg_len);
  if (!is) throw FormatError(path + ": truncated classifier config");
  json j = json::parse(cfg_json);
  ClassifierConfig cfg;
  cfg.n_mels = j.value("n_mels", cfg.n_mels);
  cfg.channels = j.value("channels", cfg.channels);
  cfg.kernel = j.value("kernel", cfg.kernel);
  cfg.seed = j.value("seed", cfg.seed);
  DomainClassifier clf(cfg);
  ReadDoubles(is, clf.input_mean.data(), clf.input_mean.size());
  ReadDoubles(is, clf.input_std.data(), clf.input_std.size());
  nn::ParamList ps = clf.params();
  std::uint32_t n = ReadU32(is);
  if (n != ps.size())
    throw FormatError(path + ": parameter count mismatch");
  for (nn::Param* p : ps) {
    std::uint32_t rows = ReadU32(is);
    std::uint32_t cols = ReadU32(is);
    if (rows != p->value.rows() || cols != p->value.cols())
      throw FormatError(path + ": parameter shape mismatch for " + p->name);
    for (std::uint32_t c = 0; c < cols; ++c)
      ReadDoubles(is, p->value.col(c).data(), rows);
    if (!is) throw FormatError(path + ": truncated parameter payload");
  }
  return clf;
}

// ----- F0 proxy and distances -----

double feature_f0_proxy(const Spectrogram& x_raw) {
  const mel::MelConfig cfg;
  if (x_raw.channels() != cfg.n_mels)
    throw DataError("feature_f0_proxy: channel-count mismatch");
  if (x_raw.values.maxCoeff() < std::log(cfg.log_floor) + 1e-6)
    throw DataError("feature_f0_proxy: all-silent input");

  const auto centers = mel::mel_channel_centers(cfg);
  std::vector<long> low;
  for (long c = 0; c < x_raw.channels(); ++c)
    if (mel::mel_inverse(centers[c]) < 500.0) low.push_back(c);

  const long T = x_raw.frames();
  std::vector<double> score(T), centroid_hz(T);
  for (long t = 0; t < T; ++t) {
    double low_sum = 0.0, low_mel = 0.0, total = 0.0;
    for (long c = 0; c < x_raw.channels(); ++c) {
      double e = std::exp(x_raw.values(t, c));
      total += e;
    }
    for (long c : low) {
      double e = std::exp(x_raw.values(t, c));
      low_sum += e;
      low_mel += e * centers[c];
    }
    score[t] = low_sum / std::max(total, 1e-300);
    centroid_hz[t] = mel::mel_inverse(low_mel / std::max(low_sum, 1e-300));
  }

  std::vector<double> sorted(score);
  std::sort(sorted.begin(), sorted.end());
  const double thr = sorted[static_cast<std::size_t>(0.4 * (T - 1))];
  std::vector<double> kept;
  for (long t = 0; t < T; ++t)
    if (score[t] > thr) kept.push_back(centroid_hz[t]);
  if (kept.empty()) kept = centroid_hz;  // all frames equally voiced
  std::size_t k = (kept.size() - 1) / 2;
  std::nth_element(kept.begin(), kept.begin() + k, kept.end());
  return kept[k];
}

namespace {

std::vector<double> SetF0Values(
    const std::vector<corpus::UtteranceRecord>& set) {
  std::vector<double> f0s;
  for (const auto& r : set) {
    if (r.median_f0) {
      f0s.push_back(*r.median_f0);
    } else {
      if (r.feat_path.empty())
        throw DataError("f0_distance_report: record " + r.id +
                        " has neither median_f0 nor features");
      f0s.push_back(feature_f0_proxy(corpus::read_features(r.feat_path)));
    }
  }
  return f0s;
}

}  // namespace

double f0_distance_report(const std::vector<corpus::UtteranceRecord>& set,
                          const std::vector<corpus::UtteranceRecord>& target) {
  if (set.empty() || target.empty())
    throw DataError("f0_distance_report: empty set");
  return pitch::wasserstein1(SetF0Values(set), SetF0Values(target));
}

// ----- spectra and correlation -----

Vector mean_spectrum(const std::vector<Spectrogram>& set) {
  if (set.empty()) throw DataError("mean_spectrum: empty set");
  const long C = set.front().channels();
  Vector sum = Vector::Zero(C);
  long n = 0;
  for (const auto& s : set) {
    sum += s.values.colwise().sum().transpose();
    n += s.frames();
  }
  return sum / double(n);
}

void export_mean_spectrum_csv(const Vector& mean, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw FormatError("cannot open for writing: " + path);
  os << "channel,value\n";
  for (long c = 0; c < mean.size(); ++c) os << c << "," << mean(c) << "\n";
}

void export_f0_samples_csv(const std::vector<std::string>& ids,
                           const std::vector<double>& f0s,
                           const std::string& path) {
  if (ids.size() != f0s.size())
    throw DataError("export_f0_samples_csv: length mismatch");
  std::ofstream os(path);
  if (!os) throw FormatError("cannot open for writing: " + path);
  os << "utterance_id,median_f0_hz\n";
  for (std::size_t i = 0; i < ids.size(); ++i)
    os << ids[i] << "," << f0s[i] << "\n";
}

double pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2)
    throw DataError("pearson: need equal lengths >= 2");
  const double n = double(xs.size());
  double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0)
    throw DataError("pearson: zero variance");
  return sxy / std::sqrt(sxx * syy);
}

// ----- linear probe -----

double linear_probe_accuracy(const Matrix& embeddings,
                             const std::vector<int>& labels, int n_classes,
                             std::uint64_t seed, long steps, double lr,
                             double holdout_fraction) {
  const long n = embeddings.rows();
  if (n != static_cast<long>(labels.size()) || n < 4)
    throw DataError("linear_probe_accuracy: bad inputs");
  std::mt19937_64 rng(seed);
  std::vector<long> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const long n_held = std::max(1L, static_cast<long>(holdout_fraction * n));
  std::vector<long> held(order.begin(), order.begin() + n_held);
  std::vector<long> train_idx(order.begin() + n_held, order.end());

  nn::Linear probe;
  probe.init("probe", static_cast<int>(embeddings.cols()), n_classes, rng);
  nn::ParamList ps;
  probe.collect(ps);
  nn::Adam adam(ps, {lr});

  for (long step = 0; step < steps; ++step) {
    nn::zero_grads(ps);
    for (long i : train_idx) {
      RowVector logits = probe.forward(embeddings.row(i)).row(0);
      RowVector gce;
      nn::cross_entropy(logits, labels[i], &gce);
      probe.backward(gce / double(train_idx.size()));
    }
    adam.step();
  }

  long correct = 0;
  for (long i : held) {
    RowVector logits = probe.forward(embeddings.row(i)).row(0);
    Eigen::Index best = 0;
    logits.maxCoeff(&best);
    if (static_cast<int>(best) == labels[i]) ++correct;
  }
  return double(correct) / double(held.size());
}

}  // namespace featshift::eval
