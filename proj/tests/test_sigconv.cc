// Tests for statistic matching, covariance alignment and F0-driven
// mel-axis warping.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#include <cmath>
#include <filesystem>
#include <random>
#include <vector>

#include <doctest.h>

#include "featshift/melfeat.h"
#include "featshift/sigconv.h"

namespace fs = std::filesystem;
using namespace featshift;
using namespace featshift::sigconv;

namespace {

Spectrogram random_spec(long T, long C, std::uint64_t seed, double lo = -20.0,
                        double hi = 3.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> val(lo, hi);
  Spectrogram x;
  x.values.resize(T, C);
  for (long t = 0; t < T; ++t)
    for (long c = 0; c < C; ++c) x.values(t, c) = val(rng);
  return x;
}

// Correlated random set: latent factors times a fixed mixing matrix, so
// the pooled covariance is far from diagonal.
std::vector<Spectrogram> correlated_set(int n_utts, long T, std::uint64_t seed,
                                        double scale, double offset) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix mix(8, 80);
  for (long i = 0; i < mix.rows(); ++i)
    for (long j = 0; j < mix.cols(); ++j) mix(i, j) = g(rng);
  std::vector<Spectrogram> set;
  for (int u = 0; u < n_utts; ++u) {
    Spectrogram x;
    x.values.resize(T, 80);
    for (long t = 0; t < T; ++t) {
      Eigen::RowVectorXd z(8);
      for (int k = 0; k < 8; ++k) z(k) = g(rng);
      x.values.row(t) = scale * (z * mix);
      for (long c = 0; c < 80; ++c)
        x.values(t, c) += offset + 0.3 * g(rng);  // full-rank jitter
    }
    set.push_back(std::move(x));
  }
  return set;
}

}  // namespace

TEST_SUITE("sigconv") {

TEST_CASE("channel stats: two frames {1,3} give mean 2, std 1") {
  Spectrogram x;
  x.values.resize(2, 80);
  x.values.row(0).setConstant(1.0);
  x.values.row(1).setConstant(3.0);
  ChannelStats s = compute_channel_stats({x});
  CHECK(s.n_frames == 2);
  CHECK((s.mean.array() - 2.0).abs().maxCoeff() < 1e-12);
  CHECK((s.std.array() - 1.0).abs().maxCoeff() < 1e-12);
  CHECK((s.cov.diagonal().array() - 1.0).abs().maxCoeff() < 1e-12);
}

TEST_CASE("channel stats are identical under set duplication") {
  Spectrogram x = random_spec(30, 80, 1);
  ChannelStats s1 = compute_channel_stats({x});
  ChannelStats s2 = compute_channel_stats({x, x, x});
  CHECK((s1.mean - s2.mean).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((s1.std - s2.std).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((s1.cov - s2.cov).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("channel stats: covariance matches a brute-force oracle") {
  Spectrogram x = random_spec(100, 80, 2);
  ChannelStats s = compute_channel_stats({x});
  // Independent two-pass oracle, elementwise loops only.
  Vector mean = Vector::Zero(80);
  for (long t = 0; t < 100; ++t) mean += x.values.row(t).transpose();
  mean /= 100.0;
  Matrix cov = Matrix::Zero(80, 80);
  for (long t = 0; t < 100; ++t) {
    Vector d = x.values.row(t).transpose() - mean;
    cov += d * d.transpose();
  }
  cov /= 100.0;
  CHECK((s.mean - mean).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((s.cov - cov).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((s.cov - s.cov.transpose()).cwiseAbs().maxCoeff() < 1e-9);
  // Diagonal of cov is the squared std.
  CHECK((s.cov.diagonal().array() - s.std.array().square()).abs().maxCoeff() <
        1e-9);
}

TEST_CASE("channel stats reject fewer than two pooled frames") {
  Spectrogram x = random_spec(1, 80, 3);
  CHECK_THROWS_AS(compute_channel_stats({x}), DataError);
  CHECK_THROWS_AS(compute_channel_stats({}), DataError);
}

TEST_CASE("channel stats json roundtrip") {
  ChannelStats s = compute_channel_stats({random_spec(25, 80, 4)});
  fs::path p = fs::temp_directory_path() / "featshift_chanstats_rt.json";
  save_channel_stats(s, p.string());
  ChannelStats r = load_channel_stats(p.string());
  fs::remove(p);
  CHECK(r.n_frames == s.n_frames);
  CHECK((r.mean - s.mean).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((r.std - s.std).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((r.cov - s.cov).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("stats convert: src == tgt is the identity") {
  Spectrogram x = random_spec(20, 80, 5);
  ChannelStats s = compute_channel_stats({x});
  Spectrogram y = stats_convert(x, s, s);
  CHECK((y.values - x.values).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("stats convert: unit arithmetic") {
  ChannelStats src, tgt;
  src.mean = Vector::Zero(80);
  src.std = Vector::Ones(80);
  tgt.mean = Vector::Constant(80, 5.0);
  tgt.std = Vector::Constant(80, 2.0);
  Spectrogram x;
  x.values = Matrix::Constant(3, 80, 1.0);
  Spectrogram y = stats_convert(x, src, tgt);
  CHECK((y.values.array() - 7.0).abs().maxCoeff() < 1e-12);
  CHECK(y.frames() == 3);
}

TEST_CASE("stats convert maps set statistics onto the target") {
  auto src_set = correlated_set(3, 60, 6, 1.0, -8.0);
  auto tgt_set = correlated_set(3, 50, 7, 2.5, -3.0);
  ChannelStats src = compute_channel_stats(src_set);
  ChannelStats tgt = compute_channel_stats(tgt_set);
  std::vector<Spectrogram> conv;
  for (const auto& x : src_set) conv.push_back(stats_convert(x, src, tgt));
  ChannelStats after = compute_channel_stats(conv);
  CHECK((after.mean - tgt.mean).cwiseAbs().maxCoeff() < 1e-6);
  CHECK((after.std - tgt.std).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("stats convert is exactly invertible") {
  auto a = correlated_set(2, 40, 8, 1.0, 0.0);
  auto b = correlated_set(2, 40, 9, 3.0, -5.0);
  ChannelStats s = compute_channel_stats(a);
  ChannelStats t = compute_channel_stats(b);
  Spectrogram x = random_spec(15, 80, 10);
  Spectrogram back = stats_convert(stats_convert(x, s, t), t, s);
  CHECK((back.values - x.values).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("psd sqrt: identity maps to identity") {
  PsdSqrt r = psd_sqrt(Matrix::Identity(5, 5), 1e-12);
  CHECK((r.sqrt - Matrix::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-6);
  CHECK((r.inv_sqrt - Matrix::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("psd sqrt: diagonal case") {
  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 4.0;
  d(1, 1) = 9.0;
  PsdSqrt r = psd_sqrt(d, 1e-9);
  CHECK(r.sqrt(0, 0) == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(r.sqrt(1, 1) == doctest::Approx(3.0).epsilon(1e-6));
  CHECK(std::abs(r.sqrt(0, 1)) < 1e-9);
}

TEST_CASE("psd sqrt: multiply-back oracle on a random PSD matrix") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix a(12, 12);
  for (long i = 0; i < 12; ++i)
    for (long j = 0; j < 12; ++j) a(i, j) = g(rng);
  Matrix m = a * a.transpose();
  const double eps = 1e-7;
  PsdSqrt r = psd_sqrt(m, eps);
  Matrix back = r.sqrt * r.sqrt;
  Matrix expect = m + eps * Matrix::Identity(12, 12);
  CHECK((back - expect).cwiseAbs().maxCoeff() < 1e-6);
  CHECK((r.sqrt * r.inv_sqrt - Matrix::Identity(12, 12)).cwiseAbs().maxCoeff() <
        1e-6);
  CHECK((r.sqrt - r.sqrt.transpose()).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("psd sqrt rejects asymmetric input") {
  Matrix m = Matrix::Identity(3, 3);
  m(0, 2) = 0.5;
  CHECK_THROWS_AS(psd_sqrt(m, 1e-9), DataError);
}

TEST_CASE("coral: src == tgt is near-identity") {
  auto set = correlated_set(2, 60, 12, 1.0, 0.0);
  ChannelStats s = compute_channel_stats(set);
  Spectrogram x = set[0];
  Spectrogram y = coral_convert(x, s, s, 1e-5);
  CHECK((y.values - x.values).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("coral with identity covariance and zero mean is identity") {
  ChannelStats s;
  s.mean = Vector::Zero(80);
  s.std = Vector::Ones(80);
  s.cov = Matrix::Identity(80, 80);
  s.n_frames = 100;
  Spectrogram x = random_spec(10, 80, 13);
  Spectrogram y = coral_convert(x, s, s, 1e-9);
  CHECK((y.values - x.values).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("coral coincides with stats convert for diagonal covariances") {
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<double> sd(0.5, 3.0), mu(-10.0, 10.0);
  ChannelStats src, tgt;
  src.mean.resize(80);
  src.std.resize(80);
  tgt.mean.resize(80);
  tgt.std.resize(80);
  for (long c = 0; c < 80; ++c) {
    src.mean(c) = mu(rng);
    src.std(c) = sd(rng);
    tgt.mean(c) = mu(rng);
    tgt.std(c) = sd(rng);
  }
  src.cov = src.std.array().square().matrix().asDiagonal();
  tgt.cov = tgt.std.array().square().matrix().asDiagonal();
  src.n_frames = tgt.n_frames = 100;
  Spectrogram x = random_spec(12, 80, 15);
  Spectrogram a = coral_convert(x, src, tgt, 1e-9);
  Spectrogram b = stats_convert(x, src, tgt);
  CHECK((a.values - b.values).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("coral maps set covariance onto the target covariance") {
  auto src_set = correlated_set(3, 80, 16, 1.0, -6.0);
  auto tgt_set = correlated_set(3, 80, 17, 2.0, -2.0);
  ChannelStats src = compute_channel_stats(src_set);
  ChannelStats tgt = compute_channel_stats(tgt_set);
  std::vector<Spectrogram> conv;
  for (const auto& x : src_set)
    conv.push_back(coral_convert(x, src, tgt, 1e-5));
  ChannelStats after = compute_channel_stats(conv);
  double rel = (after.cov - tgt.cov).norm() / tgt.cov.norm();
  CHECK(rel < 1e-3);
  CHECK((after.mean - tgt.mean).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("f0norm: median at the target is the identity") {
  Spectrogram x = random_spec(9, 80, 18);
  Spectrogram y = f0norm_convert(x, 270.0, 270.0);
  CHECK((y.values - x.values).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("f0norm: upward warp moves a spectral peak to a higher channel") {
  // Warp factor oracle straight from the mel formula.
  auto mel = [](double f) { return 2595.0 * std::log10(1.0 + f / 700.0); };
  double k = mel(270.0) / mel(135.0);
  CHECK(k > 1.0);
  Spectrogram x;
  x.values = Matrix::Constant(1, 80, -23.0);
  x.values(0, 20) = 0.0;  // single-channel peak
  Spectrogram y = f0norm_convert(x, 135.0, 270.0);
  Eigen::Index argmax;
  y.values.row(0).maxCoeff(&argmax);
  CHECK(argmax > 20);
}

TEST_CASE("f0norm: forward then backward warp restores the interior") {
  Spectrogram x;
  x.values.resize(4, 80);
  // Smooth spectra so linear interpolation error stays small.
  for (long t = 0; t < 4; ++t)
    for (long c = 0; c < 80; ++c)
      x.values(t, c) = std::sin(0.08 * c + 0.3 * t);
  Spectrogram up = f0norm_convert(x, 180.0, 270.0);
  // Applying the inverse warp factor: mel(270)/mel(405) = mel(180)/mel(270)
  // does not hold exactly, so warp back by swapping source and target.
  Spectrogram back = f0norm_convert(up, 270.0, 180.0);
  // High channels whose warped-back position clamps past the top of the
  // grid are excluded; only the interior can round-trip.
  CHECK((back.values.middleCols(10, 42) - x.values.middleCols(10, 42))
            .cwiseAbs()
            .maxCoeff() < 0.05);
}

TEST_CASE("f0norm keeps frames and finiteness across extreme warps") {
  Spectrogram x = random_spec(6, 80, 19);
  for (double m : {80.0, 135.0, 270.0, 540.0, 1080.0}) {
    Spectrogram y = f0norm_convert(x, m, 270.0);
    CHECK(y.frames() == 6);
    CHECK(y.channels() == 80);
    CHECK(y.values.allFinite());
  }
}

TEST_CASE("f0norm rejects non-positive F0") {
  Spectrogram x = random_spec(2, 80, 20);
  CHECK_THROWS_AS(f0norm_convert(x, 0.0, 270.0), DataError);
  CHECK_THROWS_AS(f0norm_convert(x, 135.0, -1.0), DataError);
}

}  // TEST_SUITE
