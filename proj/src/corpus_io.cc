// featshift/corpus_io.cc
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#include "featshift/corpus_io.h"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace featshift::corpus {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string DomainName(Domain d) {
  switch (d) {
    case Domain::A: return "A";
    case Domain::C1: return "C1";
    case Domain::C2: return "C2";
  }
  return "?";
}

Domain ParseDomain(const std::string& s) {
  if (s == "A") return Domain::A;
  if (s == "C1") return Domain::C1;
  if (s == "C2") return Domain::C2;
  throw DataError("unknown domain label: " + s);
}

std::string StyleName(Style s) {
  return s == Style::Read ? "read" : "conversational";
}

Style ParseStyle(const std::string& s) {
  if (s == "read") return Style::Read;
  if (s == "conversational") return Style::Conversational;
  throw DataError("unknown style label: " + s);
}

Style DefaultStyle(Domain d) {
  return d == Domain::C2 ? Style::Conversational : Style::Read;
}

// ----- WAV -----

namespace {

std::uint32_t ReadU32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) |
         (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
}

std::uint16_t ReadU16(std::istream& is) {
  unsigned char b[2];
  is.read(reinterpret_cast<char*>(b), 2);
  return std::uint16_t(b[0]) | (std::uint16_t(b[1]) << 8);
}

void WriteU32(std::ostream& os, std::uint32_t v) {
  char b[4] = {char(v & 0xff), char((v >> 8) & 0xff), char((v >> 16) & 0xff),
               char((v >> 24) & 0xff)};
  os.write(b, 4);
}

void WriteU16(std::ostream& os, std::uint16_t v) {
  char b[2] = {char(v & 0xff), char((v >> 8) & 0xff)};
  os.write(b, 2);
}

}  // namespace

Waveform read_wav(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open wav file: " + path);

  char tag[4];
  is.read(tag, 4);
  if (!is || std::memcmp(tag, "RIFF", 4) != 0)
    throw FormatError(path + ": not a RIFF file");
  ReadU32(is);  // riff size, unchecked
  is.read(tag, 4);
  if (!is || std::memcmp(tag, "WAVE", 4) != 0)
    throw FormatError(path + ": not a WAVE file");

  bool have_fmt = false;
  std::uint16_t channels = 0, bits = 0, format = 0;
  std::uint32_t sample_rate = 0;
  Waveform w;

  while (is.read(tag, 4)) {
    std::uint32_t chunk_size = ReadU32(is);
    if (!is) throw FormatError(path + ": truncated chunk header");
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      if (chunk_size < 16) throw FormatError(path + ": fmt chunk too small");
      format = ReadU16(is);
      channels = ReadU16(is);
      sample_rate = ReadU32(is);
      ReadU32(is);  // byte rate
      ReadU16(is);  // block align
      bits = ReadU16(is);
      is.seekg(chunk_size - 16, std::ios::cur);
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      if (!have_fmt) throw FormatError(path + ": data chunk before fmt");
      if (format != 1 || bits != 16)
        throw DataError(path + ": unsupported encoding (need 16-bit PCM)");
      if (channels != 1)
        throw DataError(path + ": unsupported encoding (need mono)");
      std::uint32_t n = chunk_size / 2;
      w.samples.resize(n);
      for (std::uint32_t i = 0; i < n; ++i) {
        std::int16_t s = static_cast<std::int16_t>(ReadU16(is));
        if (!is) throw FormatError(path + ": truncated sample data");
        w.samples[i] = s / 32768.0;
      }
      w.sample_rate = static_cast<int>(sample_rate);
      if (w.samples.empty()) throw FormatError(path + ": empty data chunk");
      return w;
    } else {
      // skip unknown chunk (word aligned)
      is.seekg(chunk_size + (chunk_size & 1), std::ios::cur);
    }
  }
  throw FormatError(path + ": no data chunk found");
}

void write_wav(const Waveform& w, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open for writing: " + path);
  std::uint32_t n = static_cast<std::uint32_t>(w.samples.size());
  std::uint32_t data_bytes = n * 2;
  os.write("RIFF", 4);
  WriteU32(os, 36 + data_bytes);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  WriteU32(os, 16);
  WriteU16(os, 1);  // PCM
  WriteU16(os, 1);  // mono
  WriteU32(os, static_cast<std::uint32_t>(w.sample_rate));
  WriteU32(os, static_cast<std::uint32_t>(w.sample_rate) * 2);
  WriteU16(os, 2);
  WriteU16(os, 16);
  os.write("data", 4);
  WriteU32(os, data_bytes);
  for (double v : w.samples) {
    // Symmetric to read_wav's 1/32768 scaling; +32768 clamps to 32767.
    long q = std::lround(std::max(-1.0, std::min(1.0, v)) * 32768.0);
    auto s = static_cast<std::int16_t>(std::min(q, 32767L));
    WriteU16(os, static_cast<std::uint16_t>(s));
  }
  if (!os) throw FormatError("write failed: " + path);
}

// ----- Feature files -----

static constexpr char kFeatMagic[4] = {'F', 'C', 'N', 'V'};
static constexpr std::uint32_t kFeatVersion = 1;

void write_features(const Spectrogram& spec, const std::string& path) {
  if (spec.frames() < 1)
    throw DataError("write_features: need at least one frame");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open for writing: " + path);
  os.write(kFeatMagic, 4);
  WriteU32(os, kFeatVersion);
  WriteU32(os, static_cast<std::uint32_t>(spec.frames()));
  WriteU32(os, static_cast<std::uint32_t>(spec.channels()));
  for (long t = 0; t < spec.frames(); ++t) {
    for (long c = 0; c < spec.channels(); ++c) {
      float v = static_cast<float>(spec.values(t, c));
      std::uint32_t bits;
      std::memcpy(&bits, &v, 4);
      WriteU32(os, bits);
    }
  }
  if (!os) throw FormatError("write failed: " + path);
}

Spectrogram read_features(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open feature file: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kFeatMagic, 4) != 0)
    throw FormatError(path + ": bad feature-file magic");
  std::uint32_t version = ReadU32(is);
  if (version != kFeatVersion)
    throw FormatError(path + ": unsupported feature-file version " +
                      std::to_string(version));
  std::uint32_t n_frames = ReadU32(is);
  std::uint32_t n_channels = ReadU32(is);
  if (!is || n_frames < 1 || n_channels < 1)
    throw FormatError(path + ": bad feature-file header");
  Spectrogram spec;
  spec.values.resize(n_frames, n_channels);
  for (std::uint32_t t = 0; t < n_frames; ++t) {
    for (std::uint32_t c = 0; c < n_channels; ++c) {
      std::uint32_t bits = ReadU32(is);
      if (!is) throw FormatError(path + ": payload size mismatch");
      float v;
      std::memcpy(&v, &bits, 4);
      spec.values(t, c) = v;
    }
  }
  return spec;
}

// ----- Manifests -----

std::vector<UtteranceRecord> read_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open manifest: " + path);
  std::vector<UtteranceRecord> records;
  std::set<std::string> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw FormatError(path + ":" + std::to_string(lineno) +
                        ": malformed JSON line: " + e.what());
    }
    UtteranceRecord r;
    try {
      r.id = j.at("id").get<std::string>();
      r.domain = ParseDomain(j.at("domain").get<std::string>());
      r.style = j.contains("style") ? ParseStyle(j["style"].get<std::string>())
                                    : DefaultStyle(r.domain);
      r.wav_path = j.value("wav_path", "");
      r.feat_path = j.value("feat_path", "");
      r.n_frames = j.value("n_frames", 0L);
      if (j.contains("median_f0") && !j["median_f0"].is_null())
        r.median_f0 = j["median_f0"].get<double>();
    } catch (const json::exception& e) {
      throw FormatError(path + ":" + std::to_string(lineno) +
                        ": bad manifest record: " + e.what());
    }
    if (!seen.insert(r.id).second)
      throw DataError(path + ":" + std::to_string(lineno) +
                      ": duplicate utterance id " + r.id);
    records.push_back(std::move(r));
  }
  return records;
}

void write_manifest(const std::vector<UtteranceRecord>& records,
                    const std::string& path) {
  std::ofstream os(path);
  if (!os) throw FormatError("cannot open for writing: " + path);
  for (const auto& r : records) {
    json j;
    j["id"] = r.id;
    j["domain"] = DomainName(r.domain);
    j["style"] = StyleName(r.style);
    j["wav_path"] = r.wav_path;
    j["feat_path"] = r.feat_path;
    j["n_frames"] = r.n_frames;
    if (r.median_f0)
      j["median_f0"] = *r.median_f0;
    os << j.dump() << "\n";
  }
  if (!os) throw FormatError("write failed: " + path);
}

// ----- Synthetic corpus -----

namespace {

// Formant-like spectral envelope. Read and conversational styles use
// different formant positions so the styles are separable from spectra
// alone (C1 and C2 overlap heavily in F0).
double FormantEnvelope(double f, Style style) {
  static const double read_centers[3] = {600.0, 1200.0, 2600.0};
  static const double conv_centers[3] = {500.0, 1500.0, 3200.0};
  const double* centers =
      style == Style::Read ? read_centers : conv_centers;
  double e = 0.0;
  for (int i = 0; i < 3; ++i) {
    double d = (f - centers[i]) / 150.0;
    e += std::exp(-0.5 * d * d);
  }
  return e;
}

Waveform SynthVowel(double f0, double duration_s, Style style,
                    std::mt19937_64& rng) {
  const int sr = 16000;
  const int n = static_cast<int>(duration_s * sr);
  Waveform w;
  w.sample_rate = sr;
  w.samples.resize(n);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI);
  std::normal_distribution<double> noise(0.0, 1.0);

  double amp[8];
  double ph[8];
  amp[0] = 1.0;
  ph[0] = phase(rng);
  for (int h = 1; h < 8; ++h) {
    // Weak upper harmonics so the fundamental dominates the low band.
    amp[h] = 0.6 * FormantEnvelope((h + 1) * f0, style) / (h + 1);
    ph[h] = phase(rng);
  }
  double peak = 0.0;
  for (int i = 0; i < n; ++i) {
    double t = static_cast<double>(i) / sr;
    double v = 0.0;
    for (int h = 0; h < 8; ++h) {
      double fh = (h + 1) * f0;
      if (fh >= sr / 2.0) break;
      v += amp[h] * std::sin(2.0 * M_PI * fh * t + ph[h]);
    }
    v += 1e-4 * noise(rng);  // keeps every mel channel off the log floor
    w.samples[i] = v;
    peak = std::max(peak, std::abs(v));
  }
  for (double& v : w.samples) v *= 0.3 / peak;
  return w;
}

}  // namespace

std::string synth_corpus(std::uint64_t seed, int n_per_domain,
                         const std::string& out_dir) {
  if (n_per_domain < 2)
    throw DataError("synth_corpus: n_per_domain must be >= 2");
  fs::create_directories(fs::path(out_dir) / "wav");

  std::mt19937_64 rng(seed);
  std::vector<UtteranceRecord> records;
  std::ostringstream truth;
  truth << "id,true_f0\n";

  struct DomainSpec {
    Domain domain;
    double f0_lo, f0_hi;
  };
  const DomainSpec specs[3] = {{Domain::A, 110.0, 160.0},
                               {Domain::C1, 250.0, 320.0},
                               {Domain::C2, 230.0, 330.0}};

  for (const auto& ds : specs) {
    std::uniform_real_distribution<double> f0_dist(ds.f0_lo, ds.f0_hi);
    std::uniform_real_distribution<double> dur_dist(0.7, 1.2);
    for (int i = 0; i < n_per_domain; ++i) {
      double f0 = f0_dist(rng);
      double dur = dur_dist(rng);
      UtteranceRecord r;
      r.id = DomainName(ds.domain) + "_" + std::to_string(i);
      r.domain = ds.domain;
      r.style = DefaultStyle(ds.domain);
      Waveform w = SynthVowel(f0, dur, r.style, rng);
      r.wav_path = (fs::path(out_dir) / "wav" / (r.id + ".wav")).string();
      write_wav(w, r.wav_path);
      records.push_back(r);
      truth << r.id << "," << f0 << "\n";
    }
  }

  std::string manifest_path = (fs::path(out_dir) / "manifest.jsonl").string();
  write_manifest(records, manifest_path);
  std::ofstream ts((fs::path(out_dir) / "truth.csv").string());
  ts << truth.str();
  return manifest_path;
}

}  // namespace featshift::corpus
