// featshift/corpus_io.h
//
// Audio ingestion, dataset manifests, binary feature storage and the
// synthetic two-domain corpus generator used by the hermetic tests.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#ifndef FEATSHIFT_CORPUS_IO_H_
#define FEATSHIFT_CORPUS_IO_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "featshift/common.h"

namespace featshift::corpus {

enum class Domain { A, C1, C2 };
enum class Style { Read, Conversational };

std::string DomainName(Domain d);
Domain ParseDomain(const std::string& s);
std::string StyleName(Style s);
Style ParseStyle(const std::string& s);

// Default style for a domain (A and C1 are read speech, C2 conversational).
Style DefaultStyle(Domain d);

struct UtteranceRecord {
  std::string id;
  Domain domain = Domain::A;
  Style style = Style::Read;
  std::string wav_path;
  std::string feat_path;
  long n_frames = 0;
  std::optional<double> median_f0;  // Hz
};

// --- WAV (16-bit mono PCM only) ---

Waveform read_wav(const std::string& path);
void write_wav(const Waveform& w, const std::string& path);

// --- Binary feature files ---
//
// Layout: magic "FCNV", u32 version = 1, u32 n_frames, u32 n_channels,
// then n_frames*n_channels little-endian float32, frame-major.

void write_features(const Spectrogram& spec, const std::string& path);
Spectrogram read_features(const std::string& path);

// --- JSON-lines manifests ---

std::vector<UtteranceRecord> read_manifest(const std::string& path);
void write_manifest(const std::vector<UtteranceRecord>& records,
                    const std::string& path);

// --- Synthetic corpus ---
//
// Harmonic "vowel" utterances with domain-dependent F0 ranges:
// A ~ U(110, 160) Hz, C1 ~ U(250, 320) Hz, C2 ~ U(230, 330) Hz.
// Deterministic given (seed, n_per_domain). Writes wav files, a manifest
// (manifest.jsonl) and a truth sidecar (truth.csv: id,true_f0) under out_dir.
// Returns the manifest path.
std::string synth_corpus(std::uint64_t seed, int n_per_domain,
                         const std::string& out_dir);

}  // namespace featshift::corpus

#endif  // FEATSHIFT_CORPUS_IO_H_
