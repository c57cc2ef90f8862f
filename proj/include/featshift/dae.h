// featshift/dae.h
//
// Disentanglement-based auto-encoder: content/speaker encoders, AdaIN
// decoder, domain critic, F0 classifier, MSP projection, the training
// loop and speaker-embedding based conversion.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#ifndef FEATSHIFT_DAE_H_
#define FEATSHIFT_DAE_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "featshift/corpus_io.h"
#include "featshift/melfeat.h"
#include "featshift/nncore.h"

namespace featshift::dae {

enum class F0HeadLocation { ContentAdversarial, SpeakerPredictive };

struct DaeConfig {
  int n_mels = 80;
  int channels = 64;       // 512 for full-scale training
  int content_dim = 0;     // 0 = channels
  int speaker_dim = 0;     // 0 = channels
  int n_enc_blocks = 3;
  int n_dec_blocks = 3;
  int kernel = 5;
  int segment_length = 128;
  int batch_size = 16;     // 128 for full-scale training
  long steps = 2000;       // 100k for full-scale training
  double lr = 0.0005;
  double lambda_dat = 1.0;
  double lambda_f0 = 1.0;
  double lambda_msp = 1.0;
  double kl_weight = 0.0;  // variational regularization off by default
  F0HeadLocation f0_head_location = F0HeadLocation::ContentAdversarial;
  std::uint64_t seed = 0;
  long checkpoint_every = 0;  // 0 = no intermediate checkpoints

  int resolved_content_dim() const {
    return content_dim > 0 ? content_dim : channels;
  }
  int resolved_speaker_dim() const {
    return speaker_dim > 0 ? speaker_dim : channels;
  }
  void validate() const;

  std::string to_json() const;
  static DaeConfig from_json(const std::string& json_text);
};

// Three stacked FC layers with LeakyReLU between them.
struct Mlp {
  std::vector<nn::Linear> layers;
  std::vector<nn::LeakyReLU> acts;

  void init(const std::string& name, int in, int hidden, int out,
            std::mt19937_64& rng);
  Matrix forward(const Matrix& x);
  Matrix backward(const Matrix& gy);
  void collect(nn::ParamList& out);
};

struct LossReport {
  double total = 0.0;
  double rec = 0.0;
  double dat = 0.0;
  double f0 = 0.0;
  double msp = 0.0;
  double kl = 0.0;
};

// One training item: a normalized segment with its labels.
struct TrainItem {
  Matrix x;                // segment_length x n_mels, GMVN-normalized
  int domain = 0;          // 0=A, 1=C1, 2=C2
  int f0bin = -1;          // -1 when unavailable
  Eigen::RowVector2d attr; // (adult/child, read/conversational)
};

class DaeModel {
 public:
  explicit DaeModel(const DaeConfig& cfg);

  const DaeConfig& config() const { return cfg_; }
  nn::ParamList params();

  // Inference-only passes (input must be GMVN-normalized).
  Matrix encode_content(const Spectrogram& x);
  nn::RowVector encode_speaker(const Spectrogram& x);
  Spectrogram decode(const Matrix& zc, const nn::RowVector& zs);

  // Forward + backward over one batch, one Adam step.
  LossReport train_step(const std::vector<TrainItem>& batch, nn::Adam& adam);

  // Forward + backward only, no optimizer update (used by gradient checks).
  LossReport loss_and_grad(const std::vector<TrainItem>& batch);

 private:
  struct ContentOut {
    Matrix zc;
    Matrix mu, logvar;  // only filled when kl_weight > 0
  };
  ContentOut content_forward(const Matrix& x);
  void content_backward(const Matrix& gzc, const Matrix* glogvar);
  nn::RowVector speaker_forward(const Matrix& x);
  void speaker_backward(const nn::RowVector& gzs);
  Matrix decoder_forward(const Matrix& zc, const nn::RowVector& zs);
  // Returns gzc; accumulates the conditioning path's gradient into *gzs.
  Matrix decoder_backward(const Matrix& gxhat, nn::RowVector* gzs);

  DaeConfig cfg_;

  // content encoder
  std::vector<nn::Conv1dSame> ec_convs_;
  std::vector<nn::LeakyReLU> ec_acts_;
  std::vector<nn::InstanceNorm> ec_norms_;
  nn::Conv1dSame mu_head_, logvar_head_;  // 1x1 convs, used when kl on

  // speaker encoder
  std::vector<nn::Conv1dSame> es_convs_;
  std::vector<nn::LeakyReLU> es_acts_;
  nn::Linear es_proj_;
  long es_T_ = 0;

  // decoder
  std::vector<nn::Conv1dSame> dec_convs_;
  std::vector<nn::LeakyReLU> dec_acts_;
  std::vector<nn::AdaIn> dec_adains_;
  std::vector<nn::Linear> dec_cond_;  // zs -> (gamma, beta) per block
  nn::Conv1dSame dec_out_;

  // auxiliary heads
  Mlp domain_critic_;
  Mlp f0_head_;
  nn::Param msp_;  // 2 x speaker_dim

  friend void save_model(DaeModel& model, const std::string& path);
  friend DaeModel load_model(const std::string& path);
};

struct DomainEmbedding {
  nn::RowVector vector;
  std::string source;
  long n_utts = 0;
};

// Arithmetic mean of encode_speaker over the subset's feature files.
DomainEmbedding average_speaker_embedding(
    const std::vector<corpus::UtteranceRecord>& subset, DaeModel& model,
    const mel::GmvnStats& gmvn);

// gmvn_apply -> E_c -> decode with the target embedding -> gmvn_invert.
Spectrogram convert_utterance(const Spectrogram& x_raw, DaeModel& model,
                              const DomainEmbedding& target,
                              const mel::GmvnStats& gmvn);

// Full training driver over extracted features. Writes a CSV log
// (step, loss_total, loss_rec, loss_dat, loss_f0, loss_msp, loss_kl)
// when log_path is non-empty, and intermediate checkpoints to
// <checkpoint_prefix>_step<k>.ckpt when cfg.checkpoint_every > 0.
DaeModel train(const std::vector<corpus::UtteranceRecord>& records,
               const mel::GmvnStats& gmvn, const DaeConfig& cfg,
               const std::string& log_path = "",
               const std::string& checkpoint_prefix = "");

void save_model(DaeModel& model, const std::string& path);
DaeModel load_model(const std::string& path);

// Reflect-pad a feature matrix along time to at least min_len rows.
Matrix reflect_pad(const Matrix& x, long min_len);

// Attribute target for the MSP head: (adult/child, read/conversational).
Eigen::RowVector2d domain_style_attr(corpus::Domain domain,
                                     corpus::Style style);

}  // namespace featshift::dae

#endif  // FEATSHIFT_DAE_H_
