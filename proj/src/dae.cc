// featshift/dae.cc
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#include "featshift/dae.h"

#include "featshift/pitch.h"

#include <cmath>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

namespace featshift::dae {

using json = nlohmann::json;
using nn::RowVector;

void DaeConfig::validate() const {
  if (n_mels < 1 || channels < 1 || n_enc_blocks < 1 || n_dec_blocks < 1)
    throw DataError("DaeConfig: all dims must be >= 1");
  if (kernel < 1 || kernel % 2 == 0)
    throw DataError("DaeConfig: kernel must be odd and >= 1");
  if (segment_length < 1 || batch_size < 1 || steps < 1)
    throw DataError("DaeConfig: segment_length/batch_size/steps must be >= 1");
  if (lambda_dat < 0 || lambda_f0 < 0 || lambda_msp < 0 || kl_weight < 0)
    throw DataError("DaeConfig: loss weights must be >= 0");
}

std::string DaeConfig::to_json() const {
  json j;
  j["n_mels"] = n_mels;
  j["channels"] = channels;
  j["content_dim"] = content_dim;
  j["speaker_dim"] = speaker_dim;
  j["n_enc_blocks"] = n_enc_blocks;
  j["n_dec_blocks"] = n_dec_blocks;
  j["kernel"] = kernel;
  j["segment_length"] = segment_length;
  j["batch_size"] = batch_size;
  j["steps"] = steps;
  j["lr"] = lr;
  j["lambda_dat"] = lambda_dat;
  j["lambda_f0"] = lambda_f0;
  j["lambda_msp"] = lambda_msp;
  j["kl_weight"] = kl_weight;
  j["f0_head_location"] = f0_head_location == F0HeadLocation::ContentAdversarial
                              ? "content_adversarial"
                              : "speaker_predictive";
  j["seed"] = seed;
  j["checkpoint_every"] = checkpoint_every;
  return j.dump();
}

DaeConfig DaeConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("DaeConfig: bad json: ") + e.what());
  }
  DaeConfig c;
  c.n_mels = j.value("n_mels", c.n_mels);
  c.channels = j.value("channels", c.channels);
  c.content_dim = j.value("content_dim", c.content_dim);
  c.speaker_dim = j.value("speaker_dim", c.speaker_dim);
  c.n_enc_blocks = j.value("n_enc_blocks", c.n_enc_blocks);
  c.n_dec_blocks = j.value("n_dec_blocks", c.n_dec_blocks);
  c.kernel = j.value("kernel", c.kernel);
  c.segment_length = j.value("segment_length", c.segment_length);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.steps = j.value("steps", c.steps);
  c.lr = j.value("lr", c.lr);
  c.lambda_dat = j.value("lambda_dat", c.lambda_dat);
  c.lambda_f0 = j.value("lambda_f0", c.lambda_f0);
  c.lambda_msp = j.value("lambda_msp", c.lambda_msp);
  c.kl_weight = j.value("kl_weight", c.kl_weight);
  std::string loc = j.value("f0_head_location", "content_adversarial");
  if (loc == "content_adversarial")
    c.f0_head_location = F0HeadLocation::ContentAdversarial;
  else if (loc == "speaker_predictive")
    c.f0_head_location = F0HeadLocation::SpeakerPredictive;
  else
    throw FormatError("DaeConfig: unknown f0_head_location " + loc);
  c.seed = j.value("seed", c.seed);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  c.validate();
  return c;
}

// ----- Mlp -----

void Mlp::init(const std::string& name, int in, int hidden, int out,
               std::mt19937_64& rng) {
  layers.resize(3);
  acts.resize(2);
  layers[0].init(name + ".fc0", in, hidden, rng);
  layers[1].init(name + ".fc1", hidden, hidden, rng);
  layers[2].init(name + ".fc2", hidden, out, rng);
}

Matrix Mlp::forward(const Matrix& x) {
  Matrix h = acts[0].forward(layers[0].forward(x));
  h = acts[1].forward(layers[1].forward(h));
  return layers[2].forward(h);
}

Matrix Mlp::backward(const Matrix& gy) {
  Matrix g = layers[1].backward(acts[1].backward(layers[2].backward(gy)));
  return layers[0].backward(acts[0].backward(g));
}

void Mlp::collect(nn::ParamList& out) {
  for (auto& l : layers) l.collect(out);
}

// ----- DaeModel -----

DaeModel::DaeModel(const DaeConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  std::mt19937_64 rng(cfg_.seed);
  const int ch = cfg_.channels;
  const int cd = cfg_.resolved_content_dim();
  const int sd = cfg_.resolved_speaker_dim();

  ec_convs_.resize(cfg_.n_enc_blocks);
  ec_acts_.resize(cfg_.n_enc_blocks);
  ec_norms_.resize(cfg_.n_enc_blocks);
  int prev = cfg_.n_mels;
  for (int i = 0; i < cfg_.n_enc_blocks; ++i) {
    int out = i == cfg_.n_enc_blocks - 1 ? cd : ch;
    ec_convs_[i].init("ec.conv" + std::to_string(i), cfg_.kernel, prev, out,
                      rng);
    prev = out;
  }
  mu_head_.init("ec.mu", 1, cd, cd, rng);
  logvar_head_.init("ec.logvar", 1, cd, cd, rng);

  es_convs_.resize(cfg_.n_enc_blocks);
  es_acts_.resize(cfg_.n_enc_blocks);
  prev = cfg_.n_mels;
  for (int i = 0; i < cfg_.n_enc_blocks; ++i) {
    es_convs_[i].init("es.conv" + std::to_string(i), cfg_.kernel, prev, ch,
                      rng);
    prev = ch;
  }
  es_proj_.init("es.proj", ch, sd, rng);

  dec_convs_.resize(cfg_.n_dec_blocks);
  dec_acts_.resize(cfg_.n_dec_blocks);
  dec_adains_.resize(cfg_.n_dec_blocks);
  dec_cond_.resize(cfg_.n_dec_blocks);
  prev = cd;
  for (int i = 0; i < cfg_.n_dec_blocks; ++i) {
    dec_convs_[i].init("dec.conv" + std::to_string(i), cfg_.kernel, prev, ch,
                       rng);
    dec_cond_[i].init("dec.cond" + std::to_string(i), sd, 2 * ch, rng);
    // start with gamma ~= 1 so the decoder passes signal at init
    dec_cond_[i].bias.value.block(0, 0, 1, ch).setOnes();
    prev = ch;
  }
  dec_out_.init("dec.out", 1, ch, cfg_.n_mels, rng);

  domain_critic_.init("critic", cd, cd, 3, rng);
  f0_head_.init("f0head",
                cfg_.f0_head_location == F0HeadLocation::ContentAdversarial
                    ? cd
                    : sd,
                cd, 10, rng);
  msp_ = nn::Param("msp.M", 2, sd);
  nn::init_uniform(msp_, std::sqrt(1.0 / sd), rng);
}

nn::ParamList DaeModel::params() {
  nn::ParamList out;
  for (auto& c : ec_convs_) c.collect(out);
  if (cfg_.kl_weight > 0.0) {
    mu_head_.collect(out);
    logvar_head_.collect(out);
  }
  for (auto& c : es_convs_) c.collect(out);
  es_proj_.collect(out);
  for (std::size_t i = 0; i < dec_convs_.size(); ++i) {
    dec_convs_[i].collect(out);
    dec_cond_[i].collect(out);
  }
  dec_out_.collect(out);
  if (cfg_.lambda_dat > 0.0) domain_critic_.collect(out);
  if (cfg_.lambda_f0 > 0.0) f0_head_.collect(out);
  if (cfg_.lambda_msp > 0.0) out.push_back(&msp_);
  return out;
}

DaeModel::ContentOut DaeModel::content_forward(const Matrix& x) {
  Matrix h = x;
  for (int i = 0; i < cfg_.n_enc_blocks; ++i)
    h = ec_norms_[i].forward(ec_acts_[i].forward(ec_convs_[i].forward(h)));
  ContentOut out;
  if (cfg_.kl_weight > 0.0) {
    out.mu = mu_head_.forward(h);
    out.logvar = logvar_head_.forward(h);
    out.zc = out.mu;
  } else {
    out.zc = h;
  }
  return out;
}

void DaeModel::content_backward(const Matrix& gzc, const Matrix* glogvar) {
  Matrix g;
  if (cfg_.kl_weight > 0.0) {
    g = mu_head_.backward(gzc);
    if (glogvar) g += logvar_head_.backward(*glogvar);
  } else {
    g = gzc;
  }
  for (int i = cfg_.n_enc_blocks - 1; i >= 0; --i)
    g = ec_convs_[i].backward(ec_acts_[i].backward(ec_norms_[i].backward(g)));
}

RowVector DaeModel::speaker_forward(const Matrix& x) {
  Matrix h = x;
  for (int i = 0; i < cfg_.n_enc_blocks; ++i)
    h = es_acts_[i].forward(es_convs_[i].forward(h));
  es_T_ = h.rows();
  Matrix pooled = nn::mean_pool_time(h);
  return es_proj_.forward(pooled).row(0);
}

void DaeModel::speaker_backward(const RowVector& gzs) {
  Matrix gpooled = es_proj_.backward(gzs);
  Matrix g = nn::mean_pool_time_backward(gpooled, es_T_);
  for (int i = cfg_.n_enc_blocks - 1; i >= 0; --i)
    g = es_convs_[i].backward(es_acts_[i].backward(g));
}

Matrix DaeModel::decoder_forward(const Matrix& zc, const RowVector& zs) {
  const int ch = cfg_.channels;
  Matrix h = zc;
  for (int i = 0; i < cfg_.n_dec_blocks; ++i) {
    RowVector cond = dec_cond_[i].forward(zs).row(0);
    RowVector gamma = cond.head(ch);
    RowVector beta = cond.tail(ch);
    h = dec_adains_[i].forward(dec_acts_[i].forward(dec_convs_[i].forward(h)),
                               gamma, beta);
  }
  return dec_out_.forward(h);
}

Matrix DaeModel::decoder_backward(const Matrix& gxhat, RowVector* gzs) {
  const int ch = cfg_.channels;
  Matrix g = dec_out_.backward(gxhat);
  for (int i = cfg_.n_dec_blocks - 1; i >= 0; --i) {
    RowVector ggamma, gbeta;
    g = dec_adains_[i].backward(g, &ggamma, &gbeta);
    RowVector gcond(2 * ch);
    gcond.head(ch) = ggamma;
    gcond.tail(ch) = gbeta;
    Matrix gz = dec_cond_[i].backward(gcond);
    if (gzs) *gzs += gz.row(0);
    g = dec_convs_[i].backward(dec_acts_[i].backward(g));
  }
  return g;
}

Matrix DaeModel::encode_content(const Spectrogram& x) {
  if (!x.normalized)
    throw DataError("encode_content: input must be GMVN-normalized");
  if (x.channels() != cfg_.n_mels)
    throw DataError("encode_content: channel-count mismatch");
  return content_forward(x.values).zc;
}

RowVector DaeModel::encode_speaker(const Spectrogram& x) {
  if (!x.normalized)
    throw DataError("encode_speaker: input must be GMVN-normalized");
  if (x.channels() != cfg_.n_mels)
    throw DataError("encode_speaker: channel-count mismatch");
  return speaker_forward(x.values);
}

Spectrogram DaeModel::decode(const Matrix& zc, const RowVector& zs) {
  if (zc.cols() != cfg_.resolved_content_dim())
    throw DataError("decode: content-dim mismatch");
  if (zs.size() != cfg_.resolved_speaker_dim())
    throw DataError("decode: speaker-dim mismatch");
  Spectrogram out;
  out.values = decoder_forward(zc, zs);
  out.normalized = true;
  return out;
}

LossReport DaeModel::loss_and_grad(const std::vector<TrainItem>& batch) {
  if (batch.empty()) throw DataError("train_step: empty batch");
  const double B = static_cast<double>(batch.size());
  const int sd = cfg_.resolved_speaker_dim();
  LossReport rep;

  for (const TrainItem& item : batch) {
    if (item.x.cols() != cfg_.n_mels)
      throw DataError("train_step: segment channel-count mismatch");
    if (cfg_.lambda_f0 > 0.0 && item.f0bin < 0)
      throw DataError("train_step: missing F0 bin with lambda_f0 > 0");

    ContentOut co = content_forward(item.x);
    RowVector zs = speaker_forward(item.x);
    Matrix xhat = decoder_forward(co.zc, zs);

    // reconstruction
    Matrix gxhat;
    rep.rec += nn::l1_loss(xhat, item.x, &gxhat) / B;
    gxhat /= B;

    RowVector gzs = RowVector::Zero(sd);
    Matrix gzc = decoder_backward(gxhat, &gzs);

    Matrix gpool = Matrix::Zero(1, co.zc.cols());
    bool have_gpool = false;

    if (cfg_.lambda_dat > 0.0) {
      Matrix pooled = nn::mean_pool_time(co.zc);
      RowVector logits = domain_critic_.forward(pooled).row(0);
      RowVector gce;
      rep.dat += nn::cross_entropy(logits, item.domain, &gce) / B;
      Matrix gcrit = domain_critic_.backward(gce * (cfg_.lambda_dat / B));
      gpool += nn::grad_reverse_backward(gcrit, 1.0);
      have_gpool = true;
    }
    if (cfg_.lambda_f0 > 0.0) {
      if (cfg_.f0_head_location == F0HeadLocation::ContentAdversarial) {
        Matrix pooled = nn::mean_pool_time(co.zc);
        RowVector logits = f0_head_.forward(pooled).row(0);
        RowVector gce;
        rep.f0 += nn::cross_entropy(logits, item.f0bin, &gce) / B;
        Matrix ghead = f0_head_.backward(gce * (cfg_.lambda_f0 / B));
        gpool += nn::grad_reverse_backward(ghead, 1.0);
        have_gpool = true;
      } else {
        RowVector logits = f0_head_.forward(zs).row(0);
        RowVector gce;
        rep.f0 += nn::cross_entropy(logits, item.f0bin, &gce) / B;
        gzs += f0_head_.backward(gce * (cfg_.lambda_f0 / B)).row(0);
      }
    }
    if (have_gpool)
      gzc += nn::mean_pool_time_backward(gpool, co.zc.rows());

    if (cfg_.lambda_msp > 0.0) {
      Matrix proj = zs * msp_.value.transpose();  // 1 x 2
      Matrix gproj;
      rep.msp += nn::mse_loss(proj, item.attr, &gproj) / B;
      gproj *= cfg_.lambda_msp / B;
      gzs += (gproj * msp_.value).row(0);
      msp_.grad.noalias() += gproj.transpose() * zs;
    }

    Matrix glogvar;
    if (cfg_.kl_weight > 0.0) {
      Matrix gmu;
      rep.kl += nn::kl_std_normal(co.mu, co.logvar, &gmu, &glogvar) / B;
      gzc += gmu * (cfg_.kl_weight / B);
      glogvar *= cfg_.kl_weight / B;
    }

    content_backward(gzc, cfg_.kl_weight > 0.0 ? &glogvar : nullptr);
    speaker_backward(gzs);
  }

  if (cfg_.lambda_msp > 0.0) {
    // orthogonality penalty ||M M^T - I||_F^2, once per step
    Matrix mmt = msp_.value * msp_.value.transpose();
    Matrix dev = mmt - Matrix::Identity(2, 2);
    rep.msp += dev.array().square().sum();
    msp_.grad.noalias() += cfg_.lambda_msp * 4.0 * dev * msp_.value;
  }

  rep.total = rep.rec + cfg_.lambda_dat * rep.dat + cfg_.lambda_f0 * rep.f0 +
              cfg_.lambda_msp * rep.msp + cfg_.kl_weight * rep.kl;
  if (!std::isfinite(rep.total))
    throw DataError("train_step: non-finite loss");
  return rep;
}

LossReport DaeModel::train_step(const std::vector<TrainItem>& batch,
                                nn::Adam& adam) {
  nn::ParamList ps = params();
  nn::zero_grads(ps);
  LossReport rep = loss_and_grad(batch);
  adam.step();
  return rep;
}

// ----- conversion helpers -----

DomainEmbedding average_speaker_embedding(
    const std::vector<corpus::UtteranceRecord>& subset, DaeModel& model,
    const mel::GmvnStats& gmvn) {
  if (subset.empty())
    throw DataError("average_speaker_embedding: empty subset");
  DomainEmbedding emb;
  emb.vector = RowVector::Zero(model.config().resolved_speaker_dim());
  for (const auto& r : subset) {
    Spectrogram feat = corpus::read_features(r.feat_path);
    emb.vector += model.encode_speaker(mel::gmvn_apply(feat, gmvn));
  }
  emb.vector /= static_cast<double>(subset.size());
  emb.n_utts = static_cast<long>(subset.size());
  return emb;
}

Spectrogram convert_utterance(const Spectrogram& x_raw, DaeModel& model,
                              const DomainEmbedding& target,
                              const mel::GmvnStats& gmvn) {
  Spectrogram norm = mel::gmvn_apply(x_raw, gmvn);
  Matrix zc = model.encode_content(norm);
  Spectrogram decoded = model.decode(zc, target.vector);
  return mel::gmvn_invert(decoded, gmvn);
}

// ----- training driver -----

Matrix reflect_pad(const Matrix& x, long min_len) {
  const long T = x.rows();
  if (T >= min_len) return x;
  Matrix out(min_len, x.cols());
  if (T == 1) {
    out = x.replicate(min_len, 1);
    return out;
  }
  const long period = 2 * (T - 1);
  for (long i = 0; i < min_len; ++i) {
    long m = i % period;
    out.row(i) = x.row(m < T ? m : period - m);
  }
  return out;
}

Eigen::RowVector2d domain_style_attr(corpus::Domain domain,
                                     corpus::Style style) {
  Eigen::RowVector2d attr;
  attr << (domain == corpus::Domain::A ? 0.0 : 1.0),
      (style == corpus::Style::Conversational ? 1.0 : 0.0);
  return attr;
}

DaeModel train(const std::vector<corpus::UtteranceRecord>& records,
               const mel::GmvnStats& gmvn, const DaeConfig& cfg,
               const std::string& log_path,
               const std::string& checkpoint_prefix) {
  cfg.validate();
  if (records.empty()) throw DataError("dae::train: empty manifest");

  struct Utt {
    Matrix x;  // normalized, reflect-padded to >= segment_length
    int domain;
    int f0bin;
    Eigen::RowVector2d attr;
  };
  std::vector<Utt> utts;
  for (const auto& r : records) {
    if (r.feat_path.empty())
      throw DataError("dae::train: record " + r.id + " has no features");
    Utt u;
    Spectrogram feat = corpus::read_features(r.feat_path);
    u.x = reflect_pad(mel::gmvn_apply(feat, gmvn).values, cfg.segment_length);
    u.domain = static_cast<int>(r.domain);
    u.f0bin = -1;
    if (r.median_f0) {
      u.f0bin = pitch::f0_bin(*r.median_f0);
    } else if (cfg.lambda_f0 > 0.0) {
      throw DataError("dae::train: record " + r.id +
                      " lacks median_f0 but lambda_f0 > 0");
    }
    u.attr = domain_style_attr(r.domain, r.style);
    utts.push_back(std::move(u));
  }

  DaeModel model(cfg);
  nn::Adam adam(model.params(), {cfg.lr});
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_int_distribution<std::size_t> pick(0, utts.size() - 1);

  std::ofstream log;
  if (!log_path.empty()) {
    log.open(log_path);
    log << "step,loss_total,loss_rec,loss_dat,loss_f0,loss_msp,loss_kl\n";
  }

  for (long step = 1; step <= cfg.steps; ++step) {
    std::vector<TrainItem> batch;
    batch.reserve(cfg.batch_size);
    for (int b = 0; b < cfg.batch_size; ++b) {
      const Utt& u = utts[pick(rng)];
      const long T = u.x.rows();
      long start = 0;
      if (T > cfg.segment_length) {
        std::uniform_int_distribution<long> s(0, T - cfg.segment_length);
        start = s(rng);
      }
      TrainItem item;
      item.x = u.x.middleRows(start, cfg.segment_length);
      item.domain = u.domain;
      item.f0bin = u.f0bin;
      item.attr = u.attr;
      batch.push_back(std::move(item));
    }
    LossReport rep = model.train_step(batch, adam);
    if (log.is_open())
      log << step << "," << rep.total << "," << rep.rec << "," << rep.dat
          << "," << rep.f0 << "," << rep.msp << "," << rep.kl << "\n";
    if (cfg.checkpoint_every > 0 && !checkpoint_prefix.empty() &&
        step % cfg.checkpoint_every == 0)
      save_model(model,
                 checkpoint_prefix + "_step" + std::to_string(step) + ".ckpt");
  }
  return model;
}

// ----- checkpoints -----

namespace {

constexpr char kCkptMagic[4] = {'D', 'A', 'E', 'C'};
constexpr std::uint32_t kCkptVersion = 1;

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

}  // namespace

void save_model(DaeModel& model, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open for writing: " + path);
  os.write(kCkptMagic, 4);
  WriteU32(os, kCkptVersion);
  std::string cfg_json = model.config().to_json();
  WriteU32(os, static_cast<std::uint32_t>(cfg_json.size()));
  os.write(cfg_json.data(), static_cast<std::streamsize>(cfg_json.size()));
  nn::ParamList ps = model.params();
  WriteU32(os, static_cast<std::uint32_t>(ps.size()));
  for (const nn::Param* p : ps) {
    WriteU32(os, static_cast<std::uint32_t>(p->name.size()));
    os.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    WriteU32(os, static_cast<std::uint32_t>(p->value.rows()));
    WriteU32(os, static_cast<std::uint32_t>(p->value.cols()));
    for (long c = 0; c < p->value.cols(); ++c)
      for (long r = 0; r < p->value.rows(); ++r) {
        double v = p->value(r, c);
        os.write(reinterpret_cast<const char*>(&v), 8);
      }
  }
  if (!os) throw FormatError("write failed: " + path);
}

DaeModel load_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open checkpoint: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kCkptMagic, 4) != 0)
    throw FormatError(path + ": bad checkpoint magic");
  std::uint32_t version = ReadU32(is);
  if (version != kCkptVersion)
    throw FormatError(path + ": unsupported checkpoint version " +
                      std::to_string(version));
  std::uint32_t cfg_len = ReadU32(is);
  std::string cfg_json(cfg_len, '\0');
  is.read(cfg_json.data(), cfg_len);
  if (!is) throw FormatError(path + ": truncated checkpoint config");
  DaeModel model(DaeConfig::from_json(cfg_json));
  nn::ParamList ps = model.params();
  std::uint32_t n = ReadU32(is);
  if (n != ps.size())
    throw FormatError(path + ": parameter count mismatch with config");
  for (nn::Param* p : ps) {
    std::uint32_t name_len = ReadU32(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    std::uint32_t rows = ReadU32(is);
    std::uint32_t cols = ReadU32(is);
    if (!is) throw FormatError(path + ": truncated parameter header");
    if (name != p->name || rows != p->value.rows() || cols != p->value.cols())
      throw FormatError(path + ": parameter " + name +
                        " mismatches config (expected " + p->name + ")");
    for (std::uint32_t c = 0; c < cols; ++c)
      for (std::uint32_t r = 0; r < rows; ++r) {
        double v;
        is.read(reinterpret_cast<char*>(&v), 8);
        p->value(r, c) = v;
      }
    if (!is) throw FormatError(path + ": truncated parameter payload");
  }
  return model;
}

}  // namespace featshift::dae
