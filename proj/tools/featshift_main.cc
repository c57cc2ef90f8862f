// featshift command-line driver: synth, extract, stats fit, convert,
// train-dae, train-classifier, eval.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "featshift/corpus_io.h"
#include "featshift/dae.h"
#include "featshift/evalsuite.h"
#include "featshift/melfeat.h"
#include "featshift/pitch.h"
#include "featshift/sigconv.h"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace featshift;

namespace {

int WorkerCount() {
  if (const char* env = std::getenv("FEATSHIFT_THREADS")) {
    int n = std::atoi(env);
    if (n >= 1) return n;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Run fn(i) for i in [0, n) on up to WorkerCount() threads.
template <typename Fn>
void ParallelFor(long n, Fn fn) {
  int workers = std::min<long>(WorkerCount(), n);
  if (workers <= 1) {
    for (long i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> threads;
  std::atomic<long> next{0};
  std::vector<std::exception_ptr> errors(workers);
  for (int w = 0; w < workers; ++w) {
    threads.emplace_back([&, w] {
      try {
        for (long i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// Complete-or-absent file writes: produce into a temp name, then rename.
void WriteFeaturesAtomic(const Spectrogram& spec, const std::string& path) {
  const std::string tmp = path + ".tmp";
  corpus::write_features(spec, tmp);
  fs::rename(tmp, path);
}

std::vector<corpus::UtteranceRecord> FilterDomain(
    const std::vector<corpus::UtteranceRecord>& records,
    corpus::Domain domain) {
  std::vector<corpus::UtteranceRecord> out;
  for (const auto& r : records)
    if (r.domain == domain) out.push_back(r);
  return out;
}

std::vector<Spectrogram> LoadFeatures(
    const std::vector<corpus::UtteranceRecord>& records) {
  std::vector<Spectrogram> out(records.size());
  ParallelFor(static_cast<long>(records.size()), [&](long i) {
    if (records[i].feat_path.empty())
      throw DataError("record " + records[i].id + " has no features");
    out[i] = corpus::read_features(records[i].feat_path);
  });
  return out;
}

// ----- subcommand bodies -----

void RunSynth(std::uint64_t seed, int n, const std::string& out_dir) {
  std::string manifest = corpus::synth_corpus(seed, n, out_dir);
  std::cout << "wrote " << manifest << "\n";
}

void RunExtract(const std::string& manifest_path, const std::string& out_dir) {
  auto records = corpus::read_manifest(manifest_path);
  fs::create_directories(out_dir);
  ParallelFor(static_cast<long>(records.size()), [&](long i) {
    auto& r = records[i];
    Waveform w = corpus::read_wav(r.wav_path);
    Spectrogram spec = mel::extract_logmel(w);
    r.feat_path = (fs::path(out_dir) / (r.id + ".feat")).string();
    WriteFeaturesAtomic(spec, r.feat_path);
    r.n_frames = spec.frames();
    try {
      r.median_f0 = pitch::median_f0(pitch::estimate_f0_track(w));
    } catch (const DataError&) {
      r.median_f0.reset();  // fully unvoiced utterance
    }
  });
  corpus::write_manifest(records, manifest_path);
  std::cout << "extracted " << records.size() << " utterances\n";
}

void RunStatsFit(const std::string& manifest_path, const std::string& domain,
                 const std::string& kind, const std::string& out_path) {
  auto records = corpus::read_manifest(manifest_path);
  if (domain != "all") {
    records = FilterDomain(records, corpus::ParseDomain(domain));
    if (records.empty())
      throw DataError("no records for domain " + domain);
  }
  auto feats = LoadFeatures(records);
  if (kind == "gmvn") {
    mel::save_gmvn(mel::gmvn_fit(feats), out_path);
  } else if (kind == "channel") {
    sigconv::save_channel_stats(sigconv::compute_channel_stats(feats),
                                out_path);
  } else {
    throw CLI::ValidationError("--kind must be channel or gmvn");
  }
  std::cout << "wrote " << out_path << "\n";
}

void RunConvert(const std::string& method, const std::string& manifest_path,
                const std::string& src_domain, const std::string& tgt_domain,
                const std::string& out_dir, const std::string& model_path,
                const std::string& gmvn_path, double target_f0,
                double coral_eps) {
  auto all = corpus::read_manifest(manifest_path);
  auto src = FilterDomain(all, corpus::ParseDomain(src_domain));
  auto tgt = FilterDomain(all, corpus::ParseDomain(tgt_domain));
  if (src.empty()) throw DataError("no records for source domain");
  if (tgt.empty()) throw DataError("no records for target domain");
  fs::create_directories(out_dir);

  auto src_feats = LoadFeatures(src);
  std::vector<Spectrogram> converted(src.size());

  if (method == "stats" || method == "coral") {
    auto tgt_feats = LoadFeatures(tgt);
    auto src_stats = sigconv::compute_channel_stats(src_feats);
    auto tgt_stats = sigconv::compute_channel_stats(tgt_feats);
    ParallelFor(static_cast<long>(src.size()), [&](long i) {
      converted[i] = method == "stats"
                         ? sigconv::stats_convert(src_feats[i], src_stats,
                                                  tgt_stats)
                         : sigconv::coral_convert(src_feats[i], src_stats,
                                                  tgt_stats, coral_eps);
    });
  } else if (method == "f0norm") {
    ParallelFor(static_cast<long>(src.size()), [&](long i) {
      if (!src[i].median_f0)
        throw DataError("record " + src[i].id +
                        " lacks median_f0 (run extract first)");
      converted[i] =
          sigconv::f0norm_convert(src_feats[i], *src[i].median_f0, target_f0);
    });
  } else if (method == "dae") {
    dae::DaeModel model = dae::load_model(model_path);
    mel::GmvnStats gmvn = mel::load_gmvn(gmvn_path);
    dae::DomainEmbedding emb =
        dae::average_speaker_embedding(tgt, model, gmvn);
    // single-threaded: the model's layer caches are shared state
    for (std::size_t i = 0; i < src.size(); ++i)
      converted[i] = dae::convert_utterance(src_feats[i], model, emb, gmvn);
  } else {
    throw CLI::ValidationError("unknown method " + method);
  }

  std::vector<corpus::UtteranceRecord> out_records = src;
  for (std::size_t i = 0; i < src.size(); ++i) {
    auto& r = out_records[i];
    r.feat_path = (fs::path(out_dir) / (r.id + ".feat")).string();
    WriteFeaturesAtomic(converted[i], r.feat_path);
    r.n_frames = converted[i].frames();
    r.wav_path.clear();     // converted features no longer match the audio
    r.median_f0.reset();
  }
  corpus::write_manifest(out_records,
                         (fs::path(out_dir) / "manifest.jsonl").string());
  std::cout << "converted " << src.size() << " utterances (" << method
            << ")\n";
}

void RunTrainDae(const std::string& config_path, const std::string& out_path,
                 const std::string& manifest_override,
                 const std::string& gmvn_override,
                 const std::string& log_override, long steps_override,
                 long seed_override) {
  std::ifstream is(config_path);
  if (!is) throw FormatError("cannot open config: " + config_path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw FormatError(config_path + ": bad json: " + e.what());
  }
  std::string manifest = !manifest_override.empty()
                             ? manifest_override
                             : j.value("manifest", std::string());
  std::string gmvn_path =
      !gmvn_override.empty() ? gmvn_override : j.value("gmvn", std::string());
  std::string log_path =
      !log_override.empty() ? log_override : j.value("log", std::string());
  if (manifest.empty() || gmvn_path.empty())
    throw DataError("train-dae config needs manifest and gmvn paths");

  dae::DaeConfig cfg = j.contains("dae")
                           ? dae::DaeConfig::from_json(j["dae"].dump())
                           : dae::DaeConfig{};
  if (steps_override > 0) cfg.steps = steps_override;
  if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);

  auto records = corpus::read_manifest(manifest);
  mel::GmvnStats gmvn = mel::load_gmvn(gmvn_path);
  if (log_path.empty()) log_path = out_path + ".log.csv";
  dae::DaeModel model = dae::train(records, gmvn, cfg, log_path, out_path);
  dae::save_model(model, out_path);
  std::cout << "wrote " << out_path << " (log: " << log_path << ")\n";
}

void RunTrainClassifier(const std::string& manifest_path,
                        const std::string& out_path, std::uint64_t seed) {
  auto records = corpus::read_manifest(manifest_path);
  eval::ClassifierConfig cfg;
  cfg.seed = seed;
  auto result = eval::train_domain_classifier(records, cfg);
  eval::save_classifier(result.classifier, out_path);
  std::cout << "held-out accuracy: " << result.held_out_accuracy << "\n"
            << "wrote " << out_path << "\n";
}

void RunEval(const std::string& converted_path, const std::string& target_path,
             const std::string& classifier_path, const std::string& out_path,
             const std::string& tgt_domain) {
  auto converted = corpus::read_manifest(converted_path);
  auto target_all = corpus::read_manifest(target_path);
  corpus::Domain target_dom = corpus::ParseDomain(tgt_domain);
  auto target = FilterDomain(target_all, target_dom);
  if (target.empty()) target = target_all;
  if (converted.empty() || target.empty())
    throw DataError("eval: empty converted or target set");

  eval::DomainClassifier clf = eval::load_classifier(classifier_path);
  auto conv_feats = LoadFeatures(converted);

  eval::EvalReport report;
  report.n_utts = static_cast<long>(converted.size());
  report.classified_as_target_pct =
      eval::classified_as_pct(conv_feats, clf, target_dom);
  report.f0_w1_to_target = eval::f0_distance_report(converted, target);
  report.mean_spectrum = eval::mean_spectrum(conv_feats);
  eval::save_report(report, out_path);

  const std::string base =
      (fs::path(out_path).parent_path() / fs::path(out_path).stem()).string();
  eval::export_mean_spectrum_csv(report.mean_spectrum,
                                 base + "_mean_spectrum.csv");
  std::vector<std::string> ids;
  std::vector<double> f0s;
  for (std::size_t i = 0; i < converted.size(); ++i) {
    ids.push_back(converted[i].id);
    f0s.push_back(converted[i].median_f0
                      ? *converted[i].median_f0
                      : eval::feature_f0_proxy(conv_feats[i]));
  }
  eval::export_f0_samples_csv(ids, f0s, base + "_f0.csv");
  std::cout << "classified_as_" << tgt_domain << ": "
            << report.classified_as_target_pct << "%  f0_w1: "
            << report.f0_w1_to_target << " Hz\n"
            << "wrote " << out_path << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adult-to-child acoustic feature conversion toolkit"};
  app.require_subcommand(1);

  // synth
  std::uint64_t synth_seed = 0;
  int synth_n = 10;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus");
  synth->add_option("--seed", synth_seed, "RNG seed");
  synth->add_option("--n", synth_n, "utterances per domain")->required();
  synth->add_option("--out", synth_out, "output directory")->required();

  // extract
  std::string ex_manifest, ex_out;
  auto* extract =
      app.add_subcommand("extract", "Extract log-Mel features and median F0");
  extract->add_option("--manifest", ex_manifest)->required();
  extract->add_option("--out", ex_out, "feature directory")->required();

  // stats fit
  std::string st_manifest, st_domain = "all", st_kind = "channel", st_out;
  auto* stats = app.add_subcommand("stats", "Feature-set statistics");
  auto* fit = stats->add_subcommand("fit", "Fit channel or GMVN statistics");
  fit->add_option("--manifest", st_manifest)->required();
  fit->add_option("--domain", st_domain, "A, C1, C2 or all");
  fit->add_option("--kind", st_kind, "channel or gmvn");
  fit->add_option("--out", st_out)->required();

  // convert
  std::string cv_method, cv_manifest, cv_src = "A", cv_tgt = "C1", cv_out;
  std::string cv_model, cv_gmvn;
  double cv_target_f0 = 270.0, cv_coral_eps = 1e-5;
  auto* convert = app.add_subcommand("convert", "Convert a feature set");
  convert->add_option("--method", cv_method, "stats|coral|f0norm|dae")
      ->required();
  convert->add_option("--manifest", cv_manifest)->required();
  convert->add_option("--src-domain", cv_src);
  convert->add_option("--tgt-domain", cv_tgt);
  convert->add_option("--out", cv_out)->required();
  convert->add_option("--model", cv_model, "DAE checkpoint (method dae)");
  convert->add_option("--gmvn", cv_gmvn, "GMVN stats json (method dae)");
  convert->add_option("--target-f0", cv_target_f0);
  convert->add_option("--coral-eps", cv_coral_eps);

  // train-dae
  std::string td_config, td_out, td_manifest, td_gmvn, td_log;
  long td_steps = 0, td_seed = -1;
  auto* train_dae = app.add_subcommand("train-dae", "Train the DAE model");
  train_dae->add_option("--config", td_config, "pipeline config json")
      ->required();
  train_dae->add_option("--out", td_out, "checkpoint path")->required();
  train_dae->add_option("--manifest", td_manifest, "overrides config");
  train_dae->add_option("--gmvn", td_gmvn, "overrides config");
  train_dae->add_option("--log", td_log, "overrides config");
  train_dae->add_option("--steps", td_steps, "overrides config");
  train_dae->add_option("--seed", td_seed, "overrides config");

  // train-classifier
  std::string tc_manifest, tc_out;
  std::uint64_t tc_seed = 0;
  auto* train_clf =
      app.add_subcommand("train-classifier", "Train the domain classifier");
  train_clf->add_option("--manifest", tc_manifest)->required();
  train_clf->add_option("--out", tc_out)->required();
  train_clf->add_option("--seed", tc_seed);

  // eval
  std::string ev_converted, ev_target, ev_clf, ev_out, ev_tgt_domain = "C1";
  auto* evalc = app.add_subcommand("eval", "Evaluate a converted feature set");
  evalc->add_option("--converted", ev_converted)->required();
  evalc->add_option("--target", ev_target)->required();
  evalc->add_option("--classifier", ev_clf)->required();
  evalc->add_option("--out", ev_out)->required();
  evalc->add_option("--tgt-domain", ev_tgt_domain);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*synth) RunSynth(synth_seed, synth_n, synth_out);
    if (*fit) RunStatsFit(st_manifest, st_domain, st_kind, st_out);
    if (*extract) RunExtract(ex_manifest, ex_out);
    if (*convert) {
      if (cv_method == "dae" && (cv_model.empty() || cv_gmvn.empty())) {
        std::cerr << "convert --method dae requires --model and --gmvn\n";
        return 1;
      }
      RunConvert(cv_method, cv_manifest, cv_src, cv_tgt, cv_out, cv_model,
                 cv_gmvn, cv_target_f0, cv_coral_eps);
    }
    if (*train_dae)
      RunTrainDae(td_config, td_out, td_manifest, td_gmvn, td_log, td_steps,
                  td_seed);
    if (*train_clf) RunTrainClassifier(tc_manifest, tc_out, tc_seed);
    if (*evalc) RunEval(ev_converted, ev_target, ev_clf, ev_out, ev_tgt_domain);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
