// murmur: command-line driver for the heart-murmur pipeline.
//
//   murmur synth      --out DIR [--patients N] [--seed S]
//   murmur features   --manifest FILE --out DIR
//   murmur train      --manifest FILE --out DIR
//   murmur infer      --manifest FILE --weights DIR --out DIR
//   murmur cv         --manifest FILE --out DIR [--folds K]
//   murmur quantize   --manifest FILE --weights DIR --out DIR
//   murmur resources  --variant light [--input-shape 1x33x124]
//   murmur uq-report  --manifest FILE --weights DIR --out DIR
//
// Exit status: 0 ok, 1 runtime failure, 2 bad configuration, 3 missing input.

#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "murmur/config.hpp"
#include "murmur/dsp.hpp"
#include "murmur/error.hpp"
#include "murmur/nn/serialize.hpp"
#include "murmur/pipeline.hpp"
#include "murmur/quant.hpp"
#include "murmur/resources.hpp"

namespace fs = std::filesystem;
using namespace murmur;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;
constexpr int kExitMissing = 3;

struct MissingInput : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Config flags are bound to a scratch copy; after parsing, the ones actually
// given on the command line override --config (or the defaults).
class ConfigFlags {
 public:
  void attach(CLI::App* app) {
    app->add_option("--config", config_path_, "JSON config or a report whose first line echoes one");
    add(app, "--n-fft", &PipelineConfig::n_fft, "STFT size (64, 128, 256)");
    add(app, "--psd-thr", &PipelineConfig::psd_thr, "quality gate threshold");
    add(app, "--min-keep", &PipelineConfig::min_keep, "segments kept regardless of the gate");
    add(app, "--window", &PipelineConfig::window_s, "segment length in seconds");
    add(app, "--hop", &PipelineConfig::hop_s, "segment hop in seconds");
    add(app, "--oversample-divisor", &PipelineConfig::oversample_divisor, "hop divisor for Present training data");
    add(app, "--thr", &PipelineConfig::vote_thr, "location vote threshold");
    add(app, "--thr-fallback", &PipelineConfig::fallback_thr, "vote threshold when few segments are confident");
    add(app, "--cs-threshold", &PipelineConfig::cs_threshold, "confidence score needed to keep a segment");
    add(app, "--confident-ratio", &PipelineConfig::confident_ratio, "confident share needed to skip the fallback");
    add(app, "--mcd-passes", &PipelineConfig::mcd_passes, "Monte Carlo dropout passes");
    add(app, "--alpha", &PipelineConfig::alpha, "entropy weight in the confidence score");
    add(app, "--seed", &PipelineConfig::seed, "master seed");
    add(app, "--epochs", &PipelineConfig::epochs, "training epochs");
    add(app, "--batch-size", &PipelineConfig::batch_size, "mini-batch size");
    add(app, "--lr", &PipelineConfig::lr, "AdamW learning rate");
    add(app, "--weight-decay", &PipelineConfig::weight_decay, "AdamW weight decay");
    auto* v = app->add_option("--variant", variant_, "light, baseline or heavy");
    appliers_.push_back({v, [this](PipelineConfig& c) { c.variant = nn::parse_variant(variant_); }});
    auto* s = app->add_flag("--no-selective", no_selective_, "disable Monte Carlo dropout and selective voting");
    appliers_.push_back({s, [this](PipelineConfig& c) { c.selective = !no_selective_; }});
    auto* e = app->add_option("--entropy-mode", entropy_mode_, "entropy_of_mean or mean_of_entropies");
    appliers_.push_back({e, [this](PipelineConfig& c) {
                           if (entropy_mode_ != "entropy_of_mean" && entropy_mode_ != "mean_of_entropies")
                             throw Error(ErrorCode::ConfigError, "unknown entropy mode " + entropy_mode_);
                           c.entropy_mode = entropy_mode_ == "entropy_of_mean" ? EntropyMode::EntropyOfMean
                                                                              : EntropyMode::MeanOfEntropies;
                         }});
    auto* r = app->add_option("--vote-rule", vote_rule_, "share or quotient");
    appliers_.push_back({r, [this](PipelineConfig& c) {
                           if (vote_rule_ != "share" && vote_rule_ != "quotient")
                             throw Error(ErrorCode::ConfigError, "unknown vote rule " + vote_rule_);
                           c.vote_rule = vote_rule_ == "share" ? VoteRule::Share : VoteRule::Quotient;
                         }});
  }

  PipelineConfig resolve() const {
    PipelineConfig c;
    if (!config_path_.empty()) {
      if (!fs::exists(config_path_)) throw MissingInput("config file not found: " + config_path_);
      c = load_config(config_path_);
    }
    for (const auto& [opt, apply] : appliers_)
      if (opt->count() > 0) apply(c);
    validate(c);
    return c;
  }

 private:
  template <class T>
  void add(CLI::App* app, const std::string& name, T PipelineConfig::*field, const std::string& help) {
    auto* opt = app->add_option(name, scratch_.*field, help);
    appliers_.push_back({opt, [this, field](PipelineConfig& c) { c.*field = scratch_.*field; }});
  }

  std::string config_path_;
  PipelineConfig scratch_;
  std::string variant_;
  bool no_selective_ = false;
  std::string entropy_mode_;
  std::string vote_rule_;
  std::vector<std::pair<CLI::Option*, std::function<void(PipelineConfig&)>>> appliers_;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
}

DatasetManifest require_manifest(const std::string& path) {
  if (path.empty() || !fs::exists(path)) throw MissingInput("manifest not found: " + path);
  return load_manifest_file(path);
}

void require_weights(const std::string& dir) {
  if (dir.empty() || !fs::exists(fs::path(dir) / "manifest")) throw MissingInput("weights not found: " + dir);
}

std::vector<PatientRecord> select_split(const DatasetManifest& m, const std::string& split) {
  if (split == "all") return m.entries;
  std::string token = split;
  if (!token.empty()) token[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(token[0])));
  try {
    return m.in_split(parse_split(token));
  } catch (const Error&) {
    throw Error(ErrorCode::ConfigError, "unknown split '" + split + "'");
  }
}

template <class T>
std::vector<T> parse_list(const std::string& text) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      if constexpr (std::is_same_v<T, int>) out.push_back(std::stoi(item));
      else out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw Error(ErrorCode::ConfigError, "bad list entry '" + item + "'");
    }
  }
  if (out.empty()) throw Error(ErrorCode::ConfigError, "empty list");
  return out;
}

InputShape parse_shape(const std::string& text) {
  const auto dims = nn::detail::shape_from_text(text);
  if (dims.size() != 3) throw Error(ErrorCode::ConfigError, "input shape must be CxHxW");
  for (int d : dims)
    if (d <= 0) throw Error(ErrorCode::ConfigError, "input shape must be positive");
  return {dims[0], dims[1], dims[2]};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Heart murmur detection from phonocardiograms"};
  app.require_subcommand(1);

  std::string out_dir, manifest_path, weights_dir, split = "test";
  ConfigFlags flags;

  // synth
  SynthCorpusOptions synth_opts;
  auto* synth = app.add_subcommand("synth", "Write a seeded synthetic corpus (manifest + WAV files)");
  synth->add_option("--out", out_dir, "output directory")->required();
  synth->add_option("--patients", synth_opts.patients, "number of patients");
  synth->add_option("--seed", synth_opts.seed, "corpus seed");
  synth->add_option("--present-fraction", synth_opts.present_fraction, "share of Present patients");
  synth->add_option("--unknown-fraction", synth_opts.unknown_fraction, "share of Unknown patients");
  synth->add_option("--min-duration", synth_opts.min_duration_s, "shortest recording in seconds");
  synth->add_option("--max-duration", synth_opts.max_duration_s, "longest recording in seconds");

  auto* features = app.add_subcommand("features", "Write quality-gated spectrogram caches per recording");
  auto* train = app.add_subcommand("train", "Train a network on the train split");
  auto* infer_cmd = app.add_subcommand("infer", "Patient-level predictions");
  auto* cv = app.add_subcommand("cv", "Patient-level k-fold grid over n_fft and psd_thr");
  auto* quantize = app.add_subcommand("quantize", "int8 post-training quantization");
  auto* uq = app.add_subcommand("uq-report", "Confidence analysis and Known/Unknown comparison");
  for (auto* sub : {features, train, infer_cmd, cv, quantize, uq}) {
    sub->add_option("--manifest", manifest_path, "dataset manifest (TSV)")->required();
    sub->add_option("--out", out_dir, "output directory")->required();
    flags.attach(sub);
  }
  for (auto* sub : {infer_cmd, quantize, uq}) sub->add_option("--weights", weights_dir, "float weights directory")->required();
  infer_cmd->add_option("--split", split, "train, validation, test or all");
  uq->add_option("--split", split, "train, validation, test or all");
  int folds = 5;
  std::string nfft_grid = "64,128,256", psd_grid = "0,0.15,0.3,0.45";
  cv->add_option("--folds", folds, "number of folds");
  cv->add_option("--n-fft-grid", nfft_grid, "comma-separated n_fft values");
  cv->add_option("--psd-grid", psd_grid, "comma-separated psd_thr values");

  auto* resources = app.add_subcommand("resources", "Parameter, MACC and memory report for a variant");
  std::string variant_name = "light", shape_text = "1x33x124", dtype = "float32";
  resources->add_option("--variant", variant_name, "light, baseline or heavy");
  resources->add_option("--input-shape", shape_text, "CxHxW");
  resources->add_option("--dtype", dtype, "float32 or int8");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (synth->parsed()) {
      const auto corpus = synth_corpus(synth_opts);
      write_corpus(corpus, out_dir);
      std::cout << "wrote " << corpus.manifest.entries.size() << " patients, " << corpus.waveforms.size()
                << " recordings to " << out_dir << "\n";
      return 0;
    }

    if (resources->parsed()) {
      const auto variant = nn::parse_variant(variant_name);
      if (dtype != "float32" && dtype != "int8") throw Error(ErrorCode::ConfigError, "dtype must be float32 or int8");
      const auto layers = nn::architecture(variant);
      const auto report = analyze(layers, parse_shape(shape_text), dtype == "int8" ? 1 : 4);
      std::cout << render_report(report, nn::to_string(variant));
      return 0;
    }

    const auto config = flags.resolve();
    const auto manifest = require_manifest(manifest_path);
    fs::create_directories(out_dir);
    const fs::path out(out_dir);
    const auto loader = file_loader();

    if (features->parsed()) {
      std::ostringstream report;
      report << config_header(config) << "patient_id\tlocation\tsegments\tkept\tfile\n";
      for (const auto& p : manifest.entries)
        for (const auto& r : p.recordings) {
          auto w = loader(r);
          if (w.sample_rate_hz != kSampleRateHz) w = resample_linear(w, kSampleRateHz);
          std::vector<Spectrogram> specs;
          for (const auto& s : segment(w, config.window_s, config.hop_s)) specs.push_back(stft_spectrogram(s, config.n_fft));
          const auto q = quality_filter(specs, config.psd_thr, config.min_keep);
          std::vector<Spectrogram> kept;
          for (std::size_t i = 0; i < specs.size(); ++i)
            if (q.kept[i]) kept.push_back(std::move(specs[i]));
          const std::string file = p.patient_id + "_" + std::string(to_string(r.location)) + ".mesf";
          write_text(out / file, encode_feature_cache(kept));
          report << p.patient_id << '\t' << to_string(r.location) << '\t' << specs.size() << '\t' << kept.size()
                 << '\t' << file << '\n';
        }
      write_text(out / "features.tsv", report.str());
      std::cout << "wrote features for " << manifest.entries.size() << " patients to " << out_dir << "\n";
      return 0;
    }

    if (train->parsed()) {
      const auto tr = manifest.in_split(Split::Train);
      const auto va = manifest.in_split(Split::Validation);
      const auto train_f = extract_patients(tr, config, true, loader);
      const auto val_f = extract_patients(va, config, false, loader);
      const auto outcome = train_pipeline(train_f, val_f, config, [](const nn::EpochRecord& e) {
        std::fprintf(stderr, "epoch %d loss %.4f val_f1 %.4f val_acc %.4f\n", e.epoch, e.train_loss, e.val_f1,
                     e.val_accuracy);
      });
      nn::save_network(outcome.fit.network, out / "weights");
      std::ostringstream report;
      report << config_header(config);
      report << "# segments train=" << outcome.train_segments << " validation=" << outcome.val_segments << "\n";
      report << "# best_epoch " << outcome.fit.history.best_epoch << "\n";
      report << "# calibrated_vote_thr " << outcome.calibration.threshold << " f1=" << outcome.calibration.f1
             << (outcome.calibration.warning ? " warning=no-positive-locations" : "") << "\n";
      report << "epoch\ttrain_loss\tval_f1\tval_accuracy\n";
      for (const auto& e : outcome.fit.history.epochs)
        report << e.epoch << '\t' << e.train_loss << '\t' << e.val_f1 << '\t' << e.val_accuracy << '\n';
      write_text(out / "train_report.tsv", report.str());
      std::cout << "best epoch " << outcome.fit.history.best_epoch << ", weights in " << (out / "weights").string() << "\n";
      return 0;
    }

    if (cv->parsed()) {
      const auto n_ffts = parse_list<int>(nfft_grid);
      const auto thrs = parse_list<double>(psd_grid);
      const auto rows = cross_validate(manifest.entries, config, n_ffts, thrs, folds, loader);
      const auto text = render_cv(rows, config);
      write_text(out / "cv_report.tsv", text);
      std::cout << text;
      return 0;
    }

    require_weights(weights_dir);
    const auto net = nn::load_network(weights_dir);

    if (infer_cmd->parsed()) {
      const auto patients = extract_patients(select_split(manifest, split), config, false, loader);
      const auto results = infer(net, patients, config);
      const auto text = render_predictions(results, config);
      write_text(out / "predictions.tsv", text);
      std::cout << text.substr(text.find("\n# metrics") == std::string::npos ? text.size() : text.find("\n# metrics") + 1);
      return 0;
    }

    if (uq->parsed()) {
      auto cfg = config;
      cfg.selective = true;
      const auto patients = extract_patients(select_split(manifest, split), cfg, false, loader);
      const auto results = infer(net, patients, cfg);
      write_text(out / "uq_report.tsv", render_uq_report(results, cfg));
      const auto s = summarize_uq(results, cfg);
      std::cout << "recordings known=" << s.known_ratios.size() << " unknown=" << s.unknown_ratios.size();
      if (s.test_valid) std::cout << " mann_whitney_p=" << s.test.p_two_sided;
      std::cout << "\n";
      return 0;
    }

    if (quantize->parsed()) {
      const auto calib = to_feature_set(extract_patients(manifest.in_split(Split::Train), config, false, loader));
      const auto test = to_feature_set(extract_patients(manifest.in_split(Split::Test), config, false, loader));
      const auto qnet = quantize_network(net, calib);
      save_qnetwork(qnet, out / "weights_int8");
      std::ostringstream report;
      report << config_header(config);
      report << "float_payload_bytes\t" << 4 * net.parameter_count() << "\n";
      report << "int8_payload_bytes\t" << qnet.payload_bytes() << "\n";
      report << "size_ratio\t" << static_cast<double>(4 * net.parameter_count()) / qnet.payload_bytes() << "\n";
      report << "calibration_segments\t" << calib.size() << "\n";
      if (!test.empty()) report << "test_label_agreement\t" << label_agreement(net, qnet, test) << "\n";
      write_text(out / "quant_report.tsv", report.str());
      std::cout << report.str();
      return 0;
    }
  } catch (const MissingInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitMissing;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    if (e.code() == ErrorCode::ConfigError) return kExitConfig;
    if (e.code() == ErrorCode::IoError) return kExitMissing;
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitRuntime;
}
