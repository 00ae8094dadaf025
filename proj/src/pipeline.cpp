#include "murmur/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>

#include "murmur/dsp.hpp"
#include "murmur/error.hpp"
#include "murmur/parallel.hpp"
#include "murmur/random.hpp"

namespace murmur {

namespace {

int as_binary(MurmurLabel l) { return l == MurmurLabel::Present ? 1 : 0; }

// FNV-1a, used to key Monte Carlo dropout seeds by segment identity so results
// do not depend on processing order.
std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

nn::TrainConfig train_config(const PipelineConfig& c) {
  nn::TrainConfig t;
  t.lr = c.lr;
  t.epochs = c.epochs;
  t.batch_size = c.batch_size;
  t.weight_decay = c.weight_decay;
  t.seed = derive_seed(c.seed, 2);
  return t;
}

}  // namespace

WaveformLoader file_loader() {
  return [](const RecordingRef& ref) { return load_recording(ref.path); };
}

WaveformLoader corpus_loader(const SynthCorpus& corpus) {
  auto by_path = std::make_shared<std::map<std::string, const Waveform*>>();
  std::size_t i = 0;
  for (const auto& p : corpus.manifest.entries)
    for (const auto& r : p.recordings) (*by_path)[r.path] = &corpus.waveforms.at(i++);
  return [by_path](const RecordingRef& ref) {
    const auto it = by_path->find(ref.path);
    if (it == by_path->end()) throw Error(ErrorCode::IoError, "no waveform for " + ref.path);
    return *it->second;
  };
}

LocationFeatures extract_location(const Waveform& waveform, const PipelineConfig& config, double hop_s) {
  const Waveform& w = waveform;
  Waveform resampled;
  const Waveform* src = &w;
  if (w.sample_rate_hz != kSampleRateHz) {
    resampled = resample_linear(w, kSampleRateHz);
    src = &resampled;
  }
  LocationFeatures out;
  out.location = w.location;
  const auto segs = segment(*src, config.window_s, hop_s);
  out.total_segments = segs.size();
  if (segs.empty()) return out;
  std::vector<Spectrogram> specs;
  specs.reserve(segs.size());
  for (const auto& s : segs) specs.push_back(stft_spectrogram(s, config.n_fft));
  const auto report = quality_filter(specs, config.psd_thr, config.min_keep);
  out.height = specs[0].freq_bins;
  out.width = specs[0].frames;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (!report.kept[i]) continue;
    out.maps.push_back(network_input(specs[i]));
    out.start_s.push_back(specs[i].start_s);
  }
  return out;
}

std::vector<PatientFeatures> extract_patients(std::span<const PatientRecord> patients, const PipelineConfig& config,
                                              bool oversample, const WaveformLoader& loader) {
  struct Job { std::size_t patient, recording; };
  std::vector<Job> jobs;
  for (std::size_t p = 0; p < patients.size(); ++p)
    for (std::size_t r = 0; r < patients[p].recordings.size(); ++r) jobs.push_back({p, r});

  std::vector<LocationFeatures> locs(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t j) {
    const auto& rec = patients[jobs[j].patient];
    const auto& ref = rec.recordings[jobs[j].recording];
    Waveform w = loader(ref);
    w.patient_id = rec.patient_id;
    w.location = ref.location;
    const bool over = oversample && rec.label == MurmurLabel::Present;
    locs[j] = extract_location(w, config, over ? config.hop_s / config.oversample_divisor : config.hop_s);
  });

  std::vector<PatientFeatures> out(patients.size());
  for (std::size_t p = 0; p < patients.size(); ++p) {
    out[p].patient_id = patients[p].patient_id;
    out[p].label = patients[p].label;
    out[p].split = patients[p].split;
  }
  for (std::size_t j = 0; j < jobs.size(); ++j)
    if (!locs[j].maps.empty()) out[jobs[j].patient].locations.push_back(std::move(locs[j]));
  return out;
}

nn::FeatureSet to_feature_set(std::span<const PatientFeatures> patients) {
  nn::FeatureSet fs;
  for (const auto& p : patients) {
    if (p.label == MurmurLabel::Unknown) continue;
    for (const auto& l : p.locations) {
      if (fs.height == 0) {
        fs.height = l.height;
        fs.width = l.width;
      } else if (fs.height != l.height || fs.width != l.width) {
        throw Error(ErrorCode::ShapeError, "feature maps differ in shape");
      }
      for (const auto& m : l.maps) fs.push(m, as_binary(p.label));
    }
  }
  return fs;
}

TrainOutcome train_pipeline(std::span<const PatientFeatures> train, std::span<const PatientFeatures> val,
                            const PipelineConfig& config, const nn::EpochCallback& on_epoch) {
  const auto train_set = to_feature_set(train);
  const auto val_set = to_feature_set(val);
  auto net = nn::Network::build(config.variant, derive_seed(config.seed, 1));
  TrainOutcome out{nn::fit(std::move(net), train_set, val_set, train_config(config), on_epoch), {},
                   train_set.size(), val_set.size()};

  // Location vote threshold fitted on validation fractions.
  std::vector<double> fractions;
  std::vector<int> truth;
  const auto& trained = out.fit.network;
  for (const auto& p : val) {
    if (p.label == MurmurLabel::Unknown) continue;
    for (const auto& l : p.locations) {
      nn::FeatureSet one;
      one.height = l.height;
      one.width = l.width;
      for (const auto& m : l.maps) one.push(m, 0);
      const auto probs = nn::predict_probs(trained, one);
      int present = 0;
      for (std::size_t i = 0; i < one.size(); ++i) present += nn::predicted_class(probs[2 * i], probs[2 * i + 1]);
      fractions.push_back(static_cast<double>(present) / static_cast<double>(one.size()));
      truth.push_back(as_binary(p.label));
    }
  }
  const auto grid = default_threshold_grid();
  out.calibration = calibrate_threshold(fractions, truth, grid);
  return out;
}

std::vector<PatientResult> infer(const nn::Network& network, std::span<const PatientFeatures> patients,
                                 const PipelineConfig& config) {
  struct Job { std::size_t patient, location; };
  std::vector<Job> jobs;
  for (std::size_t p = 0; p < patients.size(); ++p)
    for (std::size_t l = 0; l < patients[p].locations.size(); ++l) jobs.push_back({p, l});

  const auto policy = config.policy();
  const std::uint64_t mcd_base = derive_seed(config.seed, 3);
  std::vector<LocationResult> results(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t j) {
    const auto& patient = patients[jobs[j].patient];
    const auto& loc = patient.locations[jobs[j].location];
    LocationResult r;
    r.location = loc.location;
    r.segments.resize(loc.maps.size());
    r.start_s = loc.start_s;
    if (config.selective) {
      const std::string key = patient.patient_id + "/" + std::string(to_string(loc.location)) + "/";
      for (std::size_t i = 0; i < loc.maps.size(); ++i) {
        const auto seed = derive_seed(mcd_base, fnv1a(key + std::to_string(i)));
        r.segments[i] = mcd_predict(network, loc.maps[i], loc.height, loc.width, config.mcd_passes, seed,
                                    config.alpha, config.entropy_mode);
      }
    } else {
      nn::FeatureSet fs;
      fs.height = loc.height;
      fs.width = loc.width;
      for (const auto& m : loc.maps) fs.push(m, 0);
      const auto probs = nn::predict_probs(network, fs);
      for (std::size_t i = 0; i < loc.maps.size(); ++i) r.segments[i].deterministic_probs = {probs[2 * i], probs[2 * i + 1]};
    }
    std::vector<int> labels;
    for (const auto& s : r.segments) labels.push_back(s.label());
    r.plain = vote_location(labels, config.vote_thr, config.vote_rule);
    r.selective = config.selective ? vote_location_selective(r.segments, policy, config.vote_thr, config.fallback_thr,
                                                             config.vote_rule)
                                   : r.plain;
    r.plain.location = r.selective.location = loc.location;
    results[j] = std::move(r);
  });

  std::vector<PatientResult> out;
  std::size_t j = 0;
  for (const auto& p : patients) {
    if (p.locations.empty()) continue;
    PatientResult pr;
    pr.patient_id = p.patient_id;
    pr.truth = p.label;
    std::vector<LocationDecision> plain, selective;
    for (std::size_t l = 0; l < p.locations.size(); ++l, ++j) {
      plain.push_back(results[j].plain);
      selective.push_back(results[j].selective);
      pr.locations.push_back(std::move(results[j]));
    }
    pr.plain = predict_patient(std::move(plain), p.patient_id);
    pr.selective = predict_patient(std::move(selective), p.patient_id);
    out.push_back(std::move(pr));
  }
  return out;
}

BinaryMetrics patient_metrics(std::span<const PatientResult> results, bool selective) {
  std::vector<int> preds, truth;
  for (const auto& r : results) {
    if (r.truth == MurmurLabel::Unknown) continue;
    preds.push_back(as_binary(selective ? r.selective.label : r.plain.label));
    truth.push_back(as_binary(r.truth));
  }
  if (truth.empty()) return {};
  return binary_metrics(preds, truth);
}

namespace {

void render_metrics(std::ostringstream& out, const char* name, const BinaryMetrics& m) {
  out << "# metrics " << name << " accuracy=" << fmt(m.accuracy) << " precision=" << fmt(m.precision)
      << " recall=" << fmt(m.recall) << " f1=" << fmt(m.f1) << " tp=" << m.tp << " fp=" << m.fp << " tn=" << m.tn
      << " fn=" << m.fn << "\n";
}

}  // namespace

std::string render_predictions(std::span<const PatientResult> results, const PipelineConfig& config) {
  std::ostringstream out;
  out << config_header(config);
  out << "patient_id\ttruth\tlabel\tlabel_plain\tlocations\n";
  for (const auto& r : results) {
    out << r.patient_id << '\t' << to_string(r.truth) << '\t' << to_string(r.selective.label) << '\t'
        << to_string(r.plain.label) << '\t';
    for (std::size_t i = 0; i < r.selective.locations.size(); ++i) {
      const auto& d = r.selective.locations[i];
      if (i) out << ';';
      out << to_string(d.location) << '=' << fmt(d.present_fraction, 3) << '/' << fmt(d.threshold_used, 2) << '/'
          << fmt(d.confident_ratio, 3);
    }
    out << '\n';
  }
  bool any_known = false;
  for (const auto& r : results) any_known |= r.truth != MurmurLabel::Unknown;
  if (any_known) {
    render_metrics(out, "plain", patient_metrics(results, false));
    if (config.selective) render_metrics(out, "selective", patient_metrics(results, true));
  }
  return out.str();
}

UqSummary summarize_uq(std::span<const PatientResult> results, const PipelineConfig& config) {
  UqSummary s;
  const auto policy = config.policy();
  for (const auto& r : results)
    for (const auto& l : r.locations) {
      if (l.segments.empty() || l.segments[0].n_passes == 0) continue;
      const double ratio = select_confident(l.segments, policy).confident_ratio;
      (r.truth == MurmurLabel::Unknown ? s.unknown_ratios : s.known_ratios).push_back(ratio);
    }
  s.test_valid = !s.known_ratios.empty() && !s.unknown_ratios.empty();
  if (s.test_valid) s.test = mann_whitney_u(s.known_ratios, s.unknown_ratios);
  return s;
}

std::string render_uq_report(std::span<const PatientResult> results, const PipelineConfig& config) {
  std::ostringstream out;
  out << config_header(config);
  out << "# segments\npatient_id\tlocation\tsegment_start_s\ttruth\tp_present\tentropy\tcoherence\tconfidence"
         "\tkept\tcorrect\n";
  std::vector<double> cs;
  std::vector<int> correct;
  std::vector<double> cs_correct, cs_wrong;
  for (const auto& r : results)
    for (const auto& l : r.locations)
      for (std::size_t i = 0; i < l.segments.size(); ++i) {
        const auto& s = l.segments[i];
        const bool known = r.truth != MurmurLabel::Unknown;
        const bool ok = known && s.label() == as_binary(r.truth);
        out << r.patient_id << '\t' << to_string(l.location) << '\t' << fmt(l.start_s[i], 2) << '\t'
            << to_string(r.truth) << '\t' << fmt(s.deterministic_probs[1]) << '\t' << fmt(s.entropy) << '\t'
            << fmt(s.coherence) << '\t' << fmt(s.confidence) << '\t' << (s.confidence >= config.cs_threshold)
            << '\t' << (known ? (ok ? "1" : "0") : "NA") << '\n';
        if (known) {
          cs.push_back(s.confidence);
          correct.push_back(ok);
          (ok ? cs_correct : cs_wrong).push_back(s.confidence);
        }
      }

  std::vector<double> grid;
  for (int i = 0; i <= 20; ++i) grid.push_back(i * 0.05);
  out << "# threshold_sweep\nthreshold\tkept\tkept_fraction\tkept_accuracy\tcorrect_kept\twrong_kept\n";
  for (const auto& row : threshold_sweep(cs, correct, grid))
    out << fmt(row.threshold, 2) << '\t' << row.kept << '\t' << fmt(row.kept_fraction) << '\t'
        << fmt(row.kept_accuracy) << '\t' << row.correct_kept << '\t' << row.wrong_kept << '\n';

  constexpr int kBins = 20;
  const auto hc = histogram01(cs_correct, kBins);
  const auto hw = histogram01(cs_wrong, kBins);
  out << "# confidence_histogram\nbin_lo\tbin_hi\tcorrect\tmisclassified\n";
  for (int b = 0; b < kBins; ++b)
    out << fmt(b / static_cast<double>(kBins), 2) << '\t' << fmt((b + 1) / static_cast<double>(kBins), 2) << '\t'
        << hc[b] << '\t' << hw[b] << '\n';

  const auto s = summarize_uq(results, config);
  out << "# confident_ratio\ngroup\trecordings\tmean\tstd\n";
  const auto known = mean_std(s.known_ratios), unknown = mean_std(s.unknown_ratios);
  out << "Known\t" << s.known_ratios.size() << '\t' << fmt(known.mean) << '\t' << fmt(known.std) << '\n';
  out << "Unknown\t" << s.unknown_ratios.size() << '\t' << fmt(unknown.mean) << '\t' << fmt(unknown.std) << '\n';
  if (s.test_valid)
    out << "# mann_whitney u=" << fmt(s.test.u, 1) << " p=" << fmt(s.test.p_two_sided, 6)
        << (s.test.exact ? " exact" : " normal") << '\n';
  else
    out << "# mann_whitney skipped: need Known and Unknown recordings\n";
  return out.str();
}

std::vector<CvRow> cross_validate(std::span<const PatientRecord> patients, const PipelineConfig& config,
                                  std::span<const int> n_ffts, std::span<const double> psd_thrs, int k,
                                  const WaveformLoader& loader) {
  std::vector<PatientRecord> known;
  for (const auto& p : patients)
    if (p.label != MurmurLabel::Unknown) known.push_back(p);
  std::vector<std::string> ids;
  for (const auto& p : known) ids.push_back(p.patient_id);
  const auto folds = patient_kfold(ids, k, derive_seed(config.seed, 4));

  std::vector<CvRow> rows;
  for (int n_fft : n_ffts)
    for (double thr : psd_thrs) {
      PipelineConfig c = config;
      c.n_fft = n_fft;
      c.psd_thr = thr;
      validate(c);
      const auto plain = extract_patients(known, c, false, loader);
      const auto over = extract_patients(known, c, true, loader);
      CvRow row{n_fft, thr, {}, {}, {}};
      std::vector<double> acc, f1;
      for (int f = 0; f < k; ++f) {
        const int val_fold = (f + 1) % k;
        std::vector<PatientFeatures> train, val, test;
        for (std::size_t i = 0; i < known.size(); ++i) {
          const int fi = folds.fold_of.at(known[i].patient_id);
          if (fi == f) test.push_back(plain[i]);
          else if (fi == val_fold) val.push_back(plain[i]);
          else train.push_back(over[i]);
        }
        c.seed = derive_seed(config.seed, 100 + static_cast<std::uint64_t>(f));
        const auto outcome = train_pipeline(train, val, c);
        const auto test_set = to_feature_set(test);
        const auto probs = nn::predict_probs(outcome.fit.network, test_set);
        std::vector<int> preds(test_set.size());
        for (std::size_t i = 0; i < preds.size(); ++i) preds[i] = nn::predicted_class(probs[2 * i], probs[2 * i + 1]);
        row.folds.push_back(binary_metrics(preds, test_set.labels));
        acc.push_back(row.folds.back().accuracy);
        f1.push_back(row.folds.back().f1);
      }
      row.accuracy = mean_std(acc);
      row.f1 = mean_std(f1);
      rows.push_back(std::move(row));
    }
  return rows;
}

std::string render_cv(std::span<const CvRow> rows, const PipelineConfig& config) {
  std::ostringstream out;
  out << config_header(config);
  out << "n_fft\tpsd_thr\tfold\taccuracy\tf1\n";
  for (const auto& r : rows) {
    for (std::size_t f = 0; f < r.folds.size(); ++f)
      out << r.n_fft << '\t' << fmt(r.psd_thr, 2) << '\t' << f << '\t' << fmt(r.folds[f].accuracy) << '\t'
          << fmt(r.folds[f].f1) << '\n';
    out << r.n_fft << '\t' << fmt(r.psd_thr, 2) << "\tmean\t" << fmt(r.accuracy.mean) << '\t' << fmt(r.f1.mean)
        << '\n';
    out << r.n_fft << '\t' << fmt(r.psd_thr, 2) << "\tstd\t" << fmt(r.accuracy.std) << '\t' << fmt(r.f1.std) << '\n';
  }
  return out.str();
}

double label_agreement(const nn::Network& network, const QNetwork& qnet, const nn::FeatureSet& features) {
  if (features.empty()) throw Error(ErrorCode::EmptyDataset, "no samples to compare");
  const auto probs = nn::predict_probs(network, features);
  std::vector<int> same(features.size());
  parallel_for(features.size(), [&](std::size_t i) {
    const auto q = qforward(qnet, features.sample(i), features.height, features.width);
    same[i] = (q[1] > q[0]) == (nn::predicted_class(probs[2 * i], probs[2 * i + 1]) == 1);
  });
  return static_cast<double>(std::count(same.begin(), same.end(), 1)) / static_cast<double>(same.size());
}

}  // namespace murmur
